#pragma once
//
// Reference solvers for u_tt - a(x,t) u_xx = f on [0,1]^2 with homogeneous
// Dirichlet walls and zero initial data: the exact constant-speed Green's
// function (odd images), characteristic tracing, and finite-difference
// solvers tabulated into oracles.
//

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hypergreen/error.hpp"
#include "hypergreen/grid.hpp"
#include "hypergreen/oracle.hpp"
#include "hypergreen/parallel.hpp"

namespace hypergreen {

/// Constant-speed wave operator u_tt - c^2 u_xx.
struct WaveSpec {
  double c = 2.0;
  int images = 0;  // 0 selects ceil(c) + 1

  int image_count() const { return images > 0 ? images : static_cast<int>(std::ceil(c)) + 1; }
};

inline void validate(const WaveSpec& spec) {
  require(spec.c > 0.0 && std::isfinite(spec.c), ErrorKind::Config, "wave speed must be positive");
  require(spec.images == 0 || spec.images >= static_cast<int>(std::ceil(spec.c)) + 1, ErrorKind::Config,
          "image count must be at least ceil(c) + 1");
}

/// G(x,t; y,s) by odd images across x = 0 and x = 1. Points on a cone
/// boundary get half weight; G = 0 for t <= s.
inline double exact_wave_green_value(const WaveSpec& spec, double x, double t, double y, double s) {
  if (t <= s) return 0.0;
  const double tau = spec.c * (t - s);
  auto step = [tau](double d) {
    const double a = std::abs(d);
    return a < tau ? 1.0 : (a == tau ? 0.5 : 0.0);
  };
  const int n_img = spec.image_count();
  double sum = 0.0;
  for (int n = -n_img; n <= n_img; ++n) sum += step(x - y - 2.0 * n) - step(x + y - 2.0 * n);
  return sum / (2.0 * spec.c);
}

inline Eigen::MatrixXd exact_wave_kernel_matrix(const WaveSpec& spec, const Grid2D& grid) {
  validate(spec);
  return tabulate_kernel(grid, [&](double x, double t, double y, double s) {
    return exact_wave_green_value(spec, x, t, y, s);
  });
}

inline OraclePtr make_exact_wave_oracle(const WaveSpec& spec, GridPtr grid) {
  Eigen::MatrixXd k = exact_wave_kernel_matrix(spec, *grid);
  return std::make_shared<KernelMatrixOracle>(std::move(grid), std::move(k));
}

// ---------------------------------------------------------------------------
// Characteristics

using Coefficient = std::function<double(double, double)>;

inline Coefficient constant_coefficient(double a) {
  return [a](double, double) { return a; };
}

/// a(x,t) = ((x+1)^2 + 1) / (t+1).
inline Coefficient example_coefficient() {
  return [](double x, double t) { return ((x + 1.0) * (x + 1.0) + 1.0) / (t + 1.0); };
}

struct CharacteristicPath {
  double x0 = 0.0, t0 = 0.0;
  int initial_sign = 1;                                // +1: moves right first
  std::vector<std::vector<std::array<double, 2>>> segments;  // (x, t) samples, t increasing
  std::vector<double> reflection_times;
};

namespace detail {

inline double speed(const Coefficient& a, double x, double t) {
  const double v = a(x, t);
  require(v > 0.0 && std::isfinite(v), ErrorKind::Hyperbolicity,
          "coefficient a(" + std::to_string(x) + ", " + std::to_string(t) + ") = " + std::to_string(v) +
              " is not positive");
  return std::sqrt(v);
}

inline double rk4_step(const Coefficient& a, double sign, double x, double t, double h) {
  const double k1 = sign * speed(a, x, t);
  const double k2 = sign * speed(a, std::clamp(x + 0.5 * h * k1, 0.0, 1.0), t + 0.5 * h);
  const double k3 = sign * speed(a, std::clamp(x + 0.5 * h * k2, 0.0, 1.0), t + 0.5 * h);
  const double k4 = sign * speed(a, std::clamp(x + h * k3, 0.0, 1.0), t + h);
  return x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
}

inline CharacteristicPath trace_one(const Coefficient& a, double x0, double t0, double step, int sign) {
  CharacteristicPath path;
  path.x0 = x0;
  path.t0 = t0;
  path.initial_sign = sign;
  double x = x0, t = t0;
  double sg = sign;
  std::vector<std::array<double, 2>> seg{{x, t}};
  while (t < 1.0) {
    const double h = std::min(step, 1.0 - t);
    double xn = rk4_step(a, sg, x, t, h);
    if (xn >= 0.0 && xn <= 1.0 && !((x == 0.0 && sg < 0) || (x == 1.0 && sg > 0))) {
      x = xn;
      t = (h == 1.0 - t) ? 1.0 : t + h;
      seg.push_back({x, t});
      continue;
    }
    // Locate the wall crossing within this step.
    const double wall = sg > 0 ? 1.0 : 0.0;
    double lo = 0.0, hi = h;
    if (x == wall) hi = 0.0;
    for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double xm = rk4_step(a, sg, x, t, mid);
      if ((sg > 0 && xm < 1.0) || (sg < 0 && xm > 0.0))
        lo = mid;
      else
        hi = mid;
    }
    t += hi;
    x = wall;
    seg.push_back({x, t});
    path.reflection_times.push_back(t);
    path.segments.push_back(std::move(seg));
    seg = {{x, t}};
    sg = -sg;
  }
  if (seg.size() > 1) path.segments.push_back(std::move(seg));
  return path;
}

}  // namespace detail

/// The two reflecting characteristics through (x0, t0), integrated forward to
/// t = 1 with classical RK4. first: starts moving right; second: moving left.
inline std::pair<CharacteristicPath, CharacteristicPath> trace_characteristics(const Coefficient& a, double x0,
                                                                               double t0, double step) {
  require(step > 0.0, ErrorKind::Config, "characteristic step must be positive");
  require(x0 >= 0.0 && x0 <= 1.0 && t0 >= 0.0 && t0 <= 1.0, ErrorKind::Domain, "start point outside [0,1]^2");
  detail::speed(a, x0, t0);
  return {detail::trace_one(a, x0, t0, step, +1), detail::trace_one(a, x0, t0, step, -1)};
}

/// Position of a path at time t (linear between samples); NaN before t0.
inline double path_position(const CharacteristicPath& p, double t) {
  if (t < p.t0) return std::numeric_limits<double>::quiet_NaN();
  for (const auto& seg : p.segments) {
    if (t > seg.back()[1]) continue;
    auto it = std::lower_bound(seg.begin(), seg.end(), t, [](const auto& q, double v) { return q[1] < v; });
    if (it == seg.begin()) return (*it)[0];
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double th = (t - a[1]) / (b[1] - a[1]);
    return a[0] + th * (b[0] - a[0]);
  }
  return p.segments.empty() ? p.x0 : p.segments.back().back()[0];
}

/// Sampled characteristic bundle Z: points (x, t, y, s) on both reflecting
/// characteristics from each seed (y, s).
struct CharacteristicBundle {
  struct Seed {
    double y = 0.0, s = 0.0;
    std::vector<std::array<double, 2>> points;  // (x, t), sorted by t
  };
  std::vector<Seed> seeds;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& sd : seeds) n += sd.points.size();
    return n;
  }
};

inline CharacteristicBundle sample_characteristics(const Coefficient& a, int lattice = 17, double step = 1.0 / 512) {
  require(lattice >= 2, ErrorKind::Config, "seed lattice needs at least 2 points per side");
  CharacteristicBundle z;
  for (int i = 0; i < lattice; ++i) {
    for (int j = 0; j < lattice; ++j) {
      CharacteristicBundle::Seed sd;
      sd.y = static_cast<double>(i) / (lattice - 1);
      sd.s = static_cast<double>(j) / (lattice - 1);
      auto [p, m] = trace_characteristics(a, sd.y, sd.s, step);
      for (const auto* path : {&p, &m})
        for (const auto& seg : path->segments) sd.points.insert(sd.points.end(), seg.begin(), seg.end());
      std::stable_sort(sd.points.begin(), sd.points.end(), [](const auto& u, const auto& v) { return u[1] < v[1]; });
      z.seeds.push_back(std::move(sd));
    }
  }
  return z;
}

inline CharacteristicBundle sample_characteristics(const WaveSpec& spec, int lattice = 17, double step = 1.0 / 512) {
  return sample_characteristics(constant_coefficient(spec.c * spec.c), lattice, step);
}

namespace detail {

inline double interval_distance(double v, double lo, double hi) {
  return v < lo ? lo - v : (v > hi ? v - hi : 0.0);
}

}  // namespace detail

/// Sup-norm distance from a 4D box (x, t, y, s) to the sampled bundle.
inline double tube_distance(const CharacteristicBundle& z, const std::array<double, 4>& lo,
                            const std::array<double, 4>& hi) {
  require(z.size() > 0, ErrorKind::Config, "empty characteristic sample");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& sd : z.seeds) {
    const double dys = std::max(detail::interval_distance(sd.y, lo[2], hi[2]),
                                detail::interval_distance(sd.s, lo[3], hi[3]));
    if (dys >= best) continue;
    // Only samples with |t - [t_lo, t_hi]| < best can improve.
    auto first = std::lower_bound(sd.points.begin(), sd.points.end(), lo[1] - best,
                                  [](const auto& q, double v) { return q[1] < v; });
    for (auto it = first; it != sd.points.end() && (*it)[1] <= hi[1] + best; ++it) {
      const double d = std::max({dys, detail::interval_distance((*it)[0], lo[0], hi[0]),
                                 detail::interval_distance((*it)[1], lo[1], hi[1])});
      best = std::min(best, d);
      if (best == 0.0) return 0.0;
    }
  }
  return best;
}

inline double tube_distance(const CharacteristicBundle& z, const SubdomainBox& box) {
  std::array<double, 4> lo{}, hi{};
  for (int d = 0; d < 4; ++d) {
    lo[static_cast<std::size_t>(d)] = box.interval(d).lo();
    hi[static_cast<std::size_t>(d)] = box.interval(d).hi();
  }
  return tube_distance(z, lo, hi);
}

/// Sup-norm distance from a point (x, t) on the slice (y, s) to the bundle
/// restricted to that slice's own characteristics, traced exactly.
inline double slice_tube_distance(const CharacteristicPath& p, const CharacteristicPath& m, double x, double t) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto* path : {&p, &m})
    for (const auto& seg : path->segments)
      for (const auto& q : seg) best = std::min(best, std::max(std::abs(q[0] - x), std::abs(q[1] - t)));
  return best;
}

// ---------------------------------------------------------------------------
// Finite differences

enum class FdScheme { Upwind1, Ctcs2 };

inline const char* to_string(FdScheme s) { return s == FdScheme::Upwind1 ? "upwind1" : "ctcs2"; }

struct FdOptions {
  int nx = 512;       // spatial intervals
  int nt = 512;       // minimum number of time steps
  double cfl = 0.9;   // Courant number max sqrt(a) dt / dx
};

namespace detail {

// 4-point Lagrange stencil on a uniform grid 0..n (spacing h) at v.
inline void cubic_stencil(double v, int n, double h, int& i0, std::array<double, 4>& c) {
  const double u = v / h;
  i0 = std::clamp(static_cast<int>(std::floor(u)) - 1, 0, n - 3);
  for (int a = 0; a < 4; ++a) {
    double l = 1.0;
    for (int b = 0; b < 4; ++b)
      if (b != a) l *= (u - (i0 + b)) / static_cast<double>(a - b);
    c[static_cast<std::size_t>(a)] = l;
  }
}

struct FdLayout {
  int nx = 0;
  int steps = 0;
  double dx = 0.0, dt = 0.0;
  double cmax = 0.0;
};

inline FdLayout fd_layout(const Coefficient& a, const FdOptions& o) {
  require(o.nx >= 16 && o.nt >= 16, ErrorKind::Config, "finite-difference grids need nx, nt >= 16");
  require(o.cfl > 0.0 && o.cfl <= 1.0, ErrorKind::Stability,
          "Courant number " + std::to_string(o.cfl) + " violates the CFL condition (must be in (0, 1])");
  FdLayout l;
  l.nx = o.nx;
  l.dx = 1.0 / o.nx;
  for (int i = 0; i <= o.nx; ++i)
    for (int n = 0; n <= o.nt; ++n) l.cmax = std::max(l.cmax, speed(a, i * l.dx, static_cast<double>(n) / o.nt));
  l.steps = std::max(o.nt, static_cast<int>(std::ceil(l.cmax / (o.cfl * l.dx) - 1e-9)));
  l.dt = 1.0 / l.steps;
  return l;
}

// Samples a time-stepped solution at the quadrature nodes of `grid` with
// cubic interpolation in x and t.
class FdSampler {
 public:
  FdSampler(const Grid2D& grid, const FdLayout& l) : grid_(grid), out_(Eigen::VectorXd::Zero(grid.size())) {
    const Index nx = grid.nx(), nt = grid.nt();
    xi0_.resize(static_cast<std::size_t>(nx));
    xc_.resize(static_cast<std::size_t>(nx));
    for (Index i = 0; i < nx; ++i)
      cubic_stencil(grid.gx.nodes[static_cast<std::size_t>(i)], l.nx, l.dx, xi0_[static_cast<std::size_t>(i)],
                    xc_[static_cast<std::size_t>(i)]);
    by_step_.assign(static_cast<std::size_t>(l.steps + 1), {});
    for (Index j = 0; j < nt; ++j) {
      int n0;
      std::array<double, 4> c;
      cubic_stencil(grid.gt.nodes[static_cast<std::size_t>(j)], l.steps, l.dt, n0, c);
      for (int b = 0; b < 4; ++b) by_step_[static_cast<std::size_t>(n0 + b)].push_back({j, c[static_cast<std::size_t>(b)]});
    }
  }

  void reset() { out_.setZero(); }

  void record(int n, const std::vector<double>& u) {
    const auto& hits = by_step_[static_cast<std::size_t>(n)];
    if (hits.empty()) return;
    const Index nt = grid_.nt();
    for (Index i = 0; i < grid_.nx(); ++i) {
      const int i0 = xi0_[static_cast<std::size_t>(i)];
      const auto& c = xc_[static_cast<std::size_t>(i)];
      const double v = c[0] * u[static_cast<std::size_t>(i0)] + c[1] * u[static_cast<std::size_t>(i0 + 1)] +
                       c[2] * u[static_cast<std::size_t>(i0 + 2)] + c[3] * u[static_cast<std::size_t>(i0 + 3)];
      for (const auto& [j, w] : hits) out_(i * nt + j) += w * v;
    }
  }

  const Eigen::VectorXd& values() const { return out_; }

 private:
  const Grid2D& grid_;
  std::vector<int> xi0_;
  std::vector<std::array<double, 4>> xc_;
  std::vector<std::vector<std::pair<Index, double>>> by_step_;
  Eigen::VectorXd out_;
};

// Time stepping with forcing supplied per step by force(n, t, out) (out has nx+1 entries).
template <typename Force>
void fd_march(FdScheme scheme, const Coefficient& a, const FdLayout& l, int first_step, Force&& force,
              FdSampler& sampler) {
  const int n = l.nx;
  const double dx = l.dx, dt = l.dt;
  std::vector<double> f(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> c2(static_cast<std::size_t>(n + 1));
  // Coefficient samples are refreshed each step only when a depends on t.
  auto load_speed = [&](double t) {
    for (int i = 0; i <= n; ++i) c2[static_cast<std::size_t>(i)] = a(i * dx, t);
  };
  const bool constant = [&] {
    const double a0 = a(0.0, 0.0);
    for (double x : {0.25, 0.5, 1.0})
      for (double t : {0.0, 0.5, 1.0})
        if (a(x, t) != a0) return false;
    return true;
  }();
  load_speed(0.0);
  // Steps before first_step carry zero forcing, so the state stays zero.
  const int n0 = std::max(0, first_step);

  if (scheme == FdScheme::Ctcs2) {
    std::vector<double> um(static_cast<std::size_t>(n + 1), 0.0), up(static_cast<std::size_t>(n + 1), 0.0);
    if (n0 == 0) {
      force(0, 0.0, f);
      for (int i = 1; i < n; ++i) u[static_cast<std::size_t>(i)] = 0.5 * dt * dt * f[static_cast<std::size_t>(i)];
      sampler.record(1, u);
    }
    // State (um, u) = (u^{m-1}, u^m) with m starting at max(1, n0).
    int m = std::max(1, n0);
    if (n0 >= 1) std::fill(u.begin(), u.end(), 0.0);
    for (; m < l.steps; ++m) {
      const double t = m * dt;
      if (!constant) load_speed(t);
      force(m, t, f);
      const double r = dt * dt / (dx * dx);
      for (int i = 1; i < n; ++i) {
        const std::size_t s = static_cast<std::size_t>(i);
        up[s] = 2.0 * u[s] - um[s] + r * c2[s] * (u[s + 1] - 2.0 * u[s] + u[s - 1]) + dt * dt * f[s];
      }
      up[0] = up[static_cast<std::size_t>(n)] = 0.0;
      std::swap(um, u);
      std::swap(u, up);
      sampler.record(m + 1, u);
    }
    return;
  }

  // Upwind on Riemann variables rp = v - c w (right-moving), rm = v + c w
  // (left-moving), v = u_t, w = u_x; walls enforce v = 0.
  std::vector<double> rp(static_cast<std::size_t>(n + 1), 0.0), rm(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> rpn(rp), rmn(rm), c(static_cast<std::size_t>(n + 1)), ct(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  for (int i = 0; i <= n; ++i) c[static_cast<std::size_t>(i)] = std::sqrt(c2[static_cast<std::size_t>(i)]);
  for (int m = n0; m < l.steps; ++m) {
    const double t = m * dt;
    if (!constant) {
      load_speed(t + dt);
      for (int i = 0; i <= n; ++i) {
        const double cn = std::sqrt(c2[static_cast<std::size_t>(i)]);
        const double co = std::sqrt(a(i * dx, t));
        c[static_cast<std::size_t>(i)] = co;
        ct[static_cast<std::size_t>(i)] = (cn - co) / dt;
      }
    }
    force(m, t, f);
    for (int i = 0; i <= n; ++i) {
      const std::size_t s = static_cast<std::size_t>(i);
      const double ci = c[s];
      const double w = (rm[s] - rp[s]) / (2.0 * ci);
      double cx = 0.0;
      if (!constant) {
        const double cl = c[s > 0 ? s - 1 : s], cr = c[s < static_cast<std::size_t>(n) ? s + 1 : s];
        cx = (cr - cl) / (((s > 0) + (s < static_cast<std::size_t>(n))) * dx);
      }
      const double nu = ci * dt / dx;
      if (i >= 1) rpn[s] = rp[s] - nu * (rp[s] - rp[s - 1]) + dt * (f[s] - (ct[s] + ci * cx) * w);
      if (i <= n - 1) rmn[s] = rm[s] + nu * (rm[s + 1] - rm[s]) + dt * (f[s] + (ct[s] - ci * cx) * w);
    }
    rpn[0] = -rmn[0];
    rmn[static_cast<std::size_t>(n)] = -rpn[static_cast<std::size_t>(n)];
    for (int i = 1; i < n; ++i) {
      const std::size_t s = static_cast<std::size_t>(i);
      const double vn = 0.5 * (rpn[s] + rmn[s]);
      u[s] += 0.5 * dt * (v[s] + vn);
      v[s] = vn;
    }
    std::swap(rp, rpn);
    std::swap(rm, rmn);
    sampler.record(m + 1, u);
  }
}

}  // namespace detail

/// Solves u_tt - a u_xx = f with zero initial data and Dirichlet walls on a
/// uniform grid and samples u at the quadrature nodes of `grid`.
inline DiscreteFunction fd_solve(FdScheme scheme, const Coefficient& a, const std::function<double(double, double)>& f,
                                 const GridPtr& grid, const FdOptions& opt = {}) {
  const detail::FdLayout l = detail::fd_layout(a, opt);
  detail::FdSampler sampler(*grid, l);
  detail::fd_march(scheme, a, l, 0,
                   [&](int, double t, std::vector<double>& out) {
                     for (int i = 0; i <= l.nx; ++i) out[static_cast<std::size_t>(i)] = f(i * l.dx, t);
                   },
                   sampler);
  return {Patch::full(grid), sampler.values()};
}

/// Same, with the forcing given by node samples (interpolated per panel).
inline DiscreteFunction fd_solve(FdScheme scheme, const Coefficient& a, const DiscreteFunction& f,
                                 const FdOptions& opt = {}) {
  require(f.patch.is_full(), ErrorKind::Domain, "forcing must live on the full grid");
  const PatchInterpolator interp(f.patch);
  return fd_solve(scheme, a, [&](double x, double t) { return interp(f.values, x, t); }, f.patch.grid(), opt);
}

/// Tabulates the FD solution operator column by column: A(:, j) is the sampled
/// response to the nodal basis function of node j, and K = A W^{-1}. The
/// adjoint is the exact weighted transpose of the discrete operator.
inline Eigen::MatrixXd fd_kernel_matrix(FdScheme scheme, const Coefficient& a, const GridPtr& grid,
                                        const FdOptions& opt = {}, int workers = 1) {
  const detail::FdLayout l = detail::fd_layout(a, opt);
  const Grid2D& g = *grid;
  const int npp = g.nodes_per_panel();
  const Index nt = g.nt();

  // 1D nodal basis values on the FD space grid and FD time levels.
  auto basis_1d = [&](const Grid1D& g1, int count, double h) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(count + 1, g1.size());
    std::vector<double> lb;
    for (int i = 0; i <= count; ++i) {
      const double v = i * h;
      // Nodes on a panel boundary belong to the right panel (left at v = 1).
      const int p = g1.panel_of(v);
      const double sref = std::clamp(v * g1.panels - p, 0.0, 1.0);
      detail::lagrange_basis(g1.ref_nodes, g1.ref_bary, sref, lb);
      for (int r = 0; r < npp; ++r) b(i, p * npp + r) = lb[static_cast<std::size_t>(r)];
    }
    return b;
  };
  const Eigen::MatrixXd bx = basis_1d(g.gx, l.nx, l.dx);
  const Eigen::MatrixXd bt = basis_1d(g.gt, l.steps, l.dt);

  Eigen::MatrixXd k(g.size(), g.size());
  parallel_for(static_cast<std::size_t>(g.size()), workers, [&](std::size_t col) {
    const Index i = static_cast<Index>(col) / nt, j = static_cast<Index>(col) % nt;
    const int pt = static_cast<int>(j) / npp;
    const int first = static_cast<int>(std::floor(static_cast<double>(pt) / g.gt.panels / l.dt)) - 1;
    detail::FdSampler sampler(g, l);
    detail::fd_march(scheme, a, l, std::max(0, first),
                     [&](int n, double, std::vector<double>& out) {
                       const double tv = bt(n, j);
                       for (int s = 0; s <= l.nx; ++s) out[static_cast<std::size_t>(s)] = tv * bx(s, i);
                     },
                     sampler);
    k.col(static_cast<Index>(col)) = sampler.values() / g.weight(static_cast<Index>(col));
  });
  return k;
}

inline OraclePtr make_fd_oracle(FdScheme scheme, const Coefficient& a, GridPtr grid, const FdOptions& opt = {},
                                int workers = 1) {
  Eigen::MatrixXd k = fd_kernel_matrix(scheme, a, grid, opt, workers);
  return std::make_shared<KernelMatrixOracle>(std::move(grid), std::move(k));
}

}  // namespace hypergreen
