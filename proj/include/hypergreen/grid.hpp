#pragma once
//
// Panelized Gauss-Legendre discretization of the unit square (x, t) and the
// weighted linear algebra that lets node samples act as L2 functions.
//

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <utility>
#include <vector>

#include "hypergreen/error.hpp"

namespace hypergreen {

using Index = Eigen::Index;

namespace detail {

// Gauss-Legendre nodes/weights on [0,1] (Newton on the three-term recurrence).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre_unit(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = (n == 1) ? z : p1;
      const double pnm1 = (n == 1) ? 1.0 : p0;
      dp = n * (z * pn - pnm1) / (z * z - 1.0);
      const double dz = pn / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    // ascending order on [0,1]
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

inline std::vector<double> barycentric_weights(const std::vector<double>& x) {
  const auto n = x.size();
  std::vector<double> b(n, 1.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k)
      if (k != j) b[j] /= (x[j] - x[k]);
  return b;
}

// Lagrange basis values at s for nodes x (barycentric form, exact at nodes).
inline void lagrange_basis(const std::vector<double>& x, const std::vector<double>& bary, double s,
                           std::vector<double>& out) {
  const auto n = x.size();
  out.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (s == x[j]) {
      out[j] = 1.0;
      return;
    }
  }
  double denom = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = bary[j] / (s - x[j]);
    denom += out[j];
  }
  for (auto& v : out) v /= denom;
}

}  // namespace detail

/// Composite Gauss-Legendre rule on [0,1] with equal panels.
struct Grid1D {
  int panels = 0;
  int nodes_per_panel = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> ref_nodes;    // reference panel [0,1]
  std::vector<double> ref_weights;  // sum to 1
  std::vector<double> ref_bary;

  Index size() const { return static_cast<Index>(nodes.size()); }
  double panel_width() const { return 1.0 / panels; }

  int panel_of(double x) const {
    int p = static_cast<int>(std::floor(x * panels));
    if (p < 0) p = 0;
    if (p >= panels) p = panels - 1;
    return p;
  }
};

inline Grid1D build_grid1d(int panels, int nodes_per_panel) {
  require(panels >= 1, ErrorKind::Config, "panels must be >= 1");
  require(nodes_per_panel >= 2, ErrorKind::Config, "nodes_per_panel must be >= 2");
  Grid1D g;
  g.panels = panels;
  g.nodes_per_panel = nodes_per_panel;
  auto [rx, rw] = detail::gauss_legendre_unit(nodes_per_panel);
  g.ref_nodes = rx;
  g.ref_weights = rw;
  g.ref_bary = detail::barycentric_weights(rx);
  g.nodes.reserve(static_cast<std::size_t>(panels) * nodes_per_panel);
  for (int p = 0; p < panels; ++p) {
    for (int r = 0; r < nodes_per_panel; ++r) {
      g.nodes.push_back((p + rx[r]) / panels);
      g.weights.push_back(rw[r] / panels);
    }
  }
  return g;
}

/// Tensor grid on D_T = [0,1]^2, flattened x-major: flat = i * nt + j.
struct Grid2D {
  Grid1D gx;
  Grid1D gt;

  Index nx() const { return gx.size(); }
  Index nt() const { return gt.size(); }
  Index size() const { return nx() * nt(); }
  Index flatten(Index i, Index j) const { return i * nt() + j; }
  std::pair<Index, Index> unflatten(Index flat) const { return {flat / nt(), flat % nt()}; }
  double x(Index flat) const { return gx.nodes[flat / nt()]; }
  double t(Index flat) const { return gt.nodes[flat % nt()]; }
  double weight(Index flat) const { return gx.weights[flat / nt()] * gt.weights[flat % nt()]; }
  int panels() const { return gx.panels; }
  int nodes_per_panel() const { return gx.nodes_per_panel; }

  /// Deepest dyadic level whose boxes are unions of whole panels.
  int max_aligned_level() const {
    int level = 0;
    int p = gx.panels;
    while (p % 2 == 0) {
      p /= 2;
      ++level;
    }
    return level;
  }
};

using GridPtr = std::shared_ptr<const Grid2D>;

inline GridPtr build_grid(int panels, int nodes_per_panel) {
  auto g = std::make_shared<Grid2D>();
  g->gx = build_grid1d(panels, nodes_per_panel);
  g->gt = g->gx;
  return g;
}

/// Closed dyadic interval [index * 2^-level, (index + 1) * 2^-level].
struct DyadicInterval {
  int level = 0;
  std::int64_t index = 0;

  double lo() const { return std::ldexp(static_cast<double>(index), -level); }
  double hi() const { return std::ldexp(static_cast<double>(index + 1), -level); }
  double length() const { return std::ldexp(1.0, -level); }
  bool contains(double v) const { return v >= lo() && v <= hi(); }
  double distance(double v) const {
    if (v < lo()) return lo() - v;
    if (v > hi()) return v - hi();
    return 0.0;
  }
  bool operator==(const DyadicInterval&) const = default;
};

/// Box in [0,1]^4 ordered (output x, output t, input y, input s).
struct SubdomainBox {
  int level = 0;
  std::array<std::int64_t, 4> index{0, 0, 0, 0};

  DyadicInterval interval(int d) const { return {level, index[static_cast<std::size_t>(d)]}; }
  double side() const { return std::ldexp(1.0, -level); }
  double volume() const { return std::ldexp(1.0, -4 * level); }
  std::array<double, 4> corner() const {
    return {interval(0).lo(), interval(1).lo(), interval(2).lo(), interval(3).lo()};
  }
  bool contains(const std::array<double, 4>& p) const {
    for (int d = 0; d < 4; ++d)
      if (!interval(d).contains(p[static_cast<std::size_t>(d)])) return false;
    return true;
  }
  static SubdomainBox root() { return {}; }
  bool operator==(const SubdomainBox&) const = default;
};

/// A panel-aligned rectangle of grid nodes. The full grid is a Patch too.
class Patch {
 public:
  Patch() = default;

  static Patch full(GridPtr grid) {
    const int p = grid->panels();
    return Patch(std::move(grid), 0, p, 0, p);
  }

  /// Patch for the dyadic rectangle ix x it; throws if it is not a union of panels.
  static Patch from_intervals(GridPtr grid, const DyadicInterval& ix, const DyadicInterval& it) {
    const int panels = grid->panels();
    auto to_panels = [&](const DyadicInterval& iv) {
      require(iv.level >= 0 && iv.index >= 0 && iv.index < (std::int64_t{1} << iv.level),
              ErrorKind::Domain, "dyadic interval outside [0,1]");
      const std::int64_t denom = std::int64_t{1} << iv.level;
      require(panels % denom == 0, ErrorKind::Alignment,
              "subdomain level " + std::to_string(iv.level) + " is finer than the panel grid");
      const std::int64_t per = panels / denom;
      return std::pair<int, int>(static_cast<int>(iv.index * per), static_cast<int>((iv.index + 1) * per));
    };
    auto [x0, x1] = to_panels(ix);
    auto [t0, t1] = to_panels(it);
    return Patch(std::move(grid), x0, x1, t0, t1);
  }

  const GridPtr& grid() const { return grid_; }
  Index nx() const { return static_cast<Index>(px1_ - px0_) * grid_->nodes_per_panel(); }
  Index nt() const { return static_cast<Index>(pt1_ - pt0_) * grid_->nodes_per_panel(); }
  Index size() const { return nx() * nt(); }
  Index x_begin() const { return static_cast<Index>(px0_) * grid_->nodes_per_panel(); }
  Index t_begin() const { return static_cast<Index>(pt0_) * grid_->nodes_per_panel(); }
  int x_panel_begin() const { return px0_; }
  int x_panel_end() const { return px1_; }
  int t_panel_begin() const { return pt0_; }
  int t_panel_end() const { return pt1_; }

  /// Grid flat index of local index l (local order is x-major too).
  Index global(Index l) const { return grid_->flatten(x_begin() + l / nt(), t_begin() + l % nt()); }
  double x(Index l) const { return grid_->gx.nodes[static_cast<std::size_t>(x_begin() + l / nt())]; }
  double t(Index l) const { return grid_->gt.nodes[static_cast<std::size_t>(t_begin() + l % nt())]; }

  const Eigen::VectorXd& weights() const { return *weights_; }
  const Eigen::VectorXd& sqrt_weights() const { return *sqrt_weights_; }
  const std::vector<Index>& global_indices() const { return *indices_; }

  bool contains(const Patch& other) const {
    return grid_ == other.grid_ && px0_ <= other.px0_ && other.px1_ <= px1_ && pt0_ <= other.pt0_ &&
           other.pt1_ <= pt1_;
  }
  bool operator==(const Patch& o) const {
    return grid_ == o.grid_ && px0_ == o.px0_ && px1_ == o.px1_ && pt0_ == o.pt0_ && pt1_ == o.pt1_;
  }
  bool is_full() const {
    return px0_ == 0 && pt0_ == 0 && px1_ == grid_->panels() && pt1_ == grid_->panels();
  }

 private:
  Patch(GridPtr grid, int px0, int px1, int pt0, int pt1)
      : grid_(std::move(grid)), px0_(px0), px1_(px1), pt0_(pt0), pt1_(pt1) {
    const Index n = size();
    auto w = std::make_shared<Eigen::VectorXd>(n);
    auto idx = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(n));
    for (Index l = 0; l < n; ++l) {
      const Index i = x_begin() + l / nt();
      const Index j = t_begin() + l % nt();
      (*w)(l) = grid_->gx.weights[static_cast<std::size_t>(i)] * grid_->gt.weights[static_cast<std::size_t>(j)];
      (*idx)[static_cast<std::size_t>(l)] = grid_->flatten(i, j);
    }
    sqrt_weights_ = std::make_shared<const Eigen::VectorXd>(w->cwiseSqrt());
    weights_ = std::move(w);
    indices_ = std::move(idx);
  }

  GridPtr grid_;
  int px0_ = 0, px1_ = 0, pt0_ = 0, pt1_ = 0;
  std::shared_ptr<const Eigen::VectorXd> weights_;
  std::shared_ptr<const Eigen::VectorXd> sqrt_weights_;
  std::shared_ptr<const std::vector<Index>> indices_;
};

/// Node samples of an L2 function on a patch.
struct DiscreteFunction {
  Patch patch;
  Eigen::VectorXd values;
};

/// Finite set of discrete functions stored as columns.
struct Quasimatrix {
  Patch patch;
  Eigen::MatrixXd columns;

  Index cols() const { return columns.cols(); }
  DiscreteFunction column(Index j) const { return {patch, columns.col(j)}; }
  /// Weighted Gram matrix A* A.
  Eigen::MatrixXd gram() const { return columns.transpose() * patch.weights().asDiagonal() * columns; }
};

template <typename F>
DiscreteFunction sample(const Patch& patch, F&& fn) {
  Eigen::VectorXd v(patch.size());
  for (Index l = 0; l < patch.size(); ++l) v(l) = fn(patch.x(l), patch.t(l));
  return {patch, std::move(v)};
}

inline double inner_product(const DiscreteFunction& f, const DiscreteFunction& g) {
  require(f.patch == g.patch, ErrorKind::Domain, "inner product of functions on different grids");
  return (f.values.array() * g.values.array() * f.patch.weights().array()).sum();
}

inline double norm(const DiscreteFunction& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }

namespace detail {

// Row map from `inner` local indices into `outer` local indices.
inline std::vector<Index> embed_rows(const Patch& outer, const Patch& inner) {
  require(outer.contains(inner), ErrorKind::Domain, "patch is not contained in the source patch");
  std::vector<Index> rows(static_cast<std::size_t>(inner.size()));
  const Index dx = inner.x_begin() - outer.x_begin();
  const Index dt = inner.t_begin() - outer.t_begin();
  for (Index l = 0; l < inner.size(); ++l) {
    const Index i = l / inner.nt() + dx;
    const Index j = l % inner.nt() + dt;
    rows[static_cast<std::size_t>(l)] = i * outer.nt() + j;
  }
  return rows;
}

}  // namespace detail

inline Eigen::MatrixXd restrict_rows(const Patch& from, const Patch& to, const Eigen::MatrixXd& a) {
  const auto rows = detail::embed_rows(from, to);
  Eigen::MatrixXd out(to.size(), a.cols());
  for (std::size_t l = 0; l < rows.size(); ++l) out.row(static_cast<Index>(l)) = a.row(rows[l]);
  return out;
}

inline Eigen::MatrixXd extend_rows(const Patch& from, const Patch& to, const Eigen::MatrixXd& a) {
  const auto rows = detail::embed_rows(to, from);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(to.size(), a.cols());
  for (std::size_t l = 0; l < rows.size(); ++l) out.row(rows[l]) = a.row(static_cast<Index>(l));
  return out;
}

/// R_X: keep the samples inside `sub`.
inline DiscreteFunction restrict_to(const DiscreteFunction& f, const Patch& sub) {
  return {sub, restrict_rows(f.patch, sub, f.values)};
}

/// R_X^*: zero extension onto `super`.
inline DiscreteFunction extend_by_zero(const DiscreteFunction& g, const Patch& super) {
  return {super, extend_rows(g.patch, super, g.values)};
}

inline Quasimatrix restrict_to(const Quasimatrix& a, const Patch& sub) {
  return {sub, restrict_rows(a.patch, sub, a.columns)};
}

inline Quasimatrix extend_by_zero(const Quasimatrix& a, const Patch& super) {
  return {super, extend_rows(a.patch, super, a.columns)};
}

/// Per-panel tensor Lagrange interpolation of node samples; points outside the
/// patch are clamped to its boundary panels.
class PatchInterpolator {
 public:
  explicit PatchInterpolator(const Patch& patch) : patch_(patch) {}

  /// Interpolation weights: values at (x,t) = sum_k coeff[k] * values[rows[k]].
  void stencil(double x, double t, std::vector<Index>& rows, std::vector<double>& coeff) const {
    const Grid2D& g = *patch_.grid();
    const int npp = g.nodes_per_panel();
    const int px = std::clamp(g.gx.panel_of(x), patch_.x_panel_begin(), patch_.x_panel_end() - 1);
    const int pt = std::clamp(g.gt.panel_of(t), patch_.t_panel_begin(), patch_.t_panel_end() - 1);
    const double sx = std::clamp(x * g.gx.panels - px, 0.0, 1.0);
    const double st = std::clamp(t * g.gt.panels - pt, 0.0, 1.0);
    detail::lagrange_basis(g.gx.ref_nodes, g.gx.ref_bary, sx, lx_);
    detail::lagrange_basis(g.gt.ref_nodes, g.gt.ref_bary, st, lt_);
    rows.clear();
    coeff.clear();
    const Index i0 = static_cast<Index>(px - patch_.x_panel_begin()) * npp;
    const Index j0 = static_cast<Index>(pt - patch_.t_panel_begin()) * npp;
    for (int a = 0; a < npp; ++a) {
      for (int b = 0; b < npp; ++b) {
        rows.push_back((i0 + a) * patch_.nt() + j0 + b);
        coeff.push_back(lx_[static_cast<std::size_t>(a)] * lt_[static_cast<std::size_t>(b)]);
      }
    }
  }

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& values, double x, double t) const {
    stencil(x, t, rows_, coeff_);
    double s = 0.0;
    for (std::size_t k = 0; k < rows_.size(); ++k) s += coeff_[k] * values(rows_[k]);
    return s;
  }

  /// Row vector of all columns of `a` interpolated at (x,t).
  Eigen::RowVectorXd row(const Eigen::MatrixXd& a, double x, double t) const {
    stencil(x, t, rows_, coeff_);
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(a.cols());
    for (std::size_t k = 0; k < rows_.size(); ++k) r += coeff_[k] * a.row(rows_[k]);
    return r;
  }

 private:
  Patch patch_;
  mutable std::vector<double> lx_, lt_;
  mutable std::vector<Index> rows_;
  mutable std::vector<double> coeff_;
};

inline double interpolate_point(const DiscreteFunction& f, double x, double t) {
  return PatchInterpolator(f.patch)(f.values, x, t);
}

}  // namespace hypergreen
