// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "hypergreen/pipeline.hpp"
#include "hypergreen/rank_detect.hpp"
#include "hypergreen/rsvd.hpp"
#include "hypergreen/synthetic.hpp"
#include "hypergreen/wave.hpp"

using namespace hypergreen;

namespace {

constexpr std::uint64_t kSeed = 7;
constexpr double kPi = std::numbers::pi;

struct Result {
  int id;
  bool ok;
  std::string line;
};
std::vector<Result> results;

void report(int id, bool ok, const std::string& detail, double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.1f s)", seconds);
  results.push_back({id, ok, std::string(ok ? "PASS" : "FAIL") + " criterion " + std::to_string(id) + ": " + detail + buf});
  std::fprintf(stderr, "  finished criterion %d%s\n", id, buf);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Runs and query audits shared between criteria.
struct Audit {
  int runs = 0;
  int mismatches = 0;
  void check(const LearnResult& r, std::uint64_t counter) {
    ++runs;
    const bool ok = r.detection_queries == r.detection_formula &&
                    r.approximation_queries == r.approximation_formula &&
                    counter == r.detection_queries + r.approximation_queries + r.validation_queries;
    if (!ok) ++mismatches;
  }
  void check(const PartitionTree& t, std::uint64_t counter) {
    ++runs;
    std::uint64_t formula = 0;
    for (const auto& n : t.nodes)
      formula += static_cast<std::uint64_t>(n.decision.k) * static_cast<std::uint64_t>(8 * n.decision.q + 5);
    if (formula != t.detection_queries || counter != formula) ++mismatches;
  }
};

Audit audit;

RunConfig base_config() {
  RunConfig c;
  c.c = 2.0;
  c.eps = 0.1;
  c.seed = kSeed;
  c.workers = default_workers();
  return c;
}

void criterion1() {
  const auto t0 = Clock::now();
  auto g = build_grid(4, 8);
  const Patch full = Patch::full(g);
  const auto sp = kernel_spectrum(CovarianceKernel::squared_exponential(0.1), full);
  const int k = 10, p = 10, r = 40;
  std::vector<double> sigma;
  for (int j = 0; j < r; ++j) sigma.push_back(std::pow(0.7, j));
  const Eigen::MatrixXd right = sp.eigenfunctions.columns.leftCols(r);
  const auto q = kernel_quality(sp, Quasimatrix{full, right.leftCols(k)});
  ErrorFactorParams a;
  a.k = k;
  a.p = p;
  a.trace = sp.trace;
  a.lambda1 = sp.lambda1;
  a.xi = q.xi;
  a.gamma = q.gamma;
  const double ak = error_factor(ErrorFactorKind::Simple, a);
  int hold = 0;
  double worst = 0.0;
  const int trials = 200;
  for (int s = 0; s < trials; ++s) {
    auto op = make_synthetic_operator(sigma, g, right, derive_seed(kSeed, 1000 + s));
    const Quasimatrix omega = sample_gp(sp, k + p, derive_seed(kSeed, 2000 + s));
    const Quasimatrix y = randomized_range(BlockView::full(*op), omega, 0);
    const double ratio = op->projection_error(y.columns) / op->singular_value(k + 1);
    worst = std::max(worst, ratio);
    if (ratio <= ak) ++hold;
  }
  const double frac = static_cast<double>(hold) / trials;
  report(1, frac >= 0.95,
         fmt("bound held in %d/%d trials (A_k = %.2f, xi = %.3f, gamma = %.3f, worst error/sigma_{k+1} = %.2f)", hold,
             trials, ak, q.xi, q.gamma, worst),
         since(t0));
}

void criterion2() {
  const auto t0 = Clock::now();
  auto g = build_grid(4, 8);
  const Patch full = Patch::full(g);
  const int k = 3, m = 6, q = 2, r = 8;
  std::vector<double> sigma;
  for (int j = 0; j < r; ++j) sigma.push_back(std::pow(0.5, j));
  // Covariance built on the right factors: eigenvalues 1,1,1 then 0.1.
  Eigen::VectorXd lam = Eigen::VectorXd::Constant(r, 0.1);
  lam.head(k).setOnes();
  const double dq = delta_q(sigma[k - 1], sigma[k], q);
  int hold = 0;
  double worst = 0.0, bound = 0.0, big_a = 0.0;
  const int trials = 100;
  for (int s = 0; s < trials; ++s) {
    const Eigen::MatrixXd v = random_orthonormal(g, r, derive_seed(kSeed, 3000 + s));
    auto op = make_synthetic_operator(sigma, g, v, derive_seed(kSeed, 4000 + s));
    KernelSpectrum sp;
    sp.patch = full;
    sp.eigenvalues = lam;
    sp.eigenfunctions = Quasimatrix{full, v};
    sp.trace = lam.sum();
    sp.lambda1 = 1.0;
    const auto kq = kernel_quality(sp, Quasimatrix{full, v.leftCols(k)});
    ErrorFactorParams a;
    a.k = k;
    a.p = m - k;
    a.s = std::sqrt(2.0 * k);
    a.t = std::numbers::e;
    a.trace = sp.trace;
    a.lambda1 = sp.lambda1;
    a.xi = kq.xi;
    a.gamma = kq.gamma;
    big_a = error_factor(ErrorFactorKind::Tail, a);
    bound = 2.0 * dq * big_a / (1.0 - dq * big_a) * sigma[0];
    const SpectralEstimate est =
        estimate_singular_values(BlockView::full(*op), sample_gp(sp, m, derive_seed(kSeed, 5000 + s)), k, q);
    double err = 0.0;
    for (int j = 0; j < k; ++j) err = std::max(err, std::abs(est.sigma(j) - sigma[static_cast<std::size_t>(j)]));
    worst = std::max(worst, err);
    if (dq * big_a < 1.0 && err <= bound) ++hold;
  }
  const double frac = static_cast<double>(hold) / trials;
  report(2, frac >= 0.95,
         fmt("bound held in %d/%d trials (delta_q = 1/%.0f, A = %.2f, bound = %.3g, worst max|sigma - sigma_hat| = %.3g)",
             hold, trials, 1.0 / dq, big_a, bound, worst),
         since(t0));
}

void criterion4() {
  const auto t0 = Clock::now();
  const WaveSpec spec{3.0, 0};
  const double y = 0.25, s = 1.0 / 6.0;
  struct P {
    double x, t, want;
  };
  const std::vector<P> pts{{0.5, 1.0 / 3.0, 1.0 / 6.0}, {0.25, 0.917, 1.0 / 6.0}, {0.5, 0.658, -1.0 / 6.0},
                           {0.75, 1.0 / 6.0, 0.0},      {0.25, 0.5, 0.0},        {0.917, 0.5, 0.0},
                           {0.083, 0.833, 0.0},         {0.75, 0.833, 0.0},      {0.4, 0.1, 0.0}};
  int ok = 0;
  for (const auto& p : pts) ok += exact_wave_green_value(spec, p.x, p.t, y, s) == p.want ? 1 : 0;
  report(4, ok == static_cast<int>(pts.size()), fmt("%d/%zu labeled points exact", ok, pts.size()), since(t0));
}

void criterion5(OperatorOracle& exact, const CharacteristicBundle& z) {
  const auto t0 = Clock::now();
  RunConfig cfg = base_config();
  cfg.max_level = 3;
  int contained = 0, total_red = 0, k = 0, max_level_reached = 0;
  const int runs = 20;
  SpectrumCache spectra(CovarianceKernel::squared_exponential(cfg.ell, cfg.variance));
  for (int s = 0; s < runs; ++s) {
    cfg.seed = derive_seed(kSeed, 6000 + s);
    exact.reset_queries();
    const PartitionTree t = adaptive_partition(exact, spectra, partition_options(cfg, *exact.grid()));
    audit.check(t, exact.queries());
    k = t.nodes[0].decision.k;
    max_level_reached = std::max(max_level_reached, t.final_level);
    bool all = true;
    for (int id : t.leaves(Color::Red)) {
      ++total_red;
      all = all && tube_distance(z, t.nodes[static_cast<std::size_t>(id)].box) <= 0.25;
    }
    contained += all ? 1 : 0;
  }
  const double frac = static_cast<double>(contained) / runs;
  report(5, frac >= 0.95 && k >= 10,
         fmt("%d/%d runs fully contained (k_eps = %d, %d red leaves in total, deepest level %d)", contained, runs, k,
             total_red, max_level_reached),
         since(t0));
}

void criterion6(const GreenModel& model) {
  const auto t0 = Clock::now();
  const WaveSpec spec{2.0, 0};
  const std::function<double(double, double, double, double)> exact = [&](double x, double t, double y, double s) {
    return exact_wave_green_value(spec, x, t, y, s);
  };
  const Slice sl = export_slice(model, 0.8, 0.1, 128, &exact);
  auto [p, m] = trace_characteristics(constant_coefficient(4.0), 0.8, 0.1, 1.0 / 2048);
  std::vector<std::pair<double, int>> cells;
  for (int i = 0; i < 128; ++i)
    for (int j = 0; j < 128; ++j) cells.push_back({std::abs(sl.approx(i, j) - (*sl.exact)(i, j)), i * 128 + j});
  const std::size_t top = cells.size() / 10;
  std::nth_element(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(top), cells.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  int near = 0;
  for (std::size_t c = 0; c < top; ++c) {
    const int i = cells[c].second / 128, j = cells[c].second % 128;
    near += slice_tube_distance(p, m, sl.x[static_cast<std::size_t>(i)], sl.t[static_cast<std::size_t>(j)]) <= 0.25;
  }
  const double frac = static_cast<double>(near) / static_cast<double>(top);
  report(6, frac >= 0.90, fmt("%d/%zu top-decile error cells within 2^-2 of the characteristics (%.1f%%)", near, top,
                              100.0 * frac),
         since(t0));
}

void criterion7(OperatorOracle& exact) {
  const auto t0 = Clock::now();
  RunConfig cfg = base_config();
  std::vector<double> n, e;
  std::string pts;
  for (double eps : {0.4, 0.3, 0.2, 0.15, 0.1}) {
    cfg.eps = eps;
    exact.reset_queries();
    const LearnResult r = learn(exact, cfg);
    audit.check(r, exact.queries());
    n.push_back(static_cast<double>(r.detection_queries + r.approximation_queries));
    e.push_back(r.relative_error);
    pts += fmt(" (%.0f, %.3f)", n.back(), e.back());
  }
  const double slope = loglog_slope(n, e);
  report(7, slope < 0.0 && -slope >= 0.05 && -slope <= 0.5, fmt("slope %.3f from (N, error):%s", slope, pts.c_str()),
         since(t0));
}

void criterion8(OperatorOracle& exact, const LearnResult& learned) {
  const auto t0 = Clock::now();
  const double c = 2.0, a = 0.2, b = 0.3, delta = 0.01;
  const auto psi = [=](double x) { return x >= a && x <= b ? 1.0 : 0.0; };
  const DiscreteFunction direct = duhamel_solve(exact, psi, delta);
  double max_err = 0.0;
  int checked = 0;
  for (Index l = 0; l < direct.patch.size(); ++l) {
    const double x = direct.patch.x(l), t = direct.patch.t(l);
    if (t <= delta || t >= std::min(a, 1.0 - b) / c) continue;
    max_err = std::max(max_err, std::abs(direct.values(l) - dalembert_box(c, a, b, x, t)));
    ++checked;
  }
  const DiscreteFunction via_oracle = duhamel_solve(exact, psi);
  const DiscreteFunction via_model = duhamel_solve(learned.model, psi);
  const double rel = norm({via_oracle.patch, via_model.values - via_oracle.values}) / norm(via_oracle);
  const bool ok = max_err <= 0.01 && checked > 0 && rel <= learned.relative_error + 0.05;
  report(8, ok,
         fmt("direct vs d'Alembert max error %.4g over %d nodes; model vs direct relative L2 %.4f (estimated operator "
             "error %.4f)",
             max_err, checked, rel, learned.relative_error),
         since(t0));
}

void criterion9(const PartitionTree& exact_tree) {
  const auto t0 = Clock::now();
  const WaveSpec spec{2.0, 0};
  auto interior = [&](const PartitionTree& t) {
    int n = 0;
    for (int id : t.leaves(Color::Red)) n += in_cone_interior(spec, t.nodes[static_cast<std::size_t>(id)].box) ? 1 : 0;
    return n;
  };
  RunConfig cfg = base_config();
  auto g = build_grid(cfg.panels, cfg.nodes);
  std::string detail;
  cfg.oracle = OracleKind::Upwind1;
  auto up = make_oracle(cfg, g);
  const LearnResult ru = learn(*up, cfg, false);
  audit.check(ru, up->queries());
  cfg.oracle = OracleKind::Ctcs2;
  auto ct = make_oracle(cfg, g);
  const LearnResult rc = learn(*ct, cfg, false);
  audit.check(rc, ct->queries());
  const double v_exact = red_volume(exact_tree, 2), v_up = red_volume(ru.tree, 2);
  const int i_exact = interior(exact_tree), i_ct = interior(rc.tree);
  report(9, v_up > v_exact && i_ct > i_exact,
         fmt("level-2 red volume upwind1 %.4g vs exact %.4g; red leaves inside the cone ctcs2 %d vs exact %d "
             "(red leaves: exact %zu, upwind1 %zu, ctcs2 %zu)",
             v_up, v_exact, i_ct, i_exact, exact_tree.leaves(Color::Red).size(), ru.tree.leaves(Color::Red).size(),
             rc.tree.leaves(Color::Red).size()),
         since(t0));
}

double manufactured_error(FdScheme scheme, int nx) {
  const double c = 2.0;
  auto g = build_grid(4, 6);
  auto f = [c](double x, double t) {
    return kPi * kPi * std::sin(kPi * x) * std::cos(kPi * t) +
           c * c * kPi * kPi * std::sin(kPi * x) * (1.0 - std::cos(kPi * t));
  };
  const auto u = fd_solve(scheme, constant_coefficient(c * c), f, g, {nx, nx, 0.5});
  double e = 0.0;
  for (Index l = 0; l < g->size(); ++l)
    e = std::max(e, std::abs(u.values(l) - std::sin(kPi * g->x(l)) * (1.0 - std::cos(kPi * g->t(l)))));
  return e;
}

void criterion10(const LearnResult& learned) {
  const auto t0 = Clock::now();
  auto g = build_grid(8, 8);
  const Patch full = Patch::full(g);

  // Orthonormality: stored range bases and covariance eigenfunctions.
  double ortho = 0.0;
  for (const auto& b : learned.model.blocks()) {
    const Eigen::MatrixXd gram = b.q.gram();
    ortho = std::max(ortho, (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff());
  }
  const auto sp = kernel_spectrum(CovarianceKernel::squared_exponential(0.1), Patch::from_intervals(g, {1, 1}, {2, 0}));
  const Eigen::MatrixXd eg = sp.eigenfunctions.gram();
  ortho = std::max(ortho, (eg - Eigen::MatrixXd::Identity(eg.rows(), eg.cols())).cwiseAbs().maxCoeff());

  // Restrict / extend adjointness on every level-2 input patch.
  double adj = 0.0;
  const Eigen::VectorXd f = detail::gaussian_probes(full.size(), 1, kSeed).col(0);
  for (std::int64_t i = 0; i < 4; ++i)
    for (std::int64_t j = 0; j < 4; ++j) {
      const Patch sub = Patch::from_intervals(g, {2, i}, {2, j});
      const DiscreteFunction ff{full, f};
      DiscreteFunction h{sub, f.head(sub.size()).reverse()};
      const double lhs = inner_product(restrict_to(ff, sub), h), rhs = inner_product(ff, extend_by_zero(h, full));
      adj = std::max(adj, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }

  // Quadrature exactness up to degree 2n - 1 in each direction.
  double quad = 0.0;
  for (int dx = 0; dx <= 15; dx += 3)
    for (int dt = 0; dt <= 15; dt += 5) {
      const auto v = sample(full, [&](double x, double t) { return std::pow(x, dx) * std::pow(t, dt); });
      quad = std::max(quad, std::abs(full.weights().dot(v.values) - 1.0 / ((dx + 1.0) * (dt + 1.0))));
    }

  const double c1 = manufactured_error(FdScheme::Ctcs2, 64), c2 = manufactured_error(FdScheme::Ctcs2, 128);
  const double u1 = manufactured_error(FdScheme::Upwind1, 128), u2 = manufactured_error(FdScheme::Upwind1, 256);
  const double rc = c1 / c2, ru = u1 / u2;
  const bool ok = ortho <= 1e-10 && adj <= 1e-12 && quad <= 1e-12 && rc >= 3.2 && rc <= 4.8 && ru >= 1.6 && ru <= 2.4;
  report(10, ok,
         fmt("orthonormality %.2g, adjointness %.2g, quadrature %.2g, ctcs2 ratio %.3f, upwind1 ratio %.3f", ortho, adj,
             quad, rc, ru),
         since(t0));
}

}  // namespace

int main() {
  std::printf("acceptance suite, seed %llu, %d worker(s)\n", static_cast<unsigned long long>(kSeed), default_workers());
  try {
    criterion1();
    criterion2();

    const auto t3 = Clock::now();
    const RunConfig cfg = base_config();
    auto g = build_grid(cfg.panels, cfg.nodes);
    auto exact = make_oracle(cfg, g);
    const LearnResult learned = learn(*exact, cfg);
    audit.check(learned, exact->queries());
    const double setup = since(t3);

    criterion4();
    const auto z = sample_characteristics(WaveSpec{2.0, 0});
    criterion5(*exact, z);
    criterion6(learned.model);
    criterion7(*exact);
    criterion8(*exact, learned);
    criterion9(learned.tree);
    criterion10(learned);
    report(3, audit.runs > 0 && audit.mismatches == 0,
           fmt("%d pipeline runs, %d counter/formula mismatches (base run: detection %llu, approximation %llu)",
               audit.runs, audit.mismatches, static_cast<unsigned long long>(learned.detection_queries),
               static_cast<unsigned long long>(learned.approximation_queries)),
           setup);
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::sort(results.begin(), results.end(), [](const Result& a, const Result& b) { return a.id < b.id; });
  int failures = 0;
  for (const auto& r : results) {
    std::printf("%s\n", r.line.c_str());
    failures += r.ok ? 0 : 1;
  }
  std::printf("%d of %zu criteria failed\n", failures, results.size());
  return failures == 0 ? 0 : 1;
}
