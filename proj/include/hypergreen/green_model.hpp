#pragma once
//
// The assembled approximant: a low-rank factor pair per green leaf and an
// exact zero on each red leaf.
//

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hypergreen/error.hpp"
#include "hypergreen/gp.hpp"
#include "hypergreen/grid.hpp"
#include "hypergreen/oracle.hpp"
#include "hypergreen/parallel.hpp"
#include "hypergreen/partition.hpp"
#include "hypergreen/rsvd.hpp"

namespace hypergreen {

/// Block kernel G~(x,t; y,s) = sum_i Q_i(x,t) Ccols_i(y,s).
struct LowRankBlock {
  SubdomainBox box;
  Quasimatrix q;      // on X, w-orthonormal
  Quasimatrix ccols;  // on Y, F* Q restricted
};

struct ModelInfo {
  double eps = 0.0;
  double kc = 1.0;
  int q = 0;
  int k = 0;
  std::uint64_t seed = 0;
  int final_level = 0;
  std::uint64_t detection_queries = 0;
  std::uint64_t approximation_queries = 0;
  bool partial = false;
};

class GreenModel {
 public:
  GreenModel() = default;
  GreenModel(GridPtr grid, std::vector<LowRankBlock> blocks, std::vector<SubdomainBox> red, ModelInfo info = {})
      : grid_(std::move(grid)), blocks_(std::move(blocks)), red_(std::move(red)), info_(info) {
    index_leaves();
  }

  const GridPtr& grid() const { return grid_; }
  const std::vector<LowRankBlock>& blocks() const { return blocks_; }
  const std::vector<SubdomainBox>& red_leaves() const { return red_; }
  const ModelInfo& info() const { return info_; }
  ModelInfo& info() { return info_; }

  /// All leaf boxes (green first, then red).
  std::vector<SubdomainBox> leaves() const {
    std::vector<SubdomainBox> out;
    for (const auto& b : blocks_) out.push_back(b.box);
    out.insert(out.end(), red_.begin(), red_.end());
    return out;
  }

  /// Leaf containing p; ties go to the lexicographically smallest corner.
  /// Returns (is_green, index into blocks() or red_leaves()).
  std::optional<std::pair<bool, std::size_t>> locate(const std::array<double, 4>& p) const {
    std::optional<std::pair<bool, std::size_t>> best;
    std::array<double, 4> best_corner{};
    for (int level : levels_) {
      const std::int64_t n = std::int64_t{1} << level;
      std::array<std::vector<std::int64_t>, 4> cand;
      for (int d = 0; d < 4; ++d) {
        const double u = std::clamp(p[static_cast<std::size_t>(d)], 0.0, 1.0) * static_cast<double>(n);
        const std::int64_t i = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(u)), n - 1);
        auto& c = cand[static_cast<std::size_t>(d)];
        c.push_back(i);
        if (static_cast<double>(i) == u && i > 0) c.push_back(i - 1);
      }
      for (auto a : cand[0])
        for (auto b : cand[1])
          for (auto c : cand[2])
            for (auto e : cand[3]) {
              SubdomainBox box{level, {a, b, c, e}};
              auto it = lookup_.find(box_key(box));
              if (it == lookup_.end()) continue;
              const auto corner = box.corner();
              if (!best || corner < best_corner) {
                best = it->second;
                best_corner = corner;
              }
            }
    }
    return best;
  }

 private:
  void index_leaves() {
    lookup_.clear();
    levels_.clear();
    auto add = [&](const SubdomainBox& b, bool green, std::size_t i) {
      require(lookup_.emplace(box_key(b), std::make_pair(green, i)).second, ErrorKind::Domain,
              "leaf box appears twice in the model");
      if (std::find(levels_.begin(), levels_.end(), b.level) == levels_.end()) levels_.push_back(b.level);
    };
    for (std::size_t i = 0; i < blocks_.size(); ++i) add(blocks_[i].box, true, i);
    for (std::size_t i = 0; i < red_.size(); ++i) add(red_[i], false, i);
    std::sort(levels_.begin(), levels_.end());
  }

  GridPtr grid_;
  std::vector<LowRankBlock> blocks_;
  std::vector<SubdomainBox> red_;
  ModelInfo info_;
  std::unordered_map<std::uint64_t, std::pair<bool, std::size_t>> lookup_;
  std::vector<int> levels_;
};

/// Builds the factor pair of every green leaf from its stored range basis
/// (cols(Q) = 2 k_eps adjoint queries each). Red leaves become zero blocks.
inline GreenModel assemble(OperatorOracle& oracle, const PartitionTree& tree, int workers = 1,
                           std::optional<std::uint64_t> budget = std::nullopt) {
  const auto green = tree.leaves(Color::Green);
  const auto red = tree.leaves(Color::Red);
  const std::uint64_t start = oracle.queries();
  ModelInfo info;
  info.eps = tree.options.eps;
  info.kc = tree.options.kc;
  info.seed = tree.options.seed;
  info.final_level = tree.final_level;
  info.detection_queries = tree.detection_queries;
  info.partial = tree.budget_exceeded;
  if (!tree.nodes.empty()) {
    info.k = tree.nodes[0].decision.k;
    info.q = tree.nodes[0].decision.q;
  }

  std::uint64_t cost = 0;
  for (int id : green) cost += static_cast<std::uint64_t>(tree.nodes[static_cast<std::size_t>(id)].decision.q_range.cols());
  const std::uint64_t cap = budget ? *budget : tree.options.budget;
  std::vector<int> build = green;
  std::vector<SubdomainBox> zero;
  for (int id : red) zero.push_back(tree.nodes[static_cast<std::size_t>(id)].box);
  if (tree.detection_queries + cost > cap) {
    // Not enough budget left: every green leaf degrades to a zero block.
    info.partial = true;
    for (int id : green) zero.push_back(tree.nodes[static_cast<std::size_t>(id)].box);
    build.clear();
  }

  std::vector<LowRankBlock> blocks(build.size());
  parallel_for(build.size(), workers, [&](std::size_t i) {
    const PartitionNode& n = tree.nodes[static_cast<std::size_t>(build[i])];
    const BlockView op{&oracle, output_patch(oracle.grid(), n.box), input_patch(oracle.grid(), n.box)};
    FactorPair fp = project_approximant(op, n.decision.q_range);
    blocks[i] = LowRankBlock{n.box, std::move(fp.q), std::move(fp.ccols)};
  });
  info.approximation_queries = oracle.queries() - start;
  return GreenModel(oracle.grid(), std::move(blocks), std::move(zero), info);
}

/// u = F~ f for each column of f (full-grid samples).
inline Eigen::MatrixXd apply_green(const GreenModel& model, const Eigen::MatrixXd& f) {
  const Patch full = Patch::full(model.grid());
  require(f.rows() == full.size(), ErrorKind::Domain, "input does not live on the model grid");
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(f.rows(), f.cols());
  const Eigen::MatrixXd wf = full.weights().asDiagonal() * f;
  for (const auto& b : model.blocks()) {
    const auto& ry = b.ccols.patch.global_indices();
    const auto& rx = b.q.patch.global_indices();
    const Eigen::MatrixXd fy = wf(ry, Eigen::all);
    const Eigen::MatrixXd c = b.ccols.columns.transpose() * fy;
    const Eigen::MatrixXd ux = b.q.columns * c;
    for (Index l = 0; l < ux.rows(); ++l) u.row(rx[static_cast<std::size_t>(l)]) += ux.row(l);
  }
  return u;
}

inline Eigen::MatrixXd apply_green_adjoint(const GreenModel& model, const Eigen::MatrixXd& g) {
  const Patch full = Patch::full(model.grid());
  require(g.rows() == full.size(), ErrorKind::Domain, "input does not live on the model grid");
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(g.rows(), g.cols());
  const Eigen::MatrixXd wg = full.weights().asDiagonal() * g;
  for (const auto& b : model.blocks()) {
    const auto& ry = b.ccols.patch.global_indices();
    const auto& rx = b.q.patch.global_indices();
    const Eigen::MatrixXd gx = wg(rx, Eigen::all);
    const Eigen::MatrixXd c = b.q.columns.transpose() * gx;
    const Eigen::MatrixXd uy = b.ccols.columns * c;
    for (Index l = 0; l < uy.rows(); ++l) u.row(ry[static_cast<std::size_t>(l)]) += uy.row(l);
  }
  return u;
}

inline DiscreteFunction apply_green(const GreenModel& model, const DiscreteFunction& f) {
  return {Patch::full(model.grid()), apply_green(model, Eigen::MatrixXd(f.values)).col(0)};
}

/// Pointwise kernel value; 0 on red leaves.
inline double eval_point(const GreenModel& model, double x, double t, double y, double s) {
  const auto hit = model.locate({x, t, y, s});
  if (!hit || !hit->first) return 0.0;
  const LowRankBlock& b = model.blocks()[hit->second];
  const Eigen::RowVectorXd qx = PatchInterpolator(b.q.patch).row(b.q.columns, x, t);
  const Eigen::RowVectorXd cy = PatchInterpolator(b.ccols.patch).row(b.ccols.columns, y, s);
  return qx.dot(cy);
}

struct SliceRect {
  double x0, x1, t0, t1;
  bool green;
};

struct Slice {
  double y = 0.0, s = 0.0;
  int resolution = 0;
  std::vector<double> x, t;  // cell centers
  Eigen::MatrixXd approx;    // (i over x, j over t)
  std::optional<Eigen::MatrixXd> exact;
  std::vector<SliceRect> blocks;
};

/// Samples eval_point at cell centers (i + 0.5) / resolution.
inline Slice export_slice(const GreenModel& model, double y, double s, int resolution,
                          const std::function<double(double, double, double, double)>* exact = nullptr) {
  require(resolution >= 2, ErrorKind::Config, "slice resolution must be >= 2");
  require(y >= 0.0 && y <= 1.0 && s >= 0.0 && s <= 1.0, ErrorKind::Domain, "slice point outside [0,1]^2");
  Slice sl;
  sl.y = y;
  sl.s = s;
  sl.resolution = resolution;
  sl.approx.resize(resolution, resolution);
  if (exact) sl.exact = Eigen::MatrixXd(resolution, resolution);
  for (int i = 0; i < resolution; ++i) {
    sl.x.push_back((i + 0.5) / resolution);
    sl.t.push_back((i + 0.5) / resolution);
  }
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      sl.approx(i, j) = eval_point(model, sl.x[static_cast<std::size_t>(i)], sl.t[static_cast<std::size_t>(j)], y, s);
      if (exact) (*sl.exact)(i, j) = (*exact)(sl.x[static_cast<std::size_t>(i)], sl.t[static_cast<std::size_t>(j)], y, s);
    }
  auto add = [&](const SubdomainBox& b, bool green) {
    if (b.interval(2).contains(y) && b.interval(3).contains(s))
      sl.blocks.push_back({b.interval(0).lo(), b.interval(0).hi(), b.interval(1).lo(), b.interval(1).hi(), green});
  };
  for (const auto& b : model.blocks()) add(b.box, true);
  for (const auto& b : model.red_leaves()) add(b, false);
  return sl;
}

namespace detail {

inline Eigen::MatrixXd gaussian_probes(Index rows, Index cols, std::uint64_t seed) {
  Eigen::MatrixXd x(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    std::mt19937_64 gen(derive_seed(seed, static_cast<std::uint64_t>(j)));
    std::normal_distribution<double> normal;
    for (Index i = 0; i < rows; ++i) x(i, j) = normal(gen);
  }
  return x;
}

// Largest singular value of the map A (with adjoint At) by block power
// iteration on A* A followed by a Ritz step.
template <typename A, typename At>
double power_norm(const Patch& full, A&& apply, At&& adjoint, Index n_probe, std::uint64_t seed, int iterations) {
  Eigen::MatrixXd x = orthonormal_basis(full, gaussian_probes(full.size(), n_probe, seed));
  for (int it = 0; it < iterations; ++it) x = orthonormal_basis(full, adjoint(apply(x)));
  const Eigen::MatrixXd y = apply(x);
  const Eigen::VectorXd& sw = full.sqrt_weights();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sw.asDiagonal() * y);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

}  // namespace detail

/// Estimate of ||F - F~|| / ||F|| by block power iteration on both operators
/// with the same probes. Costs 2 n_probe (2 iterations + 1) oracle queries.
inline double estimate_operator_error(const GreenModel& model, OperatorOracle& oracle, Index n_probe,
                                      std::uint64_t seed, int iterations = 10) {
  require(n_probe >= 2, ErrorKind::Config, "operator error estimate needs at least 2 probes");
  const Patch full = oracle.domain();
  const double e = detail::power_norm(
      full, [&](const Eigen::MatrixXd& x) -> Eigen::MatrixXd { return oracle.apply(x) - apply_green(model, x); },
      [&](const Eigen::MatrixXd& y) -> Eigen::MatrixXd {
        return oracle.apply_adjoint(y) - apply_green_adjoint(model, y);
      },
      n_probe, seed, iterations);
  const double f = detail::power_norm(
      full, [&](const Eigen::MatrixXd& x) -> Eigen::MatrixXd { return oracle.apply(x); },
      [&](const Eigen::MatrixXd& y) -> Eigen::MatrixXd { return oracle.apply_adjoint(y); }, n_probe, seed,
      iterations);
  if (f == 0.0) return e == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return e / f;
}

struct DuhamelForcing {
  DiscreteFunction f;
  double mass = 0.0;      // discrete quadrature mass of [0, delta] in t
  bool smeared = false;   // delta exceeds one time panel
};

/// f(x,t) = chi_[0,delta](t) psi(x) / mass, where mass is the quadrature
/// measure of the t-nodes in [0, delta], so the discrete impulse integrates to psi.
inline DuhamelForcing duhamel_forcing(const GridPtr& grid, const std::function<double(double)>& psi, double delta) {
  require(delta > 0.0, ErrorKind::Config, "pulse width must be positive");
  const Grid1D& gt = grid->gt;
  DuhamelForcing out;
  for (std::size_t j = 0; j < gt.nodes.size(); ++j)
    if (gt.nodes[j] <= delta) out.mass += gt.weights[j];
  require(out.mass > 0.0, ErrorKind::Config, "pulse width is below the first time node");
  out.smeared = delta > gt.panel_width() * (1.0 + 1e-12);
  const double mass = out.mass;
  out.f = sample(Patch::full(grid), [&](double x, double t) { return t <= delta ? psi(x) / mass : 0.0; });
  return out;
}

/// Initial-velocity problem u(x,0) = 0, u_t(x,0) = psi via an impulsive forcing.
inline DiscreteFunction duhamel_solve(const GreenModel& model, const std::function<double(double)>& psi,
                                      std::optional<double> delta = std::nullopt, bool* smeared = nullptr) {
  const double d = delta ? *delta : model.grid()->gt.panel_width();
  const DuhamelForcing df = duhamel_forcing(model.grid(), psi, d);
  if (smeared) *smeared = df.smeared;
  return apply_green(model, df.f);
}

inline DiscreteFunction duhamel_solve(OperatorOracle& oracle, const std::function<double(double)>& psi,
                                      std::optional<double> delta = std::nullopt, bool* smeared = nullptr) {
  const double d = delta ? *delta : oracle.grid()->gt.panel_width();
  const DuhamelForcing df = duhamel_forcing(oracle.grid(), psi, d);
  if (smeared) *smeared = df.smeared;
  return oracle.apply(df.f);
}

/// d'Alembert solution of u_tt = c^2 u_xx, u(x,0) = 0, u_t(x,0) = chi_[a,b] on
/// the real line (valid on [0,1] before the first wall reflection).
inline double dalembert_box(double c, double a, double b, double x, double t) {
  const double lo = std::max(a, x - c * t), hi = std::min(b, x + c * t);
  return hi > lo ? (hi - lo) / (2.0 * c) : 0.0;
}

}  // namespace hypergreen
