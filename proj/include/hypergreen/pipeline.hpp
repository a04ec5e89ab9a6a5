#pragma once
//
// End-to-end drivers shared by the CLI and the experiment suites.
//

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hypergreen/error.hpp"
#include "hypergreen/gp.hpp"
#include "hypergreen/green_model.hpp"
#include "hypergreen/grid.hpp"
#include "hypergreen/oracle.hpp"
#include "hypergreen/parallel.hpp"
#include "hypergreen/partition.hpp"
#include "hypergreen/wave.hpp"

namespace hypergreen {

enum class OracleKind { Exact, Upwind1, Ctcs2, Zero };

inline const char* to_string(OracleKind k) {
  switch (k) {
    case OracleKind::Exact: return "exact";
    case OracleKind::Upwind1: return "upwind1";
    case OracleKind::Ctcs2: return "ctcs2";
    case OracleKind::Zero: return "zero";
  }
  return "unknown";
}

inline OracleKind parse_oracle_kind(const std::string& s) {
  if (s == "exact") return OracleKind::Exact;
  if (s == "upwind1") return OracleKind::Upwind1;
  if (s == "ctcs2") return OracleKind::Ctcs2;
  if (s == "zero") return OracleKind::Zero;
  fail(ErrorKind::Config, "unknown oracle '" + s + "' (expected exact, upwind1, ctcs2 or zero)");
}

struct RunConfig {
  OracleKind oracle = OracleKind::Exact;
  double c = 2.0;
  double eps = 0.1;
  double ell = 0.1;
  double variance = 1.0;
  int panels = 8;
  int nodes = 8;
  double kc = 1.0;
  std::optional<int> q;  // fixed power exponent; auto otherwise
  std::uint64_t seed = 7;
  std::uint64_t budget = 2'000'000;
  int workers = 1;
  std::optional<int> max_level;  // default: grid alignment bound
  FdOptions fd;
  int probes = 4;
  int power_iterations = 10;

  void validate() const {
    require(eps > 0.0 && eps < 0.5, ErrorKind::Config, "eps must lie in (0, 1/2)");
    require(c > 0.0, ErrorKind::Config, "wave speed must be positive");
    require(ell > 0.0 && variance > 0.0, ErrorKind::Config, "kernel parameters must be positive");
    require(panels >= 1 && nodes >= 2, ErrorKind::Config, "grid needs panels >= 1 and nodes >= 2");
    require(kc > 0.0, ErrorKind::Config, "rank constant must be positive");
    require(!q || *q >= 0, ErrorKind::Config, "power exponent must be >= 0");
    require(workers >= 1, ErrorKind::Config, "worker count must be >= 1");
    require(probes >= 2, ErrorKind::Config, "operator error estimate needs at least 2 probes");
  }
};

inline OraclePtr make_oracle(const RunConfig& cfg, const GridPtr& grid) {
  switch (cfg.oracle) {
    case OracleKind::Exact: return make_exact_wave_oracle(WaveSpec{cfg.c, 0}, grid);
    case OracleKind::Upwind1:
      return make_fd_oracle(FdScheme::Upwind1, constant_coefficient(cfg.c * cfg.c), grid, cfg.fd, cfg.workers);
    case OracleKind::Ctcs2:
      return make_fd_oracle(FdScheme::Ctcs2, constant_coefficient(cfg.c * cfg.c), grid, cfg.fd, cfg.workers);
    case OracleKind::Zero: return std::make_shared<ZeroOracle>(grid);
  }
  fail(ErrorKind::Config, "unknown oracle");
}

struct LearnResult {
  PartitionTree tree;
  GreenModel model;
  std::uint64_t detection_queries = 0;
  std::uint64_t approximation_queries = 0;
  std::uint64_t validation_queries = 0;
  std::uint64_t detection_formula = 0;      // sum over tested boxes of k (8q + 5)
  std::uint64_t approximation_formula = 0;  // sum over green leaves of 2k
  double relative_error = 0.0;
  bool budget_exceeded = false;
};

inline PartitionOptions partition_options(const RunConfig& cfg, const Grid2D& grid) {
  PartitionOptions p;
  p.eps = cfg.eps;
  p.kc = cfg.kc;
  p.q = cfg.q;
  p.seed = cfg.seed;
  p.max_level = cfg.max_level ? *cfg.max_level : grid.max_aligned_level();
  p.budget = cfg.budget;
  p.workers = cfg.workers;
  return p;
}

/// Partition, assemble and (optionally) estimate the relative operator error.
inline LearnResult learn(OperatorOracle& oracle, const RunConfig& cfg, bool estimate_error = true) {
  cfg.validate();
  SpectrumCache spectra(CovarianceKernel::squared_exponential(cfg.ell, cfg.variance));
  LearnResult r;
  const std::uint64_t q0 = oracle.queries();
  r.tree = adaptive_partition(oracle, spectra, partition_options(cfg, *oracle.grid()));
  r.detection_queries = oracle.queries() - q0;
  const std::uint64_t q1 = oracle.queries();
  r.model = assemble(oracle, r.tree, cfg.workers, cfg.budget);
  r.approximation_queries = oracle.queries() - q1;
  r.budget_exceeded = r.tree.budget_exceeded || r.model.info().partial;

  for (const auto& n : r.tree.nodes)
    r.detection_formula += static_cast<std::uint64_t>(n.decision.k) * static_cast<std::uint64_t>(8 * n.decision.q + 5);
  for (int id : r.tree.leaves(Color::Green))
    if (!r.model.info().partial) r.approximation_formula += 2u * static_cast<std::uint64_t>(r.tree.nodes[static_cast<std::size_t>(id)].decision.k);

  if (estimate_error) {
    const std::uint64_t q2 = oracle.queries();
    r.relative_error = estimate_operator_error(r.model, oracle, cfg.probes, derive_seed(cfg.seed, 0xE44),
                                               cfg.power_iterations);
    r.validation_queries = oracle.queries() - q2;
  }
  return r;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::Config, "slope fit needs at least two points");
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0 && y[i] > 0, ErrorKind::Numerical, "slope fit needs positive data");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  require(sxx > 0, ErrorKind::Numerical, "slope fit needs distinct query counts");
  return sxy / sxx;
}

/// True when the exact kernel is a nonzero constant on the box (sampled on a
/// 9^4 lattice of interior points): the box sits inside the light cone and
/// away from every characteristic.
inline bool in_cone_interior(const WaveSpec& spec, const SubdomainBox& b, int per_side = 9) {
  const double h = b.side();
  const auto lo = b.corner();
  double first = 0.0;
  bool have = false;
  for (int i = 0; i < per_side; ++i)
    for (int j = 0; j < per_side; ++j)
      for (int k = 0; k < per_side; ++k)
        for (int l = 0; l < per_side; ++l) {
          auto at = [&](int d, int m) { return lo[static_cast<std::size_t>(d)] + h * (m + 0.5) / per_side; };
          const double g = exact_wave_green_value(spec, at(0, i), at(1, j), at(2, k), at(3, l));
          if (!have) {
            first = g;
            have = true;
          }
          if (g != first || g == 0.0) return false;
        }
  return true;
}

}  // namespace hypergreen
