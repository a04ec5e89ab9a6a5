#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>

#include "hypergreen/error.hpp"
#include "hypergreen/gp.hpp"
#include "hypergreen/grid.hpp"
#include "hypergreen/oracle.hpp"
#include "hypergreen/rsvd.hpp"

namespace hypergreen {

/// k_eps = max(4, ceil(C / eps)).
inline int k_epsilon(double eps, double c = 1.0) {
  require(eps > 0.0 && eps < 0.5, ErrorKind::Config, "eps must lie in (0, 1/2)");
  require(c > 0.0, ErrorKind::Config, "rank constant C must be positive");
  // Guard against C/eps landing a hair above an integer through rounding.
  const double r = c / eps;
  const double nearest = std::round(r);
  const int k = static_cast<int>(std::abs(r - nearest) < 1e-9 * r ? nearest : std::ceil(r));
  return std::max(4, k);
}

/// Power exponent. With a known gap sigma_k / sigma_{k+1}:
/// max(0, ceil((log(1 + A + 2A/eps) / log(gap) - 1) / 2)); otherwise ceil(log(1/eps)).
inline int choose_power_exponent(double eps, double a, std::optional<double> gap = std::nullopt) {
  require(eps > 0.0 && eps < 0.5, ErrorKind::Config, "eps must lie in (0, 1/2)");
  if (!gap) return static_cast<int>(std::ceil(std::log(1.0 / eps)));
  require(a >= 1.0, ErrorKind::Config, "error factor A must be >= 1");
  require(*gap > 1.0, ErrorKind::Gap, "singular value gap must exceed 1");
  if (std::isinf(*gap)) return 0;
  const double v = 0.5 * (std::log(1.0 + a + 2.0 * a / eps) / std::log(*gap) - 1.0);
  return std::max(0, static_cast<int>(std::ceil(v)));
}

enum class Verdict { LowRank, HighRank };

inline const char* to_string(Verdict v) { return v == Verdict::LowRank ? "low-rank" : "high-rank"; }

struct RankDecision {
  Verdict verdict = Verdict::LowRank;
  SubdomainBox box;
  int k = 0;
  int q = 0;
  Eigen::VectorXd sigma;  // sigma-hat_1..k
  Quasimatrix q_range;    // reusable basis of Z on the output patch
  std::uint64_t queries = 0;
  bool zero_block = false;      // sigma-hat_1 == 0
  bool rank_deficient = false;  // fewer than k nonzero directions in the sketch
};

struct DetectOptions {
  double eps = 0.1;
  double kc = 1.0;            // C in k_eps
  std::optional<int> q;       // fixed power exponent; default ceil(log(1/eps))
  std::uint64_t seed = 0;
};

inline Patch output_patch(const GridPtr& g, const SubdomainBox& box) {
  return Patch::from_intervals(g, box.interval(0), box.interval(1));
}
inline Patch input_patch(const GridPtr& g, const SubdomainBox& box) {
  return Patch::from_intervals(g, box.interval(2), box.interval(3));
}

/// Rank test on R_X F R_Y^*: verdict is LowRank iff sigma-hat_k < 4 eps sigma-hat_1.
/// `spectrum` must be the covariance spectrum on the input patch of `box`.
inline RankDecision detect_rank(OperatorOracle& oracle, const SubdomainBox& box, const KernelSpectrum& spectrum,
                                const DetectOptions& opt) {
  const int k = k_epsilon(opt.eps, opt.kc);
  const int q = opt.q ? *opt.q : choose_power_exponent(opt.eps, 1.0);
  require(q >= 0, ErrorKind::Config, "power exponent must be >= 0");
  const BlockView op{&oracle, output_patch(oracle.grid(), box), input_patch(oracle.grid(), box)};
  require(spectrum.patch == op.y, ErrorKind::Domain, "covariance spectrum is not on the input box");

  const Quasimatrix omega = sample_gp(spectrum, 2 * k, opt.seed);
  SpectralEstimate est = estimate_singular_values(op, omega, k, q);

  RankDecision d;
  d.box = box;
  d.k = k;
  d.q = q;
  d.sigma = est.sigma;
  d.q_range = std::move(est.q);
  d.queries = est.queries;
  d.rank_deficient = est.rank_deficient;
  const double s1 = d.sigma.size() ? d.sigma(0) : 0.0;
  const double sk = d.sigma.size() >= k ? d.sigma(k - 1) : 0.0;
  d.zero_block = s1 == 0.0;
  d.verdict = (d.zero_block || sk < 4.0 * opt.eps * s1) ? Verdict::LowRank : Verdict::HighRank;
  return d;
}

inline RankDecision detect_rank(OperatorOracle& oracle, const SubdomainBox& box, const CovarianceKernel& kernel,
                                const DetectOptions& opt) {
  return detect_rank(oracle, box, kernel_spectrum(kernel, input_patch(oracle.grid(), box)), opt);
}

}  // namespace hypergreen
