#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "hypergreen/rank_detect.hpp"
#include "hypergreen/synthetic.hpp"

using namespace hypergreen;

TEST(KEpsilon, Values) {
  EXPECT_EQ(k_epsilon(0.1), 10);
  EXPECT_EQ(k_epsilon(0.05), 20);
  EXPECT_EQ(k_epsilon(0.3), 4);
  EXPECT_EQ(k_epsilon(0.15), 7);
  EXPECT_EQ(k_epsilon(0.1, 0.2), 4);
  EXPECT_EQ(k_epsilon(0.1, 2.5), 25);
  EXPECT_THROW(k_epsilon(0.5), Error);
  EXPECT_THROW(k_epsilon(0.0), Error);
  EXPECT_THROW(k_epsilon(0.1, 0.0), Error);
}

TEST(PowerExponent, DefaultAndGapRules) {
  EXPECT_EQ(choose_power_exponent(0.1, 1.0), 3);
  EXPECT_EQ(choose_power_exponent(0.4, 1.0), 1);
  EXPECT_EQ(choose_power_exponent(0.1, 10.0, std::numeric_limits<double>::infinity()), 0);
  // log(1 + 10 + 200) / log 2 = 7.72 -> ceil(3.36) = 4
  EXPECT_EQ(choose_power_exponent(0.1, 10.0, 2.0), 4);
  EXPECT_EQ(choose_power_exponent(0.1, 10.0, 1e6), 0);
  try {
    choose_power_exponent(0.1, 10.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Gap);
  }
}

TEST(DetectRank, ZeroBlockIsLowRank) {
  auto g = build_grid(2, 4);
  ZeroOracle z(g);
  const auto d = detect_rank(z, SubdomainBox::root(), CovarianceKernel::squared_exponential(0.2), {0.2, 1.0, 1, 3});
  EXPECT_EQ(d.verdict, Verdict::LowRank);
  EXPECT_TRUE(d.zero_block);
  EXPECT_EQ(d.queries, static_cast<std::uint64_t>(5 * 13));
}

TEST(DetectRank, LowAndHighRankSynthetics) {
  auto g = build_grid(4, 4);
  const auto kernel = CovarianceKernel::squared_exponential(0.1);
  const DetectOptions opt{0.1, 1.0, std::nullopt, 21};
  auto low = make_synthetic_operator({1.0, 0.5, 0.3, 0.01, 0.001}, g, 2);
  const auto dl = detect_rank(*low, SubdomainBox::root(), kernel, opt);
  EXPECT_EQ(dl.verdict, Verdict::LowRank);
  EXPECT_EQ(dl.k, 10);
  EXPECT_EQ(dl.q, 3);
  EXPECT_EQ(dl.queries, 10u * 29u);
  EXPECT_EQ(low->queries(), dl.queries);

  auto high = make_synthetic_operator(std::vector<double>(40, 1.0), g, 2);
  const auto dh = detect_rank(*high, SubdomainBox::root(), kernel, opt);
  EXPECT_EQ(dh.verdict, Verdict::HighRank);
  EXPECT_GE(dh.sigma(dh.k - 1), 0.4 * dh.sigma(0));
}

TEST(DetectRank, ThresholdIsFourEpsilon) {
  auto g = build_grid(4, 4);
  const auto kernel = CovarianceKernel::squared_exponential(0.1);
  // sigma_4 exactly resolved with rank 4: sigma_4 / sigma_1 = 0.35 vs 4 eps.
  auto op = make_synthetic_operator({1.0, 0.8, 0.6, 0.35}, g, 8);
  const auto below = detect_rank(*op, SubdomainBox::root(), kernel, {0.1, 0.4, 1, 5});
  EXPECT_NEAR(below.sigma(3), 0.35, 1e-10);
  EXPECT_EQ(below.verdict, Verdict::LowRank);  // 0.35 < 0.4
  const auto above = detect_rank(*op, SubdomainBox::root(), kernel, {0.08, 0.32, 1, 5});
  EXPECT_EQ(above.verdict, Verdict::HighRank);  // 0.35 >= 0.32
}

TEST(DetectRank, SubBoxUsesRestrictedPatches) {
  auto g = build_grid(4, 4);
  auto op = make_synthetic_operator(std::vector<double>(30, 1.0), g, 4);
  const SubdomainBox box{1, {1, 0, 0, 1}};
  const auto d = detect_rank(*op, box, CovarianceKernel::squared_exponential(0.1), {0.2, 1.0, 1, 9});
  EXPECT_TRUE(d.q_range.patch == output_patch(g, box));
  EXPECT_EQ(d.q_range.cols(), 10);
  const auto sp = kernel_spectrum(CovarianceKernel::squared_exponential(0.1), output_patch(g, box));
  EXPECT_THROW(detect_rank(*op, box, sp, {0.2, 1.0, 1, 9}), Error);
}

TEST(DetectRank, SameSeedSameDecision) {
  auto g = build_grid(4, 4);
  auto op = make_synthetic_operator({1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.45}, g, 4);
  const auto kernel = CovarianceKernel::squared_exponential(0.1);
  const auto a = detect_rank(*op, SubdomainBox::root(), kernel, {0.2, 1.0, 1, 77});
  const auto b = detect_rank(*op, SubdomainBox::root(), kernel, {0.2, 1.0, 1, 77});
  EXPECT_EQ((a.sigma - b.sigma).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(a.verdict, b.verdict);
}
