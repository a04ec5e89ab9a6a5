#include <gtest/gtest.h>

#include <cmath>

#include "hypergreen/green_model.hpp"
#include "hypergreen/pipeline.hpp"
#include "hypergreen/synthetic.hpp"

using namespace hypergreen;

namespace {

PartitionTree partition(OperatorOracle& o, double eps, double kc, int max_level, std::uint64_t seed = 1) {
  PartitionOptions opt;
  opt.eps = eps;
  opt.kc = kc;
  opt.max_level = max_level;
  opt.seed = seed;
  return adaptive_partition(o, CovarianceKernel::squared_exponential(0.1), opt);
}

}  // namespace

TEST(Assemble, LowRankOperatorIsRecovered) {
  auto g = build_grid(4, 4);
  auto op = make_synthetic_operator({1.0, 0.3, 0.1}, g, 3);
  const auto tree = partition(*op, 0.2, 1.0, 2);
  const std::uint64_t before = op->queries();
  const GreenModel m = assemble(*op, tree);
  EXPECT_EQ(op->queries() - before, 10u);
  ASSERT_EQ(m.blocks().size(), 1u);
  EXPECT_FALSE(m.info().partial);
  const Eigen::MatrixXd f = Eigen::MatrixXd::Random(g->size(), 2);
  const Eigen::MatrixXd want = op->dense_kernel() * (Patch::full(g).weights().asDiagonal() * f);
  EXPECT_LT((apply_green(m, f) - want).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(estimate_operator_error(m, *op, 4, 1), 1e-8);
}

TEST(Assemble, AdjointIsConsistent) {
  auto g = build_grid(4, 6);
  auto oracle = make_exact_wave_oracle(WaveSpec{2.0, 0}, g);
  const auto tree = partition(*oracle, 0.05, 0.2, 2);
  const GreenModel m = assemble(*oracle, tree);
  const Patch full = Patch::full(g);
  const Eigen::VectorXd& w = full.weights();
  const Eigen::MatrixXd f = Eigen::MatrixXd::Random(g->size(), 1), h = Eigen::MatrixXd::Random(g->size(), 1);
  const double a = (w.array() * apply_green(m, f).col(0).array() * h.col(0).array()).sum();
  const double b = (w.array() * f.col(0).array() * apply_green_adjoint(m, h).col(0).array()).sum();
  EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
}

TEST(Assemble, BudgetShortfallDegradesToZeroBlocks) {
  auto g = build_grid(4, 4);
  auto op = make_synthetic_operator({1.0, 0.3}, g, 3);
  const auto tree = partition(*op, 0.2, 1.0, 1);
  const GreenModel m = assemble(*op, tree, 1, tree.detection_queries + 3);
  EXPECT_TRUE(m.info().partial);
  EXPECT_TRUE(m.blocks().empty());
  EXPECT_EQ(m.red_leaves().size(), 1u);
}

TEST(Model, LocateBreaksTiesByCorner) {
  auto g = build_grid(4, 2);
  std::vector<SubdomainBox> red;
  for (const auto& b : subdivide(SubdomainBox::root(), 2)) red.push_back(b);
  const GreenModel m(g, {}, red);
  const auto hit = m.locate({0.5, 0.5, 0.5, 0.5});
  ASSERT_TRUE(hit);
  const auto& box = m.red_leaves()[hit->second];
  EXPECT_EQ(box.index, (std::array<std::int64_t, 4>{0, 0, 0, 0}));
  const auto inner = m.locate({0.75, 0.25, 0.9, 0.1});
  EXPECT_EQ(m.red_leaves()[inner->second].index, (std::array<std::int64_t, 4>{1, 0, 1, 0}));
  EXPECT_THROW(GreenModel(g, {}, {red[0], red[0]}), Error);
}

TEST(Model, PointEvaluationInterpolatesSmoothKernels) {
  auto g = build_grid(4, 8);
  const Patch full = Patch::full(g);
  // Rank-2 smooth kernel through known factors.
  Eigen::MatrixXd u(full.size(), 2), v(full.size(), 2);
  for (Index l = 0; l < full.size(); ++l) {
    u(l, 0) = std::cos(full.x(l) + full.t(l));
    u(l, 1) = full.x(l) * full.t(l);
    v(l, 0) = std::exp(-full.x(l));
    v(l, 1) = std::sin(2 * full.t(l));
  }
  const Eigen::MatrixXd qu = orthonormal_basis(full, u), qv = orthonormal_basis(full, v);
  SyntheticOperator op(g, qu, Eigen::Vector2d(2.0, 0.5), qv);
  const auto tree = partition(op, 0.2, 1.0, 1);
  const GreenModel m = assemble(op, tree);
  const PatchInterpolator ip(full);
  for (auto p : {std::array<double, 4>{0.1, 0.2, 0.3, 0.4}, {0.77, 0.61, 0.05, 0.93}, {0.5, 0.5, 0.5, 0.5}}) {
    const double want = ip.row(qu, p[0], p[1]) * Eigen::Vector2d(2.0, 0.5).asDiagonal() * ip.row(qv, p[2], p[3]).transpose();
    EXPECT_NEAR(eval_point(m, p[0], p[1], p[2], p[3]), want, 1e-10);
  }
}

TEST(Model, SliceExportsGridAndBlocks) {
  auto g = build_grid(4, 4);
  auto op = make_synthetic_operator({1.0, 0.3}, g, 3);
  const GreenModel m = assemble(*op, partition(*op, 0.2, 1.0, 1));
  const std::function<double(double, double, double, double)> zero = [](double, double, double, double) { return 0.0; };
  const Slice s = export_slice(m, 0.8, 0.1, 16, &zero);
  EXPECT_EQ(s.approx.rows(), 16);
  EXPECT_EQ(s.x.front(), 1.0 / 32.0);
  ASSERT_TRUE(s.exact.has_value());
  ASSERT_EQ(s.blocks.size(), 1u);
  EXPECT_TRUE(s.blocks[0].green);
  EXPECT_THROW(export_slice(m, 1.2, 0.1, 16), Error);
  EXPECT_THROW(export_slice(m, 0.2, 0.1, 1), Error);
}

TEST(ErrorEstimate, PlantedErrorIsRecovered) {
  auto g = build_grid(4, 4);
  const Patch full = Patch::full(g);
  const Eigen::MatrixXd u = random_orthonormal(g, 6, 1), v = random_orthonormal(g, 6, 2);
  Eigen::VectorXd s(6);
  s << 1.0, 0.7, 0.5, 0.3, 0.2, 0.1;
  SyntheticOperator truth(g, u, s, v);
  // Model keeps the first three terms; the residual has norm 0.3.
  const Quasimatrix q{full, u.leftCols(3)};
  const Quasimatrix c{full, v.leftCols(3) * s.head(3).asDiagonal()};
  const GreenModel m(g, {LowRankBlock{SubdomainBox::root(), q, c}}, {});
  const double e = estimate_operator_error(m, truth, 4, 9, 10);
  EXPECT_NEAR(e, 0.3, 0.05 * 0.3);
}

TEST(Duhamel, ForcingHasUnitMassAndFlagsSmearing) {
  auto g = build_grid(8, 8);
  const auto psi = [](double x) { return x >= 0.2 && x <= 0.3 ? 1.0 : 0.0; };
  const auto df = duhamel_forcing(g, psi, 0.125);
  EXPECT_NEAR(df.mass, 0.125, 1e-14);
  EXPECT_FALSE(df.smeared);
  EXPECT_TRUE(duhamel_forcing(g, psi, 0.3).smeared);
  EXPECT_THROW(duhamel_forcing(g, psi, 0.0), Error);
  EXPECT_THROW(duhamel_forcing(g, psi, 1e-5), Error);
}

TEST(Duhamel, DalembertReference) {
  EXPECT_DOUBLE_EQ(dalembert_box(2.0, 0.2, 0.3, 0.25, 0.01), 0.04 / 4.0);
  EXPECT_DOUBLE_EQ(dalembert_box(2.0, 0.2, 0.3, 0.25, 0.1), 0.1 / 4.0);
  EXPECT_DOUBLE_EQ(dalembert_box(2.0, 0.2, 0.3, 0.6, 0.1), 0.0);
}

TEST(Pipeline, QueryCountsMatchFormulas) {
  auto g = build_grid(4, 6);
  RunConfig cfg;
  cfg.panels = 4;
  cfg.nodes = 6;
  cfg.kc = 0.2;
  cfg.max_level = 2;
  cfg.probes = 2;
  cfg.power_iterations = 3;
  auto oracle = make_oracle(cfg, g);
  const LearnResult r = learn(*oracle, cfg);
  EXPECT_EQ(r.detection_queries, r.detection_formula);
  EXPECT_EQ(r.approximation_queries, r.approximation_formula);
  EXPECT_EQ(r.validation_queries, 2u * 2u * 7u);
  EXPECT_EQ(oracle->queries(), r.detection_queries + r.approximation_queries + r.validation_queries);
  EXPECT_GT(r.relative_error, 0.0);
  EXPECT_LT(r.relative_error, 1.0);
}

TEST(Pipeline, SlopeFit) {
  EXPECT_NEAR(loglog_slope({1, 10, 100}, {1, 0.1, 0.01}), -1.0, 1e-14);
  EXPECT_THROW(loglog_slope({1}, {1}), Error);
  EXPECT_THROW(loglog_slope({1, 1}, {1, 2}), Error);
}

TEST(Pipeline, ConeInterior) {
  const WaveSpec spec{2.0, 0};
  EXPECT_TRUE(in_cone_interior(spec, SubdomainBox{3, {3, 2, 3, 0}}));
  EXPECT_FALSE(in_cone_interior(spec, SubdomainBox{3, {3, 1, 3, 4}}));
  EXPECT_FALSE(in_cone_interior(spec, SubdomainBox{1, {0, 1, 0, 0}}));
}
