#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "hypergreen/error.hpp"
#include "hypergreen/gp.hpp"
#include "hypergreen/grid.hpp"
#include "hypergreen/oracle.hpp"
#include "hypergreen/rsvd.hpp"

namespace hypergreen {

/// F = U diag(sigma) V* with w-orthonormal U, V: a known-SVD test operator.
class SyntheticOperator : public OperatorOracle {
 public:
  SyntheticOperator(GridPtr grid, Eigen::MatrixXd u, Eigen::VectorXd sigma, Eigen::MatrixXd v)
      : OperatorOracle(std::move(grid)), u_(std::move(u)), sigma_(std::move(sigma)), v_(std::move(v)) {
    require(u_.rows() == domain().size() && v_.rows() == domain().size(), ErrorKind::Dimension,
            "factor rows do not match the grid");
    require(u_.cols() == sigma_.size() && v_.cols() == sigma_.size(), ErrorKind::Dimension,
            "factor ranks do not match the singular values");
    for (Index i = 0; i < sigma_.size(); ++i) {
      require(sigma_(i) >= 0.0, ErrorKind::Config, "singular values must be nonnegative");
      require(i == 0 || sigma_(i) <= sigma_(i - 1), ErrorKind::Config, "singular values must be sorted descending");
    }
  }

  const Eigen::MatrixXd& left() const { return u_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& right() const { return v_; }
  Index rank() const { return sigma_.size(); }

  /// sigma_j for j >= 1 (1-based), zero past the rank.
  double singular_value(Index j) const { return j <= sigma_.size() ? sigma_(j - 1) : 0.0; }

  /// Exact ||F - Q Q* F|| for a w-orthonormal Q on the full grid.
  double projection_error(const Eigen::MatrixXd& q) const {
    const Eigen::VectorXd& w = domain().weights();
    const Eigen::MatrixXd c = q.transpose() * (w.asDiagonal() * u_);  // Q* U
    // (U S)* (I - Q Q*) (U S) = S (I - C^T C) S
    const Eigen::MatrixXd g = sigma_.asDiagonal() * (Eigen::MatrixXd::Identity(rank(), rank()) - c.transpose() * c) *
                              sigma_.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }

  Eigen::MatrixXd dense_kernel() const { return u_ * sigma_.asDiagonal() * v_.transpose(); }

 protected:
  Eigen::MatrixXd apply_impl(const Eigen::MatrixXd& f) const override {
    return u_ * (sigma_.asDiagonal() * (v_.transpose() * (domain().weights().asDiagonal() * f)));
  }
  Eigen::MatrixXd apply_adjoint_impl(const Eigen::MatrixXd& g) const override {
    return v_ * (sigma_.asDiagonal() * (u_.transpose() * (domain().weights().asDiagonal() * g)));
  }
  Eigen::MatrixXd apply_block_impl(const Patch& x, const Patch& y, const Eigen::MatrixXd& f) const override {
    const Eigen::MatrixXd ux = u_(x.global_indices(), Eigen::all);
    const Eigen::MatrixXd vy = v_(y.global_indices(), Eigen::all);
    return ux * (sigma_.asDiagonal() * (vy.transpose() * (y.weights().asDiagonal() * f)));
  }
  Eigen::MatrixXd apply_block_adjoint_impl(const Patch& x, const Patch& y,
                                           const Eigen::MatrixXd& g) const override {
    const Eigen::MatrixXd ux = u_(x.global_indices(), Eigen::all);
    const Eigen::MatrixXd vy = v_(y.global_indices(), Eigen::all);
    return vy * (sigma_.asDiagonal() * (ux.transpose() * (x.weights().asDiagonal() * g)));
  }

 private:
  Eigen::MatrixXd u_;
  Eigen::VectorXd sigma_;
  Eigen::MatrixXd v_;
};

/// r random w-orthonormal columns on the full grid.
inline Eigen::MatrixXd random_orthonormal(const GridPtr& grid, Index r, std::uint64_t seed) {
  const Patch full = Patch::full(grid);
  require(r >= 0 && r <= full.size(), ErrorKind::Dimension, "rank exceeds the number of grid points");
  Eigen::MatrixXd g(full.size(), r);
  for (Index j = 0; j < r; ++j) {
    std::mt19937_64 gen(derive_seed(seed, static_cast<std::uint64_t>(j)));
    std::normal_distribution<double> normal;
    for (Index i = 0; i < full.size(); ++i) g(i, j) = normal(gen);
  }
  return orthonormal_basis(full, g);
}

/// Known-SVD operator with random left and right factors.
inline std::shared_ptr<SyntheticOperator> make_synthetic_operator(const std::vector<double>& sigmas, GridPtr grid,
                                                                  std::uint64_t seed) {
  const Index r = static_cast<Index>(sigmas.size());
  require(r <= grid->size(), ErrorKind::Dimension, "rank exceeds the number of grid points");
  Eigen::MatrixXd u = random_orthonormal(grid, r, derive_seed(seed, 0));
  Eigen::MatrixXd v = random_orthonormal(grid, r, derive_seed(seed, 1));
  return std::make_shared<SyntheticOperator>(std::move(grid), std::move(u),
                                             Eigen::Map<const Eigen::VectorXd>(sigmas.data(), r), std::move(v));
}

/// Known-SVD operator with prescribed right factors (e.g. kernel eigenfunctions).
inline std::shared_ptr<SyntheticOperator> make_synthetic_operator(const std::vector<double>& sigmas, GridPtr grid,
                                                                  const Eigen::MatrixXd& right, std::uint64_t seed) {
  const Index r = static_cast<Index>(sigmas.size());
  require(right.rows() == grid->size() && right.cols() >= r, ErrorKind::Dimension,
          "right factor does not match the grid or rank");
  Eigen::MatrixXd u = random_orthonormal(grid, r, derive_seed(seed, 0));
  return std::make_shared<SyntheticOperator>(std::move(grid), std::move(u),
                                             Eigen::Map<const Eigen::VectorXd>(sigmas.data(), r), right.leftCols(r));
}

}  // namespace hypergreen
