#pragma once
//
// Black-box access to a solution operator F on L2([0,1]^2): apply and adjoint,
// with a tally of input-output pairs. Every column pushed through apply or
// apply_adjoint costs one pair, including restricted-block applications.
//

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <memory>
#include <utility>

#include "hypergreen/error.hpp"
#include "hypergreen/grid.hpp"

namespace hypergreen {

class OperatorOracle {
 public:
  explicit OperatorOracle(GridPtr grid) : grid_(std::move(grid)), full_(Patch::full(grid_)) {}
  virtual ~OperatorOracle() = default;
  OperatorOracle(const OperatorOracle&) = delete;
  OperatorOracle& operator=(const OperatorOracle&) = delete;

  const GridPtr& grid() const { return grid_; }
  const Patch& domain() const { return full_; }

  std::uint64_t queries() const { return queries_.load(); }
  void reset_queries() { queries_.store(0); }

  /// u = F f for each column of f (node samples on the full grid).
  Eigen::MatrixXd apply(const Eigen::MatrixXd& f) {
    require(f.rows() == full_.size(), ErrorKind::Domain, "input does not live on the oracle grid");
    charge(f.cols());
    return apply_impl(f);
  }

  /// g -> F* g with respect to the weighted inner product.
  Eigen::MatrixXd apply_adjoint(const Eigen::MatrixXd& g) {
    require(g.rows() == full_.size(), ErrorKind::Domain, "input does not live on the oracle grid");
    charge(g.cols());
    return apply_adjoint_impl(g);
  }

  /// R_X F R_Y^* applied to columns sampled on Y.
  Eigen::MatrixXd apply_block(const Patch& x, const Patch& y, const Eigen::MatrixXd& f) {
    require(f.rows() == y.size(), ErrorKind::Domain, "block input does not live on the input patch");
    charge(f.cols());
    return apply_block_impl(x, y, f);
  }

  /// R_Y F^* R_X^* applied to columns sampled on X.
  Eigen::MatrixXd apply_block_adjoint(const Patch& x, const Patch& y, const Eigen::MatrixXd& g) {
    require(g.rows() == x.size(), ErrorKind::Domain, "block input does not live on the output patch");
    charge(g.cols());
    return apply_block_adjoint_impl(x, y, g);
  }

  DiscreteFunction apply(const DiscreteFunction& f) {
    require(f.patch == full_, ErrorKind::Domain, "input does not live on the oracle grid");
    return {full_, apply(Eigen::MatrixXd(f.values)).col(0)};
  }
  DiscreteFunction apply_adjoint(const DiscreteFunction& g) {
    require(g.patch == full_, ErrorKind::Domain, "input does not live on the oracle grid");
    return {full_, apply_adjoint(Eigen::MatrixXd(g.values)).col(0)};
  }

 protected:
  virtual Eigen::MatrixXd apply_impl(const Eigen::MatrixXd& f) const = 0;
  virtual Eigen::MatrixXd apply_adjoint_impl(const Eigen::MatrixXd& g) const = 0;

  virtual Eigen::MatrixXd apply_block_impl(const Patch& x, const Patch& y, const Eigen::MatrixXd& f) const {
    return restrict_rows(full_, x, apply_impl(extend_rows(y, full_, f)));
  }
  virtual Eigen::MatrixXd apply_block_adjoint_impl(const Patch& x, const Patch& y,
                                                   const Eigen::MatrixXd& g) const {
    return restrict_rows(full_, y, apply_adjoint_impl(extend_rows(x, full_, g)));
  }

 private:
  void charge(Index n) { queries_.fetch_add(static_cast<std::uint64_t>(n)); }

  GridPtr grid_;
  Patch full_;
  std::atomic<std::uint64_t> queries_{0};
};

using OraclePtr = std::shared_ptr<OperatorOracle>;

/// Oracle backed by a tabulated kernel matrix K(i,j) = G(z_i; z_j):
/// F f = K (w .* f), F* g = K^T (w .* g).
class KernelMatrixOracle : public OperatorOracle {
 public:
  KernelMatrixOracle(GridPtr grid, Eigen::MatrixXd kernel)
      : OperatorOracle(std::move(grid)), k_(std::move(kernel)) {
    require(k_.rows() == domain().size() && k_.cols() == domain().size(), ErrorKind::Dimension,
            "kernel matrix does not match the grid");
  }

  const Eigen::MatrixXd& kernel() const { return k_; }

 protected:
  Eigen::MatrixXd apply_impl(const Eigen::MatrixXd& f) const override {
    return k_ * (domain().weights().asDiagonal() * f);
  }
  Eigen::MatrixXd apply_adjoint_impl(const Eigen::MatrixXd& g) const override {
    return k_.transpose() * (domain().weights().asDiagonal() * g);
  }
  Eigen::MatrixXd apply_block_impl(const Patch& x, const Patch& y, const Eigen::MatrixXd& f) const override {
    return block(x, y) * (y.weights().asDiagonal() * f);
  }
  Eigen::MatrixXd apply_block_adjoint_impl(const Patch& x, const Patch& y,
                                           const Eigen::MatrixXd& g) const override {
    return block(x, y).transpose() * (x.weights().asDiagonal() * g);
  }

 private:
  Eigen::MatrixXd block(const Patch& x, const Patch& y) const {
    const auto& rx = x.global_indices();
    const auto& ry = y.global_indices();
    return k_(rx, ry);
  }

  Eigen::MatrixXd k_;
};

/// The zero operator.
class ZeroOracle : public OperatorOracle {
 public:
  using OperatorOracle::OperatorOracle;

 protected:
  Eigen::MatrixXd apply_impl(const Eigen::MatrixXd& f) const override {
    return Eigen::MatrixXd::Zero(f.rows(), f.cols());
  }
  Eigen::MatrixXd apply_adjoint_impl(const Eigen::MatrixXd& g) const override {
    return Eigen::MatrixXd::Zero(g.rows(), g.cols());
  }
  Eigen::MatrixXd apply_block_impl(const Patch& x, const Patch&, const Eigen::MatrixXd& f) const override {
    return Eigen::MatrixXd::Zero(x.size(), f.cols());
  }
  Eigen::MatrixXd apply_block_adjoint_impl(const Patch&, const Patch& y, const Eigen::MatrixXd& g) const override {
    return Eigen::MatrixXd::Zero(y.size(), g.cols());
  }
};

/// Tabulates K(i,j) = g(x_i, t_i, y_j, s_j) on the grid.
template <typename G>
Eigen::MatrixXd tabulate_kernel(const Grid2D& grid, G&& g) {
  const Index m = grid.size();
  Eigen::MatrixXd k(m, m);
  for (Index j = 0; j < m; ++j) {
    const double y = grid.x(j), s = grid.t(j);
    for (Index i = 0; i < m; ++i) k(i, j) = g(grid.x(i), grid.t(i), y, s);
  }
  return k;
}

}  // namespace hypergreen
