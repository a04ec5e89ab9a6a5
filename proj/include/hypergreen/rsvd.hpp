#pragma once
//
// Randomized SVD of an operator reached only through apply / adjoint queries.
// All factorizations are done in the W^{1/2} embedding, so orthonormality and
// singular values are with respect to the weighted (L2) inner product.
//

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "hypergreen/error.hpp"
#include "hypergreen/grid.hpp"
#include "hypergreen/oracle.hpp"

namespace hypergreen {

/// The restricted operator R_X F R_Y^* seen through an oracle.
struct BlockView {
  OperatorOracle* oracle = nullptr;
  Patch x;  // output patch
  Patch y;  // input patch

  static BlockView full(OperatorOracle& o) { return {&o, o.domain(), o.domain()}; }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& f) const {
    if (x.is_full() && y.is_full()) return oracle->apply(f);
    return oracle->apply_block(x, y, f);
  }
  Eigen::MatrixXd adjoint(const Eigen::MatrixXd& g) const {
    if (x.is_full() && y.is_full()) return oracle->apply_adjoint(g);
    return oracle->apply_block_adjoint(x, y, g);
  }
};

namespace detail {

inline void fix_signs(Eigen::MatrixXd& u) {
  for (Index j = 0; j < u.cols(); ++j) {
    for (Index i = 0; i < u.rows(); ++i) {
      if (u(i, j) != 0.0) {
        if (u(i, j) < 0.0) u.col(j) *= -1.0;
        break;
      }
    }
  }
}

}  // namespace detail

/// Weighted orthonormalization that drops numerically dependent columns
/// (classical Gram-Schmidt with reorthogonalization, order preserved).
inline Quasimatrix orthonormalize(const Quasimatrix& a, double rel_tol = 1e-12) {
  const Eigen::VectorXd& w = a.patch.weights();
  double scale = 0.0;
  for (Index j = 0; j < a.cols(); ++j)
    scale = std::max(scale, std::sqrt((a.columns.col(j).array().square() * w.array()).sum()));
  Eigen::MatrixXd q(a.columns.rows(), a.cols());
  Index kept = 0;
  if (scale == 0.0) return {a.patch, q.leftCols(0)};
  for (Index j = 0; j < a.cols(); ++j) {
    Eigen::VectorXd v = a.columns.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      if (kept == 0) break;
      const Eigen::VectorXd c = q.leftCols(kept).transpose() * (w.asDiagonal() * v);
      v -= q.leftCols(kept) * c;
    }
    const double nv = std::sqrt((v.array().square() * w.array()).sum());
    if (nv <= rel_tol * scale) continue;
    q.col(kept++) = v / nv;
  }
  return {a.patch, q.leftCols(kept)};
}

/// Weighted orthonormal basis with exactly cols(a) columns. When `a` is rank
/// deficient the extra columns complete the basis (Householder thin Q).
inline Eigen::MatrixXd orthonormal_basis(const Patch& patch, const Eigen::MatrixXd& a) {
  const Eigen::VectorXd& sw = patch.sqrt_weights();
  const Index m = a.cols();
  require(m <= a.rows(), ErrorKind::Dimension, "more sketch columns than grid points");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), m);
  return sw.cwiseInverse().asDiagonal() * q;
}

/// Z = (F F*)^q F Omega, re-orthonormalized after every application.
/// Costs (2q+1) cols(Omega) queries.
inline Quasimatrix randomized_range(const BlockView& op, const Quasimatrix& omega, int q) {
  require(omega.cols() >= 1, ErrorKind::Config, "sketch needs at least one column");
  require(q >= 0, ErrorKind::Config, "power exponent must be >= 0");
  require(omega.patch == op.y, ErrorKind::Domain, "sketch does not live on the input patch");
  Eigen::MatrixXd z = orthonormal_basis(op.x, op.apply(omega.columns));
  for (int i = 0; i < q; ++i) {
    const Eigen::MatrixXd w = orthonormal_basis(op.y, op.adjoint(z));
    z = orthonormal_basis(op.x, op.apply(w));
  }
  return {op.x, std::move(z)};
}

/// Low-rank factor pair F~ = Q B with B = (F* Q)*. Ccols holds F* Q on Y.
struct FactorPair {
  Quasimatrix q;      // on X
  Quasimatrix ccols;  // on Y

  /// F~ f = Q (Ccols* f).
  Eigen::MatrixXd apply(const Eigen::MatrixXd& f) const {
    return q.columns * (ccols.columns.transpose() * (ccols.patch.weights().asDiagonal() * f));
  }
  Eigen::MatrixXd adjoint(const Eigen::MatrixXd& g) const {
    return ccols.columns * (q.columns.transpose() * (q.patch.weights().asDiagonal() * g));
  }
};

/// Costs cols(Q) adjoint queries.
inline FactorPair project_approximant(const BlockView& op, const Quasimatrix& q) {
  require(q.patch == op.x, ErrorKind::Domain, "range basis does not live on the output patch");
  return {q, {op.y, op.adjoint(q.columns)}};
}

struct SpectralEstimate {
  Eigen::VectorXd sigma;  // sigma-hat_1 >= ... >= sigma-hat_k
  Quasimatrix q;          // w-orthonormal basis of Z (all m columns)
  Quasimatrix u;          // U~_k
  std::uint64_t queries = 0;
  bool rank_deficient = false;  // H~ had numerical rank below k
};

namespace detail {

struct WeightedSvd {
  Eigen::VectorXd s;
  Eigen::MatrixXd u;  // left vectors in node space (w-orthonormal)
  Eigen::MatrixXd v;  // right vectors (Euclidean)
};

// SVD of a quasimatrix a (columns on `patch`) with respect to the weighted norm.
inline WeightedSvd weighted_svd(const Patch& patch, const Eigen::MatrixXd& a) {
  const Eigen::VectorXd& sw = patch.sqrt_weights();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(sw.asDiagonal() * a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  WeightedSvd out{svd.singularValues(), sw.cwiseInverse().asDiagonal() * svd.matrixU(), svd.matrixV()};
  return out;
}

}  // namespace detail

/// Estimates the top k singular values from U~_k* F, where U~_k are the
/// dominant left singular vectors of P_Z H, H = (F F*)^q F.
/// Costs 2(2q+1) m + k queries (k(8q+5) for m = 2k).
inline SpectralEstimate estimate_singular_values(const BlockView& op, const Quasimatrix& omega, int k, int q) {
  require(k >= 1 && omega.cols() >= k, ErrorKind::Config, "sketch must have at least k columns");
  const std::uint64_t before = op.oracle->queries();
  SpectralEstimate est;
  est.q = randomized_range(op, omega, q);

  // H* Qz = (F* F)^q F* Qz as a plain product.
  Eigen::MatrixXd b = op.adjoint(est.q.columns);
  for (int i = 0; i < q; ++i) b = op.adjoint(op.apply(b));

  // H~ = Qz (H* Qz)*; its left singular vectors are Qz times the right
  // singular vectors of H* Qz in the weighted embedding.
  const detail::WeightedSvd hs = detail::weighted_svd(op.y, b);
  Eigen::MatrixXd uk = est.q.columns * hs.v.leftCols(k);
  detail::fix_signs(uk);
  est.u = {op.x, uk};

  const Eigen::MatrixXd fu = op.adjoint(uk);
  const detail::WeightedSvd fs = detail::weighted_svd(op.y, fu);
  est.sigma = fs.s.head(std::min<Index>(k, fs.s.size()));
  const double s1 = hs.s.size() ? hs.s(0) : 0.0;
  est.rank_deficient = s1 == 0.0 || hs.s.size() < k || hs.s(k - 1) <= 1e-14 * s1;
  est.queries = op.oracle->queries() - before;
  return est;
}

/// delta_q = [(sigma_k / sigma_{k+1})^{2q+1} - 1]^{-1}.
inline double delta_q(double sigma_k, double sigma_k1, int q) {
  require(sigma_k1 > 0.0 && sigma_k > sigma_k1, ErrorKind::Gap, "delta_q needs sigma_k > sigma_{k+1} > 0");
  require(q >= 0, ErrorKind::Config, "power exponent must be >= 0");
  return 1.0 / (std::pow(sigma_k / sigma_k1, 2 * q + 1) - 1.0);
}

enum class ErrorFactorKind { Expectation, Tail, Simple };

struct ErrorFactorParams {
  int k = 4;
  int p = 4;
  double s = 1.0;
  double t = 1.0;
  double trace = 1.0;    // Tr(K)
  double lambda1 = 1.0;  // largest eigenvalue of K
  double xi = 1.0;
  double gamma = 1.0;
};

/// Multiplicative factor on sigma_{k+1} in the rSVD error bounds.
inline double error_factor(ErrorFactorKind kind, const ErrorFactorParams& a) {
  require(a.k >= 1 && a.p >= 1 && a.trace > 0 && a.lambda1 > 0 && a.xi > 0 && a.gamma > 0, ErrorKind::Config,
          "error factor parameters must be positive");
  const double k = a.k, p = a.p;
  const double ratio = a.trace / a.lambda1;
  const double e = std::numbers::e;
  switch (kind) {
    case ErrorFactorKind::Expectation:
      return 1.0 + 1.0 / a.xi + std::sqrt(ratio / a.xi) * e * std::sqrt(k + p) / p +
             std::sqrt(k / (a.gamma * (p + 1.0)));
    case ErrorFactorKind::Tail:
      require(a.s >= 1.0 && a.t >= 1.0, ErrorKind::Config, "tail parameters must be >= 1");
      return 1.0 + 1.0 / a.xi + e / std::sqrt(a.xi) * (a.s + std::sqrt(ratio)) * std::sqrt(k + p) / (p + 1.0) * a.t +
             std::sqrt(k / (a.gamma * (p + 1.0))) * a.t;
    case ErrorFactorKind::Simple:
      return 1.0 + (19.0 + 11.0 * std::sqrt(ratio / k)) / a.xi;
  }
  return 0.0;
}

}  // namespace hypergreen
