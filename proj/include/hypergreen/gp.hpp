#pragma once
//
// Gaussian-process forcing terms: covariance kernels, the weighted
// Karhunen-Loeve spectrum of the kernel's integral operator on a patch, and
// seeded sampling.
//

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hypergreen/error.hpp"
#include "hypergreen/grid.hpp"

namespace hypergreen {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `index` of `master`; injective in `index` for a fixed master.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index));
}

using Point2 = std::array<double, 2>;

struct CovarianceKernel {
  enum class Kind { SquaredExponential, Callable };

  Kind kind = Kind::SquaredExponential;
  double length_scale = 0.1;
  double variance = 1.0;
  std::function<double(const Point2&, const Point2&)> fn;

  static CovarianceKernel squared_exponential(double length_scale = 0.1, double variance = 1.0) {
    require(length_scale > 0.0, ErrorKind::Config, "kernel length scale must be positive");
    require(variance > 0.0, ErrorKind::Config, "kernel variance must be positive");
    CovarianceKernel k;
    k.length_scale = length_scale;
    k.variance = variance;
    return k;
  }

  static CovarianceKernel callable(std::function<double(const Point2&, const Point2&)> f, double variance = 1.0) {
    CovarianceKernel k;
    k.kind = Kind::Callable;
    k.fn = std::move(f);
    k.variance = variance;
    k.length_scale = 0.0;
    return k;
  }

  double operator()(const Point2& a, const Point2& b) const {
    if (kind == Kind::Callable) return fn(a, b);
    const double dx = a[0] - b[0];
    const double dt = a[1] - b[1];
    return variance * std::exp(-(dx * dx + dt * dt) / (2.0 * length_scale * length_scale));
  }

  bool separable() const { return kind == Kind::SquaredExponential; }
};

inline double kernel_eval(const CovarianceKernel& k, const Point2& z1, const Point2& z2) { return k(z1, z2); }

/// Weighted eigendecomposition of the covariance operator on a patch.
struct KernelSpectrum {
  Patch patch;
  Eigen::VectorXd eigenvalues;  // descending, truncated at 1e-14 * lambda1
  Quasimatrix eigenfunctions;   // w-orthonormal columns
  double trace = 0.0;           // sum of all (clipped) eigenvalues
  double lambda1 = 0.0;
  double min_raw_eigenvalue = 0.0;

  Index rank() const { return eigenvalues.size(); }
};

namespace detail {

inline constexpr double kJitter = 1e-10;
inline constexpr double kTruncation = 1e-14;

struct SymEig {
  Eigen::VectorXd values;  // descending
  Eigen::MatrixXd vectors;
};

inline SymEig sym_eig_desc(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  require(es.info() == Eigen::Success, ErrorKind::Numerical, "covariance eigendecomposition failed");
  const Index n = s.rows();
  SymEig out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Index i = 0; i < n; ++i) {
    out.values(i) = es.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

// Symmetrized 1D factor W^{1/2} K W^{1/2} over `panel_count` panels, built from
// panel-relative coordinates so translated patches give identical matrices.
inline Eigen::MatrixXd se_factor_1d(const Grid1D& g, int panel_count, double ell) {
  const int npp = g.nodes_per_panel;
  const Index n = static_cast<Index>(panel_count) * npp;
  std::vector<double> z(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int p = 0; p < panel_count; ++p)
    for (int r = 0; r < npp; ++r) {
      z[static_cast<std::size_t>(p * npp + r)] = (p + g.ref_nodes[static_cast<std::size_t>(r)]) / g.panels;
      w[static_cast<std::size_t>(p * npp + r)] = g.ref_weights[static_cast<std::size_t>(r)] / g.panels;
    }
  Eigen::MatrixXd s(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) {
      const double d = z[static_cast<std::size_t>(a)] - z[static_cast<std::size_t>(b)];
      s(a, b) = std::sqrt(w[static_cast<std::size_t>(a)] * w[static_cast<std::size_t>(b)]) *
                std::exp(-d * d / (2.0 * ell * ell));
    }
  return s;
}

inline KernelSpectrum finish_spectrum(const Patch& patch, const Eigen::VectorXd& raw, const Eigen::MatrixXd& vecs_hat,
                                      double scale_for_check) {
  KernelSpectrum sp;
  sp.patch = patch;
  sp.min_raw_eigenvalue = raw.size() ? raw.minCoeff() : 0.0;
  require(sp.min_raw_eigenvalue >= -1e-8 * scale_for_check, ErrorKind::Numerical,
          "covariance is not positive semidefinite (min eigenvalue " + std::to_string(sp.min_raw_eigenvalue) +
              ", jitter " + std::to_string(kJitter * scale_for_check) + ")");
  sp.lambda1 = raw.size() ? std::max(raw(0), 0.0) : 0.0;
  sp.trace = raw.cwiseMax(0.0).sum();
  Index keep = 0;
  while (keep < raw.size() && raw(keep) > kTruncation * sp.lambda1) ++keep;
  sp.eigenvalues = raw.head(keep);
  Eigen::MatrixXd r = patch.sqrt_weights().cwiseInverse().asDiagonal() * vecs_hat.leftCols(keep);
  sp.eigenfunctions = Quasimatrix{patch, std::move(r)};
  return sp;
}

inline KernelSpectrum separable_spectrum(const CovarianceKernel& k, const Patch& patch) {
  const Grid2D& g = *patch.grid();
  const int npx = patch.x_panel_end() - patch.x_panel_begin();
  const int npt = patch.t_panel_end() - patch.t_panel_begin();
  const SymEig ex = sym_eig_desc(se_factor_1d(g.gx, npx, k.length_scale));
  const SymEig et = sym_eig_desc(se_factor_1d(g.gt, npt, k.length_scale));
  const Index nx = ex.values.size();
  const Index nt = et.values.size();
  std::vector<Index> order(static_cast<std::size_t>(nx * nt));
  std::iota(order.begin(), order.end(), Index{0});
  auto value = [&](Index id) { return k.variance * ex.values(id / nt) * et.values(id % nt); };
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return value(a) > value(b); });
  Eigen::VectorXd raw(nx * nt);
  for (Index i = 0; i < nx * nt; ++i) raw(i) = value(order[static_cast<std::size_t>(i)]);
  const double lam1 = std::max(raw(0), 0.0);
  Index keep = 0;
  while (keep < raw.size() && raw(keep) > kTruncation * lam1) ++keep;
  Eigen::MatrixXd vecs(nx * nt, keep);
  for (Index c = 0; c < keep; ++c) {
    const Index id = order[static_cast<std::size_t>(c)];
    const auto ux = ex.vectors.col(id / nt);
    const auto ut = et.vectors.col(id % nt);
    for (Index a = 0; a < nx; ++a) vecs.col(c).segment(a * nt, nt) = ux(a) * ut;
  }
  // Only `keep` columns were formed; finish_spectrum truncates identically.
  return finish_spectrum(patch, raw, vecs, k.variance);
}

inline KernelSpectrum dense_spectrum(const CovarianceKernel& k, const Patch& patch) {
  const Index n = patch.size();
  Eigen::MatrixXd kk(n, n);
  double diag_max = 0.0;
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) kk(a, b) = k({patch.x(a), patch.t(a)}, {patch.x(b), patch.t(b)});
  for (Index a = 0; a < n; ++a) diag_max = std::max(diag_max, kk(a, a));
  kk.diagonal().array() += kJitter * diag_max;
  const auto& sw = patch.sqrt_weights();
  const Eigen::MatrixXd s = sw.asDiagonal() * kk * sw.asDiagonal();
  const SymEig e = sym_eig_desc(0.5 * (s + s.transpose()));
  return finish_spectrum(patch, e.values, e.vectors, diag_max);
}

}  // namespace detail

/// Karhunen-Loeve data of K restricted to the patch (R_{YxY} K for a sub-patch Y).
inline KernelSpectrum kernel_spectrum(const CovarianceKernel& k, const Patch& patch) {
  require(patch.size() >= 1, ErrorKind::Domain, "empty patch");
  return k.separable() ? detail::separable_spectrum(k, patch) : detail::dense_spectrum(k, patch);
}

/// Spectra keyed by patch shape. Valid for translation-invariant kernels, whose
/// spectrum on a panel-aligned patch depends only on its shape.
class SpectrumCache {
 public:
  explicit SpectrumCache(CovarianceKernel kernel) : kernel_(std::move(kernel)) {}

  const CovarianceKernel& kernel() const { return kernel_; }

  std::shared_ptr<const KernelSpectrum> get(const Patch& patch) {
    if (!kernel_.separable()) return std::make_shared<const KernelSpectrum>(kernel_spectrum(kernel_, patch));
    const auto key = std::make_pair(patch.x_panel_end() - patch.x_panel_begin(),
                                    patch.t_panel_end() - patch.t_panel_begin());
    std::shared_ptr<const KernelSpectrum> base;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end()) base = it->second;
    }
    if (!base) {
      auto computed = std::make_shared<const KernelSpectrum>(kernel_spectrum(kernel_, patch));
      std::lock_guard<std::mutex> lock(mutex_);
      base = cache_.emplace(key, std::move(computed)).first->second;
    }
    if (base->patch == patch) return base;
    auto moved = std::make_shared<KernelSpectrum>(*base);
    moved->patch = patch;
    moved->eigenfunctions.patch = patch;
    // eigenfunctions carry W^{-1/2}; weights are translation invariant too.
    return moved;
  }

 private:
  CovarianceKernel kernel_;
  std::mutex mutex_;
  std::map<std::pair<int, int>, std::shared_ptr<const KernelSpectrum>> cache_;
};

/// m independent KL draws f = sum_j sqrt(lambda_j) c_j r_j; column j uses seed derive_seed(seed, j).
inline Quasimatrix sample_gp(const KernelSpectrum& sp, Index m, std::uint64_t seed) {
  require(m >= 1, ErrorKind::Config, "sample count must be >= 1");
  const Index r = sp.rank();
  Eigen::MatrixXd coeff(r, m);
  for (Index j = 0; j < m; ++j) {
    std::mt19937_64 gen(derive_seed(seed, static_cast<std::uint64_t>(j)));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < r; ++i) coeff(i, j) = std::sqrt(sp.eigenvalues(i)) * normal(gen);
  }
  return {sp.patch, sp.eigenfunctions.columns * coeff};
}

inline Quasimatrix sample_gp(const CovarianceKernel& k, const Patch& patch, Index m, std::uint64_t seed) {
  return sample_gp(kernel_spectrum(k, patch), m, seed);
}

/// Kernel-quality constants (gamma_k, xi_k) of K against right singular functions V1.
struct KernelQuality {
  double gamma = 0.0;
  double xi = 0.0;
};

inline KernelQuality kernel_quality(const KernelSpectrum& sp, const Quasimatrix& v1) {
  require(v1.patch == sp.patch, ErrorKind::Domain, "factor and spectrum live on different patches");
  // C11 = V1* K V1 = P^T Lambda P with P = R^T W V1.
  const Eigen::MatrixXd p =
      sp.eigenfunctions.columns.transpose() * sp.patch.weights().asDiagonal() * v1.columns;
  const Eigen::MatrixXd c11 = p.transpose() * sp.eigenvalues.asDiagonal() * p;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c11 + c11.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues();
  require(ev.minCoeff() > 0.0, ErrorKind::Numerical, "C11 is singular; kernel misses the right singular subspace");
  KernelQuality q;
  const double k = static_cast<double>(v1.cols());
  q.xi = ev.minCoeff() / sp.lambda1;
  q.gamma = k / (sp.lambda1 * ev.cwiseInverse().sum());
  return q;
}

}  // namespace hypergreen
