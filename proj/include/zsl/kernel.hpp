#pragma once

// Gaussian RBF kernels, Gram matrices, PSD eigendecomposition, and the
// spectral filters (cutoff and Tikhonov) used by the regularized estimators.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "zsl/errors.hpp"

namespace zsl {

struct KernelSpec {
  double bandwidth = 1.0;

  double operator()(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    if (u.size() != v.size()) throw DimensionMismatch("kernel arguments");
    const double d2 = (u - v).squaredNorm();
    return std::exp(-d2 / (2.0 * bandwidth * bandwidth));
  }
};

/// Product kernel on pairs (x, z): kappa((x,z),(x',z')) = k_x(x,x')*k_z(z,z').
struct ProductKernelSpec {
  KernelSpec kx, kz;

  double operator()(const Eigen::VectorXd& x1, const Eigen::VectorXd& z1,
                    const Eigen::VectorXd& x2, const Eigen::VectorXd& z2) const {
    return kx(x1, x2) * kz(z1, z2);
  }
};

struct GramBundle {
  Eigen::MatrixXd k;
  bool symmetric = false;
  bool centered = false;
};

struct SpectralFilter {
  enum class Kind { cutoff, tikhonov };
  Kind kind = Kind::tikhonov;
  double lambda = 1e-3;

  double operator()(double mu) const {
    if (kind == Kind::cutoff) return mu >= lambda ? 1.0 / mu : 0.0;
    return 1.0 / (mu + lambda);
  }
};

inline GramBundle gram(const KernelSpec& kernel,
                       const std::vector<Eigen::VectorXd>& a,
                       const std::vector<Eigen::VectorXd>& b) {
  const auto n = static_cast<Eigen::Index>(a.size());
  const auto m = static_cast<Eigen::Index>(b.size());
  GramBundle g;
  g.k.resize(n, m);
  const bool same = (&a == &b);
  // Serial row-wise fill keeps the result bitwise deterministic.
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j0 = same ? i : 0;
    for (Eigen::Index j = j0; j < m; ++j)
      g.k(i, j) = kernel(a[static_cast<std::size_t>(i)],
                         b[static_cast<std::size_t>(j)]);
    if (same)
      for (Eigen::Index j = 0; j < i; ++j) g.k(i, j) = g.k(j, i);
  }
  g.symmetric = same;
  return g;
}

inline Eigen::VectorXd kernel_column(const KernelSpec& kernel,
                                     const std::vector<Eigen::VectorXd>& pts,
                                     const Eigen::VectorXd& x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(pts.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = kernel(pts[static_cast<std::size_t>(i)], x);
  return v;
}

struct EigDecomp {
  Eigen::VectorXd values;   // descending, clamped at zero
  Eigen::MatrixXd vectors;  // columns aligned with values
};

inline EigDecomp eigh_psd(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw NotSymmetric("matrix not square");
  if ((k - k.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, k.cwiseAbs().maxCoeff()))
    throw NotSymmetric("matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (k + k.transpose()));
  EigDecomp out;
  const Eigen::Index n = k.rows();
  out.values.resize(n);
  out.vectors.resize(n, n);
  // SelfAdjointEigenSolver returns ascending order; flip to descending.
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = es.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  const double clamp = 1e-12 * std::max(0.0, out.values(0));
  for (Eigen::Index i = 0; i < n; ++i)
    if (out.values(i) < clamp) out.values(i) = 0.0;
  return out;
}

inline EigDecomp eigh_psd(const GramBundle& g) {
  if (!g.symmetric) throw NotSymmetric("gram bundle not marked symmetric");
  return eigh_psd(g.k);
}

inline Eigen::MatrixXd apply_filter(const EigDecomp& eig,
                                    const SpectralFilter& filter) {
  Eigen::VectorXd f(eig.values.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = filter(eig.values(i));
  return eig.vectors * f.asDiagonal() * eig.vectors.transpose();
}

struct BandwidthResult {
  double bandwidth = 1.0;
  bool degenerate = false;  // all points identical; fell back to 1.0
};

/// Lower median of pairwise Euclidean distances.
inline BandwidthResult median_heuristic(
    const std::vector<Eigen::VectorXd>& pts) {
  if (pts.size() < 2) throw DegenerateData("need at least 2 points");
  std::vector<double> dists;
  dists.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      dists.push_back((pts[i] - pts[j]).norm());
  std::sort(dists.begin(), dists.end());
  BandwidthResult out;
  out.bandwidth = dists[(dists.size() - 1) / 2];
  if (out.bandwidth <= 0.0) {
    out.bandwidth = 1.0;
    out.degenerate = true;
  }
  return out;
}

/// Doubly-centered Gram: J K J with J = I - (1/n) 11^T.
inline Eigen::MatrixXd center_gram(const Eigen::MatrixXd& k) {
  const Eigen::Index n = k.rows();
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const Eigen::VectorXd col_mean = k.colwise().mean();
  const double total = k.mean();
  Eigen::MatrixXd out = k;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean.transpose();
  out.array() += total;
  (void)n;
  return out;
}

}  // namespace zsl
