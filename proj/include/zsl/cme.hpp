#pragma once

// Conditional-mean route: spectral-regularized conditional mean embedding
// fitted from (x, z) pairs, composed with a kernel ridge fit of g from
// prompt pairs (y, z) into the indirect predictor.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zsl/errors.hpp"
#include "zsl/kernel.hpp"

namespace zsl {

class CmeModel {
 public:
  CmeModel(std::vector<Eigen::VectorXd> xs, std::vector<Eigen::VectorXd> zs,
           KernelSpec kernel_x, SpectralFilter filter,
           KernelSpec kernel_z = KernelSpec{})
      : xs_(std::move(xs)),
        zs_(std::move(zs)),
        kernel_x_(kernel_x),
        kernel_z_(kernel_z),
        filter_(filter) {
    if (xs_.empty() || xs_.size() != zs_.size())
      throw EmptySample("cme requires nonempty matched (x, z) lists");
    const auto n = static_cast<double>(xs_.size());
    eig_ = eigh_psd(gram(kernel_x_, xs_, xs_).k / n);
    Eigen::VectorXd f(eig_.values.size());
    for (Eigen::Index i = 0; i < f.size(); ++i)
      f(i) = filter_(eig_.values(i));
    weight_op_ = (eig_.vectors * f.asDiagonal() * eig_.vectors.transpose()) / n;
  }

  /// w(x) = (1/N) V f_lambda(mu) V^T k_x.
  Eigen::VectorXd weights(const Eigen::VectorXd& x) const {
    return weight_op_ * kernel_column(kernel_x_, xs_, x);
  }

  const std::vector<Eigen::VectorXd>& train_z() const { return zs_; }
  const std::vector<Eigen::VectorXd>& train_x() const { return xs_; }
  const KernelSpec& kernel_x() const { return kernel_x_; }
  const KernelSpec& kernel_z() const { return kernel_z_; }
  const SpectralFilter& filter() const { return filter_; }

 private:
  std::vector<Eigen::VectorXd> xs_, zs_;
  KernelSpec kernel_x_, kernel_z_;
  SpectralFilter filter_;
  EigDecomp eig_;
  Eigen::MatrixXd weight_op_;
};

class RidgeModel {
 public:
  RidgeModel(std::vector<Eigen::VectorXd> zs, Eigen::VectorXd coef,
             KernelSpec kernel_z, double lambda)
      : zs_(std::move(zs)),
        coef_(std::move(coef)),
        kernel_z_(kernel_z),
        lambda_(lambda) {}

  double operator()(const Eigen::VectorXd& z) const {
    return coef_.dot(kernel_column(kernel_z_, zs_, z));
  }

  const std::vector<Eigen::VectorXd>& prompts_z() const { return zs_; }
  const Eigen::VectorXd& coef() const { return coef_; }
  const KernelSpec& kernel_z() const { return kernel_z_; }
  double lambda() const { return lambda_; }

 private:
  std::vector<Eigen::VectorXd> zs_;
  Eigen::VectorXd coef_;
  KernelSpec kernel_z_;
  double lambda_ = 0.0;
};

inline CmeModel fit_cme(const std::vector<Eigen::VectorXd>& xs,
                        const std::vector<Eigen::VectorXd>& zs,
                        const KernelSpec& kernel_x,
                        const SpectralFilter& filter,
                        const KernelSpec& kernel_z = KernelSpec{}) {
  return CmeModel(xs, zs, kernel_x, filter, kernel_z);
}

/// Kernel ridge regression of r(y) on z: c = (L + M lambda I)^{-1} r_vec.
template <class RFunc>
inline RidgeModel fit_g_rho(const std::vector<int>& ys,
                            const std::vector<Eigen::VectorXd>& zs,
                            RFunc&& r, const KernelSpec& kernel_z,
                            double lambda) {
  if (ys.empty() || ys.size() != zs.size())
    throw EmptySample("ridge requires nonempty matched (y, z) lists");
  const auto m = static_cast<Eigen::Index>(ys.size());
  Eigen::MatrixXd l = gram(kernel_z, zs, zs).k;
  l.diagonal().array() += static_cast<double>(m) * lambda;
  Eigen::VectorXd rv(m);
  for (Eigen::Index j = 0; j < m; ++j)
    rv(j) = r(ys[static_cast<std::size_t>(j)]);
  Eigen::VectorXd coef = l.ldlt().solve(rv);
  return RidgeModel(zs, std::move(coef), kernel_z, lambda);
}

/// Indirect predictor: eta(x) = sum_i w_i(x) * g(z_i).
inline double predict_eta(const CmeModel& cme, const RidgeModel& ridge,
                          const Eigen::VectorXd& x) {
  if (cme.kernel_z().bandwidth != ridge.kernel_z().bandwidth)
    throw KernelMismatch("cme and ridge use different z-kernels");
  Eigen::VectorXd g_train(static_cast<Eigen::Index>(cme.train_z().size()));
  for (Eigen::Index i = 0; i < g_train.size(); ++i)
    g_train(i) = ridge(cme.train_z()[static_cast<std::size_t>(i)]);
  return cme.weights(x).dot(g_train);
}

/// Batched evaluator precomputing g on the training captions once.
class CmePredictor {
 public:
  CmePredictor(const CmeModel& cme, const RidgeModel& ridge) : cme_(cme) {
    g_train_.resize(static_cast<Eigen::Index>(cme.train_z().size()));
    const Eigen::MatrixXd cross =
        gram(ridge.kernel_z(), ridge.prompts_z(), cme.train_z()).k;
    g_train_ = cross.transpose() * ridge.coef();
  }

  double operator()(const Eigen::VectorXd& x) const {
    return cme_.weights(x).dot(g_train_);
  }

 private:
  const CmeModel& cme_;
  Eigen::VectorXd g_train_;
};

inline double mse_on(const std::function<double(const Eigen::VectorXd&)>& pred,
                     const std::function<double(const Eigen::VectorXd&)>& ref,
                     const std::vector<Eigen::VectorXd>& xs) {
  if (xs.empty()) throw EmptySample("mse over empty test set");
  double acc = 0.0;
  for (const auto& x : xs) {
    const double d = pred(x) - ref(x);
    acc += d * d;
  }
  return acc / static_cast<double>(xs.size());
}

/// Default regularization schedule lambda_N = N^{-1/(beta+p)}.
inline double lambda_schedule_cme(std::size_t n, double beta = 1.0,
                                  double p = 0.5) {
  return std::pow(static_cast<double>(n), -1.0 / (beta + p));
}

}  // namespace zsl
