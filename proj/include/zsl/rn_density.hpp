#pragma once

// Information-density route: spectral-regularized Radon-Nikodym derivative
// of the joint (X, Z) law w.r.t. the product of marginals, fitted from a
// paired half and a synthetically unpaired half of the pre-training sample.

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zsl/errors.hpp"
#include "zsl/kernel.hpp"
#include "zsl/rng.hpp"

namespace zsl {

struct PairSample {
  std::vector<Eigen::VectorXd> xs, zs;
  std::size_t size() const { return xs.size(); }
};

struct PromptMeasure {
  std::vector<int> ys;
  std::vector<Eigen::VectorXd> zs;
  std::size_t size() const { return ys.size(); }
};

/// Shuffle by seed; keep the first ceil(N/2) pairs, cyclically shift the
/// z-coordinates of the rest by one to approximate product sampling.
inline std::pair<PairSample, PairSample> split_pairs(const PairSample& pairs,
                                                     std::uint64_t seed) {
  const std::size_t n = pairs.size();
  if (n < 4) throw TooFewSamples("split_pairs needs at least 4 pairs");
  const auto idx = shuffled_indices(n, seed);
  const std::size_t n_p = (n + 1) / 2;
  PairSample paired, unpaired;
  for (std::size_t i = 0; i < n_p; ++i) {
    paired.xs.push_back(pairs.xs[idx[i]]);
    paired.zs.push_back(pairs.zs[idx[i]]);
  }
  const std::size_t n_u = n - n_p;
  for (std::size_t i = 0; i < n_u; ++i) {
    const std::size_t xi = idx[n_p + i];
    const std::size_t zi = idx[n_p + (i + 1) % n_u];
    unpaired.xs.push_back(pairs.xs[xi]);
    unpaired.zs.push_back(pairs.zs[zi]);
  }
  return {std::move(paired), std::move(unpaired)};
}

class RnModel {
 public:
  RnModel(PairSample unpaired, ProductKernelSpec kernel, Eigen::VectorXd coef,
          double lambda, bool clamp_nonneg = false)
      : unpaired_(std::move(unpaired)),
        kernel_(kernel),
        coef_(std::move(coef)),
        lambda_(lambda),
        clamp_(clamp_nonneg) {}

  /// R(x, z) = sum_j c_j kappa((x'_j, z'_j), (x, z)).
  double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < unpaired_.size(); ++j)
      acc += coef_(static_cast<Eigen::Index>(j)) *
             kernel_(unpaired_.xs[j], unpaired_.zs[j], x, z);
    if (clamp_ && acc < 0.0) acc = 0.0;
    return acc;
  }

  const Eigen::VectorXd& coef() const { return coef_; }
  double lambda() const { return lambda_; }
  const PairSample& unpaired() const { return unpaired_; }
  const ProductKernelSpec& kernel() const { return kernel_; }

 private:
  PairSample unpaired_;
  ProductKernelSpec kernel_;
  Eigen::VectorXd coef_;
  double lambda_;
  bool clamp_;
};

inline Eigen::MatrixXd product_gram(const ProductKernelSpec& kernel,
                                    const PairSample& a, const PairSample& b) {
  const auto n = static_cast<Eigen::Index>(a.size());
  const auto m = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd k(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto si = static_cast<std::size_t>(i);
      const auto sj = static_cast<std::size_t>(j);
      k(i, j) = kernel(a.xs[si], a.zs[si], b.xs[sj], b.zs[sj]);
    }
  return k;
}

/// c = (1/(N_u N_p)) V diag(f_lambda(mu)/mu on mu > 0, else 0) V^T K_up 1.
inline RnModel fit_rn(const PairSample& paired, const PairSample& unpaired,
                      const ProductKernelSpec& kernel,
                      const SpectralFilter& filter,
                      bool clamp_nonneg = false) {
  if (paired.size() == 0 || unpaired.size() == 0)
    throw EmptySample("fit_rn requires nonempty halves");
  const auto n_u = static_cast<double>(unpaired.size());
  const auto n_p = static_cast<double>(paired.size());
  const Eigen::MatrixXd k_u = product_gram(kernel, unpaired, unpaired);
  const EigDecomp eig = eigh_psd(k_u / n_u);
  Eigen::VectorXd g(eig.values.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double mu = eig.values(i);
    g(i) = mu > 0.0 ? filter(mu) / mu : 0.0;
  }
  const Eigen::MatrixXd k_up = product_gram(kernel, unpaired, paired);
  const Eigen::VectorXd rhs = k_up * Eigen::VectorXd::Ones(k_up.cols());
  Eigen::VectorXd coef = (eig.vectors * g.asDiagonal() *
                          eig.vectors.transpose() * rhs) /
                         (n_u * n_p);
  if (!coef.allFinite()) throw DegenerateData("non-finite rn coefficients");
  return RnModel(unpaired, kernel, std::move(coef), filter.lambda,
                 clamp_nonneg);
}

/// eta(x) = (1/M) sum_k r(y_k) R(x, z_k).
template <class RFunc>
inline double predict_eta(const RnModel& rn, const PromptMeasure& prompts,
                          RFunc&& r, const Eigen::VectorXd& x) {
  double acc = 0.0;
  for (std::size_t k = 0; k < prompts.size(); ++k)
    acc += r(prompts.ys[k]) * rn(x, prompts.zs[k]);
  return acc / static_cast<double>(prompts.size());
}

/// Batched evaluator: eta(x) = sum_j c_j k_x(x'_j, x) t_j with
/// t_j = (1/M) sum_k r(y_k) k_z(z'_j, z_k) precomputed once.
class RnPredictor {
 public:
  template <class RFunc>
  RnPredictor(const RnModel& rn, const PromptMeasure& prompts, RFunc&& r)
      : rn_(rn) {
    const auto n_u = static_cast<Eigen::Index>(rn.unpaired().size());
    const auto m = static_cast<Eigen::Index>(prompts.size());
    t_.setZero(n_u);
    for (Eigen::Index j = 0; j < n_u; ++j) {
      const auto& zj = rn.unpaired().zs[static_cast<std::size_t>(j)];
      double acc = 0.0;
      for (Eigen::Index k = 0; k < m; ++k) {
        const auto sk = static_cast<std::size_t>(k);
        acc += r(prompts.ys[sk]) * rn.kernel().kz(zj, prompts.zs[sk]);
      }
      t_(j) = rn.coef()(j) * acc / static_cast<double>(m);
    }
  }

  double operator()(const Eigen::VectorXd& x) const {
    double acc = 0.0;
    const auto n_u = static_cast<Eigen::Index>(rn_.unpaired().size());
    for (Eigen::Index j = 0; j < n_u; ++j)
      acc += t_(j) *
             rn_.kernel().kx(rn_.unpaired().xs[static_cast<std::size_t>(j)], x);
    return acc;
  }

 private:
  const RnModel& rn_;
  Eigen::VectorXd t_;
};

inline double lambda_schedule_rn(std::size_t n_p, std::size_t n_u, double beta,
                                 double k_max = 1.0) {
  const double base = (1.0 / std::sqrt(static_cast<double>(n_p)) +
                       1.0 / std::sqrt(static_cast<double>(n_u))) /
                      std::sqrt(k_max);
  return std::pow(base, 1.0 / (beta + 1.0));
}

}  // namespace zsl
