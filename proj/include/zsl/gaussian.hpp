#pragma once

// Class-conditional joint Gaussian family over (X, Z) with an interpolation
// parameter theta, analytic direct posterior, Monte Carlo indirect posterior,
// and Monte Carlo residual dependence.

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zsl/errors.hpp"
#include "zsl/rng.hpp"

namespace zsl {

/// Multivariate normal with cached Cholesky factor. Construction applies
/// jitter 1e-10*trace/d on factorization failure and errors above 1e-6.
class Mvn {
 public:
  Mvn() = default;
  Mvn(Eigen::VectorXd mean, Eigen::MatrixXd cov)
      : mean_(std::move(mean)), cov_(std::move(cov)) {
    const Eigen::Index d = mean_.size();
    double jitter = 0.0;
    const double base = 1e-10 * cov_.trace() / static_cast<double>(d);
    for (;;) {
      Eigen::LLT<Eigen::MatrixXd> llt(
          cov_ + jitter * Eigen::MatrixXd::Identity(d, d));
      if (llt.info() == Eigen::Success) {
        llt_ = llt;
        break;
      }
      jitter = (jitter == 0.0) ? base : 10.0 * jitter;
      if (jitter > 1e-6) throw SingularCovariance("covariance not PD");
    }
    log_norm_ = -0.5 * static_cast<double>(d) * std::log(2.0 * M_PI);
    const Eigen::MatrixXd l = llt_.matrixL();
    for (Eigen::Index i = 0; i < d; ++i) log_norm_ -= std::log(l(i, i));
  }

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }

  double logpdf(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd diff = x - mean_;
    const Eigen::VectorXd sol = llt_.matrixL().solve(diff);
    return log_norm_ - 0.5 * sol.squaredNorm();
  }

  Eigen::VectorXd sample(CounterRng& rng) const {
    return mean_ + llt_.matrixL() * rng.normal_vector(mean_.size());
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_norm_ = 0.0;
};

struct SampleTriple {
  Eigen::VectorXd x;
  int y = 0;
  Eigen::VectorXd z;
};

/// Per-class blocks of the joint Gaussian over (X, Z).
struct GaussianClass {
  Eigen::VectorXd mu_x, mu_z;
  Eigen::MatrixXd c_xx, c_xz, c_zz;  // c_zx = c_xz.transpose()
};

class GaussianThetaModel {
 public:
  /// The parameterized family: mu_X|0 = 1/2, mu_X|1 = -1/2 (per coordinate),
  /// mu_Z|y = 2*theta*c_y*mu_X|y, C_ZZ|y = c_y I, C_ZX|y = (theta c_y/2) I,
  /// C_XX|y = (1 + c_y/4) I with c_0 = a, c_1 = b.
  GaussianThetaModel(int d, double a, double b, double theta, double p)
      : d_(d), a_(a), b_(b), theta_(theta), p_(p) {
    if (d < 1 || a <= 0.0 || b <= 0.0 || theta < 0.0 || theta > 1.0 ||
        p <= 0.0 || p >= 1.0)
      throw DomainError("invalid Gaussian family parameters");
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d);
    GaussianClass c0, c1;
    c0.mu_x = 0.5 * ones;
    c1.mu_x = -0.5 * ones;
    c0.mu_z = 2.0 * theta * a * c0.mu_x;
    c1.mu_z = 2.0 * theta * b * c1.mu_x;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    c0.c_zz = a * eye;
    c0.c_xz = (theta * a / 2.0) * eye;
    c0.c_xx = (1.0 + a / 4.0) * eye;
    c1.c_zz = b * eye;
    c1.c_xz = (theta * b / 2.0) * eye;
    c1.c_xx = (1.0 + b / 4.0) * eye;
    init(c0, c1, p);
  }

  /// Free override for testing: explicit per-class blocks.
  GaussianThetaModel(GaussianClass c0, GaussianClass c1, double p)
      : d_(static_cast<int>(c0.mu_x.size())), p_(p) {
    init(std::move(c0), std::move(c1), p);
  }

  int dim() const { return d_; }
  double prior() const { return p_; }
  const GaussianClass& cls(int y) const { return classes_[y]; }

  /// P(Y = 1 | X = x), evaluated in log space.
  double direct_posterior(const Eigen::VectorXd& x) const {
    const double l0 = std::log1p(-p_) + x_marg_[0].logpdf(x);
    const double l1 = std::log(p_) + x_marg_[1].logpdf(x);
    return posterior_from_logs(l0, l1);
  }

  /// P(Y = 1 | Z = z).
  double z_posterior(const Eigen::VectorXd& z) const {
    const double l0 = std::log1p(-p_) + z_marg_[0].logpdf(z);
    const double l1 = std::log(p_) + z_marg_[1].logpdf(z);
    return posterior_from_logs(l0, l1);
  }

  /// Mean of the conditional Z | X = x, Y = y (covariance is x-free).
  Eigen::VectorXd z_given_x_mean(int y, const Eigen::VectorXd& x) const {
    const GaussianClass& c = classes_[y];
    return c.mu_z + z_given_x_gain_[y] * (x - c.mu_x);
  }

  Eigen::VectorXd x_given_z_mean(int y, const Eigen::VectorXd& z) const {
    const GaussianClass& c = classes_[y];
    return c.mu_x + x_given_z_gain_[y] * (z - c.mu_z);
  }

  const Eigen::MatrixXd& z_given_x_cov(int y) const {
    return z_given_x_cov_[y];
  }
  const Eigen::MatrixXd& x_given_z_cov(int y) const {
    return x_given_z_cov_[y];
  }

  /// Monte Carlo estimate of E[p(Z) | X = x] over the mixture Z | X = x.
  double indirect_posterior(const Eigen::VectorXd& x, int n_mc,
                            CounterRng rng) const {
    if (n_mc < 1) throw DomainError("n_mc must be >= 1");
    const double px = direct_posterior(x);
    const Eigen::VectorXd m0 = z_given_x_mean(0, x);
    const Eigen::VectorXd m1 = z_given_x_mean(1, x);
    double acc = 0.0;
    for (int i = 0; i < n_mc; ++i) {
      const int y = rng.bernoulli(px) ? 1 : 0;
      const Eigen::VectorXd z =
          (y == 1 ? m1 : m0) +
          z_given_x_chol_[y] * rng.normal_vector(d_);
      acc += z_posterior(z);
    }
    return acc / static_cast<double>(n_mc);
  }

  /// Conditional information density S_z(x, y) of the latent caption model.
  double conditional_info_density(const Eigen::VectorXd& z,
                                  const Eigen::VectorXd& x, int y) const {
    const double pz = z_posterior(z);
    const Mvn g0(x_given_z_mean(0, z), x_given_z_cov_[0]);
    const Mvn g1(x_given_z_mean(1, z), x_given_z_cov_[1]);
    const double f0 = std::exp(g0.logpdf(x));
    const double f1 = std::exp(g1.logpdf(x));
    const double mix = (1.0 - pz) * f0 + pz * f1;
    if (mix <= 0.0) return 0.0;
    return (y == 1 ? f1 : f0) / mix;
  }

  /// Monte Carlo estimate of E_{P_Z}[I(X;Y|Z)]; Y is integrated analytically
  /// and only (z, x) are sampled.
  double residual_dependence_mc(int n_z, int n_x, CounterRng rng) const {
    if (n_z < 1 || n_x < 1) throw DomainError("n_z, n_x must be >= 1");
    double acc = 0.0;
    for (int i = 0; i < n_z; ++i) {
      const int yz = rng.bernoulli(p_) ? 1 : 0;
      const Eigen::VectorXd z = z_marg_[yz].sample(rng);
      const double pz = z_posterior(z);
      const Mvn g0(x_given_z_mean(0, z), x_given_z_cov_[0]);
      const Mvn g1(x_given_z_mean(1, z), x_given_z_cov_[1]);
      double inner = 0.0;
      for (int j = 0; j < n_x; ++j) {
        const int yx = rng.bernoulli(pz) ? 1 : 0;
        const Eigen::VectorXd x = (yx == 1 ? g1 : g0).sample(rng);
        const double f0 = std::exp(g0.logpdf(x));
        const double f1 = std::exp(g1.logpdf(x));
        const double mix = (1.0 - pz) * f0 + pz * f1;
        if (mix <= 0.0) continue;
        const double s0 = f0 / mix - 1.0;
        const double s1 = f1 / mix - 1.0;
        inner += (1.0 - pz) * s0 * s0 + pz * s1 * s1;
      }
      acc += inner / static_cast<double>(n_x);
    }
    return acc / static_cast<double>(n_z);
  }

  std::vector<SampleTriple> sample(int n, CounterRng rng) const {
    if (n < 1) throw DomainError("n must be >= 1");
    std::vector<SampleTriple> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      SampleTriple t;
      t.y = rng.bernoulli(p_) ? 1 : 0;
      const Eigen::VectorXd joint = joint_[t.y].sample(rng);
      t.x = joint.head(d_);
      t.z = joint.tail(d_);
      out.push_back(std::move(t));
    }
    return out;
  }

  Eigen::VectorXd sample_z_marginal(CounterRng& rng) const {
    const int y = rng.bernoulli(p_) ? 1 : 0;
    return z_marg_[y].sample(rng);
  }

  const Mvn& z_marginal(int y) const { return z_marg_[y]; }

 private:
  void init(GaussianClass c0, GaussianClass c1, double p) {
    if (p <= 0.0 || p >= 1.0) throw DomainError("prior must be in (0,1)");
    classes_[0] = std::move(c0);
    classes_[1] = std::move(c1);
    for (int y = 0; y < 2; ++y) {
      const GaussianClass& c = classes_[y];
      x_marg_[y] = Mvn(c.mu_x, c.c_xx);
      z_marg_[y] = Mvn(c.mu_z, c.c_zz);
      Eigen::MatrixXd joint_cov(2 * d_, 2 * d_);
      joint_cov.topLeftCorner(d_, d_) = c.c_xx;
      joint_cov.topRightCorner(d_, d_) = c.c_xz;
      joint_cov.bottomLeftCorner(d_, d_) = c.c_xz.transpose();
      joint_cov.bottomRightCorner(d_, d_) = c.c_zz;
      Eigen::VectorXd joint_mean(2 * d_);
      joint_mean << c.mu_x, c.mu_z;
      joint_[y] = Mvn(joint_mean, joint_cov);

      const Eigen::LLT<Eigen::MatrixXd> xx(stabilized(c.c_xx));
      z_given_x_gain_[y] = c.c_xz.transpose() * xx.solve(
          Eigen::MatrixXd::Identity(d_, d_));
      z_given_x_cov_[y] = c.c_zz - z_given_x_gain_[y] * c.c_xz;
      z_given_x_chol_[y] =
          Eigen::LLT<Eigen::MatrixXd>(stabilized(z_given_x_cov_[y])).matrixL();

      const Eigen::LLT<Eigen::MatrixXd> zz(stabilized(c.c_zz));
      x_given_z_gain_[y] =
          c.c_xz * zz.solve(Eigen::MatrixXd::Identity(d_, d_));
      x_given_z_cov_[y] = c.c_xx - x_given_z_gain_[y] * c.c_xz.transpose();
    }
  }

  Eigen::MatrixXd stabilized(const Eigen::MatrixXd& c) const {
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) return c;
    const double jitter = 1e-10 * c.trace() / static_cast<double>(c.rows());
    Eigen::MatrixXd cj = c + jitter * Eigen::MatrixXd::Identity(c.rows(), c.cols());
    if (Eigen::LLT<Eigen::MatrixXd>(cj).info() != Eigen::Success)
      throw SingularCovariance("conditional covariance not PD");
    return cj;
  }

  static double posterior_from_logs(double l0, double l1) {
    const double m = std::max(l0, l1);
    const double w0 = std::exp(l0 - m);
    const double w1 = std::exp(l1 - m);
    double out = w1 / (w0 + w1);
    if (out < 0.0) out = 0.0;
    if (out > 1.0) out = 1.0;
    return out;
  }

  int d_;
  double a_ = 0.0, b_ = 0.0, theta_ = 0.0;
  double p_;
  GaussianClass classes_[2];
  Mvn x_marg_[2], z_marg_[2], joint_[2];
  Eigen::MatrixXd z_given_x_gain_[2], z_given_x_cov_[2], z_given_x_chol_[2];
  Eigen::MatrixXd x_given_z_gain_[2], x_given_z_cov_[2];
};

}  // namespace zsl
