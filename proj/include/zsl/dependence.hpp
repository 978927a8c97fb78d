#pragma once

// Sample-based dependence measurement: the NOCCO mean-square-contingency
// estimate Tr(R_X R_Z), empirical kernel CCA with evaluable dual encoders,
// power-law singular-decay fitting, and the rate-exponent calculators.

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zsl/errors.hpp"
#include "zsl/kernel.hpp"

namespace zsl {

/// Tr(R_X R_Z) with R = Ktilde (Ktilde + n lambda I)^{-1} on doubly-centered
/// Gram matrices.
inline double msc_estimate(const std::vector<Eigen::VectorXd>& xs,
                           const std::vector<Eigen::VectorXd>& zs,
                           const KernelSpec& kernel_x,
                           const KernelSpec& kernel_z, double lambda) {
  if (xs.size() < 4 || xs.size() != zs.size())
    throw EmptySample("msc_estimate needs >= 4 matched pairs");
  const auto n = static_cast<Eigen::Index>(xs.size());
  const double nl = static_cast<double>(n) * lambda;
  const Eigen::MatrixXd kx = center_gram(gram(kernel_x, xs, xs).k);
  const Eigen::MatrixXd kz = center_gram(gram(kernel_z, zs, zs).k);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd rx = (kx + nl * eye).ldlt().solve(kx);
  const Eigen::MatrixXd rz = (kz + nl * eye).ldlt().solve(kz);
  return (rx.transpose().cwiseProduct(rz)).sum();
}

struct CcaResult {
  Eigen::VectorXd correlations;  // descending, clipped to [0, 1]
  // Dual coefficients: variate i at a new point u is
  // sum_j alpha_coef(j, i) * k_x(x_j, u) (and likewise for beta on z).
  Eigen::MatrixXd alpha_coef, beta_coef;
  std::vector<Eigen::VectorXd> train_x, train_z;
  KernelSpec kernel_x, kernel_z;
  double lambda = 0.0;
  // Per-side empirical means of the uncentered kernel expansions, subtracted
  // at evaluation time so variates are centered.
  Eigen::VectorXd alpha_offset, beta_offset;

  double alpha_at(Eigen::Index i, const Eigen::VectorXd& x) const {
    return alpha_coef.col(i).dot(kernel_column(kernel_x, train_x, x)) -
           alpha_offset(i);
  }
  double beta_at(Eigen::Index i, const Eigen::VectorXd& z) const {
    return beta_coef.col(i).dot(kernel_column(kernel_z, train_z, z)) -
           beta_offset(i);
  }
};

/// Empirical regularized kernel CCA. The canonical correlations are the
/// singular values of M = S_X^T S_Z where S = (Ktilde + n lambda I)^{-1/2}
/// Ktilde^{1/2}; the squared values sum to Tr(R_X R_Z).
inline CcaResult empirical_cca(const std::vector<Eigen::VectorXd>& xs,
                               const std::vector<Eigen::VectorXd>& zs,
                               const KernelSpec& kernel_x,
                               const KernelSpec& kernel_z, double lambda,
                               int d) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  if (d < 1 || d > n) throw BadRank("d out of range");
  const double nd = static_cast<double>(n);
  const double nl = nd * lambda;

  const Eigen::MatrixXd kx_raw = gram(kernel_x, xs, xs).k;
  const Eigen::MatrixXd kz_raw = gram(kernel_z, zs, zs).k;
  const EigDecomp ex = eigh_psd(center_gram(kx_raw));
  const EigDecomp ez = eigh_psd(center_gram(kz_raw));

  // S = V diag(sqrt(mu/(mu+nl))) V^T in each view's eigenbasis.
  auto half = [&](const EigDecomp& e) {
    Eigen::VectorXd s(e.values.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
      s(i) = std::sqrt(e.values(i) / (e.values(i) + nl));
    return s;
  };
  const Eigen::VectorXd sx = half(ex);
  const Eigen::VectorXd sz = half(ez);
  // M in the product of eigenbases: sx_i <v_i, w_j> sz_j.
  const Eigen::MatrixXd m = sx.asDiagonal() *
                            (ex.vectors.transpose() * ez.vectors) *
                            sz.asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);

  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-12) ++rank;
  if (rank < d) throw RankDeficient("fewer positive directions than d");

  CcaResult out;
  out.correlations.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    double c = svd.singularValues()(i);
    if (c > 1.0) c = 1.0;
    out.correlations(i) = c;
  }

  // Variate i on the x-side at training points: f_i = V diag(g) U_i where the
  // dual coefficient solves Ktilde a = f scaled to unit empirical variance.
  // f_i = V diag(mu^{1/2}/(mu+nl)^{1/2}) u_i has empirical second moment
  // (1/n)||f_i||^2; normalize and convert to dual coefficients via the
  // pseudo-inverse of the centered Gram.
  auto duals = [&](const EigDecomp& e, const Eigen::VectorXd& s,
                   const Eigen::MatrixXd& sing_vecs) {
    Eigen::MatrixXd coef(n, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      Eigen::VectorXd f = e.vectors * (s.asDiagonal() * sing_vecs.col(i));
      const double norm = f.norm() / std::sqrt(nd);
      if (norm <= 0.0) throw RankDeficient("zero variate");
      f /= norm;
      // Dual coefficients a with Ktilde a = f (pseudo-inverse on the
      // positive spectrum).
      Eigen::VectorXd proj = e.vectors.transpose() * f;
      for (Eigen::Index j = 0; j < n; ++j)
        proj(j) = e.values(j) > 1e-10 ? proj(j) / e.values(j) : 0.0;
      coef.col(i) = e.vectors * proj;
    }
    return coef;
  };
  out.alpha_coef = duals(ex, sx, svd.matrixU());
  out.beta_coef = duals(ez, sz, svd.matrixV());
  out.train_x = xs;
  out.train_z = zs;
  out.kernel_x = kernel_x;
  out.kernel_z = kernel_z;
  out.lambda = lambda;
  // New-point evaluation uses the uncentered kernel column; subtract each
  // variate's mean over training columns so variates stay centered.
  out.alpha_offset = (out.alpha_coef.transpose() * kx_raw).rowwise().mean();
  out.beta_offset = (out.beta_coef.transpose() * kz_raw).rowwise().mean();
  return out;
}

struct DecayFit {
  double gamma = 0.0;      // least-squares slope of log sigma_i vs log i
  double gamma_msc = 0.0;  // (I+1)/(2I) implied by I = sum_{i>=2} sigma_i^2
};

inline DecayFit singular_decay_fit(const std::vector<double>& sigmas) {
  std::vector<double> pos;
  for (double s : sigmas)
    if (s > 0.0) pos.push_back(s);
  if (pos.size() < 3) throw TooFewValues("need >= 3 positive singular values");
  const auto n = pos.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(static_cast<double>(i + 1));
    const double ly = std::log(pos[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double nn = static_cast<double>(n);
  DecayFit out;
  out.gamma = -(nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  double msc = 0.0;
  for (std::size_t i = 1; i < sigmas.size(); ++i) msc += sigmas[i] * sigmas[i];
  out.gamma_msc = msc > 0.0 ? (msc + 1.0) / (2.0 * msc) : 0.0;
  return out;
}

struct RateReport {
  double gamma_x = 0, gamma_z = 0, gamma_xz = 0, t = 0, omega_rho = 0,
         beta = 0;
  double q = 0;
  double exponent_cm = 0;      // q(t)/(q(t)+1)
  double exponent_prompt = 0;  // (2 omega - 1)/(2 omega + 1)
  double exponent_rn = 0;      // beta/(beta+1)
  bool misspec_flag = false;   // 2 gamma_xz + gamma_z <= alpha gamma_x
};

inline RateReport rate_predictor(double gamma_x, double gamma_z,
                                 double gamma_xz, double t, double omega_rho,
                                 double beta, double alpha = 0.0) {
  if (t < 0.0 || t >= 1.0) throw DomainError("t must lie in [0,1)");
  if (omega_rho <= 0.5) throw DomainError("omega_rho must exceed 1/2");
  if (beta < 1.0) throw DomainError("beta must be >= 1");
  if (gamma_x <= 0.5 || 2.0 * gamma_xz + gamma_z - 1.0 <= 0.0)
    throw DomainError("decay exponents violate rate constraints");
  RateReport out;
  out.gamma_x = gamma_x;
  out.gamma_z = gamma_z;
  out.gamma_xz = gamma_xz;
  out.t = t;
  out.omega_rho = omega_rho;
  out.beta = beta;
  out.q = std::pow(2.0 * gamma_xz + gamma_z - 1.0, t) *
          std::pow(gamma_x, 1.0 - t);
  out.exponent_cm = out.q / (out.q + 1.0);
  out.exponent_prompt =
      (2.0 * omega_rho - 1.0) / (2.0 * omega_rho + 1.0);
  out.exponent_rn = beta / (beta + 1.0);
  if (alpha > 0.0)
    out.misspec_flag = (2.0 * gamma_xz + gamma_z <= alpha * gamma_x);
  return out;
}

}  // namespace zsl
