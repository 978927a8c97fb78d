#pragma once

// Exact population quantities on finite alphabets: information density,
// conditional-mean SVD, mean square contingency, Lancaster truncation,
// direct/indirect predictors and the associated inequality checks. These
// serve as the brute-force oracle for everything estimated from samples
// elsewhere in the library.

#include <cmath>
#include <optional>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "zsl/errors.hpp"

namespace zsl {

inline constexpr double kTableSumTol = 1e-12;

namespace detail {
inline void check_table(const Eigen::Ref<const Eigen::MatrixXd>& p) {
  if ((p.array() < 0.0).any()) throw DomainError("negative probability");
  if (std::abs(p.sum() - 1.0) > kTableSumTol)
    throw DomainError("table does not sum to 1");
}
}  // namespace detail

/// Joint distribution of (X, Z) on a finite alphabet, rows indexed by x.
struct DiscreteJoint {
  Eigen::MatrixXd probs;

  explicit DiscreteJoint(Eigen::MatrixXd p) : probs(std::move(p)) {
    detail::check_table(probs);
  }

  Eigen::VectorXd marginal_x() const { return probs.rowwise().sum(); }
  Eigen::VectorXd marginal_z() const { return probs.colwise().sum(); }

  void require_positive_marginals() const {
    if ((marginal_x().array() <= kMassTol).any() ||
        (marginal_z().array() <= kMassTol).any())
      throw ZeroMarginal("marginal entry is (numerically) zero");
  }
};

/// Joint distribution of (Y, Z), rows indexed by y.
struct PromptTable {
  Eigen::MatrixXd probs;

  explicit PromptTable(Eigen::MatrixXd p) : probs(std::move(p)) {
    detail::check_table(probs);
  }

  Eigen::VectorXd marginal_y() const { return probs.rowwise().sum(); }
  Eigen::VectorXd marginal_z() const { return probs.colwise().sum(); }
};

/// Joint distribution of (X, Y, Z) stored row-major as p[(x*ny + y)*nz + z].
struct DiscreteTriple {
  Eigen::Index nx, ny, nz;
  std::vector<double> probs;

  DiscreteTriple(Eigen::Index nx_, Eigen::Index ny_, Eigen::Index nz_,
                 std::vector<double> p)
      : nx(nx_), ny(ny_), nz(nz_), probs(std::move(p)) {
    if (static_cast<Eigen::Index>(probs.size()) != nx * ny * nz)
      throw DimensionMismatch("triple size mismatch");
    double total = 0.0;
    for (double v : probs) {
      if (v < 0.0) throw DomainError("negative probability");
      total += v;
    }
    if (std::abs(total - 1.0) > kTableSumTol)
      throw DomainError("triple does not sum to 1");
  }

  double operator()(Eigen::Index x, Eigen::Index y, Eigen::Index z) const {
    return probs[static_cast<std::size_t>((x * ny + y) * nz + z)];
  }

  Eigen::MatrixXd marginal_xy() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nx, ny);
    for (Eigen::Index x = 0; x < nx; ++x)
      for (Eigen::Index y = 0; y < ny; ++y)
        for (Eigen::Index z = 0; z < nz; ++z) m(x, y) += (*this)(x, y, z);
    return m;
  }

  Eigen::MatrixXd marginal_xz() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nx, nz);
    for (Eigen::Index x = 0; x < nx; ++x)
      for (Eigen::Index y = 0; y < ny; ++y)
        for (Eigen::Index z = 0; z < nz; ++z) m(x, z) += (*this)(x, y, z);
    return m;
  }

  Eigen::MatrixXd marginal_yz() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(ny, nz);
    for (Eigen::Index x = 0; x < nx; ++x)
      for (Eigen::Index y = 0; y < ny; ++y)
        for (Eigen::Index z = 0; z < nz; ++z) m(y, z) += (*this)(x, y, z);
    return m;
  }

  Eigen::VectorXd marginal_x() const { return marginal_xy().rowwise().sum(); }
  Eigen::VectorXd marginal_z() const { return marginal_xz().colwise().sum(); }
};

/// SVD of the conditional mean operator on L2 of the marginals.
/// Columns of left_functions/right_functions are the singular functions
/// evaluated on the alphabet (alpha_i(x), beta_i(z)).
struct SpectrumResult {
  Eigen::VectorXd singular_values;  // descending, sigma_1 = 1
  Eigen::MatrixXd left_functions;   // |X| x k
  Eigen::MatrixXd right_functions;  // |Z| x k
};

/// R(x,z) = p(x,z) / (p_X(x) p_Z(z)).
inline Eigen::MatrixXd information_density(const DiscreteJoint& joint) {
  joint.require_positive_marginals();
  const Eigen::VectorXd px = joint.marginal_x();
  const Eigen::VectorXd pz = joint.marginal_z();
  Eigen::MatrixXd r = joint.probs;
  for (Eigen::Index x = 0; x < r.rows(); ++x)
    for (Eigen::Index z = 0; z < r.cols(); ++z) r(x, z) /= px(x) * pz(z);
  return r;
}

/// SVD of A = D_X^{1/2} C D_Z^{-1/2}, entries A(x,z) = p(x,z)/sqrt(px pz).
/// Singular functions are returned in L2 coordinates (divided by sqrt mass),
/// with the leading pair sign-fixed to the constant +1.
inline SpectrumResult conditional_mean_svd(const DiscreteJoint& joint) {
  joint.require_positive_marginals();
  const Eigen::VectorXd px = joint.marginal_x();
  const Eigen::VectorXd pz = joint.marginal_z();
  Eigen::MatrixXd a = joint.probs;
  for (Eigen::Index x = 0; x < a.rows(); ++x)
    for (Eigen::Index z = 0; z < a.cols(); ++z)
      a(x, z) /= std::sqrt(px(x)) * std::sqrt(pz(z));

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);

  SpectrumResult out;
  out.singular_values = svd.singularValues();
  const Eigen::Index k = out.singular_values.size();
  out.left_functions.resize(a.rows(), k);
  out.right_functions.resize(a.cols(), k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::VectorXd u = svd.matrixU().col(i);
    Eigen::VectorXd v = svd.matrixV().col(i);
    // Fix the joint sign so that the leading pair is +1 on both sides.
    if (u(0) < 0.0) {
      u = -u;
      v = -v;
    }
    out.left_functions.col(i) = u.array() / px.array().sqrt();
    out.right_functions.col(i) = v.array() / pz.array().sqrt();
  }
  return out;
}

/// Mean square contingency I(X;Z), computed both as E[(R-1)^2] under the
/// product of marginals and as the tail singular energy; the two must agree.
inline double msc(const DiscreteJoint& joint) {
  const Eigen::MatrixXd r = information_density(joint);
  const Eigen::VectorXd px = joint.marginal_x();
  const Eigen::VectorXd pz = joint.marginal_z();
  double via_density = 0.0;
  for (Eigen::Index x = 0; x < r.rows(); ++x)
    for (Eigen::Index z = 0; z < r.cols(); ++z) {
      const double d = r(x, z) - 1.0;
      via_density += px(x) * pz(z) * d * d;
    }
  const SpectrumResult spec = conditional_mean_svd(joint);
  double via_spectrum = 0.0;
  for (Eigen::Index i = 1; i < spec.singular_values.size(); ++i)
    via_spectrum += spec.singular_values(i) * spec.singular_values(i);
  if (std::abs(via_density - via_spectrum) > 1e-10)
    throw DomainError("dual MSC computations disagree");
  return via_density;
}

/// Rank-d truncation of the Lancaster expansion of R and its tail energy.
inline std::pair<Eigen::MatrixXd, double> lancaster_truncate(
    const DiscreteJoint& joint, Eigen::Index d) {
  const SpectrumResult spec = conditional_mean_svd(joint);
  const Eigen::Index k = spec.singular_values.size();
  if (d < 1 || d > k) throw BadRank("truncation rank out of range");
  Eigen::MatrixXd rd =
      Eigen::MatrixXd::Zero(spec.left_functions.rows(), spec.right_functions.rows());
  for (Eigen::Index i = 0; i < d; ++i)
    rd += spec.singular_values(i) * spec.left_functions.col(i) *
          spec.right_functions.col(i).transpose();
  double tail = 0.0;
  for (Eigen::Index i = d; i < k; ++i)
    tail += spec.singular_values(i) * spec.singular_values(i);
  return {rd, tail};
}

/// Exact population ledger for one (triple, prompt, r) configuration.
struct DecompositionReport {
  Eigen::VectorXd eta_star;   // over x
  Eigen::VectorXd g_rho;      // over z
  Eigen::VectorXd eta_rho;    // over x
  double prompt_bias = 0.0;
  double residual_dependence = 0.0;
  double lhs = 0.0;        // ||eta_rho - eta_star||^2 under P_X
  double rhs_bound = 0.0;  // 2*prompt_bias + 2*B_r^2*residual_dependence
  bool bound_holds = false;
};

/// Conditional MSC I(X;Y|z) by exhaustive summation; z-atoms of measure
/// zero are skipped by the caller.
inline double conditional_msc_at(const DiscreteTriple& t, Eigen::Index z,
                                 double pz) {
  Eigen::VectorXd px_z = Eigen::VectorXd::Zero(t.nx);
  Eigen::VectorXd py_z = Eigen::VectorXd::Zero(t.ny);
  for (Eigen::Index x = 0; x < t.nx; ++x)
    for (Eigen::Index y = 0; y < t.ny; ++y) {
      px_z(x) += t(x, y, z) / pz;
      py_z(y) += t(x, y, z) / pz;
    }
  double out = 0.0;
  for (Eigen::Index x = 0; x < t.nx; ++x)
    for (Eigen::Index y = 0; y < t.ny; ++y) {
      const double pxy_z = t(x, y, z) / pz;
      const double prod = px_z(x) * py_z(y);
      if (prod <= kMassTol) {
        if (pxy_z > kMassTol)
          throw NotAbsolutelyContinuous("P_{X,Y|z} not dominated by product");
        continue;
      }
      const double s = pxy_z / prod;
      out += prod * (s - 1.0) * (s - 1.0);
    }
  return out;
}

/// Direct/indirect predictors, prompt bias, residual dependence, and the
/// squared-distance inequality that ties them together.
inline DecompositionReport predictors_and_bound(const DiscreteTriple& triple,
                                                const PromptTable& prompt,
                                                const Eigen::VectorXd& r,
                                                double b_r) {
  if (r.size() != triple.ny || prompt.probs.rows() != triple.ny ||
      prompt.probs.cols() != triple.nz)
    throw DimensionMismatch("r / prompt sizes do not match the triple");
  if (r.cwiseAbs().maxCoeff() > b_r + 1e-12)
    throw DomainError("|r| exceeds the stated bound B_r");

  const Eigen::MatrixXd pxy = triple.marginal_xy();
  const Eigen::MatrixXd pxz = triple.marginal_xz();
  const Eigen::MatrixXd pyz = triple.marginal_yz();
  const Eigen::VectorXd px = pxy.rowwise().sum();
  const Eigen::VectorXd pz = pyz.colwise().sum();
  const Eigen::VectorXd rho_z = prompt.marginal_z();

  DecompositionReport rep;
  rep.eta_star.resize(triple.nx);
  for (Eigen::Index x = 0; x < triple.nx; ++x) {
    if (px(x) <= kMassTol) throw ZeroConditioner("P_X(x) = 0");
    rep.eta_star(x) = pxy.row(x).dot(r) / px(x);
  }

  // g under the prompt distribution and under the triple's own (Y,Z) law.
  rep.g_rho.resize(triple.nz);
  Eigen::VectorXd g_p(triple.nz);
  for (Eigen::Index z = 0; z < triple.nz; ++z) {
    if (pz(z) > kMassTol) {
      g_p(z) = pyz.col(z).dot(r) / pz(z);
    } else {
      g_p(z) = 0.0;
    }
    if (rho_z(z) > kMassTol) {
      rep.g_rho(z) = prompt.probs.col(z).dot(r) / rho_z(z);
    } else {
      // Weighted later only through Q(z|x); a zero prompt-mass caption that
      // carries pre-training mass is a hard error.
      if (pz(z) > kMassTol)
        throw ZeroConditioner("prompt assigns zero mass to a caption in use");
      rep.g_rho(z) = 0.0;
    }
  }

  rep.eta_rho.resize(triple.nx);
  for (Eigen::Index x = 0; x < triple.nx; ++x)
    rep.eta_rho(x) = pxz.row(x).dot(rep.g_rho) / px(x);

  for (Eigen::Index z = 0; z < triple.nz; ++z) {
    if (pz(z) <= kMassTol) continue;  // skipped in the P_Z average
    const double d = rep.g_rho(z) - g_p(z);
    rep.prompt_bias += pz(z) * d * d;
    rep.residual_dependence += pz(z) * conditional_msc_at(triple, z, pz(z));
  }

  for (Eigen::Index x = 0; x < triple.nx; ++x) {
    const double d = rep.eta_rho(x) - rep.eta_star(x);
    rep.lhs += px(x) * d * d;
  }
  rep.rhs_bound = 2.0 * rep.prompt_bias +
                  2.0 * b_r * b_r * rep.residual_dependence;
  rep.bound_holds = rep.lhs <= rep.rhs_bound + 1e-10;
  return rep;
}

struct ShiftCheck {
  double tv = 0.0;
  bool additive_ok = false;
  std::optional<bool> multiplicative_ok;
};

/// Total variation between p and q plus the additive/multiplicative
/// change-of-measure inequalities for the squared L2 norm of eta.
inline ShiftCheck distribution_shift_check(
    const Eigen::VectorXd& p, const Eigen::VectorXd& q,
    const Eigen::VectorXd& eta, std::optional<double> b_pq = std::nullopt) {
  if (p.size() != q.size() || p.size() != eta.size())
    throw DimensionMismatch("alphabet sizes differ");
  ShiftCheck out;
  out.tv = (p - q).cwiseAbs().sum();
  const double lhs = eta.array().square().matrix().dot(p);
  const double rhs_q = eta.array().square().matrix().dot(q);
  const double sup2 = eta.cwiseAbs().maxCoeff() * eta.cwiseAbs().maxCoeff();
  out.additive_ok = lhs <= rhs_q + sup2 * out.tv + 1e-12;
  if (b_pq) {
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if (q(i) > kMassTol && p(i) <= kMassTol)
        throw NotAbsolutelyContinuous("q is not dominated by p");
    out.multiplicative_ok = lhs <= *b_pq * rhs_q + 1e-12;
  }
  return out;
}

}  // namespace zsl
