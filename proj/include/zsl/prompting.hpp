#pragma once

// Prompting strategies realized as seeded samplers over (Y, Z): a template
// mechanism with shared offsets, per-class conditional sampling with a
// uniform class prior, and unbiased joint sampling. Includes exact prompt
// bias on finite alphabets, Monte Carlo prompt bias for the Gaussian family,
// and the chi-squared caption-marginal mismatch.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zsl/discrete.hpp"
#include "zsl/errors.hpp"
#include "zsl/gaussian.hpp"
#include "zsl/rng.hpp"

namespace zsl {

enum class PromptKind { template_based, class_conditional, unbiased };

inline const char* prompt_kind_name(PromptKind k) {
  switch (k) {
    case PromptKind::template_based: return "template_based";
    case PromptKind::class_conditional: return "class_conditional";
    default: return "unbiased";
  }
}

struct PromptSet {
  std::vector<int> ys;
  std::vector<Eigen::VectorXd> zs;
  PromptKind kind = PromptKind::unbiased;
  std::size_t m_or_total = 0;  // m per class, or M for the unbiased strategy
  std::uint64_t seed = 0;
  std::size_t size() const { return ys.size(); }
};

/// Continuous template mechanism z = f(y, u) = (2y - 1) v + u, u ~ N(0, s^2 I)
/// with the same offset multiset shared across classes.
struct TemplateStrategy {
  Eigen::VectorXd v;
  double s = 1.0;
  int n_classes = 2;
};

inline PromptSet generate(const TemplateStrategy& strat, std::size_t m,
                          std::uint64_t seed) {
  if (m < 1) throw DomainError("m must be >= 1");
  CounterRng rng(seed);
  std::vector<Eigen::VectorXd> us;
  for (std::size_t k = 0; k < m; ++k)
    us.push_back(strat.s * rng.normal_vector(strat.v.size()));
  PromptSet out;
  out.kind = PromptKind::template_based;
  out.m_or_total = m;
  out.seed = seed;
  for (int y = 0; y < strat.n_classes; ++y)
    for (const auto& u : us) {
      out.ys.push_back(y);
      out.zs.push_back(static_cast<double>(2 * y - 1) * strat.v + u);
    }
  return out;
}

/// Class-conditional strategy on the Gaussian family: rho_{Z|Y=y} equals the
/// model's class-conditional caption law, rho_Y uniform.
inline PromptSet generate_class_conditional(const GaussianThetaModel& model,
                                            std::size_t m,
                                            std::uint64_t seed) {
  if (m < 1) throw DomainError("m must be >= 1");
  CounterRng rng(seed);
  PromptSet out;
  out.kind = PromptKind::class_conditional;
  out.m_or_total = m;
  out.seed = seed;
  for (int y = 0; y < 2; ++y)
    for (std::size_t k = 0; k < m; ++k) {
      out.ys.push_back(y);
      out.zs.push_back(model.z_marginal(y).sample(rng));
    }
  return out;
}

/// Unbiased strategy on the Gaussian family: M joint draws from P_{Y,Z}.
inline PromptSet generate_unbiased(const GaussianThetaModel& model,
                                   std::size_t m_total, std::uint64_t seed) {
  if (m_total < 1) throw DomainError("M must be >= 1");
  CounterRng rng(seed);
  PromptSet out;
  out.kind = PromptKind::unbiased;
  out.m_or_total = m_total;
  out.seed = seed;
  for (std::size_t k = 0; k < m_total; ++k) {
    const int y = rng.bernoulli(model.prior()) ? 1 : 0;
    out.ys.push_back(y);
    out.zs.push_back(model.z_marginal(y).sample(rng));
  }
  return out;
}

/// Discrete strategies sample caption indices and emit them one-hot.
struct DiscretePromptStrategy {
  PromptKind kind = PromptKind::unbiased;
  // Exact rho_{Y,Z} table (ny x nz). For class_conditional strategies this is
  // (1/ny) * rho_{Z|Y}; for unbiased strategies it is P_{Y,Z} itself.
  Eigen::MatrixXd rho_yz;
};

inline DiscretePromptStrategy unbiased_discrete(const DiscreteTriple& triple) {
  return {PromptKind::unbiased, triple.marginal_yz()};
}

inline DiscretePromptStrategy class_conditional_discrete(
    const Eigen::MatrixXd& rho_z_given_y) {
  const Eigen::Index ny = rho_z_given_y.rows();
  Eigen::MatrixXd rho = rho_z_given_y / static_cast<double>(ny);
  for (Eigen::Index y = 0; y < ny; ++y) {
    const double row = rho_z_given_y.row(y).sum();
    if (std::abs(row - 1.0) > kTableSumTol)
      throw DomainError("rho_{Z|Y} row does not sum to 1");
  }
  return {PromptKind::class_conditional, std::move(rho)};
}

inline PromptSet generate(const DiscretePromptStrategy& strat,
                          std::size_t m_or_total, std::uint64_t seed) {
  if (m_or_total < 1) throw DomainError("sample count must be >= 1");
  CounterRng rng(seed);
  const Eigen::Index ny = strat.rho_yz.rows();
  const Eigen::Index nz = strat.rho_yz.cols();
  PromptSet out;
  out.kind = strat.kind;
  out.m_or_total = m_or_total;
  out.seed = seed;
  auto emit = [&](Eigen::Index y, Eigen::Index z) {
    out.ys.push_back(static_cast<int>(y));
    Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(nz);
    one_hot(z) = 1.0;
    out.zs.push_back(std::move(one_hot));
  };
  auto draw_from = [&](const Eigen::VectorXd& w) {
    const double u = rng.uniform() * w.sum();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      acc += w(i);
      if (u <= acc) return i;
    }
    return w.size() - 1;
  };
  if (strat.kind == PromptKind::class_conditional) {
    for (Eigen::Index y = 0; y < ny; ++y)
      for (std::size_t k = 0; k < m_or_total; ++k)
        emit(y, draw_from(strat.rho_yz.row(y).transpose()));
  } else {
    Eigen::VectorXd flat(ny * nz);
    for (Eigen::Index y = 0; y < ny; ++y)
      for (Eigen::Index z = 0; z < nz; ++z) flat(y * nz + z) = strat.rho_yz(y, z);
    for (std::size_t k = 0; k < m_or_total; ++k) {
      const Eigen::Index i = draw_from(flat);
      emit(i / nz, i % nz);
    }
  }
  return out;
}

/// Exact prompt bias on a finite alphabet:
/// sum_z P_Z(z) (g_rho(z) - g_P(z))^2.
inline double prompt_bias(const DiscretePromptStrategy& strat,
                          const DiscreteTriple& triple,
                          const Eigen::VectorXd& r) {
  if (strat.rho_yz.rows() != triple.ny || strat.rho_yz.cols() != triple.nz)
    throw DimensionMismatch("strategy table does not match the triple");
  const Eigen::MatrixXd pyz = triple.marginal_yz();
  const Eigen::VectorXd pz = pyz.colwise().sum();
  const Eigen::VectorXd rho_z = strat.rho_yz.colwise().sum();
  double bias = 0.0;
  for (Eigen::Index z = 0; z < triple.nz; ++z) {
    if (pz(z) <= kMassTol) continue;
    if (rho_z(z) <= kMassTol)
      throw ZeroConditioner("prompt assigns zero mass to a caption in use");
    const double g_rho = strat.rho_yz.col(z).dot(r) / rho_z(z);
    const double g_p = pyz.col(z).dot(r) / pz(z);
    bias += pz(z) * (g_rho - g_p) * (g_rho - g_p);
  }
  return bias;
}

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo prompt bias on the Gaussian family with r(y) = 1{y = 1}.
/// `class_conditional = true` evaluates the uniform-prior strategy; the
/// unbiased strategy has bias exactly zero and is evaluated as a check.
inline McEstimate prompt_bias_mc(const GaussianThetaModel& model,
                                 bool class_conditional, std::uint64_t seed,
                                 int n_draws = 20000) {
  CounterRng rng(seed);
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n_draws; ++i) {
    const Eigen::VectorXd z = model.sample_z_marginal(rng);
    const double g_p = model.z_posterior(z);
    double g_rho;
    if (class_conditional) {
      const double l0 = model.z_marginal(0).logpdf(z);
      const double l1 = model.z_marginal(1).logpdf(z);
      const double m = std::max(l0, l1);
      const double w0 = std::exp(l0 - m);
      const double w1 = std::exp(l1 - m);
      g_rho = w1 / (w0 + w1);
    } else {
      g_rho = g_p;
    }
    const double d = (g_rho - g_p) * (g_rho - g_p);
    acc += d;
    acc2 += d * d;
  }
  McEstimate out;
  const double n = static_cast<double>(n_draws);
  out.value = acc / n;
  const double var = acc2 / n - out.value * out.value;
  out.std_error = std::sqrt(std::max(0.0, var) / n);
  return out;
}

/// chi^2(rho_Z || Q_Z) = sum_z Q_Z(z) (rho_Z(z)/Q_Z(z) - 1)^2 on tables.
inline double chi2_caption_mismatch(const Eigen::VectorXd& rho_z,
                                    const Eigen::VectorXd& q_z) {
  if (rho_z.size() != q_z.size())
    throw DimensionMismatch("caption alphabets differ");
  double out = 0.0;
  for (Eigen::Index z = 0; z < q_z.size(); ++z) {
    if (q_z(z) <= kMassTol) {
      if (rho_z(z) > kMassTol)
        throw NotAbsolutelyContinuous("rho_Z not dominated by Q_Z");
      continue;
    }
    const double d = rho_z(z) / q_z(z) - 1.0;
    out += q_z(z) * d * d;
  }
  return out;
}

}  // namespace zsl
