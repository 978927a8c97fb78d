#pragma once

// Empirical self-supervised objectives on paired embedding batches: the
// symmetric InfoNCE (CLIP) loss and its second-order expansion diagnostic,
// the spectral contrastive loss, a hinge-variance VICReg variant, Barlow
// Twins via batch whitening, and a small finite-difference trainer for toy
// two-tower encoders.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zsl/errors.hpp"
#include "zsl/gaussian.hpp"
#include "zsl/rng.hpp"

namespace zsl {

struct EmbeddingBatch {
  Eigen::MatrixXd a;  // n x d x-encodings
  Eigen::MatrixXd b;  // n x d z-encodings
};

struct CovStats {
  Eigen::MatrixXd sigma_aa, sigma_bb, sigma_ab;  // (JA)^T (JB) style
  Eigen::MatrixXd sigma_ab_offdiag;              // sigma_ab with zero diagonal
  Eigen::VectorXd mean_a, mean_b;
};

inline CovStats cov_stats(const EmbeddingBatch& batch) {
  if (batch.a.rows() != batch.b.rows() || batch.a.cols() != batch.b.cols())
    throw DimensionMismatch("embedding batch shapes differ");
  if (batch.a.rows() < 2) throw EmptySample("need n >= 2 for covariances");
  CovStats s;
  s.mean_a = batch.a.colwise().mean();
  s.mean_b = batch.b.colwise().mean();
  const Eigen::MatrixXd ca = batch.a.rowwise() - s.mean_a.transpose();
  const Eigen::MatrixXd cb = batch.b.rowwise() - s.mean_b.transpose();
  s.sigma_aa = ca.transpose() * ca;
  s.sigma_bb = cb.transpose() * cb;
  s.sigma_ab = ca.transpose() * cb;
  s.sigma_ab_offdiag = s.sigma_ab;
  s.sigma_ab_offdiag.diagonal().setZero();
  return s;
}

/// Symmetric InfoNCE: (1/n) sum_i [ -<a_i,b_i> + (1/2) lse_j <a_i,b_j>
/// + (1/2) lse_j <a_j,b_i> ] (+ log n when add_log_n is set).
inline double clip_loss(const EmbeddingBatch& batch, bool add_log_n = false) {
  const Eigen::Index n = batch.a.rows();
  if (n < 1) throw EmptySample("empty batch");
  const Eigen::MatrixXd s = batch.a * batch.b.transpose();
  auto lse = [](const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
  };
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += -s(i, i) + 0.5 * lse(s.row(i).transpose()) + 0.5 * lse(s.col(i));
  }
  loss /= static_cast<double>(n);
  if (add_log_n) loss += std::log(static_cast<double>(n));
  return loss;
}

/// Second-order expansion of clip_loss around zero similarities:
/// log n - [(1/n) sum_i <a_i,b_i> - <abar,bbar>]
///       + (1/4n) sum_i Var_j <a_i,b_j> + (1/4n) sum_i Var_j <a_j,b_i>.
inline double clip_quadratic(const EmbeddingBatch& batch,
                             bool add_log_n = false) {
  const Eigen::Index n = batch.a.rows();
  if (n < 2) throw EmptySample("need n >= 2");
  const double nd = static_cast<double>(n);
  const Eigen::MatrixXd s = batch.a * batch.b.transpose();
  const Eigen::VectorXd abar = batch.a.colwise().mean();
  const Eigen::VectorXd bbar = batch.b.colwise().mean();
  const double align = s.trace() / nd - abar.dot(bbar);
  double var_rows = 0.0, var_cols = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mr = s.row(i).mean();
    const double mc = s.col(i).mean();
    var_rows += (s.row(i).array() - mr).square().sum() / nd;
    var_cols += (s.col(i).array() - mc).square().sum() / nd;
  }
  double q = std::log(nd) - align + (var_rows + var_cols) / (4.0 * nd);
  if (add_log_n) q += std::log(nd);
  return q;
}

/// |clip_loss - clip_quadratic| on the given batch; decays super-quadratically
/// as the batch is scaled toward zero.
inline double clip_taylor_gap(const EmbeddingBatch& batch) {
  return std::abs(clip_loss(batch) - clip_quadratic(batch));
}

/// -(1/n) sum_i <a_i,b_i> + (1/(n(n-1))) sum_{i != j} <a_i,b_j>^2.
inline double spectral_contrastive_loss(const EmbeddingBatch& batch) {
  const Eigen::Index n = batch.a.rows();
  if (n < 2) throw EmptySample("need n >= 2");
  const double nd = static_cast<double>(n);
  const Eigen::MatrixXd s = batch.a * batch.b.transpose();
  const double pos = s.trace() / nd;
  const double neg =
      (s.squaredNorm() - s.diagonal().squaredNorm()) / (nd * (nd - 1.0));
  return -pos + neg;
}

/// Reference double-loop evaluation for identity checks.
inline double spectral_contrastive_loss_loop(const EmbeddingBatch& batch) {
  const Eigen::Index n = batch.a.rows();
  const double nd = static_cast<double>(n);
  double pos = 0.0, neg = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    pos += batch.a.row(i).dot(batch.b.row(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = batch.a.row(i).dot(batch.b.row(j));
      neg += v * v;
    }
  }
  return -pos / nd + neg / (nd * (nd - 1.0));
}

struct VicregParts {
  double total = 0.0;
  double variance = 0.0;
  double invariance = 0.0;
  double covariance = 0.0;
};

/// Variance part (c3/2d)[Tr r(Sigma_AA) + Tr r(Sigma_BB)] with the hinge
/// r(x) = max(0, c1 - sqrt(x + c2)) on covariance diagonals; invariance
/// (1/2n)||A - B||_F^2; covariance kappa ||offdiag Sigma_AB||_F^2.
inline VicregParts vicreg_loss(const EmbeddingBatch& batch, double c1 = 1.0,
                               double c2 = 1e-4, double c3 = 25.0,
                               double kappa = 1.0) {
  if (c1 <= 0.0 || c2 <= 0.0 || c3 <= 0.0 || kappa <= 0.0)
    throw DomainError("vicreg hyperparameters must be positive");
  const CovStats s = cov_stats(batch);
  const double nd = static_cast<double>(batch.a.rows());
  const double dd = static_cast<double>(batch.a.cols());
  auto hinge_trace = [&](const Eigen::MatrixXd& sigma) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sigma.rows(); ++i)
      acc += std::max(0.0, c1 - std::sqrt(sigma(i, i) + c2));
    return acc;
  };
  VicregParts out;
  out.variance =
      (c3 / (2.0 * dd)) * (hinge_trace(s.sigma_aa) + hinge_trace(s.sigma_bb));
  out.invariance = (batch.a - batch.b).squaredNorm() / (2.0 * nd);
  out.covariance = kappa * s.sigma_ab_offdiag.squaredNorm();
  out.total = out.variance + out.invariance + out.covariance;
  return out;
}

/// Barlow Twins on batch-whitened embeddings: the per-side centered
/// covariance is transformed to the identity, then the loss is
/// (1/2) sum_i ((Sigma'_AB)_ii - 1)^2 + kappa ||offdiag Sigma'_AB||_F^2.
inline double barlow_twins_loss(const EmbeddingBatch& batch,
                                double kappa = 1.0) {
  const Eigen::Index n = batch.a.rows();
  const Eigen::Index d = batch.a.cols();
  if (n <= d) throw DomainError("whitening requires n > d");
  auto whiten = [&](const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
    Eigen::MatrixXd sigma = c.transpose() * c;
    sigma.diagonal().array() += 1e-12 * sigma.trace() / static_cast<double>(d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    const double max_ev = es.eigenvalues().maxCoeff();
    if (es.eigenvalues().minCoeff() <= 1e-10 * std::max(max_ev, 1e-300))
      throw WhiteningFailure("centered covariance numerically singular");
    const Eigen::MatrixXd inv_sqrt =
        es.eigenvectors() *
        es.eigenvalues().array().rsqrt().matrix().asDiagonal() *
        es.eigenvectors().transpose();
    return Eigen::MatrixXd(c * inv_sqrt);
  };
  const Eigen::MatrixXd aw = whiten(batch.a);
  const Eigen::MatrixXd bw = whiten(batch.b);
  const Eigen::MatrixXd cross = aw.transpose() * bw;
  double diag = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double v = cross(i, i) - 1.0;
    diag += v * v;
  }
  Eigen::MatrixXd off = cross;
  off.diagonal().setZero();
  return 0.5 * diag + kappa * off.squaredNorm();
}

/// Two single-hidden-layer encoders (width 16, tanh), parameters flattened
/// per encoder as [W1 (row-major), b1, W2 (row-major), b2].
class ToyEncoderPair {
 public:
  static constexpr int kHidden = 16;

  ToyEncoderPair(int d_in_x, int d_in_z, int d_out, std::uint64_t seed)
      : d_in_x_(d_in_x), d_in_z_(d_in_z), d_out_(d_out) {
    CounterRng rng(CounterRng::mix(seed) ^ 0x746f79656e63ULL);
    params_.resize(param_count());
    for (Eigen::Index i = 0; i < params_.size(); ++i)
      params_(i) = 0.3 * rng.normal();
  }

  Eigen::Index param_count() const {
    return encoder_size(d_in_x_) + encoder_size(d_in_z_);
  }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::VectorXd encode_x(const Eigen::VectorXd& x) const {
    return forward(params_.head(encoder_size(d_in_x_)), d_in_x_, x);
  }
  Eigen::VectorXd encode_z(const Eigen::VectorXd& z) const {
    return forward(params_.tail(encoder_size(d_in_z_)), d_in_z_, z);
  }

  EmbeddingBatch embed(const std::vector<SampleTriple>& data) const {
    EmbeddingBatch batch;
    const auto n = static_cast<Eigen::Index>(data.size());
    batch.a.resize(n, d_out_);
    batch.b.resize(n, d_out_);
    for (Eigen::Index i = 0; i < n; ++i) {
      batch.a.row(i) = encode_x(data[static_cast<std::size_t>(i)].x);
      batch.b.row(i) = encode_z(data[static_cast<std::size_t>(i)].z);
    }
    return batch;
  }

 private:
  Eigen::Index encoder_size(int d_in) const {
    return static_cast<Eigen::Index>(d_in) * kHidden + kHidden +
           kHidden * d_out_ + d_out_;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& p, int d_in,
                          const Eigen::VectorXd& v) const {
    Eigen::Index off = 0;
    Eigen::MatrixXd w1(kHidden, d_in);
    for (int i = 0; i < kHidden; ++i)
      for (int j = 0; j < d_in; ++j) w1(i, j) = p(off++);
    Eigen::VectorXd b1 = p.segment(off, kHidden);
    off += kHidden;
    Eigen::MatrixXd w2(d_out_, kHidden);
    for (int i = 0; i < d_out_; ++i)
      for (int j = 0; j < kHidden; ++j) w2(i, j) = p(off++);
    Eigen::VectorXd b2 = p.segment(off, d_out_);
    const Eigen::VectorXd h = ((w1 * v + b1).array().tanh()).matrix();
    return w2 * h + b2;
  }

  int d_in_x_, d_in_z_, d_out_;
  Eigen::VectorXd params_;
};

struct TrainTrace {
  std::vector<double> losses;  // one entry per step, before the update
};

/// Plain gradient descent with central finite differences
/// (h = 1e-4 * (1 + |param|)) on mini-batch loss; deterministic given seed.
inline TrainTrace train_toy(
    const std::function<double(const EmbeddingBatch&)>& objective,
    const std::vector<SampleTriple>& data, ToyEncoderPair& encoders, int steps,
    double lr, std::uint64_t seed, std::size_t batch_size = 64) {
  if (steps < 0) throw DomainError("steps must be >= 0");
  TrainTrace trace;
  if (steps == 0) return trace;
  CounterRng rng(CounterRng::mix(seed) ^ 0x747261696eULL);
  const std::size_t bs = std::min(batch_size, data.size());
  Eigen::VectorXd& p = encoders.params();
  for (int step = 0; step < steps; ++step) {
    std::vector<SampleTriple> minibatch;
    minibatch.reserve(bs);
    for (std::size_t k = 0; k < bs; ++k)
      minibatch.push_back(
          data[static_cast<std::size_t>(rng.uniform_below(data.size()))]);
    auto eval = [&]() { return objective(encoders.embed(minibatch)); };
    const double loss0 = eval();
    if (!std::isfinite(loss0))
      throw NonFiniteLoss("non-finite loss at step " + std::to_string(step));
    trace.losses.push_back(loss0);
    Eigen::VectorXd grad(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double orig = p(i);
      const double h = 1e-4 * (1.0 + std::abs(orig));
      p(i) = orig + h;
      const double up = eval();
      p(i) = orig - h;
      const double down = eval();
      p(i) = orig;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NonFiniteLoss("non-finite loss at step " + std::to_string(step));
      grad(i) = (up - down) / (2.0 * h);
    }
    p -= lr * grad;
  }
  return trace;
}

}  // namespace zsl
