#pragma once

// Score-based zero-shot classification: mean prompt embeddings per class,
// (optionally rescaled) inner-product scoring with deterministic argmax
// decoding, top-k accuracy, and the exact excess-risk inequality check on
// finite alphabets.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zsl/discrete.hpp"
#include "zsl/errors.hpp"
#include "zsl/prompting.hpp"

namespace zsl {

struct ClassEmbeddings {
  std::vector<Eigen::VectorXd> means;  // one per class
  Eigen::VectorXd sigma_weights;       // optional; empty = plain inner product
};

/// Mean encoded prompt per class.
inline ClassEmbeddings class_embeddings(
    const PromptSet& prompts,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& encoder,
    int n_classes, bool unit_norm = false) {
  std::vector<Eigen::VectorXd> sums(static_cast<std::size_t>(n_classes));
  std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto c = static_cast<std::size_t>(prompts.ys[i]);
    const Eigen::VectorXd e = encoder(prompts.zs[i]);
    if (counts[c] == 0)
      sums[c] = e;
    else
      sums[c] += e;
    ++counts[c];
  }
  ClassEmbeddings out;
  for (std::size_t c = 0; c < sums.size(); ++c) {
    if (counts[c] == 0) throw MissingClass("class has no prompts");
    Eigen::VectorXd m = sums[c] / static_cast<double>(counts[c]);
    if (unit_norm && m.norm() > 0.0) m /= m.norm();
    out.means.push_back(std::move(m));
  }
  return out;
}

struct Decoded {
  Eigen::VectorXd scores;
  int decoded_class = 0;
};

/// Scores are (sigma-weighted) inner products; argmax with ties broken
/// toward the lowest class index.
inline Decoded score_and_decode(const Eigen::VectorXd& x_encoding,
                                const ClassEmbeddings& emb) {
  Decoded out;
  out.scores.resize(static_cast<Eigen::Index>(emb.means.size()));
  for (std::size_t c = 0; c < emb.means.size(); ++c) {
    const Eigen::VectorXd& m = emb.means[c];
    if (m.size() != x_encoding.size())
      throw DimensionMismatch("embedding dimensions differ");
    double s = 0.0;
    if (emb.sigma_weights.size() > 0) {
      const Eigen::Index k = std::min(m.size(), emb.sigma_weights.size());
      for (Eigen::Index i = 0; i < k; ++i)
        s += emb.sigma_weights(i) * x_encoding(i) * m(i);
    } else {
      s = x_encoding.dot(m);
    }
    out.scores(static_cast<Eigen::Index>(c)) = s;
  }
  out.decoded_class = 0;
  for (Eigen::Index c = 1; c < out.scores.size(); ++c)
    if (out.scores(c) > out.scores(out.decoded_class))
      out.decoded_class = static_cast<int>(c);
  return out;
}

/// Fraction of examples whose label is among the k largest scores, ordering
/// ties by lowest class index.
inline double topk_accuracy(const std::vector<Eigen::VectorXd>& scores,
                            const std::vector<int>& labels, int k) {
  if (scores.empty() || scores.size() != labels.size())
    throw EmptySample("scores/labels mismatch");
  const auto c = scores.front().size();
  if (k < 1 || k > c) throw BadK("k out of range");
  std::size_t hits = 0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                       return scores[i](a) > scores[i](b);
                     });
    for (int j = 0; j < k; ++j)
      if (order[static_cast<std::size_t>(j)] == labels[i]) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

struct ExcessRiskReport {
  double lhs = 0.0;  // R(decoded) - R(Bayes)
  double rhs = 0.0;  // 2 sqrt(sum_c ||score_c - posterior_c||^2_{L2(P_X)})
  bool ok = false;
};

/// Exact 0-1 risks on a finite alphabet: the decoded classifier from
/// per-class score functions versus the Bayes classifier, bounded by twice
/// the root summed squared score error.
inline ExcessRiskReport excess_risk_check(
    const std::function<Eigen::VectorXd(Eigen::Index)>& score_fn,
    const DiscreteTriple& triple) {
  const Eigen::MatrixXd pxy = triple.marginal_xy();
  const Eigen::VectorXd px = pxy.rowwise().sum();
  if ((px.array() <= kMassTol).any()) throw ZeroMarginal("P_X has a zero atom");

  double risk_dec = 0.0, risk_bayes = 0.0, sq = 0.0;
  for (Eigen::Index x = 0; x < triple.nx; ++x) {
    const Eigen::VectorXd post = pxy.row(x).transpose() / px(x);
    const Eigen::VectorXd s = score_fn(x);
    if (s.size() != triple.ny)
      throw DimensionMismatch("score vector size differs from |Y|");
    Eigen::Index dec = 0, bayes = 0;
    for (Eigen::Index y = 1; y < triple.ny; ++y) {
      if (s(y) > s(dec)) dec = y;
      if (post(y) > post(bayes)) bayes = y;
    }
    risk_dec += px(x) * (1.0 - post(dec));
    risk_bayes += px(x) * (1.0 - post(bayes));
    sq += px(x) * (s - post).squaredNorm();
  }
  ExcessRiskReport out;
  out.lhs = risk_dec - risk_bayes;
  out.rhs = 2.0 * std::sqrt(sq);
  out.ok = out.lhs <= out.rhs + 1e-12;
  return out;
}

}  // namespace zsl
