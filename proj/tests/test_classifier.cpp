#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "zsl/classifier.hpp"
#include "zsl/experiments.hpp"
#include "zsl/rng.hpp"

using namespace zsl;

namespace {

PromptSet two_class_prompts(const std::vector<int>& ys,
                            const std::vector<Eigen::VectorXd>& zs) {
  PromptSet set;
  set.ys = ys;
  set.zs = zs;
  return set;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("class embeddings are prompt means") {
  auto identity = [](const Eigen::VectorXd& z) { return z; };
  SUBCASE("single prompt per class") {
    const auto set = two_class_prompts({0, 1}, {vec2(1, 0), vec2(0, 1)});
    const auto emb = class_embeddings(set, identity, 2);
    CHECK(emb.means[0] == vec2(1, 0));
    CHECK(emb.means[1] == vec2(0, 1));
  }
  SUBCASE("duplication leaves the mean unchanged") {
    const auto once = two_class_prompts({0, 1}, {vec2(2, 1), vec2(0, 3)});
    const auto twice = two_class_prompts(
        {0, 1, 0, 1}, {vec2(2, 1), vec2(0, 3), vec2(2, 1), vec2(0, 3)});
    CHECK(class_embeddings(once, identity, 2).means[0] ==
          class_embeddings(twice, identity, 2).means[0]);
  }
  SUBCASE("two prompts average to the midpoint") {
    const auto set =
        two_class_prompts({0, 0, 1}, {vec2(0, 0), vec2(2, 4), vec2(1, 1)});
    const auto emb = class_embeddings(set, identity, 2);
    CHECK(emb.means[0] == vec2(1, 2));
  }
  SUBCASE("missing class raises") {
    const auto set = two_class_prompts({0, 0}, {vec2(1, 0), vec2(0, 1)});
    CHECK_THROWS_AS(class_embeddings(set, identity, 2), MissingClass);
  }
}

TEST_CASE("scoring and decoding") {
  ClassEmbeddings emb;
  emb.means = {vec2(1, 0), vec2(0, 1)};
  SUBCASE("orthonormal embeddings decode their own class") {
    CHECK(score_and_decode(vec2(1, 0), emb).decoded_class == 0);
    CHECK(score_and_decode(vec2(0, 1), emb).decoded_class == 1);
  }
  SUBCASE("ties break toward the lowest index") {
    CHECK(score_and_decode(vec2(0.5, 0.5), emb).decoded_class == 0);
    CHECK(score_and_decode(vec2(0, 0), emb).decoded_class == 0);
  }
  SUBCASE("decoding is invariant to shared shift and positive scale") {
    CounterRng rng(3);
    for (int it = 0; it < 50; ++it) {
      const Eigen::VectorXd x = rng.normal_vector(2);
      const auto base = score_and_decode(x, emb);
      Eigen::VectorXd shifted = base.scores.array() + 3.7;
      Eigen::VectorXd scaled = base.scores * 2.5;
      Eigen::Index am_shift = 0, am_scale = 0;
      shifted.maxCoeff(&am_shift);
      scaled.maxCoeff(&am_scale);
      CHECK(base.decoded_class == am_shift);
      CHECK(base.decoded_class == am_scale);
    }
  }
  SUBCASE("sigma weights rescale coordinates") {
    ClassEmbeddings weighted = emb;
    weighted.sigma_weights = vec2(1.0, 0.0);
    // Second coordinate is ignored entirely.
    CHECK(score_and_decode(vec2(0.1, 100.0), weighted).decoded_class == 0);
  }
  SUBCASE("dimension mismatch raises") {
    Eigen::VectorXd bad(3);
    bad << 1, 2, 3;
    CHECK_THROWS_AS(score_and_decode(bad, emb), DimensionMismatch);
  }
}

TEST_CASE("top-k accuracy") {
  CounterRng rng(5);
  SUBCASE("k equal to the class count is always 1") {
    std::vector<Eigen::VectorXd> scores;
    std::vector<int> labels;
    for (int i = 0; i < 20; ++i) {
      scores.push_back(rng.normal_vector(4));
      labels.push_back(static_cast<int>(rng.uniform_below(4)));
    }
    CHECK(topk_accuracy(scores, labels, 4) == 1.0);
    CHECK_THROWS_AS(topk_accuracy(scores, labels, 5), BadK);
    // Nondecreasing in k.
    double prev = 0.0;
    for (int k = 1; k <= 4; ++k) {
      const double acc = topk_accuracy(scores, labels, k);
      CHECK(acc >= prev);
      prev = acc;
    }
  }
  SUBCASE("perfect scores give top-1 accuracy 1") {
    std::vector<Eigen::VectorXd> scores;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
      Eigen::VectorXd s = Eigen::VectorXd::Zero(3);
      const int label = i % 3;
      s(label) = 1.0;
      scores.push_back(s);
      labels.push_back(label);
    }
    CHECK(topk_accuracy(scores, labels, 1) == 1.0);
  }
  SUBCASE("random scores hit chance level") {
    std::vector<Eigen::VectorXd> scores;
    std::vector<int> labels;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      scores.push_back(rng.normal_vector(10));
      labels.push_back(static_cast<int>(rng.uniform_below(10)));
    }
    const double acc = topk_accuracy(scores, labels, 1);
    CHECK(std::abs(acc - 0.1) <= 3.0 * std::sqrt(0.1 * 0.9 / n));
  }
}

TEST_CASE("excess risk bound") {
  CounterRng rng(7);
  SUBCASE("exact posteriors have zero excess risk") {
    const DiscreteTriple triple = random_positive_triple(rng, 4, 3, 2);
    const Eigen::MatrixXd pxy = triple.marginal_xy();
    const Eigen::VectorXd px = pxy.rowwise().sum();
    const auto report = excess_risk_check(
        [&](Eigen::Index x) {
          return Eigen::VectorXd(pxy.row(x).transpose() / px(x));
        },
        triple);
    CHECK(report.lhs == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(report.ok);
  }
  SUBCASE("shared per-class shift keeps the argmax and zero excess risk") {
    const DiscreteTriple triple = random_positive_triple(rng, 4, 3, 2);
    const Eigen::MatrixXd pxy = triple.marginal_xy();
    const Eigen::VectorXd px = pxy.rowwise().sum();
    const auto report = excess_risk_check(
        [&](Eigen::Index x) {
          return Eigen::VectorXd(
              (pxy.row(x).transpose() / px(x)).array() + 0.3);
        },
        triple);
    CHECK(report.lhs == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(report.rhs > 0.0);
    CHECK(report.ok);
  }
  SUBCASE("random perturbations never violate the bound") {
    for (int it = 0; it < 100; ++it) {
      const DiscreteTriple triple = random_positive_triple(rng, 3, 3, 2);
      const Eigen::MatrixXd pxy = triple.marginal_xy();
      const Eigen::VectorXd px = pxy.rowwise().sum();
      const auto report = excess_risk_check(
          [&](Eigen::Index x) {
            Eigen::VectorXd s = pxy.row(x).transpose() / px(x);
            for (Eigen::Index y = 0; y < 3; ++y)
              s(y) += 0.3 * (rng.uniform() - 0.5);
            return s;
          },
          triple);
      CHECK(report.ok);
    }
  }
}
