#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "zsl/rng.hpp"
#include "zsl/ssl.hpp"

using namespace zsl;

namespace {

EmbeddingBatch random_batch(CounterRng& rng, int n, int d) {
  EmbeddingBatch batch;
  batch.a.resize(n, d);
  batch.b.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      batch.a(i, j) = rng.normal();
      batch.b(i, j) = rng.normal();
    }
  return batch;
}

}  // namespace

TEST_CASE("cov_stats") {
  CounterRng rng(3);
  const EmbeddingBatch batch = random_batch(rng, 30, 3);
  const CovStats s = cov_stats(batch);
  CHECK((s.mean_a.transpose() - batch.a.colwise().mean()).cwiseAbs().maxCoeff() <
        1e-14);
  // The off-diagonal copy has an exactly zero diagonal.
  CHECK(s.sigma_ab_offdiag.diagonal().cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(s.sigma_ab_offdiag(i, j) == s.sigma_ab(i, j));
  // sigma_aa is PSD and symmetric.
  CHECK((s.sigma_aa - s.sigma_aa.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  EmbeddingBatch bad = batch;
  bad.b = batch.b.topRows(10);
  CHECK_THROWS_AS(cov_stats(bad), DimensionMismatch);
}

TEST_CASE("clip loss constants") {
  SUBCASE("a single pair scores exactly zero") {
    EmbeddingBatch batch;
    batch.a.resize(1, 3);
    batch.b.resize(1, 3);
    batch.a << 0.4, -1.0, 2.0;
    batch.b << 1.0, 0.3, -0.7;
    CHECK(clip_loss(batch) == 0.0);
    CHECK(clip_loss(batch, true) == 0.0);  // log 1 = 0
  }
  SUBCASE("an all-zero batch scores log n") {
    EmbeddingBatch batch;
    batch.a = Eigen::MatrixXd::Zero(16, 4);
    batch.b = Eigen::MatrixXd::Zero(16, 4);
    CHECK(clip_loss(batch) == doctest::Approx(std::log(16.0)).epsilon(1e-14));
    CHECK(clip_quadratic(batch) ==
          doctest::Approx(std::log(16.0)).epsilon(1e-14));
    CHECK(clip_loss(batch, true) ==
          doctest::Approx(2.0 * std::log(16.0)).epsilon(1e-14));
  }
  SUBCASE("swapping the towers leaves the symmetric loss unchanged") {
    CounterRng rng(5);
    const EmbeddingBatch batch = random_batch(rng, 12, 3);
    EmbeddingBatch swapped;
    swapped.a = batch.b;
    swapped.b = batch.a;
    CHECK(clip_loss(batch) ==
          doctest::Approx(clip_loss(swapped)).epsilon(1e-12));
  }
}

TEST_CASE("clip quadratic expansion gap decays super-quadratically") {
  CounterRng rng(7);
  const EmbeddingBatch base = random_batch(rng, 24, 4);
  double prev_gap = -1.0;
  for (double eps : {0.2, 0.1, 0.05}) {
    EmbeddingBatch scaled;
    scaled.a = eps * base.a;
    scaled.b = eps * base.b;
    const double gap = clip_taylor_gap(scaled);
    if (prev_gap > 0.0) {
      // Halving the scale should shrink the gap roughly eight-fold; require
      // a conservative factor of six.
      CHECK(gap <= prev_gap / 6.0);
    }
    prev_gap = gap;
  }
}

TEST_CASE("spectral contrastive loss") {
  CounterRng rng(9);
  SUBCASE("vectorized form equals the double loop") {
    for (int it = 0; it < 10; ++it) {
      const EmbeddingBatch batch = random_batch(rng, 15, 3);
      CHECK(spectral_contrastive_loss(batch) ==
            doctest::Approx(spectral_contrastive_loss_loop(batch))
                .epsilon(1e-12));
    }
  }
  SUBCASE("hand-computed two-sample value") {
    EmbeddingBatch batch;
    batch.a.resize(2, 1);
    batch.b.resize(2, 1);
    batch.a << 1.0, 2.0;
    batch.b << 3.0, 4.0;
    // s = [[3,4],[6,8]]; pos = (3+8)/2; neg = (16+36)/2.
    CHECK(spectral_contrastive_loss(batch) ==
          doctest::Approx(-5.5 + 26.0).epsilon(1e-14));
  }
  SUBCASE("tiny batches are rejected") {
    EmbeddingBatch batch;
    batch.a = Eigen::MatrixXd::Zero(1, 2);
    batch.b = Eigen::MatrixXd::Zero(1, 2);
    CHECK_THROWS_AS(spectral_contrastive_loss(batch), EmptySample);
  }
}

TEST_CASE("vicreg loss parts") {
  CounterRng rng(11);
  SUBCASE("identical high-variance views: only covariance survives") {
    EmbeddingBatch batch;
    batch.a = 10.0 * random_batch(rng, 50, 3).a;
    batch.b = batch.a;
    const VicregParts parts = vicreg_loss(batch);
    CHECK(parts.invariance == 0.0);
    // Diagonal variances far exceed c1^2, so every hinge is inactive.
    CHECK(parts.variance == 0.0);
    CHECK(parts.covariance > 0.0);
    CHECK(parts.total == parts.covariance);
  }
  SUBCASE("one-dimensional embeddings have no covariance penalty") {
    const EmbeddingBatch batch = random_batch(rng, 20, 1);
    CHECK(vicreg_loss(batch).covariance == 0.0);
  }
  SUBCASE("hinge activates on collapsed embeddings") {
    EmbeddingBatch batch;
    batch.a = Eigen::MatrixXd::Zero(10, 2);
    batch.b = Eigen::MatrixXd::Zero(10, 2);
    const VicregParts parts = vicreg_loss(batch, 1.0, 1e-4, 25.0, 1.0);
    // Each diagonal is 0, so the hinge contributes c1 - sqrt(c2) per
    // coordinate and side.
    const double per = 1.0 - std::sqrt(1e-4);
    CHECK(parts.variance ==
          doctest::Approx((25.0 / 4.0) * (2.0 * per + 2.0 * per))
              .epsilon(1e-12));
    CHECK(parts.invariance == 0.0);
  }
  SUBCASE("invalid hyperparameters raise") {
    const EmbeddingBatch batch = random_batch(rng, 10, 2);
    CHECK_THROWS_AS(vicreg_loss(batch, -1.0), DomainError);
    CHECK_THROWS_AS(vicreg_loss(batch, 1.0, 1e-4, 25.0, 0.0), DomainError);
  }
}

TEST_CASE("barlow twins loss") {
  CounterRng rng(13);
  SUBCASE("identical views whiten to zero loss") {
    EmbeddingBatch batch;
    batch.a = random_batch(rng, 60, 4).a;
    batch.b = batch.a;
    CHECK(barlow_twins_loss(batch) == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("independent views score near d/2") {
    EmbeddingBatch batch = random_batch(rng, 800, 4);
    const double loss = barlow_twins_loss(batch);
    CHECK(loss == doctest::Approx(2.0).epsilon(0.25));
  }
  SUBCASE("shape and degeneracy guards") {
    EmbeddingBatch small;
    small.a = Eigen::MatrixXd::Zero(3, 3);
    small.b = Eigen::MatrixXd::Zero(3, 3);
    CHECK_THROWS_AS(barlow_twins_loss(small), DomainError);
    EmbeddingBatch flat = random_batch(rng, 20, 2);
    flat.a.col(1).setConstant(1.0);  // zero variance coordinate
    CHECK_THROWS_AS(barlow_twins_loss(flat), WhiteningFailure);
  }
}

TEST_CASE("toy encoder pair") {
  const ToyEncoderPair enc(2, 3, 4, 99);
  SUBCASE("parameter count matches the layer shapes") {
    const int per_x = 2 * 16 + 16 + 16 * 4 + 4;
    const int per_z = 3 * 16 + 16 + 16 * 4 + 4;
    CHECK(enc.param_count() == per_x + per_z);
  }
  SUBCASE("construction is deterministic in the seed") {
    const ToyEncoderPair again(2, 3, 4, 99);
    const ToyEncoderPair other(2, 3, 4, 100);
    CHECK(enc.params() == again.params());
    CHECK(enc.params() != other.params());
  }
  SUBCASE("embed stacks per-sample encodings") {
    CounterRng rng(1);
    std::vector<SampleTriple> data;
    for (int i = 0; i < 5; ++i)
      data.push_back({rng.normal_vector(2), i % 2, rng.normal_vector(3)});
    const EmbeddingBatch batch = enc.embed(data);
    CHECK(batch.a.rows() == 5);
    CHECK(batch.b.cols() == 4);
    CHECK((batch.a.row(2).transpose() - enc.encode_x(data[2].x))
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((batch.b.row(4).transpose() - enc.encode_z(data[4].z))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("finite-difference training") {
  CounterRng rng(17);
  std::vector<SampleTriple> data;
  for (int i = 0; i < 64; ++i) {
    const Eigen::VectorXd x = rng.normal_vector(2);
    data.push_back({x, 0, x + 0.1 * rng.normal_vector(2)});
  }
  SUBCASE("zero steps leave the parameters untouched") {
    ToyEncoderPair enc(2, 2, 2, 7);
    const Eigen::VectorXd before = enc.params();
    const TrainTrace trace =
        train_toy(spectral_contrastive_loss, data, enc, 0, 0.05, 1);
    CHECK(trace.losses.empty());
    CHECK(enc.params() == before);
  }
  SUBCASE("training lowers the spectral loss") {
    ToyEncoderPair enc(2, 2, 2, 7);
    const TrainTrace trace =
        train_toy(spectral_contrastive_loss, data, enc, 12, 0.02, 1, 64);
    REQUIRE(trace.losses.size() == 12);
    CHECK(trace.losses.back() < trace.losses.front());
  }
  SUBCASE("training is deterministic") {
    ToyEncoderPair e1(2, 2, 2, 7), e2(2, 2, 2, 7);
    train_toy(spectral_contrastive_loss, data, e1, 3, 0.02, 1);
    train_toy(spectral_contrastive_loss, data, e2, 3, 0.02, 1);
    CHECK(e1.params() == e2.params());
  }
  SUBCASE("non-finite losses are reported with the step index") {
    ToyEncoderPair enc(2, 2, 2, 7);
    auto bad = [](const EmbeddingBatch&) {
      return std::numeric_limits<double>::infinity();
    };
    CHECK_THROWS_AS(train_toy(bad, data, enc, 3, 0.02, 1), NonFiniteLoss);
  }
}
