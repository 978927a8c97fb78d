#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "zsl/cme.hpp"
#include "zsl/kernel.hpp"
#include "zsl/rng.hpp"

using namespace zsl;

namespace {

std::vector<Eigen::VectorXd> random_points(CounterRng& rng, int n, int d) {
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < n; ++i) out.push_back(rng.normal_vector(d));
  return out;
}

}  // namespace

TEST_CASE("tikhonov weights match the closed-form ridge solution") {
  CounterRng rng(3);
  const auto xs = random_points(rng, 40, 2);
  const auto zs = random_points(rng, 40, 2);
  const KernelSpec kx{1.2};
  const double lambda = 0.05;
  const CmeModel cme =
      fit_cme(xs, zs, kx, {SpectralFilter::Kind::tikhonov, lambda});
  const Eigen::MatrixXd k = gram(kx, xs, xs).k;
  for (int it = 0; it < 5; ++it) {
    const Eigen::VectorXd q = rng.normal_vector(2);
    const Eigen::VectorXd k_q = kernel_column(kx, xs, q);
    const Eigen::VectorXd closed =
        (k + 40.0 * lambda * Eigen::MatrixXd::Identity(40, 40))
            .ldlt()
            .solve(k_q);
    CHECK((cme.weights(q) - closed).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("single-sample weight function is the scalar formula") {
  CounterRng rng(5);
  const auto xs = random_points(rng, 1, 2);
  const auto zs = random_points(rng, 1, 2);
  const KernelSpec kx{1.0};
  const SpectralFilter f{SpectralFilter::Kind::tikhonov, 0.3};
  const CmeModel cme = fit_cme(xs, zs, kx, f);
  const Eigen::VectorXd q = rng.normal_vector(2);
  const double expected = f(kx(xs[0], xs[0])) * kx(xs[0], q);
  CHECK(cme.weights(q)(0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("duplicating every pair leaves the weight functional unchanged") {
  CounterRng rng(7);
  auto xs = random_points(rng, 20, 2);
  auto zs = random_points(rng, 20, 2);
  const KernelSpec kx{1.0};
  const SpectralFilter f{SpectralFilter::Kind::tikhonov, 0.1};
  const CmeModel small = fit_cme(xs, zs, kx, f);
  auto xs2 = xs;
  auto zs2 = zs;
  xs2.insert(xs2.end(), xs.begin(), xs.end());
  zs2.insert(zs2.end(), zs.begin(), zs.end());
  const CmeModel big = fit_cme(xs2, zs2, kx, f);
  // Compare the induced predictions with g(z) = first coordinate of z.
  for (int it = 0; it < 5; ++it) {
    const Eigen::VectorXd q = rng.normal_vector(2);
    double pred_small = 0.0, pred_big = 0.0;
    const Eigen::VectorXd ws = small.weights(q);
    const Eigen::VectorXd wb = big.weights(q);
    for (int i = 0; i < 20; ++i) pred_small += ws(i) * zs[i](0);
    for (int i = 0; i < 40; ++i) pred_big += wb(i) * zs2[i](0);
    CHECK(pred_small == doctest::Approx(pred_big).epsilon(1e-8));
  }
}

TEST_CASE("kernel ridge regression of g") {
  CounterRng rng(11);
  const KernelSpec kz{1.0};
  SUBCASE("single prompt interpolates") {
    std::vector<int> ys = {1};
    auto zs = random_points(rng, 1, 2);
    const RidgeModel g =
        fit_g_rho(ys, zs, [](int y) { return y == 1 ? 1.0 : 0.0; }, kz, 1e-12);
    CHECK(g(zs[0]) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("zero targets give the zero function") {
    std::vector<int> ys = {0, 0, 0};
    auto zs = random_points(rng, 3, 2);
    const RidgeModel g =
        fit_g_rho(ys, zs, [](int) { return 0.0; }, kz, 0.1);
    CHECK(g.coef().cwiseAbs().maxCoeff() == 0.0);
    CHECK(g(zs[1]) == 0.0);
  }
  SUBCASE("noiseless in-span target is recovered") {
    const auto zs = random_points(rng, 50, 2);
    Eigen::VectorXd alpha(50);
    for (int i = 0; i < 50; ++i) alpha(i) = rng.normal();
    const Eigen::MatrixXd l = gram(kz, zs, zs).k;
    const Eigen::VectorXd target = l * alpha;
    // Wrap the target values as the "r(y)" lookup over indexed prompts.
    std::vector<int> ys(50);
    for (int i = 0; i < 50; ++i) ys[i] = i;
    const RidgeModel g = fit_g_rho(
        ys, zs, [&](int i) { return target(i); }, kz, 1e-8);
    double max_err = 0.0;
    for (int i = 0; i < 50; ++i)
      max_err = std::max(max_err, std::abs(g(zs[i]) - target(i)));
    CHECK(max_err < 1e-4);
  }
  SUBCASE("train error is nondecreasing in lambda on in-span targets") {
    const auto zs = random_points(rng, 30, 2);
    Eigen::VectorXd alpha(30);
    for (int i = 0; i < 30; ++i) alpha(i) = rng.normal();
    const Eigen::MatrixXd l = gram(kz, zs, zs).k;
    const Eigen::VectorXd target = l * alpha;
    std::vector<int> ys(30);
    for (int i = 0; i < 30; ++i) ys[i] = i;
    double prev = -1.0;
    for (double lam : {1e-8, 1e-6, 1e-4, 1e-2, 1.0}) {
      const RidgeModel g = fit_g_rho(
          ys, zs, [&](int i) { return target(i); }, kz, lam);
      double err = 0.0;
      for (int i = 0; i < 30; ++i) {
        const double d = g(zs[i]) - target(i);
        err += d * d;
      }
      CHECK(err >= prev - 1e-10);
      prev = err;
    }
  }
}

TEST_CASE("predict_eta composition") {
  CounterRng rng(13);
  const auto xs = random_points(rng, 25, 2);
  const auto zs = random_points(rng, 25, 2);
  const KernelSpec kx{1.0}, kz{1.0};
  const CmeModel cme =
      fit_cme(xs, zs, kx, {SpectralFilter::Kind::tikhonov, 0.05}, kz);
  SUBCASE("constant g scales the weight sum") {
    // A ridge fit on constant targets is approximately constant; instead
    // verify linearity directly through the composition formula.
    std::vector<int> ys(5, 1);
    const auto pz = random_points(rng, 5, 2);
    const RidgeModel g =
        fit_g_rho(ys, pz, [](int) { return 2.5; }, kz, 1e-10);
    const Eigen::VectorXd q = rng.normal_vector(2);
    double expected = 0.0;
    const Eigen::VectorXd w = cme.weights(q);
    for (int i = 0; i < 25; ++i) expected += w(i) * g(zs[i]);
    CHECK(predict_eta(cme, g, q) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("mismatched z-kernels are rejected") {
    std::vector<int> ys = {0, 1};
    const auto pz = random_points(rng, 2, 2);
    const RidgeModel g = fit_g_rho(
        ys, pz, [](int y) { return double(y); }, KernelSpec{2.0}, 0.1);
    CHECK_THROWS_AS(predict_eta(cme, g, rng.normal_vector(2)),
                    KernelMismatch);
  }
  SUBCASE("batched predictor agrees with the direct composition") {
    std::vector<int> ys = {0, 1, 1, 0};
    const auto pz = random_points(rng, 4, 2);
    const RidgeModel g = fit_g_rho(
        ys, pz, [](int y) { return double(y); }, kz, 0.05);
    const CmePredictor pred(cme, g);
    for (int it = 0; it < 5; ++it) {
      const Eigen::VectorXd q = rng.normal_vector(2);
      CHECK(pred(q) == doctest::Approx(predict_eta(cme, g, q)).epsilon(1e-10));
    }
  }
}

TEST_CASE("mse_on") {
  CounterRng rng(17);
  const auto xs = random_points(rng, 10, 2);
  auto f = [](const Eigen::VectorXd& x) { return x(0); };
  auto g = [](const Eigen::VectorXd& x) { return x(0) + 0.5; };
  CHECK(mse_on(f, f, xs) == 0.0);
  CHECK(mse_on(g, f, xs) == doctest::Approx(0.25).epsilon(1e-14));
  double loop = 0.0;
  for (const auto& x : xs) {
    const double d = g(x) - f(x);
    loop += d * d;
  }
  loop /= xs.size();
  CHECK(mse_on(g, f, xs) == doctest::Approx(loop).epsilon(1e-14));
  CHECK_THROWS_AS(mse_on(f, f, {}), EmptySample);
}

TEST_CASE("lambda schedule") {
  CHECK(lambda_schedule_cme(100, 1.0, 0.5) ==
        doctest::Approx(std::pow(100.0, -1.0 / 1.5)).epsilon(1e-14));
  CHECK(lambda_schedule_cme(1000) < lambda_schedule_cme(100));
}
