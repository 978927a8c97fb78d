#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "zsl/kernel.hpp"
#include "zsl/rng.hpp"

using namespace zsl;

namespace {

std::vector<Eigen::VectorXd> points1d(std::initializer_list<double> vals) {
  std::vector<Eigen::VectorXd> out;
  for (double v : vals) {
    Eigen::VectorXd p(1);
    p << v;
    out.push_back(p);
  }
  return out;
}

Eigen::MatrixXd random_psd(CounterRng& rng, Eigen::Index n) {
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rng.normal();
  return m * m.transpose();
}

}  // namespace

TEST_CASE("gram matrix basics") {
  const KernelSpec k{2.0};
  const auto pts = points1d({0.0, 2.0, 3.0});
  const GramBundle g = gram(k, pts, pts);
  CHECK(g.symmetric);
  CHECK(g.k(0, 0) == 1.0);
  CHECK(g.k(1, 1) == 1.0);
  // squared distance equal to bandwidth^2 gives exp(-1/2)
  CHECK(g.k(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  // entrywise scalar loop oracle
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double d2 = (pts[i] - pts[j]).squaredNorm();
      CHECK(g.k(i, j) == doctest::Approx(std::exp(-d2 / 8.0)).epsilon(1e-14));
    }
  CHECK((g.k.array() > 0.0).all());
  CHECK((g.k.array() <= 1.0).all());
}

TEST_CASE("eigh_psd basics and reconstruction") {
  CHECK(eigh_psd(Eigen::MatrixXd::Identity(4, 4)).values.isApproxToConstant(1.0));
  Eigen::VectorXd v(3);
  v << 1.0, 2.0, -1.0;
  const EigDecomp rank1 = eigh_psd(Eigen::MatrixXd(v * v.transpose()));
  CHECK(rank1.values(0) == doctest::Approx(v.squaredNorm()).epsilon(1e-12));
  CHECK(rank1.values(1) == 0.0);
  CHECK(rank1.values(2) == 0.0);

  CounterRng rng(5);
  const Eigen::MatrixXd m = random_psd(rng, 8);
  const EigDecomp eig = eigh_psd(m);
  const Eigen::MatrixXd recon =
      eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
  CHECK((recon - m).norm() < 1e-8 * m.norm());
  CHECK((eig.vectors.transpose() * eig.vectors -
         Eigen::MatrixXd::Identity(8, 8))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
  for (Eigen::Index i = 1; i < 8; ++i) CHECK(eig.values(i) <= eig.values(i - 1));

  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(eigh_psd(asym), NotSymmetric);
}

TEST_CASE("spectral filters") {
  const SpectralFilter cutoff{SpectralFilter::Kind::cutoff, 0.5};
  CHECK(cutoff(2.0) == 0.5);
  CHECK(cutoff(0.3) == 0.0);
  const SpectralFilter tikhonov{SpectralFilter::Kind::tikhonov, 0.25};
  CHECK(tikhonov(0.0) == 4.0);

  CounterRng rng(9);
  Eigen::MatrixXd m = random_psd(rng, 6);
  m.diagonal().array() += 1.0;  // well-conditioned
  const EigDecomp eig = eigh_psd(m);

  // cutoff below the spectrum equals the inverse
  const SpectralFilter low_cut{SpectralFilter::Kind::cutoff, 1e-8};
  const Eigen::MatrixXd pinv = apply_filter(eig, low_cut);
  CHECK((pinv * m - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <
        1e-8);

  // tikhonov equals the direct factorization solve
  const SpectralFilter tik{SpectralFilter::Kind::tikhonov, 0.1};
  const Eigen::MatrixXd via_filter = apply_filter(eig, tik);
  const Eigen::MatrixXd direct =
      (m + 0.1 * Eigen::MatrixXd::Identity(6, 6))
          .ldlt()
          .solve(Eigen::MatrixXd::Identity(6, 6));
  CHECK((via_filter - direct).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("median heuristic") {
  CHECK(median_heuristic(points1d({0.0, 1.0})).bandwidth == 1.0);
  CHECK(median_heuristic(points1d({0.0, 1.0, 2.0})).bandwidth == 1.0);
  // homogeneity under scaling
  const auto base = points1d({0.0, 0.7, 1.9, 4.0});
  auto scaled = base;
  for (auto& p : scaled) p *= 3.0;
  CHECK(median_heuristic(scaled).bandwidth ==
        doctest::Approx(3.0 * median_heuristic(base).bandwidth)
            .epsilon(1e-14));
  // degenerate: all identical points fall back with a warning flag
  const auto same = points1d({1.0, 1.0, 1.0});
  const BandwidthResult deg = median_heuristic(same);
  CHECK(deg.degenerate);
  CHECK(deg.bandwidth == 1.0);
  CHECK_THROWS_AS(median_heuristic(points1d({1.0})), DegenerateData);
}

TEST_CASE("centered gram annihilates constants") {
  CounterRng rng(21);
  const Eigen::MatrixXd m = random_psd(rng, 7);
  const Eigen::MatrixXd c = center_gram(m);
  CHECK((c.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((c.colwise().sum()).cwiseAbs().maxCoeff() < 1e-10);
}
