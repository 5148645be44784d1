#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <complex>

#include "uwrange/features.hpp"
#include "uwrange/rng.hpp"

using namespace uwrange;

namespace {

SnapshotMatrix random_snapshots(int num_elements, int num_snapshots, Rng& rng) {
  SnapshotMatrix s;
  s.frequency_hz = 130.0;
  s.coefficients.resize(num_elements, num_snapshots);
  for (int p = 0; p < num_snapshots; ++p) {
    for (int l = 0; l < num_elements; ++l) {
      s.coefficients(l, p) = rng.complex_normal(1.0);
    }
  }
  return s;
}

}  // namespace

TEST_CASE("normalize_snapshot: scaling, unit norm, zero rejection") {
  Eigen::VectorXcd r = Eigen::VectorXcd::Zero(5);
  r[0] = {2.0, 0.0};
  const Eigen::VectorXcd n = normalize_snapshot(r);
  CHECK(std::abs(n[0] - std::complex<double>(1.0, 0.0)) < 1e-15);
  CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-14));

  Rng rng(7);
  Eigen::VectorXcd random(8);
  for (Eigen::Index i = 0; i < random.size(); ++i) random[i] = rng.complex_normal(1.0);
  CHECK(normalize_snapshot(random).norm() == doctest::Approx(1.0).epsilon(1e-14));

  // normalize(alpha r) = (alpha/|alpha|) normalize(r)
  const std::complex<double> alpha{-1.4, 2.2};
  const Eigen::VectorXcd left = normalize_snapshot(alpha * random);
  const Eigen::VectorXcd right = (alpha / std::abs(alpha)) * normalize_snapshot(random);
  CHECK((left - right).norm() < 1e-14);

  CHECK_THROWS(normalize_snapshot(Eigen::VectorXcd::Zero(4)));
}

TEST_CASE("compute_scm: single snapshot gives the rank-1 projector") {
  Rng rng(3);
  SnapshotMatrix s = random_snapshots(6, 1, rng);
  const ScmFeature f = compute_scm(s);
  const Eigen::VectorXcd unit = normalize_snapshot(s.coefficients.col(0));
  CHECK((f.scm - unit * unit.adjoint()).norm() < 1e-14);
  CHECK(std::abs(f.scm.trace().real() - 1.0) < 1e-12);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(f.scm);
  CHECK(eig.eigenvalues().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("compute_scm: two orthonormal snapshots average to eigenvalues 1/2, 1/2") {
  SnapshotMatrix s;
  s.frequency_hz = 130.0;
  s.coefficients = Eigen::MatrixXcd::Zero(5, 2);
  s.coefficients(0, 0) = 1.0;
  s.coefficients(1, 1) = 1.0;
  const ScmFeature f = compute_scm(s);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(f.scm);
  const auto& values = eig.eigenvalues();
  CHECK(values[4] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(values[3] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(values[2]) < 1e-12);
}

TEST_CASE("compute_scm: Hermitian, PSD, trace-one on random 21x5 snapshots") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const ScmFeature f = compute_scm(random_snapshots(21, 5, rng));
    CHECK((f.scm - f.scm.adjoint()).norm() < 1e-12);
    CHECK(std::abs(f.scm.trace().real() - 1.0) < 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(f.scm);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    CHECK(f.energy >= 0.0);
  }
}

TEST_CASE("compute_scm: source gain separates into energy only") {
  Rng rng(5);
  SnapshotMatrix s = random_snapshots(21, 5, rng);
  const ScmFeature base = compute_scm(s);

  SnapshotMatrix scaled = s;
  scaled.coefficients *= 2.0;
  const ScmFeature loud = compute_scm(scaled);
  CHECK((loud.scm - base.scm).norm() < 1e-14);
  CHECK(loud.energy == doctest::Approx(4.0 * base.energy).epsilon(1e-12));

  // complex gain: SCM invariant, energy scales with |alpha|^2
  SnapshotMatrix rotated = s;
  rotated.coefficients *= std::complex<double>(0.6, 0.8);
  const ScmFeature rot = compute_scm(rotated);
  CHECK((rot.scm - base.scm).norm() < 1e-13);
  CHECK(rot.energy == doctest::Approx(base.energy).epsilon(1e-12));
}

TEST_CASE("compute_scm: per-snapshot global phase leaves the SCM invariant") {
  Rng rng(9);
  SnapshotMatrix s = random_snapshots(10, 4, rng);
  SnapshotMatrix phased = s;
  for (int p = 0; p < 4; ++p) {
    phased.coefficients.col(p) *= std::polar(1.0, rng.uniform(0.0, 6.28));
  }
  CHECK((compute_scm(phased).scm - compute_scm(s).scm).norm() < 1e-13);
}

TEST_CASE("compute_scm: zero column is an error") {
  SnapshotMatrix s;
  s.coefficients = Eigen::MatrixXcd::Zero(4, 2);
  s.coefficients(0, 0) = 1.0;  // column 1 stays zero
  CHECK_THROWS(compute_scm(s));
}
