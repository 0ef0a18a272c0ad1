#include "mechcluster/fidelity.hpp"

#include "fock_oracle.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mechcluster;
using namespace mechcluster::gaussian;

namespace {

constexpr int kDim = 48;

struct FockGaussian {
  fock::CMatrix rho;
  GaussianState state;
};

// Thermal state squeezed and rotated in the number basis; the covariance used
// by the code under test is read off the density matrix itself.
FockGaussian make_single_mode(double n, double r, double theta) {
  const fock::CMatrix u = fock::squeeze_rotate(kDim, r, theta, 4 * kDim);
  fock::CMatrix rho = fock::transform(u, fock::thermal(kDim, n));
  rho /= rho.trace();
  return {rho, GaussianState(fock::single_mode_covariance(rho))};
}

// Two-mode squeezing exp(r (a b - a^dag b^dag)) on a product of thermal states,
// followed by a local squeeze on the first mode.
FockGaussian make_two_mode(double n1, double n2, double r, double local_r) {
  const int d = 9;
  const int big = 22;
  const fock::CMatrix a1 = fock::annihilation(big);
  const fock::CMatrix id = fock::CMatrix::Identity(big, big);
  const fock::CMatrix a = Eigen::kroneckerProduct(a1, id).eval();
  const fock::CMatrix b = Eigen::kroneckerProduct(id, a1).eval();
  const fock::CMatrix gen = r * (a * b - a.adjoint() * b.adjoint()) + 0.5 * local_r * (a * a - a.adjoint() * a.adjoint());
  const fock::CMatrix u = gen.exp();

  fock::CMatrix rho0 = fock::CMatrix::Zero(big * big, big * big);
  const fock::CMatrix t1 = fock::thermal(d, n1);
  const fock::CMatrix t2 = fock::thermal(d, n2);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) rho0(i * big + j, i * big + j) = t1(i, i) * t2(j, j);
  fock::CMatrix rho = u * rho0 * u.adjoint();
  rho /= rho.trace();
  const fock::CMatrix q1 = (a + a.adjoint()) / std::sqrt(2.0);
  const fock::CMatrix p1 = fock::Complex(0, 1) * (a.adjoint() - a) / std::sqrt(2.0);
  const fock::CMatrix q2 = (b + b.adjoint()) / std::sqrt(2.0);
  const fock::CMatrix p2 = fock::Complex(0, 1) * (b.adjoint() - b) / std::sqrt(2.0);
  return {rho, GaussianState(fock::covariance(rho, {q1, p1, q2, p2}))};
}

}  // namespace

TEST(FockOracle, ConventionsMatch) {
  const auto vac = make_single_mode(0.0, 0.0, 0.0);
  EXPECT_NEAR(vac.state.cov()(0, 0), 0.5, 1e-10);
  const auto sq = make_single_mode(0.0, 0.4, 0.0);
  EXPECT_NEAR(sq.state.cov()(0, 0), 0.5 * std::exp(-0.8), 1e-8);
  EXPECT_NEAR(sq.state.cov()(1, 1), 0.5 * std::exp(0.8), 1e-8);
}

TEST(Fidelity, SingleModeMatchesTruncatedBasis) {
  const std::vector<std::array<double, 3>> params = {
      {0.0, 0.0, 0.0}, {0.3, 0.2, 0.4}, {0.0, 0.5, -1.0}, {0.8, 0.1, 2.0}, {0.1, 0.6, 0.7}, {1.2, 0.0, 0.0}};
  std::vector<FockGaussian> states;
  for (const auto& p : params) states.push_back(make_single_mode(p[0], p[1], p[2]));
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = 0; j < states.size(); ++j) {
      const auto& a = states[i];
      const auto& b = states[j];
      const double oracle = fock::uhlmann_fidelity(a.rho, b.rho);
      EXPECT_NEAR(fidelity(a.state, b.state), oracle, 1e-6) << i << "," << j;
      EXPECT_NEAR(fidelity(a.state, b.state, FidelityMethod::general), oracle, 1e-6) << i << "," << j;
    }
  }
}

TEST(Fidelity, TwoModeMatchesTruncatedBasis) {
  const std::vector<std::array<double, 4>> params = {
      {0.0, 0.0, 0.0, 0.0}, {0.2, 0.1, 0.25, 0.0}, {0.0, 0.0, 0.3, 0.2}, {0.3, 0.0, 0.1, -0.2}};
  std::vector<FockGaussian> states;
  for (const auto& p : params) states.push_back(make_two_mode(p[0], p[1], p[2], p[3]));
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = 0; j < states.size(); ++j) {
      const auto& a = states[i];
      const auto& b = states[j];
      const double oracle = fock::uhlmann_fidelity(a.rho, b.rho);
      EXPECT_NEAR(fidelity(a.state, b.state), oracle, 2e-5) << i << "," << j;
      EXPECT_NEAR(fidelity(a.state, b.state, FidelityMethod::general), oracle, 2e-5) << i << "," << j;
    }
  }
}

TEST(Fidelity, KnownClosedForms) {
  for (double n : {0.0, 0.5, 2.0, 10.0}) {
    EXPECT_NEAR(fidelity(vacuum(1), thermal(1, n)), 1.0 / (n + 1.0), 1e-12);
  }
  for (double db : {1.0, 3.0, 10.0, 20.0}) {
    const double r = db_to_r(db);
    const auto sq = squeeze_momentum(vacuum(1), 0, db);
    EXPECT_NEAR(fidelity(vacuum(1), sq), 1.0 / std::cosh(r), 1e-12);
    EXPECT_NEAR(fidelity_with_pure(vacuum(1), sq), 1.0 / std::cosh(r), 1e-12);
  }
}

TEST(Fidelity, SymmetricAndBoundedForRandomStates) {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      Matrix c1 = Matrix::Zero(2 * n, 2 * n);
      Matrix c2 = Matrix::Zero(2 * n, 2 * n);
      GaussianState a = thermal(n, u(rng));
      GaussianState b = thermal(n, u(rng));
      for (std::size_t j = 0; j < n; ++j) {
        a = rotate(squeeze_momentum(a, j, 6.0 * u(rng)), j, 3.0 * u(rng));
        b = rotate(squeeze_momentum(b, j, 6.0 * u(rng)), j, 3.0 * u(rng));
        if (j + 1 < n) {
          a = apply_cz(a, j, j + 1, u(rng));
          b = apply_cz(b, j, j + 1, u(rng));
        }
      }
      const double fab = fidelity(a, b);
      EXPECT_NEAR(fab, fidelity(b, a), 1e-8);
      EXPECT_GE(fab, 0.0);
      EXPECT_LE(fab, 1.0);
      EXPECT_NEAR(fidelity(a, a), 1.0, 1e-7);
      if (n <= 2) EXPECT_NEAR(fab, fidelity(a, b, FidelityMethod::general), 1e-7);
    }
  }
}

TEST(Fidelity, PureStateShortcutAgrees) {
  GaussianState pure = squeeze_momentum(vacuum(3), 1, 5.0);
  pure = apply_cz(apply_cz(pure, 0, 1), 1, 2);
  GaussianState mixed = apply_cz(thermal(3, 0.3), 0, 2, 0.5);
  EXPECT_NEAR(fidelity(pure, mixed), fidelity_with_pure(pure, mixed), 1e-8);
}

TEST(Fidelity, ErrorCases) {
  EXPECT_THROW(fidelity(vacuum(1), vacuum(2)), std::invalid_argument);
  Matrix bad = 0.5 * Matrix::Identity(2, 2);
  bad(0, 0) = 0.1;
  EXPECT_THROW(fidelity(vacuum(1), GaussianState(bad)), std::invalid_argument);
}
