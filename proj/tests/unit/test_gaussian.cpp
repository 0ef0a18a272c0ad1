#include "mechcluster/gaussian.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mechcluster;
using namespace mechcluster::gaussian;

namespace {

SymplecticMatrix random_symplectic(std::size_t n, std::mt19937& rng) {
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> sq(-0.8, 0.8);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  Matrix s = Matrix::Identity(2 * n, 2 * n);
  for (int layer = 0; layer < 3; ++layer) {
    for (std::size_t j = 0; j < n; ++j) {
      Matrix local = Matrix::Identity(2 * n, 2 * n);
      Matrix2 d;
      d << std::exp(sq(rng)), 0.0, 0.0, 0.0;
      d(1, 1) = 1.0 / d(0, 0);
      local.block<2, 2>(2 * j, 2 * j) = rotation(angle(rng)) * d * rotation(angle(rng));
      s = local * s;
    }
    if (n > 1) {
      const std::size_t j = pick(rng);
      const std::size_t k = (j + 1 + pick(rng) % (n - 1)) % n;
      s = cz_symplectic(n, j, k, sq(rng)).matrix() * s;
    }
  }
  return SymplecticMatrix(s);
}

GaussianState random_mixed(std::size_t n, std::mt19937& rng) {
  std::uniform_real_distribution<double> occ(0.0, 1.5);
  Matrix cov = Matrix::Zero(2 * n, 2 * n);
  for (std::size_t j = 0; j < n; ++j) cov.block<2, 2>(2 * j, 2 * j) = (occ(rng) + 0.5) * Matrix2::Identity();
  return apply(GaussianState(cov), random_symplectic(n, rng));
}

}  // namespace

TEST(GaussianState, RejectsMalformedCovariances) {
  EXPECT_THROW(GaussianState(Matrix::Identity(3, 3)), std::invalid_argument);
  EXPECT_THROW(GaussianState(Matrix(0, 0)), std::invalid_argument);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.3;
  EXPECT_THROW(GaussianState{asym}, std::invalid_argument);
  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 0) = std::nan("");
  EXPECT_THROW(GaussianState{nan}, std::invalid_argument);
  EXPECT_THROW(vacuum(0), std::invalid_argument);
}

TEST(GaussianState, VacuumAndThermal) {
  const auto v = vacuum(3);
  EXPECT_EQ(v.n_modes(), 3u);
  EXPECT_TRUE(v.cov().isApprox(0.5 * Matrix::Identity(6, 6)));
  EXPECT_NEAR(purity(v), 1.0, 1e-12);
  const auto th = thermal(1, 2.0);
  EXPECT_NEAR(th.cov()(0, 0), 2.5, 1e-14);
  EXPECT_NEAR(purity(th), 1.0 / 5.0, 1e-12);
  const auto nu = symplectic_eigenvalues(th);
  ASSERT_EQ(nu.size(), 1u);
  EXPECT_NEAR(nu[0], 2.5, 1e-12);
}

TEST(GaussianState, MomentumSqueezingUsesDecibels) {
  const auto s = squeeze_momentum(vacuum(1), 0, 10.0);
  const double r = db_to_r(10.0);
  EXPECT_NEAR(s.cov()(0, 0), 0.5 * std::exp(2 * r), 1e-12);
  EXPECT_NEAR(s.cov()(1, 1), 0.5 * std::exp(-2 * r), 1e-12);
  // 10 dB below vacuum noise.
  EXPECT_NEAR(10.0 * std::log10(0.5 / s.cov()(1, 1)), 10.0, 1e-10);
}

TEST(Symplectic, RejectsNonSymplectic) {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 0) = 2.0;
  EXPECT_THROW(SymplecticMatrix{m}, std::invalid_argument);
  EXPECT_NO_THROW(cz_symplectic(3, 0, 2, 0.7));
  EXPECT_THROW(cz_symplectic(2, 0, 0), std::invalid_argument);
  EXPECT_THROW(cz_symplectic(2, 0, 2), std::out_of_range);
}

TEST(Symplectic, CzActsOnMomenta) {
  Matrix cov = Matrix::Zero(4, 4);
  cov(0, 0) = 1.0;  // only q1 fluctuates
  cov(1, 1) = cov(2, 2) = cov(3, 3) = 0.5;
  const Matrix s = cz_symplectic(2, 0, 1, 2.0).matrix();
  // p2 += 2 q1
  EXPECT_DOUBLE_EQ(s(3, 0), 2.0);
  EXPECT_DOUBLE_EQ(s(1, 2), 2.0);
  EXPECT_DOUBLE_EQ(s(0, 0), 1.0);
}

TEST(Symplectic, RandomTransformsPreserveInvariants) {
  std::mt19937 rng(7);
  for (std::size_t n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = random_symplectic(n, rng);
      EXPECT_LT(SymplecticMatrix::symplectic_defect(s.matrix()), 1e-9);
      const auto state = random_mixed(n, rng);
      const auto out = apply(state, s);
      EXPECT_NEAR(purity(out), purity(state), 1e-8);
      const auto a = symplectic_eigenvalues(state);
      const auto b = symplectic_eigenvalues(out);
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-7 * a[i]);
    }
  }
}

TEST(Physicality, DetectsUncertaintyViolation) {
  Matrix cov = 0.5 * Matrix::Identity(2, 2);
  EXPECT_TRUE(check_physical(GaussianState(cov)).physical);
  cov(1, 1) = 0.2;
  const auto report = check_physical(GaussianState(cov));
  EXPECT_FALSE(report.physical);
  EXPECT_NEAR(report.min_symplectic_eigenvalue, std::sqrt(0.1), 1e-12);
  EXPECT_THROW(require_physical(GaussianState(cov), "test"), std::invalid_argument);
}

TEST(Cluster, NullifiersSqueezeWithStrength) {
  const auto graph = GraphSpec::linear(5);
  double previous = 1e9;
  for (double db : {0.0, 3.0, 10.0, 20.0}) {
    const auto state = build_cluster(graph, db);
    const auto nv = nullifier_variances(state, graph);
    ASSERT_EQ(nv.size(), 5u);
    for (double v : nv) EXPECT_NEAR(v, 0.5 * std::exp(-2 * db_to_r(db)), 1e-12);
    EXPECT_LT(nv[0], previous + 1e-15);
    previous = nv[0];
    EXPECT_TRUE(check_physical(state).physical);
    EXPECT_NEAR(purity(state), 1.0, 1e-9);
  }
}

TEST(Cluster, GraphValidation) {
  EXPECT_THROW(build_cluster(GraphSpec{0, {}}, 3.0), std::invalid_argument);
  EXPECT_THROW(build_cluster(GraphSpec{2, {{0, 2}}}, 3.0), std::invalid_argument);
  EXPECT_THROW(build_cluster(GraphSpec{2, {{1, 1}}}, 3.0), std::invalid_argument);
  const auto g = GraphSpec::linear(4);
  EXPECT_EQ(g.edges.size(), 3u);
  EXPECT_EQ(g.neighbours(1).size(), 2u);
}

TEST(PartialTrace, SelectsBlocksInOrder) {
  std::mt19937 rng(3);
  const auto state = random_mixed(3, rng);
  const auto reduced = partial_trace(state, {2, 0});
  EXPECT_TRUE((reduced.cov().block<2, 2>(0, 0).isApprox(state.cov().block<2, 2>(4, 4))));
  EXPECT_TRUE((reduced.cov().block<2, 2>(0, 2).isApprox(state.cov().block<2, 2>(4, 0))));
  EXPECT_THROW(partial_trace(state, {3}), std::out_of_range);
  EXPECT_THROW(partial_trace(state, {1, 1}), std::invalid_argument);
}

TEST(Homodyne, ConditionalCovarianceMatchesSchurComplement) {
  // Independent oracle: direct Gaussian conditioning on X_phi.
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto state = random_mixed(3, rng);
    const double phi = std::uniform_real_distribution<double>(-kPi, kPi)(rng);
    const auto out = homodyne_project(state, 1, QuadratureAngle(phi));
    // Vector of coefficients u with X_phi = u^T r.
    Vector u = Vector::Zero(6);
    u(2) = std::cos(phi);
    u(3) = std::sin(phi);
    const Matrix& s = state.cov();
    const Vector c = s * u;
    const double var = u.dot(c);
    const Matrix cond = s - c * c.transpose() / var;
    const std::vector<Eigen::Index> keep = {0, 1, 4, 5};
    Matrix expect(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) expect(i, j) = cond(keep[i], keep[j]);
    EXPECT_LT(max_abs(out.cov() - expect), 1e-9 * max_abs(expect));
    EXPECT_TRUE(check_physical(out).physical);
  }
}

TEST(Homodyne, ProjectionsCommute) {
  std::mt19937 rng(5);
  const auto state = random_mixed(4, rng);
  const auto a = homodyne_project(homodyne_project(state, 0, QuadratureAngle(0.3)), 1, QuadratureAngle(1.1));
  const auto b = homodyne_project(homodyne_project(state, 2, QuadratureAngle(1.1)), 0, QuadratureAngle(0.3));
  EXPECT_LT(max_abs(a.cov() - b.cov()), 1e-10);
  std::vector<std::pair<std::size_t, QuadratureAngle>> many = {{2, QuadratureAngle(1.1)}, {0, QuadratureAngle(0.3)}};
  const auto c = homodyne_project_many(state, many);
  EXPECT_LT(max_abs(a.cov() - c.cov()), 1e-10);
}

TEST(Homodyne, ErrorCases) {
  EXPECT_THROW(homodyne_project(vacuum(1), 0, QuadratureAngle::position()), std::invalid_argument);
  EXPECT_THROW(homodyne_project(vacuum(2), 2, QuadratureAngle::position()), std::out_of_range);
  Matrix bad = 0.5 * Matrix::Identity(4, 4);
  bad(0, 0) = 0.1;
  EXPECT_THROW(homodyne_project(GaussianState(bad), 1, QuadratureAngle::position()), std::invalid_argument);
}

TEST(QuadratureAngle, Normalises) {
  EXPECT_NEAR(QuadratureAngle(3 * kPi).radians(), kPi, 1e-12);
  EXPECT_NEAR(QuadratureAngle(-kPi / 2).radians(), -kPi / 2, 1e-12);
  EXPECT_NEAR(QuadratureAngle::momentum().radians(), kPi / 2, 1e-15);
}
