#include <gtest/gtest.h>

#include <cmath>

#include "nashflow/audit.hpp"
#include "nashflow/convex_set.hpp"
#include "nashflow/problems.hpp"
#include "oracles.hpp"

using namespace nashflow;

namespace {

// Variational characterization: (z - P z) . (y - P z) <= 0 for feasible y.
double worst_variational_gap(const ConvexSet& C, const Vector& z, Xorshift64Star& rng, int trials) {
  const Vector p = C.project(z);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < trials; ++i) {
    const Vector y = C.sample(rng);
    worst = std::max(worst, (z - p).dot(y - p) / std::max(1.0, (z - p).norm() * (y - p).norm()));
  }
  return worst;
}

}  // namespace

TEST(Rng, IsDeterministicForSeed) {
  Xorshift64Star a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    (void)c.next();
  }
  EXPECT_NE(Xorshift64Star(42).next(), Xorshift64Star(43).next());
}

TEST(Rng, UniformAndNormalMoments) {
  Xorshift64Star rng(9);
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double g = rng.normal();
    sn += g;
    sn2 += g * g;
  }
  EXPECT_NEAR(su / n, 0.5, 5e-3);
  EXPECT_NEAR(sn / n, 0.0, 1e-2);
  EXPECT_NEAR(sn2 / n, 1.0, 2e-2);
}

TEST(GamePoint, ValidatesLayoutAndFiniteness) {
  EXPECT_THROW(GamePoint(Vector::Zero(3), std::vector<std::size_t>{1, 1}), DimensionError);
  Vector bad = Vector::Zero(2);
  bad[1] = std::nan("");
  EXPECT_THROW(GamePoint(bad, std::vector<std::size_t>{1, 1}), InvalidArgument);
  const GamePoint x(Vector{{1.0, 2.0, 3.0}}, std::vector<std::size_t>{1, 2});
  EXPECT_EQ(x.players(), 2u);
  EXPECT_EQ(x.block(1).size(), 2);
  EXPECT_DOUBLE_EQ(x.block(1)[1], 3.0);
  const GamePoint y = x.with_block(0, Vector::Constant(1, -1.0));
  EXPECT_DOUBLE_EQ(y.data()[0], -1.0);
  EXPECT_THROW(x.with_block(1, Vector::Zero(1)), DimensionError);
}

TEST(ConvexSet, ConstructorsRejectBadInput) {
  EXPECT_THROW(ConvexSet::box(Vector{{1.0}}, Vector{{0.0}}), InvalidArgument);
  EXPECT_THROW(ConvexSet::ball(Vector::Zero(2), -1.0), InvalidArgument);
  EXPECT_THROW(ConvexSet::simplex(0), InvalidArgument);
  EXPECT_THROW(ConvexSet::whole_space(2).project(Vector::Zero(3)), DimensionError);
}

TEST(ConvexSet, SimplexProjectionMatchesEnumerationOracle) {
  Xorshift64Star rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(trial % 6);
    const double scale = 0.5 + 2.0 * rng.uniform();
    const Vector z = 2.0 * rng.normal_vector(n);
    const Vector p = ConvexSet::simplex(n, scale).project(z);
    EXPECT_LE((p - oracle::simplex_projection(z, scale)).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(ConvexSet, SimplexProjectionExamples) {
  const auto S = ConvexSet::simplex(3);
  EXPECT_LE((S.project(Vector{{0.2, 0.3, 0.5}}) - Vector{{0.2, 0.3, 0.5}}).norm(), 1e-15);
  EXPECT_LE((S.project(Vector{{5.0, 0.0, 0.0}}) - Vector{{1.0, 0.0, 0.0}}).norm(), 1e-15);
  EXPECT_LE((S.project(Vector{{0.0, 0.0, 0.0}}) - Vector::Constant(3, 1.0 / 3.0)).norm(), 1e-15);
}

TEST(ConvexSet, HalfspaceProjectionMatchesActiveSetOracle) {
  Xorshift64Star rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index d = 2 + trial % 3;
    const Eigen::Index m = 1 + trial % 4;
    Matrix A(m, d);
    for (Eigen::Index r = 0; r < m; ++r) A.row(r) = rng.normal_vector(d).normalized().transpose();
    const Vector b = rng.uniform_vector(m, 0.1, 1.0);  // origin strictly feasible
    const Vector z = 3.0 * rng.normal_vector(d);
    const Vector p = ConvexSet::halfspaces(A, b).project(z);
    const Vector q = oracle::halfspace_projection(A, b, z);
    ASSERT_EQ(q.size(), d);
    EXPECT_LE((p - q).norm(), 1e-8) << "trial " << trial;
  }
}

TEST(ConvexSet, HalfspaceDescribeNamesShape) {
  const auto H = ConvexSet::halfspaces(Matrix::Identity(3, 3), Vector::Ones(3));
  EXPECT_NE(H.describe().find("3 halfspaces"), std::string::npos);
}

TEST(ConvexSet, ProjectionPropertiesOverManyTrials) {
  Xorshift64Star rng(3);
  std::vector<ConvexSet> sets = {
      ConvexSet::whole_space(3),
      ConvexSet::box(Vector{{-1.0, 0.0, 2.0}}, Vector{{1.0, 0.5, 4.0}}),
      ConvexSet::ball(Vector{{0.5, -1.0, 0.0}}, 1.5),
      ConvexSet::simplex(3, 2.0),
      ConvexSet::halfspaces(Matrix{{1.0, 1.0, 0.0}, {-1.0, 0.0, 1.0}, {0.0, -1.0, -1.0}}, Vector{{1.0, 1.0, 1.0}}),
  };
  const int trials = 100000;
  for (const auto& C : sets) {
    double worst_idem = 0.0, worst_nonexp = 0.0, worst_var = -1.0;
    for (int i = 0; i < trials / static_cast<int>(sets.size()); ++i) {
      const Vector z = 4.0 * rng.normal_vector(3);
      const Vector w = 4.0 * rng.normal_vector(3);
      const Vector p = C.project(z);
      ASSERT_TRUE(C.contains(p, 1e-9)) << C.describe();
      worst_idem = std::max(worst_idem, (C.project(p) - p).norm());
      worst_nonexp = std::max(worst_nonexp, (C.project(w) - p).norm() - (w - z).norm());
      if (i % 50 == 0) worst_var = std::max(worst_var, worst_variational_gap(C, z, rng, 20));
    }
    EXPECT_LE(worst_idem, 1e-9) << C.describe();
    EXPECT_LE(worst_nonexp, 1e-9) << C.describe();
    EXPECT_LE(worst_var, 1e-9) << C.describe();
  }
}

TEST(Residual, ZeroAtKnownEquilibria) {
  for (const auto& p : builtin_problems()) {
    ASSERT_TRUE(p.reference.equilibrium);
    EXPECT_LE(nash_residual(p, GamePoint(*p.reference.equilibrium, p.layout())), 1e-12) << p.name;
  }
}

TEST(Residual, ProjectsInfeasibleInputAndRejectsBadGamma) {
  const auto p = rotation_game();
  const GamePoint outside(Vector{{3.0, 0.0}}, p.layout());
  const auto r = nash_residual_checked(p, outside);
  EXPECT_TRUE(r.projected);
  // At (1, 0): G = (0, -1), step to (1, 1) -> residual 1.
  EXPECT_NEAR(r.value, 1.0, 1e-14);
  EXPECT_THROW(nash_residual(p, outside, 0.0), InvalidArgument);
}

TEST(Residual, QuadraticMatchesHandComputation) {
  const auto p = quadratic_two_player();
  // G(x) = (x1 - x2 - 1, x2 + x1 - 2), unconstrained so residual = |G|.
  const GamePoint x(Vector{{0.0, 0.0}}, p.layout());
  EXPECT_NEAR(nash_residual(p, x), std::sqrt(5.0), 1e-14);
}

TEST(Monotonicity, RotationPairingIsZero) {
  const auto p = rotation_game();
  const auto rep = check_monotonicity(p, default_pair_sampler(p, 5), 500);
  EXPECT_TRUE(rep.monotone());
  EXPECT_NEAR(rep.min_pairing, 0.0, 1e-14);
  EXPECT_NEAR(rep.min_ratio, 0.0, 1e-12);
}

TEST(Monotonicity, QuadraticRatioIsOne) {
  const auto p = quadratic_two_player();
  const auto rep = check_monotonicity(p, default_pair_sampler(p, 6), 500);
  EXPECT_TRUE(rep.monotone());
  EXPECT_NEAR(rep.min_ratio, 1.0, 1e-10);
}

TEST(Monotonicity, DetectsViolation) {
  GameProblem p = quadratic_two_player();
  p.field = nullptr;
  p.grad = [](std::size_t j, const GamePoint& x) -> Vector { return Vector::Constant(1, -x.data()[j]); };
  const auto rep = check_monotonicity(p, default_pair_sampler(p, 7), 50);
  EXPECT_FALSE(rep.monotone());
  ASSERT_TRUE(rep.violation.has_value());
  EXPECT_LT(monotonicity_pairing(p, rep.violation->first, rep.violation->second), 0.0);
}

TEST(Monotonicity, ExhaustedSamplerIsAnError) {
  const auto p = rotation_game();
  const auto L = p.layout();
  auto sampler = list_pair_sampler({{GamePoint(Vector{{0.1, 0.2}}, L), GamePoint(Vector{{0.3, 0.4}}, L)}});
  EXPECT_THROW(check_monotonicity(p, sampler, 2), InvalidArgument);
}

TEST(Gradient, NonFiniteOracleNamesPlayer) {
  GameProblem p = quadratic_two_player();
  p.field = nullptr;
  p.grad = [](std::size_t j, const GamePoint&) -> Vector {
    return Vector::Constant(1, j == 1 ? std::numeric_limits<double>::infinity() : 0.0);
  };
  try {
    (void)stacked_gradient(p, GamePoint::zeros(p.layout()));
    FAIL() << "expected NonFiniteGradient";
  } catch (const NonFiniteGradient& e) {
    EXPECT_EQ(e.player(), 1u);
  }
}

TEST(Gradient, WrongLengthIsDimensionError) {
  GameProblem p = quadratic_two_player();
  p.field = nullptr;
  p.grad = [](std::size_t, const GamePoint&) -> Vector { return Vector::Zero(2); };
  EXPECT_THROW((void)stacked_gradient(p, GamePoint::zeros(p.layout())), DimensionError);
}

TEST(Lipschitz, EstimatesAreLowerBoundsOfTrueConstant) {
  const auto p = quadratic_two_player();
  const double L = estimate_lipschitz(p, default_pair_sampler(p, 8), 200);
  EXPECT_LE(L, std::sqrt(2.0) + 1e-12);
  EXPECT_GE(L, std::sqrt(2.0) - 1e-12);  // Jacobian is sqrt(2) times a rotation
}

TEST(Gradient, CheckAgreesOnBuiltins) {
  Xorshift64Star rng(10);
  for (const auto& p : builtin_problems()) {
    std::vector<GamePoint> pts;
    for (int i = 0; i < 10; ++i) pts.push_back(sample_point(p, rng));
    EXPECT_LE(gradient_check(p, pts), 1e-5) << p.name;
  }
}

TEST(Gradient, CheckDetectsWrongOracle) {
  GameProblem p = quadratic_two_player();
  p.field = nullptr;
  auto good = p.grad;
  p.grad = [good](std::size_t j, const GamePoint& x) -> Vector { return good(j, x) * 1.1; };
  std::vector<GamePoint> pts{GamePoint(Vector{{1.0, 2.0}}, p.layout())};
  EXPECT_GT(gradient_check(p, pts), 1e-2);
}
