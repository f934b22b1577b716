#include <gtest/gtest.h>

#include <cmath>

#include "nashflow/audit.hpp"
#include "nashflow/flow.hpp"
#include "nashflow/problems.hpp"
#include "oracles.hpp"

using namespace nashflow;

TEST(Rotation, ClosedFormMatchesHandRotation) {
  const auto p = rotation_game();
  const Vector u0{{0.6, 0.0}};
  const Vector u = p.reference.closed_form(std::numbers::pi / 2.0, u0);
  EXPECT_NEAR(u[0], 0.0, 1e-15);
  EXPECT_NEAR(u[1], 0.6, 1e-15);
  EXPECT_TRUE(p.reference.closed_form_valid(u0));
  EXPECT_FALSE(p.reference.closed_form_valid(Vector{{0.8, -0.9}}));
}

TEST(Quadratic, ClosedFormSolvesTheOde) {
  const auto p = quadratic_two_player();
  const Vector u0{{0.3, -1.0}};
  for (double t : {0.0, 0.5, 2.0}) {
    const double dt = 1e-6;
    const Vector du = (p.reference.closed_form(t + dt, u0) - p.reference.closed_form(t - dt, u0)) / (2 * dt);
    const Vector u = p.reference.closed_form(t, u0);
    EXPECT_LE((du + stacked_gradient(p, GamePoint(u, p.layout()))).norm(), 1e-8) << t;
  }
  EXPECT_LE((p.reference.closed_form(0.0, u0) - u0).norm(), 1e-15);
}

TEST(Quadratic, EquilibriumSolvesLinearSystem) {
  // G(x) = [[1,-1],[1,1]] x - (1, 2) = 0.
  const Matrix A{{1.0, -1.0}, {1.0, 1.0}};
  const Vector x = A.lu().solve(Vector{{1.0, 2.0}});
  EXPECT_LE((x - *quadratic_two_player().reference.equilibrium).norm(), 1e-15);
}

TEST(Scenario, BoundarySlidingStart) {
  const auto s = boundary_sliding_scenario();
  EXPECT_EQ(s.problem.name, "rotation");
  EXPECT_DOUBLE_EQ(s.x0.data()[0], 0.8);
  EXPECT_DOUBLE_EQ(s.x0.data()[1], -0.9);
}

TEST(ZeroSum, BuiltinEquilibriaMatchSupportEnumeration) {
  const Matrix pennies{{1.0, -1.0}, {-1.0, 1.0}};
  const Matrix rps{{0.0, 1.0, -1.0}, {-1.0, 0.0, 1.0}, {1.0, -1.0, 0.0}};
  for (const auto& [M, p] : {std::pair{pennies, matching_pennies()}, std::pair{rps, rock_paper_scissors()}}) {
    const auto sol = oracle::solve_matrix_game(M);
    ASSERT_TRUE(sol.has_value()) << p.name;
    Vector stacked(M.rows() + M.cols());
    stacked << sol->x, sol->y;
    EXPECT_LE((stacked - *p.reference.equilibrium).norm(), 1e-12) << p.name;
  }
}

TEST(ZeroSum, CesaroMeanApproachesMinimaxSolution) {
  const Matrix M{{0.0, 1.0, 2.0}, {2.0, 0.0, 1.0}, {1.0, 2.0, 0.0}};
  const auto sol = oracle::solve_matrix_game(M);
  ASSERT_TRUE(sol.has_value());
  const auto p = zero_sum_problem(M, "shapley");
  FlowConfig c;
  c.h = 1e-2;
  c.t_max = 500.0;
  c.residual_tol = 1e-300;
  c.record_every = 1000;
  Vector x0(6);
  x0 << 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const auto tr = integrate(p, GamePoint(x0, p.layout()), c);
  Vector ref(6);
  ref << sol->x, sol->y;
  EXPECT_LE((tr.cesaro.data() - ref).norm(), 2e-2);
}

TEST(ZeroSum, RejectsNonFinitePayoff) {
  Matrix M = Matrix::Ones(2, 2);
  M(0, 1) = std::nan("");
  EXPECT_THROW(bilinear_zero_sum(M), InvalidArgument);
}

TEST(NLinear, GradientMatchesValueForThreePlayers) {
  Xorshift64Star rng(21);
  const std::vector<std::size_t> dims{2, 3, 2};
  std::vector<std::vector<double>> tensors(3, std::vector<double>(12));
  for (auto& t : tensors)
    for (double& c : t) c = rng.normal();
  std::vector<ConvexSet> sets{ConvexSet::simplex(2), ConvexSet::simplex(3), ConvexSet::simplex(2)};
  const NLinearGame g(dims, tensors, sets);
  const auto p = g.to_problem("three");
  std::vector<GamePoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(sample_point(p, rng));
  EXPECT_LE(gradient_check(p, pts), 1e-8);
}

TEST(NLinear, ZeroSumCostConditionGapIsZero) {
  // For a two-player zero-sum bilinear game the gap vanishes identically.
  Xorshift64Star rng(22);
  const auto g = bilinear_zero_sum(Matrix{{1.0, 2.0}, {-3.0, 0.5}});
  for (int i = 0; i < 50; ++i) {
    Vector x(4), y(4);
    x << g.sets()[0].sample(rng), g.sets()[1].sample(rng);
    y << g.sets()[0].sample(rng), g.sets()[1].sample(rng);
    EXPECT_NEAR(g.cost_condition_gap(x, y), 0.0, 1e-13);
  }
}

TEST(NLinear, ShapeErrors) {
  EXPECT_THROW(NLinearGame({2, 2}, {std::vector<double>(4), std::vector<double>(3)},
                           {ConvexSet::simplex(2), ConvexSet::simplex(2)}),
               DimensionError);
  EXPECT_THROW(NLinearGame({}, {}, {}), InvalidArgument);
}

TEST(QuadMatrix, RejectsAsymmetricBlock) {
  std::vector<Matrix> blocks(1, Matrix{{1.0, 2.0}, {0.0, 1.0}});
  EXPECT_THROW(quadratic_matrix_game(1, 2, blocks), InvalidArgument);
}

TEST(QuadMatrix, RejectsNonMonotoneAndNamesEigenvalue) {
  // N = 2, d = 1, B = [[1, 0], [0, -1]].
  std::vector<Matrix> blocks(8, Matrix::Zero(1, 1));
  blocks[0](0, 0) = 1.0;   // A^0_{00}
  blocks[7](0, 0) = -1.0;  // A^1_{11}
  try {
    (void)quadratic_matrix_game(2, 1, blocks);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("-1"), std::string::npos) << e.what();
  }
}

TEST(QuadMatrix, RandomInstanceHasRequestedTheta) {
  Xorshift64Star rng(23);
  for (double theta : {0.0, 0.3, 2.0}) {
    const auto g = random_quadratic_matrix_game(rng, 3, 2, theta);
    const Matrix S = 0.5 * (g.monotonicity_matrix() + g.monotonicity_matrix().transpose());
    const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(S).eigenvalues().minCoeff();
    EXPECT_NEAR(lmin, theta, 1e-10);
    EXPECT_NEAR(g.min_eigenvalue(), theta, 1e-10);
  }
}

TEST(QuadMatrix, QuadraticFormEqualsMonotonicityForm) {
  Xorshift64Star rng(24);
  const auto g = random_quadratic_matrix_game(rng, 3, 2, 0.1);
  for (int i = 0; i < 20; ++i) {
    const Vector y = rng.normal_vector(6);
    EXPECT_NEAR(g.quadratic_form(y), y.dot(g.monotonicity_matrix() * y), 1e-10);
  }
}

TEST(QuadMatrix, ProblemAuditsPass) {
  Xorshift64Star rng(25);
  const auto p = random_quadratic_matrix_game(rng, 2, 3, 0.2).to_problem();
  std::vector<GamePoint> pts;
  for (int i = 0; i < 5; ++i) pts.push_back(GamePoint(rng.normal_vector(6), p.layout()));
  EXPECT_LE(gradient_check(p, pts), 1e-6);
  const auto rep = check_monotonicity(p, default_pair_sampler(p, 3), 200);
  EXPECT_TRUE(rep.monotone());
  EXPECT_GE(rep.min_ratio, 0.2 - 1e-10);
}

TEST(Builtins, AllAuditsPass) {
  Xorshift64Star rng(26);
  for (const auto& p : builtin_problems()) {
    std::vector<GamePoint> pts;
    for (int i = 0; i < 20; ++i) pts.push_back(sample_point(p, rng));
    EXPECT_LE(gradient_check(p, pts), 1e-5) << p.name;
    EXPECT_TRUE(check_monotonicity(p, default_pair_sampler(p, 4), 500).monotone()) << p.name;
    if (p.jacobian) {
      for (const auto& x : pts) EXPECT_LE((p.jacobian(x) - finite_difference_jacobian(p, x)).norm(), 1e-8) << p.name;
    }
  }
}
