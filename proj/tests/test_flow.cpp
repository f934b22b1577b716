#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nashflow/flow.hpp"
#include "nashflow/problems.hpp"

using namespace nashflow;

namespace {

GamePoint pt(const GameProblem& p, std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x[i++] = a;
  return GamePoint(x, p.layout());
}

FlowConfig fixed(double h, double t_max, Scheme s = Scheme::ProjectedEuler) {
  FlowConfig c;
  c.h = h;
  c.t_max = t_max;
  c.scheme = s;
  c.residual_tol = 1e-300;
  return c;
}

// Rotation inside the unit disk: u(t) = R(t) u0.
Vector rotation_exact(double t, const Vector& u0) {
  return Vector{{u0[0] * std::cos(t) - u0[1] * std::sin(t), u0[1] * std::cos(t) + u0[0] * std::sin(t)}};
}

double max_rotation_error(double h) {
  const auto p = rotation_game();
  const Vector u0{{0.6, 0.0}};
  const auto tr = integrate(p, GamePoint(u0, p.layout()), fixed(h, 4.0 * std::numbers::pi));
  double e = 0.0;
  for (std::size_t i = 0; i < tr.records(); ++i) e = std::max(e, (tr.states[i] - rotation_exact(tr.times[i], u0)).norm());
  return e;
}

}  // namespace

TEST(Step, ExplicitZeroStepIsIdentity) {
  const auto p = rotation_game();
  const auto x = pt(p, {0.3, -0.2});
  EXPECT_EQ(step_explicit(p, x, 0.0).data(), x.data());
  EXPECT_THROW(step_explicit(p, x, -1.0), InvalidArgument);
}

TEST(Step, ExplicitMatchesHandComputation) {
  const auto p = quadratic_two_player();
  // G(0,0) = (-1, -2).
  const auto y = step_explicit(p, pt(p, {0.0, 0.0}), 0.1);
  EXPECT_NEAR(y.data()[0], 0.1, 1e-15);
  EXPECT_NEAR(y.data()[1], 0.2, 1e-15);
}

TEST(Step, ExplicitStaysFeasible) {
  const auto p = rotation_game();
  const auto y = step_explicit(p, pt(p, {1.0, 1.0}), 0.5);
  EXPECT_TRUE(is_feasible(p, y.data()));
}

TEST(Step, ProximalSolvesResolventEquation) {
  const auto p = quadratic_two_player();
  const auto x = pt(p, {0.3, -0.7});
  const double h = 0.5;
  const auto z = step_proximal(p, x, h);
  // z + h G(z) = x for an unconstrained problem.
  EXPECT_LE((z.data() + h * stacked_gradient(p, z) - x.data()).norm(), 1e-10);
}

TEST(Step, ProximalConstrainedSatisfiesFixedPoint) {
  const auto p = rotation_game();
  const auto x = pt(p, {0.9, 0.95});
  const double h = 0.8;
  InnerSolveConfig inner;
  inner.method = InnerMethod::Extragradient;
  const auto z = step_proximal(p, x, h, inner);
  // z = P_X(x - h G(z)) characterizes the resolvent with a normal cone.
  const Vector fp = project_profile(p, x.data() - h * stacked_gradient(p, z));
  EXPECT_LE((z.data() - fp).norm(), 1e-9);
}

TEST(Step, ProximalAtEquilibriumStaysPut) {
  const auto p = quadratic_two_player();
  const auto z = step_proximal(p, pt(p, {1.5, 0.5}), 1.0);
  EXPECT_LE((z.data() - Vector{{1.5, 0.5}}).norm(), 1e-12);
}

TEST(Integrate, EulerErrorIsFirstOrder) {
  const double e1 = max_rotation_error(1e-3);
  const double e2 = max_rotation_error(5e-4);
  EXPECT_LE(e1, 2e-2);
  EXPECT_GE(e1 / e2, 1.7);
  EXPECT_LE(e1 / e2, 2.3);
}

TEST(Integrate, EndsExactlyAtTMax) {
  const auto p = rotation_game();
  const auto tr = integrate(p, pt(p, {0.6, 0.0}), fixed(0.3, 1.0));
  EXPECT_DOUBLE_EQ(tr.t_last(), 1.0);
  EXPECT_EQ(tr.reason, StopReason::TMaxReached);
}

TEST(Integrate, StartsAtEquilibriumStopsImmediately) {
  const auto p = rotation_game();
  FlowConfig c;
  const auto tr = integrate(p, pt(p, {0.0, 0.0}), c);
  EXPECT_EQ(tr.steps, 0u);
  EXPECT_EQ(tr.reason, StopReason::ResidualConverged);
  EXPECT_EQ(tr.records(), 1u);
}

TEST(Integrate, ProjectsInfeasibleStartWithWarning) {
  const auto p = rotation_game();
  const auto tr = integrate(p, pt(p, {2.0, 0.0}), fixed(1e-2, 0.1));
  ASSERT_FALSE(tr.warnings.empty());
  EXPECT_DOUBLE_EQ(tr.states.front()[0], 1.0);
}

TEST(Integrate, WarnsWhenEulerStepExceedsInverseLipschitz) {
  const auto p = quadratic_two_player();
  const auto tr = integrate(p, pt(p, {0.0, 0.0}), fixed(1.0, 2.0));
  EXPECT_FALSE(tr.warnings.empty());
}

TEST(Integrate, RejectsBadConfig) {
  const auto p = rotation_game();
  EXPECT_THROW(integrate(p, pt(p, {0.1, 0.1}), fixed(-1.0, 1.0)), InvalidArgument);
  FlowConfig c = fixed(1e-2, 1.0);
  c.record_every = 0;
  EXPECT_THROW(integrate(p, pt(p, {0.1, 0.1}), c), InvalidArgument);
}

TEST(Integrate, RecordStrideKeepsFinalState) {
  const auto p = rotation_game();
  FlowConfig c = fixed(1e-2, 1.0);
  c.record_every = 7;
  const auto tr = integrate(p, pt(p, {0.6, 0.0}), c);
  EXPECT_DOUBLE_EQ(tr.t_last(), 1.0);
  EXPECT_EQ(tr.steps, 100u);
  EXPECT_EQ(tr.records(), 16u);  // 0, 7, ..., 98, then the final state
}

TEST(Integrate, ProximalRotationStaysFeasibleAndShrinks) {
  const auto p = rotation_game();
  const auto tr = integrate(p, pt(p, {0.6, 0.0}), fixed(0.1, 5.0, Scheme::ProximalImplicit));
  for (const auto& s : tr.states) EXPECT_TRUE(is_feasible(p, s));
  // Each implicit step divides the radius by sqrt(1 + h^2).
  EXPECT_NEAR(tr.states.back().norm(), 0.6 * std::pow(1.0 + 0.01, -25.0), 1e-9);
}

TEST(Cesaro, TrapezoidOnSampledClosedFormIsAccurate) {
  // Sample the exact rotation on [0, 2 pi] at h = 1e-4 and average: quadrature error only.
  FlowTrajectory tr;
  tr.layout = make_layout({1, 1});
  const double T = 2.0 * std::numbers::pi;
  const int n = static_cast<int>(std::ceil(T / 1e-4));
  for (int i = 0; i <= n; ++i) {
    const double t = std::min(T, i * 1e-4);
    tr.times.push_back(t);
    tr.states.push_back(rotation_exact(t, Vector{{0.6, 0.0}}));
    tr.residuals.push_back(0.0);
  }
  EXPECT_LE(cesaro_mean(tr).data().norm(), 1e-6);
}

TEST(Cesaro, RunningMeanMatchesRecomputedMean) {
  const auto p = rotation_game();
  const auto tr = integrate(p, pt(p, {0.6, 0.0}), fixed(1e-2, 10.0));
  EXPECT_LE((tr.cesaro.data() - cesaro_mean(tr).data()).norm(), 1e-12);
}

TEST(Cesaro, NeedsTwoRecords) {
  FlowTrajectory tr;
  tr.layout = make_layout({1});
  tr.times = {0.0};
  tr.states = {Vector::Zero(1)};
  tr.residuals = {0.0};
  EXPECT_THROW(cesaro_mean(tr), InvalidArgument);
}

TEST(Cesaro, ConstantTrajectoryMeanIsTheConstant) {
  FlowTrajectory tr;
  tr.layout = make_layout({2});
  for (int i = 0; i < 5; ++i) {
    tr.times.push_back(0.25 * i);
    tr.states.push_back(Vector{{1.0, -2.0}});
    tr.residuals.push_back(0.0);
  }
  EXPECT_LE((cesaro_mean(tr).data() - Vector{{1.0, -2.0}}).norm(), 1e-15);
}

TEST(Solve, QuadraticConvergesToKnownEquilibrium) {
  const auto p = quadratic_two_player();
  FlowConfig c;
  c.t_max = 40.0;
  const auto r = solve(p, pt(p, {0.0, 0.0}), c);
  EXPECT_EQ(r.mode, SolveMode::TrajectoryLimit);
  EXPECT_LE(r.certificate, 1e-8);
  EXPECT_LE((r.equilibrium.data() - Vector{{1.5, 0.5}}).norm(), 1e-8);
}

TEST(Solve, RotationFallsBackToCesaroMean) {
  const auto p = rotation_game();
  FlowConfig c;
  c.t_max = 200.0;
  c.h = 1e-2;
  c.residual_tol = 1e-2;
  const auto r = solve(p, pt(p, {0.6, 0.0}), c);
  EXPECT_EQ(r.mode, SolveMode::CesaroMean);
  EXPECT_LE(r.equilibrium.data().norm(), 2.0 * 0.6 / 200.0 + 1e-3);
}

TEST(Solve, FailureCarriesBestPoint) {
  const auto p = rotation_game();
  FlowConfig c;
  c.t_max = 1.0;
  c.h = 1e-2;
  c.residual_tol = 1e-10;
  try {
    (void)solve(p, pt(p, {0.6, 0.0}), c);
    FAIL() << "expected SolveFailure";
  } catch (const SolveFailure& f) {
    EXPECT_GT(f.residual(), 1e-10);
    EXPECT_NEAR(f.residual(), nash_residual(p, f.best()), 1e-14);
    EXPECT_GT(f.trajectory().records(), 1u);
  }
}

TEST(Contraction, ProximalDistancesNonincreasing) {
  Xorshift64Star rng(12);
  const auto game = random_quadratic_matrix_game(rng, 3, 2, 0.0);
  const auto p = game.to_problem();
  FlowConfig c;
  c.h = 0.2;
  c.t_max = 4.0;
  const auto d = contraction_audit(p, GamePoint(rng.normal_vector(6), p.layout()),
                                   GamePoint(rng.normal_vector(6), p.layout()), c);
  ASSERT_EQ(d.size(), 21u);
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_LE(d[i], d[i - 1] + 1e-11);
}

TEST(Contraction, CoerciveFactorBound) {
  Xorshift64Star rng(13);
  const double theta = 0.5, h = 0.1;
  const auto p = random_quadratic_matrix_game(rng, 2, 2, theta).to_problem();
  FlowConfig c;
  c.h = h;
  c.t_max = 2.0;
  const auto d = contraction_audit(p, GamePoint(rng.normal_vector(4), p.layout()),
                                   GamePoint(rng.normal_vector(4), p.layout()), c);
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_LE(d[i] / d[i - 1], 1.0 / (1.0 + theta * h) + 1e-6);
}

TEST(Contraction, ConstrainedExtragradientIsNonexpansive) {
  const auto p = rotation_game();
  FlowConfig c;
  c.h = 0.5;
  c.t_max = 5.0;
  c.inner.method = InnerMethod::Extragradient;
  const auto d = contraction_audit(p, pt(p, {0.9, -0.9}), pt(p, {-0.5, 0.7}), c);
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_LE(d[i], d[i - 1] + 1e-9);
}
