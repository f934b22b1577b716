#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nashflow/audit.hpp"
#include "nashflow/game.hpp"

namespace nashflow {

enum class Scheme { ProjectedEuler, ProximalImplicit };
enum class InnerMethod { Extragradient, NewtonWhenSmooth };
enum class StopReason { TMaxReached, ResidualConverged };
enum class SolveMode { TrajectoryLimit, CesaroMean };

inline const char* to_string(Scheme s) { return s == Scheme::ProjectedEuler ? "ProjectedEuler" : "ProximalImplicit"; }
inline const char* to_string(StopReason r) { return r == StopReason::TMaxReached ? "TMaxReached" : "ResidualConverged"; }
inline const char* to_string(SolveMode m) { return m == SolveMode::TrajectoryLimit ? "TrajectoryLimit" : "CesaroMean"; }

/// Settings for the resolvent solve z + h G(z) + N_X(z) contains x.
struct InnerSolveConfig {
  int max_iters = 10'000;
  double tol = 1e-12;
  InnerMethod method = InnerMethod::NewtonWhenSmooth;
  /// Lipschitz estimate used for the extragradient step; estimated locally when absent.
  std::optional<double> lipschitz_hint;
};

struct FlowConfig {
  /// Time step. When absent, default_step() picks min(1e-2, 0.5 / L).
  std::optional<double> h;
  Scheme scheme = Scheme::ProjectedEuler;
  double t_max = 10.0;
  double residual_tol = 1e-8;
  double residual_gamma = 1.0;
  InnerSolveConfig inner;
  /// Keep every k-th state (the final state is always kept).
  int record_every = 1;
};

/// Time-stamped states of one flow run plus the running Cesaro mean.
struct FlowTrajectory {
  LayoutPtr layout;
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<double> residuals;
  /// Trapezoid-weighted time average of every step over [0, t_last].
  GamePoint cesaro;
  StopReason reason = StopReason::TMaxReached;
  std::size_t steps = 0;
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t records() const noexcept { return times.size(); }
  [[nodiscard]] double t_last() const { return times.back(); }
  [[nodiscard]] GamePoint final_state() const { return GamePoint(states.back(), layout); }
  [[nodiscard]] GamePoint state(std::size_t i) const { return GamePoint(states.at(i), layout); }
};

/// Step heuristic min(1e-2, 0.5 / L), using the known constant or a sampled estimate.
inline double default_step(const GameProblem& p) {
  double L = 0.0;
  if (p.lipschitz) {
    L = *p.lipschitz;
  } else {
    L = estimate_lipschitz(p, default_pair_sampler(p, 0x5eed), 64);
  }
  return L > 0.0 ? std::min(1e-2, 0.5 / L) : 1e-2;
}

// ---------------------------------------------------------------------------
// Single steps
// ---------------------------------------------------------------------------

/// Projected forward Euler: x_j <- P_{X_j}(x_j - h grad_j f_j(x)).
inline GamePoint step_explicit(const GameProblem& p, const GamePoint& x, double h) {
  if (!(h >= 0.0) || !std::isfinite(h)) throw InvalidArgument("step_explicit: h must be >= 0");
  if (h == 0.0) return x;
  return x.rebind(project_profile(p, x.data() - h * stacked_gradient(p, x)));
}

namespace detail {

inline double local_lipschitz(const GameProblem& p, const GamePoint& x) {
  if (p.lipschitz) return *p.lipschitz;
  Xorshift64Star rng(0xC0FFEE);
  const double scale = 1e-3 * (1.0 + x.data().norm());
  double best = 0.0;
  const Vector g0 = stacked_gradient(p, x);
  for (int i = 0; i < 8; ++i) {
    const Vector d = scale * rng.normal_vector(x.size());
    const double dn = d.norm();
    if (dn == 0.0) continue;
    best = std::max(best, (stacked_gradient(p, x.rebind(x.data() + d)) - g0).norm() / dn);
  }
  return best;
}

// Natural residual of the resolvent VI at z: ||z - P_X(x - h G(z))||.
inline double resolvent_residual(const GameProblem& p, const Vector& x, const Vector& z, const Vector& gz, double h) {
  return (z - project_profile(p, x - h * gz)).norm();
}

inline std::optional<GamePoint> resolvent_newton(const GameProblem& p, const GamePoint& x, double h,
                                                 const InnerSolveConfig& inner, int& iters) {
  const Eigen::Index n = x.size();
  GamePoint z = x;
  Vector gz = stacked_gradient(p, z);
  Vector R = z.data() + h * gz - x.data();
  double res = R.norm();
  for (; iters < inner.max_iters; ++iters) {
    if (res <= inner.tol) return z;
    const Matrix J = Matrix::Identity(n, n) + h * field_jacobian(p, z);
    const Vector dz = J.partialPivLu().solve(-R);
    if (!dz.allFinite()) return std::nullopt;
    double lambda = 1.0;
    bool accepted = false;
    while (lambda >= 1e-8) {
      GamePoint trial = z.rebind(z.data() + lambda * dz);
      const Vector gt = stacked_gradient(p, trial);
      const Vector Rt = trial.data() + h * gt - x.data();
      const double rt = Rt.norm();
      if (rt < (1.0 - 1e-4 * lambda) * res || rt <= inner.tol) {
        z = std::move(trial);
        gz = gt;
        R = Rt;
        res = rt;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) return std::nullopt;
  }
  if (res <= inner.tol) return z;
  return std::nullopt;
}

inline GamePoint resolvent_extragradient(const GameProblem& p, const GamePoint& x, const GamePoint& start, double h,
                                         const InnerSolveConfig& inner, int iters) {
  const double L = inner.lipschitz_hint ? *inner.lipschitz_hint : local_lipschitz(p, x);
  double gamma = 1.0 / (1.0 + h * L);
  constexpr double kGammaFloor = 1e-8;

  // Shifted operator F(z) = z - x + h G(z), 1-strongly monotone.
  auto F = [&](const Vector& z, const Vector& gz) -> Vector { return z - x.data() + h * gz; };

  Vector z = start.data();
  Vector gz = stacked_gradient(p, x.rebind(z));
  double r = resolvent_residual(p, x.data(), z, gz, h);
  for (; iters < inner.max_iters; ++iters) {
    if (r <= inner.tol) return x.rebind(z);
    const Vector y = project_profile(p, z - gamma * F(z, gz));
    const Vector gy = stacked_gradient(p, x.rebind(y));
    const Vector zn = project_profile(p, z - gamma * F(y, gy));
    const Vector gzn = stacked_gradient(p, x.rebind(zn));
    const double rn = resolvent_residual(p, x.data(), zn, gzn, h);
    if (rn > r && gamma > kGammaFloor) {
      gamma = std::max(0.5 * gamma, kGammaFloor);
      continue;
    }
    z = zn;
    gz = gzn;
    r = rn;
  }
  if (r <= inner.tol) return x.rebind(z);
  throw ConvergenceError("step_proximal: resolvent solve exceeded " + std::to_string(inner.max_iters) + " iterations",
                         r);
}

}  // namespace detail

/// Implicit (proximal) step: the unique z with z + h G(z) + N_X(z) containing x.
///
/// The shifted game z -> z - x + h G(z) is 1-strongly monotone, so z exists
/// and is unique. Smooth unconstrained problems use damped Newton on
/// z + h G(z) = x; everything else, or a Newton failure, uses extragradient
/// with step 1/(1 + h L) and backtracking.
inline GamePoint step_proximal(const GameProblem& p, const GamePoint& x, double h, const InnerSolveConfig& inner = {}) {
  if (!(h >= 0.0) || !std::isfinite(h)) throw InvalidArgument("step_proximal: h must be >= 0");
  if (h == 0.0) return x;
  int iters = 0;
  GamePoint start = x;
  if (inner.method == InnerMethod::NewtonWhenSmooth && p.unconstrained()) {
    if (auto z = detail::resolvent_newton(p, x, h, inner, iters)) return *z;
  }
  return detail::resolvent_extragradient(p, x, start, h, inner, iters);
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// Integrates the constrained flow from x0 until t_max or until the natural
/// residual drops to residual_tol.
inline FlowTrajectory integrate(const GameProblem& p, const GamePoint& x0, const FlowConfig& cfg) {
  const double h = cfg.h ? *cfg.h : default_step(p);
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("integrate: step h must be positive");
  if (!(cfg.t_max >= 0.0)) throw InvalidArgument("integrate: t_max must be >= 0");
  if (!(cfg.residual_tol > 0.0) || !(cfg.residual_gamma > 0.0))
    throw InvalidArgument("integrate: tolerances must be positive");
  if (cfg.record_every < 1) throw InvalidArgument("integrate: record_every must be >= 1");
  if (x0.players() != p.players() || x0.layout().sizes() != p.layout()->sizes())
    throw DimensionError("integrate: x0 layout does not match the problem");

  FlowTrajectory traj;
  traj.layout = x0.layout_ptr();

  if (cfg.scheme == Scheme::ProjectedEuler && p.lipschitz && *p.lipschitz > 0.0 && h > 1.0 / *p.lipschitz)
    traj.warnings.push_back("step h=" + std::to_string(h) + " exceeds 1/L=" + std::to_string(1.0 / *p.lipschitz) +
                            "; projected Euler may be unstable");

  GamePoint x = x0;
  if (!is_feasible(p, x0.data())) {
    x = x0.rebind(project_profile(p, x0.data()));
    traj.warnings.push_back("x0 was infeasible and has been projected onto X");
  }

  InnerSolveConfig inner = cfg.inner;
  if (cfg.scheme == Scheme::ProximalImplicit && !inner.lipschitz_hint &&
      !(inner.method == InnerMethod::NewtonWhenSmooth && p.unconstrained())) {
    inner.lipschitz_hint = p.lipschitz ? *p.lipschitz : estimate_lipschitz(p, default_pair_sampler(p, 0x5eed), 64);
  }

  Vector acc = Vector::Zero(x.size());
  double t = 0.0;
  std::size_t k = 0;
  for (;;) {
    const Vector g = stacked_gradient(p, x);
    const double r = natural_residual(p, x.data(), g, cfg.residual_gamma);
    const bool converged = r <= cfg.residual_tol;
    const bool done = converged || t >= cfg.t_max;
    if (k % static_cast<std::size_t>(cfg.record_every) == 0 || done) {
      traj.times.push_back(t);
      traj.states.push_back(x.data());
      traj.residuals.push_back(r);
    }
    if (done) {
      traj.reason = converged ? StopReason::ResidualConverged : StopReason::TMaxReached;
      break;
    }

    double t_next = std::min(static_cast<double>(k + 1) * h, cfg.t_max);
    if (cfg.t_max - t_next < 1e-9 * h) t_next = cfg.t_max;
    const double dt = t_next - t;

    GamePoint next = cfg.scheme == Scheme::ProjectedEuler ? x.rebind(project_profile(p, x.data() - dt * g))
                                                          : step_proximal(p, x, dt, inner);
    acc += 0.5 * dt * (x.data() + next.data());
    x = std::move(next);
    t = t_next;
    ++k;
  }
  traj.steps = k;
  traj.cesaro = t > 0.0 ? x.rebind(acc / t) : x;
  return traj;
}

/// Trapezoid-rule time average of the recorded states over [0, t_last].
inline GamePoint cesaro_mean(const FlowTrajectory& traj) {
  if (traj.records() < 2) throw InvalidArgument("cesaro_mean: trajectory needs at least two records");
  Vector acc = Vector::Zero(traj.states.front().size());
  for (std::size_t i = 1; i < traj.records(); ++i)
    acc += 0.5 * (traj.times[i] - traj.times[i - 1]) * (traj.states[i - 1] + traj.states[i]);
  return GamePoint(acc / (traj.times.back() - traj.times.front()), traj.layout);
}

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

struct SolveResult {
  GamePoint equilibrium;
  double certificate = 0.0;
  SolveMode mode = SolveMode::TrajectoryLimit;
  FlowTrajectory trajectory;
};

/// Neither the trajectory nor its Cesaro mean reached residual_tol.
class SolveFailure : public ConvergenceError {
 public:
  SolveFailure(GamePoint best, double residual, SolveMode mode, std::shared_ptr<const FlowTrajectory> traj)
      : ConvergenceError("solve: no certified equilibrium within t_max", residual),
        best_(std::move(best)),
        mode_(mode),
        traj_(std::move(traj)) {}

  [[nodiscard]] const GamePoint& best() const noexcept { return best_; }
  [[nodiscard]] SolveMode mode() const noexcept { return mode_; }
  [[nodiscard]] const FlowTrajectory& trajectory() const noexcept { return *traj_; }

 private:
  GamePoint best_;
  SolveMode mode_;
  std::shared_ptr<const FlowTrajectory> traj_;
};

/// Integrates and certifies. Returns the final state when its residual
/// converged, otherwise the (projected) Cesaro mean if that one certifies.
inline SolveResult solve(const GameProblem& p, const GamePoint& x0, const FlowConfig& cfg) {
  FlowTrajectory traj = integrate(p, x0, cfg);
  GamePoint last = traj.final_state();
  if (traj.reason == StopReason::ResidualConverged) {
    const double cert = nash_residual(p, last, cfg.residual_gamma);
    return SolveResult{std::move(last), cert, SolveMode::TrajectoryLimit, std::move(traj)};
  }
  GamePoint mean = traj.cesaro.rebind(project_profile(p, traj.cesaro.data()));
  const double mean_res = nash_residual(p, mean, cfg.residual_gamma);
  if (mean_res <= cfg.residual_tol)
    return SolveResult{std::move(mean), mean_res, SolveMode::CesaroMean, std::move(traj)};

  const double last_res = nash_residual(p, last, cfg.residual_gamma);
  auto shared = std::make_shared<const FlowTrajectory>(std::move(traj));
  if (last_res < mean_res) throw SolveFailure(std::move(last), last_res, SolveMode::TrajectoryLimit, shared);
  throw SolveFailure(std::move(mean), mean_res, SolveMode::CesaroMean, shared);
}

/// Runs two proximal trajectories in lockstep and returns their distance at
/// every step (in the problem metric), starting with |x0 - y0|.
inline std::vector<double> contraction_audit(const GameProblem& p, const GamePoint& x0, const GamePoint& y0,
                                             const FlowConfig& cfg) {
  const double h = cfg.h ? *cfg.h : default_step(p);
  if (!(h > 0.0)) throw InvalidArgument("contraction_audit: step h must be positive");
  if (!is_feasible(p, x0.data()) || !is_feasible(p, y0.data()))
    throw InvalidArgument("contraction_audit: starting points must be feasible");
  auto dist = [&](const GamePoint& a, const GamePoint& b) {
    const Vector d = a.data() - b.data();
    return std::sqrt(std::max(0.0, metric_pairing(p, d, d)));
  };
  const auto steps = static_cast<std::size_t>(std::ceil(cfg.t_max / h - 1e-9));
  std::vector<double> out;
  out.reserve(steps + 1);
  GamePoint x = x0;
  GamePoint y = y0;
  out.push_back(dist(x, y));
  for (std::size_t k = 0; k < steps; ++k) {
    x = step_proximal(p, x, h, cfg.inner);
    y = step_proximal(p, y, h, cfg.inner);
    out.push_back(dist(x, y));
  }
  return out;
}

}  // namespace nashflow
