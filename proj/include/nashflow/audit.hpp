#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nashflow/game.hpp"
#include "nashflow/rng.hpp"

namespace nashflow {

// ---------------------------------------------------------------------------
// Equilibrium certificate
// ---------------------------------------------------------------------------

struct ResidualResult {
  double value = 0.0;
  /// True when the input was infeasible and was projected before evaluation.
  bool projected = false;
};

/// Natural residual ||x - P_X(x - gamma g)|| for a precomputed field value g.
inline double natural_residual(const GameProblem& p, const Vector& x, const Vector& g, double gamma) {
  return (x - project_profile(p, x - gamma * g)).norm();
}

/// Natural residual ||x - P_X(x - gamma G(x))|| of the variational inequality
/// sum_j grad_j f_j(x) . (y_j - x_j) >= 0 for all y in X.
///
/// Zero exactly at Nash equilibria of monotone games with convex costs. An
/// infeasible x is projected first and the result is flagged.
inline ResidualResult nash_residual_checked(const GameProblem& p, const GamePoint& x, double gamma = 1.0) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("nash_residual: gamma must be positive");
  if (x.players() != p.players()) throw DimensionError("nash_residual: block count mismatch");
  ResidualResult out;
  GamePoint y = x;
  if (!is_feasible(p, x.data())) {
    y = x.rebind(project_profile(p, x.data()));
    out.projected = true;
  }
  out.value = natural_residual(p, y.data(), stacked_gradient(p, y), gamma);
  return out;
}

inline double nash_residual(const GameProblem& p, const GamePoint& x, double gamma = 1.0) {
  return nash_residual_checked(p, x, gamma).value;
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

using PointPair = std::pair<GamePoint, GamePoint>;
/// Yields feasible pairs (x, y) with x != y, or nullopt when exhausted.
using PairSampler = std::function<std::optional<PointPair>()>;

inline GamePoint sample_point(const GameProblem& p, Xorshift64Star& rng) {
  const LayoutPtr L = p.layout();
  Vector v(static_cast<Eigen::Index>(L->total()));
  for (std::size_t j = 0; j < p.players(); ++j)
    v.segment(static_cast<Eigen::Index>(L->offset(j)), static_cast<Eigen::Index>(L->size(j))) =
        p.sets[j].sample(rng);
  return GamePoint(std::move(v), L);
}

/// Endless sampler drawing both points independently from the sets.
inline PairSampler default_pair_sampler(const GameProblem& p, std::uint64_t seed) {
  auto rng = std::make_shared<Xorshift64Star>(seed);
  auto problem = std::make_shared<const GameProblem>(p);
  return [rng, problem]() -> std::optional<PointPair> {
    for (;;) {
      GamePoint x = sample_point(*problem, *rng);
      GamePoint y = sample_point(*problem, *rng);
      if (x.data() != y.data()) return PointPair{std::move(x), std::move(y)};
    }
  };
}

/// Sampler over a fixed list; exhausts after the last pair.
inline PairSampler list_pair_sampler(std::vector<PointPair> pairs) {
  auto data = std::make_shared<std::vector<PointPair>>(std::move(pairs));
  auto pos = std::make_shared<std::size_t>(0);
  return [data, pos]() -> std::optional<PointPair> {
    if (*pos >= data->size()) return std::nullopt;
    return (*data)[(*pos)++];
  };
}

// ---------------------------------------------------------------------------
// Monotonicity audit
// ---------------------------------------------------------------------------

enum class MonotonicityVerdict { MonotoneOnSamples, ViolatedAt };

struct MonotonicityReport {
  int samples = 0;
  double min_pairing = std::numeric_limits<double>::infinity();
  /// min over samples of pairing / |x - y|^2, a sampled lower estimate of theta.
  double min_ratio = std::numeric_limits<double>::infinity();
  MonotonicityVerdict verdict = MonotonicityVerdict::MonotoneOnSamples;
  std::optional<PointPair> violation;

  [[nodiscard]] bool monotone() const noexcept { return verdict == MonotonicityVerdict::MonotoneOnSamples; }
};

/// Monotonicity pairing sum_j (G_j(x) - G_j(y)) . (x_j - y_j), in the problem metric.
inline double monotonicity_pairing(const GameProblem& p, const GamePoint& x, const GamePoint& y) {
  return metric_pairing(p, stacked_gradient(p, x) - stacked_gradient(p, y), x.data() - y.data());
}

/// Evaluates the monotonicity pairing on n sampled pairs. This audits the
/// hypothesis on samples only; it proves nothing about unsampled pairs.
inline MonotonicityReport check_monotonicity(const GameProblem& p, const PairSampler& sampler, int n,
                                             double tol = 1e-12) {
  if (n < 1) throw InvalidArgument("check_monotonicity: need n >= 1");
  MonotonicityReport rep;
  for (int i = 0; i < n; ++i) {
    auto pair = sampler();
    if (!pair) throw InvalidArgument("check_monotonicity: sampler exhausted after " + std::to_string(i) + " pairs");
    const auto& [x, y] = *pair;
    const Vector d = x.data() - y.data();
    const double dist2 = metric_pairing(p, d, d);
    if (!(dist2 > 0.0)) continue;
    const double pairing = monotonicity_pairing(p, x, y);
    ++rep.samples;
    rep.min_ratio = std::min(rep.min_ratio, pairing / dist2);
    if (pairing < rep.min_pairing) {
      rep.min_pairing = pairing;
      if (pairing < -tol) {
        rep.verdict = MonotonicityVerdict::ViolatedAt;
        rep.violation = *pair;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Lipschitz estimation
// ---------------------------------------------------------------------------

using VectorPair = std::pair<Vector, Vector>;
using VectorPairSampler = std::function<std::optional<VectorPair>()>;
using VectorField = std::function<Vector(const Vector&)>;

/// max ||F(x) - F(y)|| / ||x - y|| over n sampled pairs; a lower bound on the true constant.
inline double estimate_lipschitz(const VectorField& field, const VectorPairSampler& sampler, int n) {
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    auto pair = sampler();
    if (!pair) throw InvalidArgument("estimate_lipschitz: sampler exhausted after " + std::to_string(i) + " pairs");
    const double dx = (pair->first - pair->second).norm();
    if (!(dx > 0.0)) continue;
    best = std::max(best, (field(pair->first) - field(pair->second)).norm() / dx);
  }
  return best;
}

inline double estimate_lipschitz(const GameProblem& p, const PairSampler& sampler, int n) {
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    auto pair = sampler();
    if (!pair) throw InvalidArgument("estimate_lipschitz: sampler exhausted after " + std::to_string(i) + " pairs");
    const double dx = (pair->first.data() - pair->second.data()).norm();
    if (!(dx > 0.0)) continue;
    best = std::max(best, (stacked_gradient(p, pair->first) - stacked_gradient(p, pair->second)).norm() / dx);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Gradient consistency
// ---------------------------------------------------------------------------

/// Largest relative discrepancy between grad_j and a central difference of
/// value_j over the given points: ||fd - g||_inf / max(1, ||g||_inf).
inline double gradient_check(const GameProblem& p, const std::vector<GamePoint>& points, double step = 1e-6) {
  if (!p.value) throw InvalidArgument("gradient_check: problem '" + p.name + "' has no value oracle");
  double worst = 0.0;
  for (const GamePoint& x : points) {
    for (std::size_t j = 0; j < p.players(); ++j) {
      const Vector g = player_gradient(p, j, x);
      const auto off = static_cast<Eigen::Index>(x.layout().offset(j));
      Vector fd(g.size());
      Vector z = x.data();
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double orig = z[off + i];
        z[off + i] = orig + step;
        const double fp = p.value(j, x.rebind(z));
        z[off + i] = orig - step;
        const double fm = p.value(j, x.rebind(z));
        z[off + i] = orig;
        fd[i] = (fp - fm) / (2.0 * step);
      }
      worst = std::max(worst, (fd - g).lpNorm<Eigen::Infinity>() / std::max(1.0, g.lpNorm<Eigen::Infinity>()));
    }
  }
  return worst;
}

}  // namespace nashflow
