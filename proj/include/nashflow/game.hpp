#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nashflow/convex_set.hpp"
#include "nashflow/error.hpp"
#include "nashflow/game_point.hpp"

namespace nashflow {

/// Oracle (j, x) -> grad_{x_j} f_j(x), a vector of block-j size.
using GradientOracle = std::function<Vector(std::size_t, const GamePoint&)>;
/// Oracle (j, x) -> f_j(x).
using ValueOracle = std::function<double(std::size_t, const GamePoint&)>;
/// Stacked field x -> (grad_{x_1} f_1(x), ..., grad_{x_N} f_N(x)) in one call.
using FieldOracle = std::function<Vector(const GamePoint&)>;
/// Dense Jacobian of the stacked field.
using JacobianOracle = std::function<Matrix(const GamePoint&)>;
/// Symmetric positive definite operator M defining the pairing <a, M b>.
using MetricOracle = std::function<Vector(const Vector&)>;
/// Closed-form flow solution (t, x0) -> u(t), when one is known.
using ClosedForm = std::function<Vector(double, const Vector&)>;

/// Analytic data attached to built-in problems, used by tests and `verify`.
struct ReferenceData {
  std::optional<Vector> equilibrium;
  ClosedForm closed_form;
  /// Initial points for which closed_form is valid (e.g. the unit disk for the rotation game).
  std::function<bool(const Vector&)> closed_form_valid;
};

/// N gradient oracles, N convex constraint sets, and optional metadata.
///
/// Oracles must be pure: the same input gives the same output. The library
/// never mutates a GameProblem, so one instance may be shared across threads
/// as long as the supplied oracles are themselves thread-safe.
struct GameProblem {
  std::string name;
  std::vector<ConvexSet> sets;
  GradientOracle grad;
  ValueOracle value;  // optional
  std::optional<double> lipschitz;
  std::optional<double> theta;

  /// Optional fast path for the stacked field; must agree with `grad`.
  FieldOracle field;
  /// Optional analytic Jacobian of the stacked field.
  JacobianOracle jacobian;
  /// Inner product in which the field is monotone. Empty means Euclidean.
  /// Only meaningful for unconstrained problems.
  MetricOracle metric;

  ReferenceData reference;

  [[nodiscard]] std::size_t players() const noexcept { return sets.size(); }

  [[nodiscard]] LayoutPtr layout() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(sets.size());
    for (const auto& s : sets) sizes.push_back(static_cast<std::size_t>(s.dim()));
    return make_layout(std::move(sizes));
  }

  [[nodiscard]] Eigen::Index dimension() const {
    Eigen::Index d = 0;
    for (const auto& s : sets) d += s.dim();
    return d;
  }

  [[nodiscard]] bool unconstrained() const {
    for (const auto& s : sets)
      if (!s.is_whole_space()) return false;
    return true;
  }
};

/// grad_{x_j} f_j(x), with the length and finiteness checks applied.
inline Vector player_gradient(const GameProblem& p, std::size_t j, const GamePoint& x) {
  Vector g = p.grad(j, x);
  if (static_cast<std::size_t>(g.size()) != x.layout().size(j))
    throw DimensionError("gradient oracle for player " + std::to_string(j) + " returned length " +
                         std::to_string(g.size()) + ", expected " + std::to_string(x.layout().size(j)));
  if (!g.allFinite()) throw NonFiniteGradient(j);
  return g;
}

/// Stacked field G(x). Uses the fast-path oracle when present.
inline Vector stacked_gradient(const GameProblem& p, const GamePoint& x) {
  if (x.players() != p.players())
    throw DimensionError("point has " + std::to_string(x.players()) + " blocks, problem has " +
                         std::to_string(p.players()) + " players");
  if (p.field) {
    Vector g = p.field(x);
    if (g.size() != x.size()) throw DimensionError("field oracle returned wrong length");
    if (!g.allFinite()) {
      for (std::size_t j = 0; j < x.players(); ++j) {
        const auto& L = x.layout();
        if (!g.segment(static_cast<Eigen::Index>(L.offset(j)), static_cast<Eigen::Index>(L.size(j))).allFinite())
          throw NonFiniteGradient(j);
      }
    }
    return g;
  }
  Vector g(x.size());
  for (std::size_t j = 0; j < x.players(); ++j)
    g.segment(static_cast<Eigen::Index>(x.layout().offset(j)), static_cast<Eigen::Index>(x.layout().size(j))) =
        player_gradient(p, j, x);
  return g;
}

/// Blockwise projection of a flat vector onto X_1 x ... x X_N.
inline Vector project_profile(const GameProblem& p, const Vector& z) {
  const LayoutPtr L = p.layout();
  if (static_cast<std::size_t>(z.size()) != L->total()) throw DimensionError("project_profile: length mismatch");
  Vector out(z.size());
  for (std::size_t j = 0; j < p.players(); ++j) {
    const auto off = static_cast<Eigen::Index>(L->offset(j));
    const auto n = static_cast<Eigen::Index>(L->size(j));
    out.segment(off, n) = p.sets[j].project(z.segment(off, n));
  }
  return out;
}

inline bool is_feasible(const GameProblem& p, const Vector& z, double tol = 1e-10) {
  const LayoutPtr L = p.layout();
  if (static_cast<std::size_t>(z.size()) != L->total()) return false;
  for (std::size_t j = 0; j < p.players(); ++j) {
    if (!p.sets[j].contains(
            z.segment(static_cast<Eigen::Index>(L->offset(j)), static_cast<Eigen::Index>(L->size(j))), tol))
      return false;
  }
  return true;
}

/// Pairing <a, M b> in the problem's metric (Euclidean by default).
inline double metric_pairing(const GameProblem& p, const Vector& a, const Vector& b) {
  if (p.metric) return a.dot(p.metric(b));
  return a.dot(b);
}

/// Central-difference Jacobian of the stacked field.
inline Matrix finite_difference_jacobian(const GameProblem& p, const GamePoint& x, double rel_step = 1e-6) {
  const Eigen::Index n = x.size();
  Matrix J(n, n);
  Vector xp = x.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = rel_step * (1.0 + std::abs(x.data()[i]));
    const double orig = xp[i];
    xp[i] = orig + h;
    const Vector gp = stacked_gradient(p, x.rebind(xp));
    xp[i] = orig - h;
    const Vector gm = stacked_gradient(p, x.rebind(xp));
    xp[i] = orig;
    J.col(i) = (gp - gm) / (2.0 * h);
  }
  return J;
}

inline Matrix field_jacobian(const GameProblem& p, const GamePoint& x) {
  if (p.jacobian) return p.jacobian(x);
  return finite_difference_jacobian(p, x);
}

}  // namespace nashflow
