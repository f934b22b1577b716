#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nashflow/error.hpp"
#include "nashflow/game_point.hpp"
#include "nashflow/rng.hpp"

namespace nashflow {

/// Closed convex subset of R^dim with a Euclidean projection.
///
/// Supported kinds: the whole space, a box, a closed ball, the scaled
/// probability simplex {x >= 0, sum x = scale}, and a finite intersection of
/// halfspaces {x : a_i . x <= b_i}. The halfspace intersection is projected with
/// Dykstra's alternating projections; every other kind has a closed form.
class ConvexSet {
 public:
  struct WholeSpace {
    Eigen::Index dim;
  };
  struct Box {
    Vector lower;
    Vector upper;
  };
  struct Ball {
    Vector center;
    double radius;
  };
  struct Simplex {
    Eigen::Index dim;
    double scale;
  };
  struct Halfspaces {
    Matrix normals;  // one row per halfspace
    Vector offsets;
  };
  using Kind = std::variant<WholeSpace, Box, Ball, Simplex, Halfspaces>;

  static constexpr int kDykstraMaxSweeps = 10'000;
  static constexpr double kDykstraTol = 1e-12;

  static ConvexSet whole_space(Eigen::Index dim) {
    if (dim <= 0) throw InvalidArgument("WholeSpace: dimension must be positive");
    return ConvexSet(WholeSpace{dim});
  }

  static ConvexSet box(Vector lower, Vector upper) {
    if (lower.size() != upper.size() || lower.size() == 0)
      throw DimensionError("Box: lower/upper size mismatch");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i])
        throw InvalidArgument("Box: need lower <= upper at coordinate " + std::to_string(i));
    }
    return ConvexSet(Box{std::move(lower), std::move(upper)});
  }

  static ConvexSet box(Eigen::Index dim, double lo, double hi) {
    return box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
  }

  static ConvexSet ball(Vector center, double radius) {
    if (center.size() == 0) throw DimensionError("Ball: empty center");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("Ball: radius must be positive");
    if (!center.allFinite()) throw InvalidArgument("Ball: non-finite center");
    return ConvexSet(Ball{std::move(center), radius});
  }

  static ConvexSet simplex(Eigen::Index dim, double scale = 1.0) {
    if (dim <= 0) throw InvalidArgument("Simplex: dimension must be positive");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("Simplex: scale must be positive");
    return ConvexSet(Simplex{dim, scale});
  }

  static ConvexSet halfspaces(Matrix normals, Vector offsets) {
    if (normals.rows() != offsets.size() || normals.rows() == 0 || normals.cols() == 0)
      throw DimensionError("HalfspaceIntersection: normals/offsets mismatch");
    for (Eigen::Index i = 0; i < normals.rows(); ++i) {
      if (!(normals.row(i).norm() > 0.0)) throw InvalidArgument("HalfspaceIntersection: zero normal");
    }
    if (!normals.allFinite() || !offsets.allFinite())
      throw InvalidArgument("HalfspaceIntersection: non-finite data");
    return ConvexSet(Halfspaces{std::move(normals), std::move(offsets)});
  }

  [[nodiscard]] const Kind& kind() const noexcept { return kind_; }

  [[nodiscard]] bool is_whole_space() const noexcept { return std::holds_alternative<WholeSpace>(kind_); }

  [[nodiscard]] Eigen::Index dim() const {
    return std::visit(
        [](const auto& k) -> Eigen::Index {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, WholeSpace> || std::is_same_v<T, Simplex>) return k.dim;
          else if constexpr (std::is_same_v<T, Box>) return k.lower.size();
          else if constexpr (std::is_same_v<T, Ball>) return k.center.size();
          else return k.normals.cols();
        },
        kind_);
  }

  [[nodiscard]] std::string describe() const {
    const std::string d = std::to_string(dim());
    return std::visit(
        [&](const auto& k) -> std::string {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, WholeSpace>) return "WholeSpace(R^" + d + ")";
          else if constexpr (std::is_same_v<T, Box>) return "Box(R^" + d + ")";
          else if constexpr (std::is_same_v<T, Ball>) return "Ball(R^" + d + ", r=" + std::to_string(k.radius) + ")";
          else if constexpr (std::is_same_v<T, Simplex>) return "Simplex(R^" + d + ", scale=" + std::to_string(k.scale) + ")";
          else return "HalfspaceIntersection(" + std::to_string(k.normals.rows()) + " halfspaces in R^" + d + ")";
        },
        kind_);
  }

  /// Euclidean nearest point of the set.
  [[nodiscard]] Vector project(const Vector& z) const {
    if (z.size() != dim())
      throw DimensionError(describe() + ": cannot project vector of length " + std::to_string(z.size()));
    return std::visit([&](const auto& k) { return project_impl(k, z); }, kind_);
  }

  [[nodiscard]] bool contains(const Vector& z, double tol = 1e-10) const {
    if (z.size() != dim()) return false;
    if (!z.allFinite()) return false;
    return std::visit(
        [&](const auto& k) -> bool {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, WholeSpace>) {
            return true;
          } else if constexpr (std::is_same_v<T, Box>) {
            return ((z - k.lower).array() >= -tol).all() && ((k.upper - z).array() >= -tol).all();
          } else if constexpr (std::is_same_v<T, Ball>) {
            return (z - k.center).norm() <= k.radius + tol;
          } else if constexpr (std::is_same_v<T, Simplex>) {
            return (z.array() >= -tol).all() && std::abs(z.sum() - k.scale) <= tol;
          } else {
            const Vector slack = k.normals * z - k.offsets;
            for (Eigen::Index i = 0; i < slack.size(); ++i)
              if (slack[i] > tol * std::max(1.0, k.normals.row(i).norm())) return false;
            return true;
          }
        },
        kind_);
  }

  /// Random point of the set: uniform for boxes, balls and simplices; a
  /// standard Gaussian, projected, for unbounded kinds.
  [[nodiscard]] Vector sample(Xorshift64Star& rng) const {
    return std::visit(
        [&](const auto& k) -> Vector {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, WholeSpace>) {
            return rng.normal_vector(k.dim);
          } else if constexpr (std::is_same_v<T, Box>) {
            Vector v(k.lower.size());
            for (Eigen::Index i = 0; i < v.size(); ++i) {
              if (std::isfinite(k.lower[i]) && std::isfinite(k.upper[i]))
                v[i] = rng.uniform(k.lower[i], k.upper[i]);
              else
                v[i] = std::clamp(rng.normal(), k.lower[i], k.upper[i]);
            }
            return v;
          } else if constexpr (std::is_same_v<T, Ball>) {
            const Eigen::Index d = k.center.size();
            Vector dir = rng.normal_vector(d);
            while (dir.norm() == 0.0) dir = rng.normal_vector(d);
            const double r = k.radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
            return k.center + r * dir / dir.norm();
          } else if constexpr (std::is_same_v<T, Simplex>) {
            Vector e(k.dim);
            for (Eigen::Index i = 0; i < k.dim; ++i) {
              double u = rng.uniform();
              while (u <= 0.0) u = rng.uniform();
              e[i] = -std::log(u);
            }
            return k.scale * e / e.sum();
          } else {
            return project(rng.normal_vector(k.normals.cols()));
          }
        },
        kind_);
  }

 private:
  explicit ConvexSet(Kind k) : kind_(std::move(k)) {}

  static Vector project_impl(const WholeSpace&, const Vector& z) { return z; }

  static Vector project_impl(const Box& b, const Vector& z) { return z.cwiseMax(b.lower).cwiseMin(b.upper); }

  static Vector project_impl(const Ball& b, const Vector& z) {
    const Vector d = z - b.center;
    const double n = d.norm();
    if (n <= b.radius) return z;
    return b.center + (b.radius / n) * d;
  }

  // Sort-and-threshold projection onto {x >= 0, sum x = scale}.
  static Vector project_impl(const Simplex& s, const Vector& z) {
    std::vector<double> u(z.data(), z.data() + z.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double tau = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      cumsum += u[k];
      const double t = (cumsum - s.scale) / static_cast<double>(k + 1);
      if (u[k] - t > 0.0) tau = t;
    }
    return (z.array() - tau).cwiseMax(0.0).matrix();
  }

  Vector project_impl(const Halfspaces& h, const Vector& z) const {
    const Eigen::Index m = h.normals.rows();
    const Vector sq = h.normals.rowwise().squaredNorm();
    auto onto = [&](Eigen::Index i, const Vector& y) -> Vector {
      const double viol = h.normals.row(i).dot(y) - h.offsets[i];
      if (viol <= 0.0) return y;
      return y - (viol / sq[i]) * h.normals.row(i).transpose();
    };
    if (m == 1) return onto(0, z);

    Vector x = z;
    Matrix corr = Matrix::Zero(z.size(), m);
    for (int sweep = 0; sweep < kDykstraMaxSweeps; ++sweep) {
      // Movement summed over the inner steps; sweep endpoints alone can coincide mid-cycle.
      double moved = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        const Vector y = onto(i, x + corr.col(i));
        corr.col(i) = x + corr.col(i) - y;
        moved += (y - x).squaredNorm();
        x = y;
      }
      if (std::sqrt(moved) < kDykstraTol && contains(x, 1e-9)) return x;
    }
    throw ConvergenceError(describe() + ": Dykstra projection did not converge (set may be empty)",
                           (h.normals * x - h.offsets).cwiseMax(0.0).maxCoeff());
  }

  Kind kind_;
};

}  // namespace nashflow
