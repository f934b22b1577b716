#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nashflow/audit.hpp"
#include "nashflow/error.hpp"
#include "nashflow/game_point.hpp"
#include "nashflow/rng.hpp"

namespace nashflow {

/// Stacked coupling gradient z -> (dF_1/dz_1, ..., dF_N/dz_N), optional values,
/// and the coercivity constant theta of the map.
struct DualSystem {
  Eigen::Index n = 0;
  VectorField F_grad;
  /// Optional: z -> (F_1(z), ..., F_N(z)).
  VectorField F_val;
  double theta = 0.0;
  double growth = 1.0;
};

namespace detail {

inline VectorPairSampler ball_pair_sampler(const Vector& center, double radius, std::uint64_t seed) {
  auto rng = std::make_shared<Xorshift64Star>(seed);
  return [rng, center, radius]() -> std::optional<VectorPair> {
    auto draw = [&]() {
      Vector d = rng->normal_vector(center.size());
      const double nd = d.norm();
      if (nd > 0.0) d *= radius * std::pow(rng->uniform(), 1.0 / static_cast<double>(center.size())) / nd;
      return Vector(center + d);
    };
    return VectorPair{draw(), draw()};
  };
}

}  // namespace detail

/// Validates theta > 0 and the sampled coercivity ratio; throws InvalidArgument otherwise.
inline DualSystem make_dual_system(Eigen::Index n, VectorField grad, VectorField val, double theta,
                                   double growth = 1.0, int samples = 64, std::uint64_t seed = 0x5eed) {
  if (n < 1) throw InvalidArgument("DualSystem: need n >= 1");
  if (!(theta > 0.0) || !std::isfinite(theta)) throw InvalidArgument("DualSystem: theta must be positive");
  if (!grad) throw InvalidArgument("DualSystem: missing gradient oracle");
  DualSystem sys{n, std::move(grad), std::move(val), theta, growth};
  Xorshift64Star rng(seed);
  for (int i = 0; i < samples; ++i) {
    const Vector z = 3.0 * rng.normal_vector(n);
    const Vector w = 3.0 * rng.normal_vector(n);
    const double d2 = (z - w).squaredNorm();
    if (!(d2 > 0.0)) continue;
    const double ratio = (sys.F_grad(z) - sys.F_grad(w)).dot(z - w) / d2;
    if (ratio < theta - 1e-9)
      throw InvalidArgument("DualSystem: sampled coercivity ratio " + std::to_string(ratio) + " below theta " +
                            std::to_string(theta));
  }
  return sys;
}

struct DualOptions {
  double tol = 1e-10;
  int budget = 1000;
};

/// Solves F_grad(z) = y, i.e. evaluates the dual gradient dG/dy at y.
///
/// Damped Newton with a central-difference Jacobian; if a line search fails the
/// remaining budget goes to z <- z - (theta / L^2)(F_grad(z) - y), which
/// contracts for a theta-coercive, L-Lipschitz map.
inline Vector dual_gradient(const DualSystem& sys, const Vector& y, const DualOptions& opt = {}) {
  if (y.size() != sys.n) throw DimensionError("dual_gradient: expected length " + std::to_string(sys.n));
  if (!y.allFinite()) throw InvalidArgument("dual_gradient: y must be finite");
  const Eigen::Index n = sys.n;
  Vector z = Vector::Zero(n);
  Vector r = sys.F_grad(z) - y;
  int it = 0;
  bool newton = true;
  while (newton && it < opt.budget) {
    if (r.lpNorm<Eigen::Infinity>() <= opt.tol) return z;
    ++it;
    Matrix J(n, n);
    Vector zp = z;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(z[i]));
      zp[i] = z[i] + h;
      const Vector fp = sys.F_grad(zp);
      zp[i] = z[i] - h;
      const Vector fm = sys.F_grad(zp);
      zp[i] = z[i];
      J.col(i) = (fp - fm) / (2.0 * h);
    }
    const Vector dz = J.partialPivLu().solve(-r);
    if (!dz.allFinite()) break;
    const double rn = r.norm();
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30; ++k, lambda *= 0.5) {
      const Vector zc = z + lambda * dz;
      const Vector rc = sys.F_grad(zc) - y;
      if (rc.norm() < (1.0 - 1e-4 * lambda) * rn || rc.lpNorm<Eigen::Infinity>() <= opt.tol) {
        z = zc;
        r = rc;
        accepted = true;
        break;
      }
    }
    newton = accepted;
  }
  if (r.lpNorm<Eigen::Infinity>() <= opt.tol) return z;

  const double radius = 1.0 + y.norm() / sys.theta;
  double L = estimate_lipschitz(sys.F_grad, detail::ball_pair_sampler(z, radius, 0x1e6e), 64);
  if (!(L > 0.0)) L = sys.theta;
  L = std::max(L, sys.theta);
  const double step = sys.theta / (L * L);
  while (it < opt.budget) {
    if (r.lpNorm<Eigen::Infinity>() <= opt.tol) return z;
    ++it;
    z -= step * r;
    r = sys.F_grad(z) - y;
  }
  if (r.lpNorm<Eigen::Infinity>() <= opt.tol) return z;
  throw ConvergenceError("dual_gradient: budget exhausted", r.lpNorm<Eigen::Infinity>());
}

/// G_j(y) = z_j y_j - F_j(z) with z = dual_gradient(y).
inline Vector dual_value(const DualSystem& sys, const Vector& y, const DualOptions& opt = {}) {
  if (!sys.F_val) throw InvalidArgument("dual_value: system has no value oracle");
  const Vector z = dual_gradient(sys, y, opt);
  const Vector f = sys.F_val(z);
  if (f.size() != sys.n) throw DimensionError("dual_value: value oracle returned wrong length");
  return z.cwiseProduct(y) - f;
}

/// Central-difference Jacobian of dual_gradient; entry (j, k) approximates d^2 G_j / dy_k dy_j.
inline Matrix dual_hessian_fd(const DualSystem& sys, const Vector& y, double step = 1e-4) {
  Matrix H(sys.n, sys.n);
  Vector yp = y;
  for (Eigen::Index k = 0; k < sys.n; ++k) {
    const double h = step * (1.0 + std::abs(y[k]));
    yp[k] = y[k] + h;
    const Vector zp = dual_gradient(sys, yp);
    yp[k] = y[k] - h;
    const Vector zm = dual_gradient(sys, yp);
    yp[k] = y[k];
    H.col(k) = (zp - zm) / (2.0 * h);
  }
  return H;
}

struct DualReport {
  int samples = 0;
  double max_hessian_entry = 0.0;
  double min_pairing = std::numeric_limits<double>::infinity();
  /// max |G_j(y)| / (1 + |y|^2); NaN without a value oracle.
  double value_growth = std::numeric_limits<double>::quiet_NaN();
  /// max |dG_j/dy_j(y)| / (1 + |y|).
  double gradient_growth = 0.0;
  double hessian_bound = 0.0;

  [[nodiscard]] bool hessian_ok() const { return max_hessian_entry <= hessian_bound + 1e-4; }
  [[nodiscard]] bool pairing_ok() const { return min_pairing >= -1e-9; }
  [[nodiscard]] bool growth_ok() const {
    return std::isfinite(gradient_growth) && (std::isnan(value_growth) || std::isfinite(value_growth));
  }
  [[nodiscard]] bool passed() const { return hessian_ok() && pairing_ok() && growth_ok(); }
};

/// Audits the dual functions on n sampled pairs: Hessian entry bound 1/theta,
/// monotone dual gradient, and empirical growth constants.
inline DualReport verify_dual_properties(const DualSystem& sys, const VectorPairSampler& sampler, int n) {
  if (n < 1) throw InvalidArgument("verify_dual_properties: need n >= 1");
  DualReport rep;
  rep.hessian_bound = 1.0 / sys.theta;
  if (sys.F_val) rep.value_growth = 0.0;
  auto account = [&](const Vector& y, const Vector& z) {
    const Matrix H = dual_hessian_fd(sys, y);
    rep.max_hessian_entry = std::max(rep.max_hessian_entry, H.cwiseAbs().maxCoeff());
    const double ny = y.norm();
    rep.gradient_growth = std::max(rep.gradient_growth, z.cwiseAbs().maxCoeff() / (1.0 + ny));
    if (sys.F_val) {
      const Vector g = z.cwiseProduct(y) - sys.F_val(z);
      rep.value_growth = std::max(rep.value_growth, g.cwiseAbs().maxCoeff() / (1.0 + ny * ny));
    }
  };
  for (int i = 0; i < n; ++i) {
    auto pair = sampler();
    if (!pair) throw InvalidArgument("verify_dual_properties: sampler exhausted after " + std::to_string(i));
    const auto& [y, w] = *pair;
    const Vector zy = dual_gradient(sys, y);
    const Vector zw = dual_gradient(sys, w);
    rep.min_pairing = std::min(rep.min_pairing, (zy - zw).dot(y - w));
    account(y, zy);
    account(w, zw);
    ++rep.samples;
  }
  return rep;
}

/// Endless sampler of Gaussian pairs with the given scale.
inline VectorPairSampler gaussian_vector_pairs(Eigen::Index n, double scale, std::uint64_t seed) {
  auto rng = std::make_shared<Xorshift64Star>(seed);
  return [rng, n, scale]() -> std::optional<VectorPair> {
    Vector a = scale * rng->normal_vector(n);
    Vector b = scale * rng->normal_vector(n);
    return VectorPair{std::move(a), std::move(b)};
  };
}

/// Linear system F_grad(z) = M z with values F_j(z) = z_j (M z)_j - M_jj z_j^2 / 2.
inline DualSystem linear_dual_system(const Matrix& M) {
  if (M.rows() != M.cols()) throw DimensionError("linear_dual_system: M must be square");
  const Matrix S = 0.5 * (M + M.transpose());
  const double theta = Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (!(theta > 0.0)) throw InvalidArgument("linear_dual_system: symmetric part not positive definite");
  auto grad = [M](const Vector& z) -> Vector { return M * z; };
  auto val = [M](const Vector& z) -> Vector {
    const Vector mz = M * z;
    return z.cwiseProduct(mz) - 0.5 * M.diagonal().cwiseProduct(z.cwiseProduct(z));
  };
  return make_dual_system(M.rows(), grad, val, theta, M.norm());
}

}  // namespace nashflow
