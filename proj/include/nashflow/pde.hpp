#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "nashflow/audit.hpp"
#include "nashflow/error.hpp"
#include "nashflow/flow.hpp"
#include "nashflow/game.hpp"
#include "nashflow/grid.hpp"
#include "nashflow/legendre.hpp"
#include "nashflow/rng.hpp"

namespace nashflow {

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

/// Convex kernel H: R^dim -> R acting on the discrete gradient of one player.
/// `lower` and `upper` bound the monotonicity ratio of grad H on the sampled region.
struct Kernel {
  std::string name;
  int dim = 1;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> grad;
  double lower = 1.0;
  double upper = 1.0;
  /// Radius of the region the bounds were validated on; infinite means global.
  double radius = std::numeric_limits<double>::infinity();
};

/// Pointwise coupling z in R^N -> (dF_1/dz_1, ..., dF_N/dz_N), with optional values.
struct Coupling {
  std::string name;
  std::size_t players = 1;
  VectorField grad;
  VectorField values;
  /// Sampled coercivity lower bound; zero for merely monotone couplings.
  double theta = 0.0;
  /// Lipschitz bound of grad.
  double upper = 0.0;
};

/// Gradient-coupled Lagrangians L_j(p_1, ..., p_N) with p_k in R^dim.
/// P is N x dim; grad(j, P) returns the gradient with respect to row j.
struct Lagrangian {
  std::string name;
  std::size_t players = 1;
  int dim = 1;
  std::function<double(std::size_t, const Matrix&)> value;
  std::function<Vector(std::size_t, const Matrix&)> grad;
  double theta = 1.0;
  double upper = 1.0;
};

/// Per-player kernels, one coupling, and per-player sources on the grid.
struct CouplingSpec {
  std::vector<Kernel> kernels;
  Coupling coupling;
  std::vector<Vector> sources;
};

namespace detail {

inline void validate_kernel(const Kernel& k, int samples = 128, std::uint64_t seed = 0xc0ffee) {
  if (!(k.lower > 0.0) || !(k.upper >= k.lower))
    throw InvalidArgument("kernel " + k.name + ": need 0 < lower <= upper");
  Xorshift64Star rng(seed);
  const double scale = std::isfinite(k.radius) ? k.radius : 3.0;
  auto draw = [&]() {
    Vector p = rng.normal_vector(k.dim);
    if (std::isfinite(k.radius)) {
      const double np = p.norm();
      if (np > 0.0) p *= k.radius * std::pow(rng.uniform(), 1.0 / k.dim) / np;
      return p;
    }
    return Vector(scale * p);
  };
  for (int i = 0; i < samples; ++i) {
    const Vector p = draw();
    const Vector q = draw();
    const double d2 = (p - q).squaredNorm();
    if (!(d2 > 0.0)) continue;
    const double ratio = (k.grad(p) - k.grad(q)).dot(p - q) / d2;
    if (ratio < k.lower - 1e-9 || ratio > k.upper + 1e-9)
      throw InvalidArgument("kernel " + k.name + ": sampled monotonicity ratio " + std::to_string(ratio) +
                            " outside [" + std::to_string(k.lower) + ", " + std::to_string(k.upper) + "]");
  }
}

inline void validate_coupling(const Coupling& c, int samples = 128, std::uint64_t seed = 0xc0de) {
  if (c.players < 1) throw InvalidArgument("coupling " + c.name + ": need at least one player");
  const auto n = static_cast<Eigen::Index>(c.players);
  Xorshift64Star rng(seed);
  for (int i = 0; i < samples; ++i) {
    const Vector z = 3.0 * rng.normal_vector(n);
    const Vector w = 3.0 * rng.normal_vector(n);
    const double d2 = (z - w).squaredNorm();
    const double pairing = (c.grad(z) - c.grad(w)).dot(z - w);
    if (pairing < -1e-12 * std::max(1.0, d2))
      throw InvalidArgument("coupling " + c.name + ": sampled pairing " + std::to_string(pairing) + " is negative");
    if (c.theta > 0.0 && d2 > 0.0 && pairing / d2 < c.theta - 1e-9)
      throw InvalidArgument("coupling " + c.name + ": sampled coercivity below declared theta");
  }
}

inline void validate_lagrangian(const Lagrangian& L, int samples = 128, std::uint64_t seed = 0x1a9) {
  const auto N = static_cast<Eigen::Index>(L.players);
  Xorshift64Star rng(seed);
  for (int i = 0; i < samples; ++i) {
    Matrix P(N, L.dim), Q(N, L.dim);
    for (Eigen::Index r = 0; r < N; ++r) {
      P.row(r) = 3.0 * rng.normal_vector(L.dim).transpose();
      Q.row(r) = 3.0 * rng.normal_vector(L.dim).transpose();
    }
    double pairing = 0.0;
    for (std::size_t j = 0; j < L.players; ++j) {
      const auto r = static_cast<Eigen::Index>(j);
      pairing += (L.grad(j, P) - L.grad(j, Q)).dot((P.row(r) - Q.row(r)).transpose());
    }
    const double d2 = (P - Q).squaredNorm();
    if (d2 > 0.0 && pairing / d2 < L.theta - 1e-9)
      throw InvalidArgument("lagrangian " + L.name + ": sampled joint monotonicity ratio " +
                            std::to_string(pairing / d2) + " below theta " + std::to_string(L.theta));
  }
}

inline double min_sym_eigenvalue(const Matrix& M) {
  const Matrix S = 0.5 * (M + M.transpose());
  return Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

inline double max_sym_eigenvalue(const Matrix& M) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(M, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

}  // namespace detail

// Kernel families.

/// H(p) = |p|^2 / 2.
inline Kernel quadratic_kernel(int dim) {
  Kernel k;
  k.name = "quadratic";
  k.dim = dim;
  k.value = [](const Vector& p) { return 0.5 * p.squaredNorm(); };
  k.grad = [](const Vector& p) -> Vector { return p; };
  detail::validate_kernel(k);
  return k;
}

/// H(p) = |p|^2 / 2 + delta |p|^4 / 4, validated for |p| <= radius.
inline Kernel quartic_kernel(int dim, double delta, double radius = 10.0) {
  if (!(delta >= 0.0)) throw InvalidArgument("quartic kernel: delta must be nonnegative");
  if (!(radius > 0.0)) throw InvalidArgument("quartic kernel: radius must be positive");
  Kernel k;
  k.name = "quartic";
  k.dim = dim;
  k.value = [delta](const Vector& p) {
    const double s = p.squaredNorm();
    return 0.5 * s + 0.25 * delta * s * s;
  };
  k.grad = [delta](const Vector& p) -> Vector { return (1.0 + delta * p.squaredNorm()) * p; };
  k.lower = 1.0;
  k.upper = 1.0 + 3.0 * delta * radius * radius;
  k.radius = radius;
  detail::validate_kernel(k);
  return k;
}

/// H(p) = p'Ap / 2 with A symmetric positive definite.
inline Kernel anisotropic_kernel(const Matrix& A) {
  if (A.rows() != A.cols()) throw DimensionError("anisotropic kernel: A must be square");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InvalidArgument("anisotropic kernel: A must be symmetric");
  Kernel k;
  k.name = "anisotropic";
  k.dim = static_cast<int>(A.rows());
  k.value = [A](const Vector& p) { return 0.5 * p.dot(A * p); };
  k.grad = [A](const Vector& p) -> Vector { return A * p; };
  k.lower = detail::min_sym_eigenvalue(A);
  k.upper = detail::max_sym_eigenvalue(A);
  if (!(k.lower > 0.0)) throw InvalidArgument("anisotropic kernel: A must be positive definite");
  detail::validate_kernel(k);
  return k;
}

// Coupling families.

inline Coupling no_coupling(std::size_t players) {
  Coupling c;
  c.name = "none";
  c.players = players;
  const auto n = static_cast<Eigen::Index>(players);
  c.grad = [n](const Vector&) -> Vector { return Vector::Zero(n); };
  c.values = [n](const Vector&) -> Vector { return Vector::Zero(n); };
  detail::validate_coupling(c);
  return c;
}

/// dF_j/dz_j = (M z)_j, F_j(z) = z_j (M z)_j - M_jj z_j^2 / 2.
inline Coupling linear_coupling(const Matrix& M, std::string name = "linear") {
  if (M.rows() != M.cols() || M.rows() < 1) throw DimensionError("linear coupling: M must be square");
  if (!M.allFinite()) throw InvalidArgument("linear coupling: M must be finite");
  Coupling c;
  c.name = std::move(name);
  c.players = static_cast<std::size_t>(M.rows());
  c.grad = [M](const Vector& z) -> Vector { return M * z; };
  c.values = [M](const Vector& z) -> Vector {
    return z.cwiseProduct(M * z) - 0.5 * M.diagonal().cwiseProduct(z.cwiseProduct(z));
  };
  c.theta = std::max(0.0, detail::min_sym_eigenvalue(M));
  c.upper = M.operatorNorm();
  detail::validate_coupling(c);
  return c;
}

/// Two players with F_1 = z_1^2/2 + a z_1 z_2 and F_2 = z_2^2/2 - a z_1 z_2.
inline Coupling skew_pair_coupling(double a) {
  Matrix M(2, 2);
  M << 1.0, a, -a, 1.0;
  return linear_coupling(M, "skew");
}

/// dF_j/dz_j = (M z)_j + c tanh(z_j), F_j adds c log cosh(z_j).
inline Coupling tanh_coupling(const Matrix& M, double c) {
  if (!(c >= 0.0)) throw InvalidArgument("tanh coupling: c must be nonnegative");
  Coupling base = linear_coupling(M);
  Coupling out;
  out.name = "tanh";
  out.players = base.players;
  out.grad = [M, c](const Vector& z) -> Vector { return M * z + c * z.array().tanh().matrix(); };
  out.values = [M, c](const Vector& z) -> Vector {
    Vector v = z.cwiseProduct(M * z) - 0.5 * M.diagonal().cwiseProduct(z.cwiseProduct(z));
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double a = std::abs(z[i]);
      v[i] += c * (a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0));
    }
    return v;
  };
  out.theta = base.theta;
  out.upper = base.upper + c;
  detail::validate_coupling(out);
  return out;
}

/// The coupling viewed as the input of the dual map; needs theta > 0.
inline DualSystem dual_system(const Coupling& c) {
  if (!(c.theta > 0.0)) throw InvalidArgument("coupling " + c.name + " is not coercive; dual map undefined");
  return make_dual_system(static_cast<Eigen::Index>(c.players), c.grad, c.values, c.theta, c.upper);
}

// Lagrangian families.

/// L_j(p) = |p_j|^2 / 2.
inline Lagrangian decoupled_lagrangian(std::size_t players, int dim) {
  Lagrangian L;
  L.name = "decoupled";
  L.players = players;
  L.dim = dim;
  L.value = [](std::size_t j, const Matrix& P) { return 0.5 * P.row(static_cast<Eigen::Index>(j)).squaredNorm(); };
  L.grad = [](std::size_t j, const Matrix& P) -> Vector { return P.row(static_cast<Eigen::Index>(j)).transpose(); };
  detail::validate_lagrangian(L);
  return L;
}

/// L_j(p) = |p_j|^2 / 2 + eps p_j . p_{j+1 mod N}.
inline Lagrangian skew_lagrangian(std::size_t players, int dim, double eps) {
  if (players < 1) throw InvalidArgument("skew lagrangian: need at least one player");
  Lagrangian L;
  L.name = "skew";
  L.players = players;
  L.dim = dim;
  const auto N = static_cast<Eigen::Index>(players);
  L.value = [N, eps](std::size_t j, const Matrix& P) {
    const auto r = static_cast<Eigen::Index>(j);
    return 0.5 * P.row(r).squaredNorm() + eps * P.row(r).dot(P.row((r + 1) % N));
  };
  L.grad = [N, eps](std::size_t j, const Matrix& P) -> Vector {
    const auto r = static_cast<Eigen::Index>(j);
    if (N == 1) return (1.0 + 2.0 * eps) * P.row(r).transpose();
    return (P.row(r) + eps * P.row((r + 1) % N)).transpose();
  };
  // Joint operator is I + eps S with S the cyclic shift; its symmetric part has
  // eigenvalues 1 + eps cos(2 pi k / N) >= 1 - |eps|.
  L.theta = N == 1 ? 1.0 + 2.0 * eps : 1.0 - std::abs(eps);
  L.upper = N == 1 ? 1.0 + 2.0 * eps : 1.0 + std::abs(eps);
  if (!(L.theta > 0.0)) throw InvalidArgument("skew lagrangian: |eps| too large for monotonicity");
  detail::validate_lagrangian(L);
  return L;
}

/// L_j(p) = p_j' A_j p_j / 2 with A_j symmetric positive definite.
inline Lagrangian anisotropic_lagrangian(std::vector<Matrix> A) {
  if (A.empty()) throw InvalidArgument("anisotropic lagrangian: need at least one player");
  Lagrangian L;
  L.name = "anisotropic";
  L.players = A.size();
  L.dim = static_cast<int>(A[0].rows());
  L.theta = std::numeric_limits<double>::infinity();
  L.upper = 0.0;
  for (const Matrix& a : A) {
    if (a.rows() != L.dim || a.cols() != L.dim) throw DimensionError("anisotropic lagrangian: block shape mismatch");
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw InvalidArgument("anisotropic lagrangian: blocks must be symmetric");
    L.theta = std::min(L.theta, detail::min_sym_eigenvalue(a));
    L.upper = std::max(L.upper, detail::max_sym_eigenvalue(a));
  }
  if (!(L.theta > 0.0)) throw InvalidArgument("anisotropic lagrangian: blocks must be positive definite");
  auto shared = std::make_shared<const std::vector<Matrix>>(std::move(A));
  L.value = [shared](std::size_t j, const Matrix& P) {
    const Vector p = P.row(static_cast<Eigen::Index>(j)).transpose();
    return 0.5 * p.dot((*shared)[j] * p);
  };
  L.grad = [shared](std::size_t j, const Matrix& P) -> Vector {
    return (*shared)[j] * P.row(static_cast<Eigen::Index>(j)).transpose();
  };
  detail::validate_lagrangian(L);
  return L;
}

// ---------------------------------------------------------------------------
// Grid functions of N players
// ---------------------------------------------------------------------------

enum class GridNorm { L2, H1Semi, HMinus1 };

inline const char* to_string(GridNorm n) {
  switch (n) {
    case GridNorm::L2: return "L2";
    case GridNorm::H1Semi: return "H1semi";
    case GridNorm::HMinus1: return "Hminus1";
  }
  return "?";
}

inline LayoutPtr grid_layout(const Grid& g, std::size_t players) {
  return make_layout(std::vector<std::size_t>(players, static_cast<std::size_t>(g.size())));
}

/// Stacks per-player grid functions into one profile vector.
inline Vector stack_players(const Grid& g, const std::vector<Vector>& blocks) {
  Vector out(g.size() * static_cast<Eigen::Index>(blocks.size()));
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (blocks[j].size() != g.size()) throw DimensionError("grid function " + std::to_string(j) + " has wrong length");
    out.segment(static_cast<Eigen::Index>(j) * g.size(), g.size()) = blocks[j];
  }
  return out;
}

/// Discrete H^{-1} inner product hx^dim f'(-Lap)^{-1} g of single grid functions.
inline double hminus_inner(const Grid& g, const Vector& f, const Vector& h) {
  return g.weight() * f.dot(g.solve_neg_laplacian(h));
}

/// Norm of a stacked N-player grid function, summed over players.
inline double grid_norm(const Grid& g, const Vector& v, GridNorm norm) {
  const Eigen::Index m = g.size();
  if (m == 0 || v.size() % m != 0) throw DimensionError("grid_norm: length is not a multiple of the grid size");
  double acc = 0.0;
  for (Eigen::Index off = 0; off < v.size(); off += m) {
    const Vector b = v.segment(off, m);
    switch (norm) {
      case GridNorm::L2: acc += b.squaredNorm(); break;
      case GridNorm::H1Semi: acc += -b.dot(g.laplacian(b)); break;
      case GridNorm::HMinus1: acc += b.dot(g.solve_neg_laplacian(b)); break;
    }
  }
  return std::sqrt(std::max(0.0, g.weight() * acc));
}

namespace detail {

/// Applies a blockwise operator to each player's segment.
template <class Op>
Vector per_block(const Grid& g, const Vector& v, Op op) {
  const Eigen::Index m = g.size();
  Vector out(v.size());
  for (Eigen::Index off = 0; off < v.size(); off += m) out.segment(off, m) = op(Vector(v.segment(off, m)));
  return out;
}

/// Evaluates the pointwise coupling gradient at every node.
inline Vector pointwise(const VectorField& f, const Vector& v, Eigen::Index m, std::size_t players) {
  const auto N = static_cast<Eigen::Index>(players);
  Vector out(v.size());
  Vector z(N);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index j = 0; j < N; ++j) z[j] = v[j * m + k];
    const Vector r = f(z);
    if (r.size() != N) throw DimensionError("coupling oracle returned wrong length");
    for (Eigen::Index j = 0; j < N; ++j) out[j * m + k] = r[j];
  }
  return out;
}

inline Vector check_sources(const Grid& g, const std::vector<Vector>& sources, std::size_t players) {
  if (sources.empty()) return Vector::Zero(g.size() * static_cast<Eigen::Index>(players));
  if (sources.size() != players) throw DimensionError("expected one source per player");
  Vector s = stack_players(g, sources);
  if (!s.allFinite()) throw InvalidArgument("sources must be finite");
  return s;
}

inline GameProblem grid_problem(std::string name, const Grid& g, std::size_t players) {
  GameProblem p;
  p.name = std::move(name);
  p.sets.assign(players, ConvexSet::whole_space(g.size()));
  return p;
}

/// Attaches a per-player gradient oracle that slices the stacked field.
inline void slice_grad(GameProblem& p) {
  auto field = p.field;
  p.grad = [field](std::size_t j, const GamePoint& x) -> Vector {
    const Vector g = field(x);
    return g.segment(static_cast<Eigen::Index>(x.layout().offset(j)), static_cast<Eigen::Index>(x.layout().size(j)));
  };
}

}  // namespace detail

/// Metadata kept alongside a discretized game for default steps and rate fits.
struct PdeGame {
  GameProblem problem;
  Grid grid;
  std::size_t players = 1;
  GridNorm norm = GridNorm::L2;
  /// Largest Lipschitz-type constant of the pointwise nonlinearity (kernel or coupling).
  double upper = 1.0;

  /// Explicit step 0.4 hx^2 / (2 dim upper).
  [[nodiscard]] double default_step() const {
    const double hx = grid.spacing();
    return 0.4 * hx * hx / (2.0 * grid.dim() * upper);
  }
  [[nodiscard]] LayoutPtr layout() const { return grid_layout(grid, players); }
  [[nodiscard]] GamePoint point(Vector v) const { return GamePoint(std::move(v), layout()); }
  [[nodiscard]] double distance(const Vector& a, const Vector& b) const { return grid_norm(grid, a - b, norm); }
};

/// Player j minimizes sum_cells H_j(D v_j) + sum_nodes F_j(v) - h_j . v_j; the
/// field is D'(grad H_j(D v_j)) + dF_j/dz_j(v) - h_j.
inline PdeGame discretize_l2_game(const Grid& g, const CouplingSpec& spec) {
  const std::size_t N = spec.kernels.size();
  if (N == 0) throw InvalidArgument("discretize_l2_game: need at least one kernel");
  if (spec.coupling.players != N) throw DimensionError("discretize_l2_game: coupling player count mismatch");
  for (const Kernel& k : spec.kernels)
    if (k.dim != g.dim()) throw DimensionError("discretize_l2_game: kernel dimension differs from grid dimension");
  detail::validate_coupling(spec.coupling);
  const Vector src = detail::check_sources(g, spec.sources, N);
  const Eigen::Index m = g.size();
  auto kernels = std::make_shared<const std::vector<Kernel>>(spec.kernels);
  const Coupling coupling = spec.coupling;

  GameProblem p = detail::grid_problem("l2:" + spec.kernels[0].name + "+" + coupling.name, g, N);
  p.field = [g, kernels, coupling, src, m, N](const GamePoint& x) -> Vector {
    const Vector& v = x.data();
    Vector out = detail::pointwise(coupling.grad, v, m, N) - src;
    for (std::size_t j = 0; j < N; ++j) {
      const Matrix P = g.gradient(v.segment(static_cast<Eigen::Index>(j) * m, m));
      Matrix W(P.rows(), P.cols());
      for (Eigen::Index c = 0; c < P.rows(); ++c) W.row(c) = (*kernels)[j].grad(P.row(c).transpose()).transpose();
      out.segment(static_cast<Eigen::Index>(j) * m, m) += g.gradient_adjoint(W);
    }
    return out;
  };
  detail::slice_grad(p);
  if (coupling.values && std::all_of(kernels->begin(), kernels->end(), [](const Kernel& k) { return bool(k.value); })) {
    p.value = [g, kernels, coupling, src, m, N](std::size_t j, const GamePoint& x) {
      const Vector& v = x.data();
      const Eigen::Index off = static_cast<Eigen::Index>(j) * m;
      const Matrix P = g.gradient(v.segment(off, m));
      double acc = 0.0;
      for (Eigen::Index c = 0; c < P.rows(); ++c) acc += (*kernels)[j].value(P.row(c).transpose());
      Vector z(static_cast<Eigen::Index>(N));
      for (Eigen::Index k = 0; k < m; ++k) {
        for (std::size_t i = 0; i < N; ++i) z[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(i) * m + k];
        acc += coupling.values(z)[static_cast<Eigen::Index>(j)];
      }
      return acc - src.segment(off, m).dot(v.segment(off, m));
    };
  }
  double kup = 0.0, klo = std::numeric_limits<double>::infinity();
  for (const Kernel& k : *kernels) {
    kup = std::max(kup, k.upper);
    klo = std::min(klo, k.lower);
  }
  p.lipschitz = g.lambda_max() * kup + coupling.upper;
  p.theta = g.lambda1() * klo + coupling.theta;
  PdeGame out{std::move(p), g, N, GridNorm::L2, kup + coupling.upper * g.spacing() * g.spacing() / (4.0 * g.dim())};
  return out;
}

/// Player j's field is D'(grad_{p_j} L_j(D v_1, ..., D v_N)) - h_j.
inline PdeGame discretize_gradient_coupled_game(const Grid& g, const Lagrangian& lag, const std::vector<Vector>& sources) {
  const std::size_t N = lag.players;
  if (N == 0) throw InvalidArgument("discretize_gradient_coupled_game: need at least one player");
  if (lag.dim != g.dim()) throw DimensionError("discretize_gradient_coupled_game: lagrangian dimension differs from grid");
  detail::validate_lagrangian(lag);
  const Vector src = detail::check_sources(g, sources, N);
  const Eigen::Index m = g.size();
  const auto Ni = static_cast<Eigen::Index>(N);

  auto gradients = [g, m, Ni](const Vector& v) {
    std::vector<Matrix> D;
    D.reserve(static_cast<std::size_t>(Ni));
    for (Eigen::Index j = 0; j < Ni; ++j) D.push_back(g.gradient(v.segment(j * m, m)));
    return D;
  };
  auto cell = [Ni, dim = g.dim()](const std::vector<Matrix>& D, Eigen::Index c) {
    Matrix P(Ni, dim);
    for (Eigen::Index j = 0; j < Ni; ++j) P.row(j) = D[static_cast<std::size_t>(j)].row(c);
    return P;
  };

  GameProblem p = detail::grid_problem("gradcoupled:" + lag.name, g, N);
  p.field = [g, lag, src, m, Ni, gradients, cell](const GamePoint& x) -> Vector {
    const std::vector<Matrix> D = gradients(x.data());
    std::vector<Matrix> W(static_cast<std::size_t>(Ni), Matrix(g.cells(), g.dim()));
    for (Eigen::Index c = 0; c < g.cells(); ++c) {
      const Matrix P = cell(D, c);
      for (Eigen::Index j = 0; j < Ni; ++j)
        W[static_cast<std::size_t>(j)].row(c) = lag.grad(static_cast<std::size_t>(j), P).transpose();
    }
    Vector out(x.size());
    for (Eigen::Index j = 0; j < Ni; ++j) out.segment(j * m, m) = g.gradient_adjoint(W[static_cast<std::size_t>(j)]);
    return out - src;
  };
  detail::slice_grad(p);
  if (lag.value) {
    p.value = [g, lag, src, m, gradients, cell](std::size_t j, const GamePoint& x) {
      const std::vector<Matrix> D = gradients(x.data());
      double acc = 0.0;
      for (Eigen::Index c = 0; c < g.cells(); ++c) acc += lag.value(j, cell(D, c));
      const Eigen::Index off = static_cast<Eigen::Index>(j) * m;
      return acc - src.segment(off, m).dot(x.data().segment(off, m));
    };
  }
  p.lipschitz = g.lambda_max() * lag.upper;
  p.theta = g.lambda1() * lag.theta;
  return PdeGame{std::move(p), g, N, GridNorm::L2, lag.upper};
}

/// Field -Lap_h(dF_j/dz_j(u)) - h_j, monotone in the discrete H^{-1} inner product.
/// Equilibria solve -Lap_h(dF_j/dz_j(v)) = h_j.
inline PdeGame discretize_hminus_game(const Grid& g, const Coupling& coupling, const std::vector<Vector>& sources) {
  const std::size_t N = coupling.players;
  detail::validate_coupling(coupling);
  if (!(coupling.theta > 0.0)) throw InvalidArgument("discretize_hminus_game: coupling must be coercive");
  if (coupling.grad(Vector::Zero(static_cast<Eigen::Index>(N))).lpNorm<Eigen::Infinity>() > 1e-12)
    throw InvalidArgument("discretize_hminus_game: coupling gradient must vanish at 0");
  const Vector src = detail::check_sources(g, sources, N);
  const Eigen::Index m = g.size();

  GameProblem p = detail::grid_problem("hminus:" + coupling.name, g, N);
  p.field = [g, coupling, src, m, N](const GamePoint& x) -> Vector {
    const Vector q = detail::pointwise(coupling.grad, x.data(), m, N);
    return detail::per_block(g, q, [&g](const Vector& b) { return Vector(-g.laplacian(b)); }) - src;
  };
  detail::slice_grad(p);
  p.metric = [g](const Vector& v) { return detail::per_block(g, v, [&g](const Vector& b) { return g.solve_neg_laplacian(b); }); };
  p.lipschitz = g.lambda_max() * coupling.upper;
  p.theta = coupling.theta;
  return PdeGame{std::move(p), g, N, GridNorm::HMinus1, coupling.upper};
}

/// Field -dF_j/dz_j(Lap_h u) - h_j, monotone in the discrete H^1_0 inner product.
/// Equilibria solve -dF_j/dz_j(Lap_h v) = h_j.
inline PdeGame discretize_h1_game(const Grid& g, const Coupling& coupling, const std::vector<Vector>& sources) {
  const std::size_t N = coupling.players;
  detail::validate_coupling(coupling);
  if (!(coupling.theta > 0.0)) throw InvalidArgument("discretize_h1_game: coupling must be coercive");
  if (coupling.grad(Vector::Zero(static_cast<Eigen::Index>(N))).lpNorm<Eigen::Infinity>() > 1e-12)
    throw InvalidArgument("discretize_h1_game: coupling gradient must vanish at 0");
  const Vector src = detail::check_sources(g, sources, N);
  const Eigen::Index m = g.size();

  GameProblem p = detail::grid_problem("h1:" + coupling.name, g, N);
  p.field = [g, coupling, src, m, N](const GamePoint& x) -> Vector {
    const Vector lap = detail::per_block(g, x.data(), [&g](const Vector& b) { return g.laplacian(b); });
    return -detail::pointwise(coupling.grad, lap, m, N) - src;
  };
  detail::slice_grad(p);
  p.metric = [g](const Vector& v) { return detail::per_block(g, v, [&g](const Vector& b) { return Vector(-g.laplacian(b)); }); };
  p.lipschitz = g.lambda_max() * coupling.upper;
  p.theta = coupling.theta;
  return PdeGame{std::move(p), g, N, GridNorm::H1Semi, coupling.upper};
}

// ---------------------------------------------------------------------------
// Equilibrium constructions
// ---------------------------------------------------------------------------

namespace detail {

inline Vector pointwise_dual(const DualSystem& sys, const Vector& w, Eigen::Index m) {
  const auto N = sys.n;
  Vector out(w.size());
  Vector y(N);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index j = 0; j < N; ++j) y[j] = w[j * m + k];
    const Vector z = dual_gradient(sys, y);
    for (Eigen::Index j = 0; j < N; ++j) out[j * m + k] = z[j];
  }
  return out;
}

}  // namespace detail

/// Equilibrium of the H^{-1} game: w_j = (-Lap_h)^{-1} h_j, then v = dG/dy(w) pointwise.
inline Vector hminus_equilibrium(const Grid& g, const DualSystem& sys, const std::vector<Vector>& sources) {
  const Vector src = detail::check_sources(g, sources, static_cast<std::size_t>(sys.n));
  const Vector w = detail::per_block(g, src, [&g](const Vector& b) { return g.solve_neg_laplacian(b); });
  return detail::pointwise_dual(sys, w, g.size());
}

/// Equilibrium of the H^1_0 game: q = dG/dy(-h) pointwise, then v_j = (-Lap_h)^{-1}(-q_j).
inline Vector h1_equilibrium(const Grid& g, const DualSystem& sys, const std::vector<Vector>& sources) {
  const Vector src = detail::check_sources(g, sources, static_cast<std::size_t>(sys.n));
  const Vector q = detail::pointwise_dual(sys, -src, g.size());
  return detail::per_block(g, q, [&g](const Vector& b) { return g.solve_neg_laplacian(-b); });
}

// ---------------------------------------------------------------------------
// Verification tools
// ---------------------------------------------------------------------------

/// Damped Newton on G(x) = 0 with a finite-difference Jacobian; stops at
/// ||G||_inf <= 1e-10.
inline GamePoint discrete_nash_oracle(const GameProblem& p, const GamePoint& x0, int max_iters = 100) {
  GamePoint x = x0;
  Vector G = stacked_gradient(p, x);
  for (int it = 0; it < max_iters; ++it) {
    if (G.lpNorm<Eigen::Infinity>() <= 1e-10) return x;
    const Matrix J = finite_difference_jacobian(p, x);
    const Vector dx = J.partialPivLu().solve(-G);
    if (!dx.allFinite()) break;
    const double gn = G.norm();
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30; ++k, lambda *= 0.5) {
      GamePoint xc = x.rebind(x.data() + lambda * dx);
      Vector Gc = stacked_gradient(p, xc);
      if (Gc.norm() < (1.0 - 1e-4 * lambda) * gn || Gc.lpNorm<Eigen::Infinity>() <= 1e-10) {
        x = std::move(xc);
        G = std::move(Gc);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (G.lpNorm<Eigen::Infinity>() <= 1e-10) return x;
  throw ConvergenceError("discrete_nash_oracle: Newton did not reach ||G|| <= 1e-10", G.lpNorm<Eigen::Infinity>());
}

/// Decay rate -slope of log distance(u(t), target) against t, least squares
/// over records in the final half of the trajectory.
inline double fit_decay_rate(const FlowTrajectory& traj, const Vector& target, const Grid& g, GridNorm norm) {
  if (traj.records() == 0) throw InvalidArgument("fit_decay_rate: empty trajectory");
  const double t_half = 0.5 * traj.t_last();
  const double floor = 1e2 * std::numeric_limits<double>::epsilon();
  std::vector<double> ts, ls;
  for (std::size_t i = 0; i < traj.records(); ++i) {
    if (traj.times[i] < t_half) continue;
    const double d = grid_norm(g, traj.states[i] - target, norm);
    if (!(d > floor) || !std::isfinite(d)) continue;
    ts.push_back(traj.times[i]);
    ls.push_back(std::log(d));
  }
  if (ts.size() < 4)
    throw InvalidArgument("fit_decay_rate: only " + std::to_string(ts.size()) + " usable samples, need 4");
  const auto n = static_cast<double>(ts.size());
  double mt = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i];
    ml += ls[i];
  }
  mt /= n;
  ml /= n;
  double stt = 0.0, stl = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    stt += (ts[i] - mt) * (ts[i] - mt);
    stl += (ts[i] - mt) * (ls[i] - ml);
  }
  if (!(stt > 0.0)) throw InvalidArgument("fit_decay_rate: samples span no time");
  return -stl / stt;
}

}  // namespace nashflow
