#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "nashflow/audit.hpp"
#include "nashflow/game.hpp"
#include "nashflow/rng.hpp"

namespace nashflow {

// ---------------------------------------------------------------------------
// Two-player examples with closed-form flows
// ---------------------------------------------------------------------------

/// f1 = x1 x2, f2 = -x1 x2 on [-1, 1]^2. Gradient field (x2, -x1) is skew, so
/// the monotonicity pairing vanishes identically. Unique equilibrium (0, 0).
/// Inside the unit disk the flow is a rigid rotation.
inline GameProblem rotation_game() {
  GameProblem p;
  p.name = "rotation";
  p.sets = {ConvexSet::box(1, -1.0, 1.0), ConvexSet::box(1, -1.0, 1.0)};
  p.grad = [](std::size_t j, const GamePoint& x) -> Vector {
    const Vector& v = x.data();
    return Vector::Constant(1, j == 0 ? v[1] : -v[0]);
  };
  p.value = [](std::size_t j, const GamePoint& x) {
    const Vector& v = x.data();
    return j == 0 ? v[0] * v[1] : -v[0] * v[1];
  };
  p.field = [](const GamePoint& x) -> Vector {
    const Vector& v = x.data();
    return Vector{{v[1], -v[0]}};
  };
  p.jacobian = [](const GamePoint&) -> Matrix { return Matrix{{0.0, 1.0}, {-1.0, 0.0}}; };
  p.lipschitz = 1.0;
  p.theta = 0.0;
  p.reference.equilibrium = Vector::Zero(2);
  p.reference.closed_form = [](double t, const Vector& u0) -> Vector {
    const double c = std::cos(t);
    const double s = std::sin(t);
    return Vector{{u0[0] * c - u0[1] * s, u0[1] * c + u0[0] * s}};
  };
  p.reference.closed_form_valid = [](const Vector& u0) { return u0.squaredNorm() <= 1.0; };
  return p;
}

/// f1 = x1^2/2 - x1 x2 - x1, f2 = x2^2/2 + x1 x2 - 2 x2 on R^2. Symmetric part
/// of the Jacobian is the identity (theta = 1). Unique equilibrium (3/2, 1/2).
inline GameProblem quadratic_two_player() {
  GameProblem p;
  p.name = "quadratic2";
  p.sets = {ConvexSet::whole_space(1), ConvexSet::whole_space(1)};
  p.grad = [](std::size_t j, const GamePoint& x) -> Vector {
    const Vector& v = x.data();
    return Vector::Constant(1, j == 0 ? v[0] - v[1] - 1.0 : v[1] + v[0] - 2.0);
  };
  p.value = [](std::size_t j, const GamePoint& x) {
    const Vector& v = x.data();
    return j == 0 ? 0.5 * v[0] * v[0] - v[0] * v[1] - v[0] : 0.5 * v[1] * v[1] + v[0] * v[1] - 2.0 * v[1];
  };
  p.field = [](const GamePoint& x) -> Vector {
    const Vector& v = x.data();
    return Vector{{v[0] - v[1] - 1.0, v[1] + v[0] - 2.0}};
  };
  p.jacobian = [](const GamePoint&) -> Matrix { return Matrix{{1.0, -1.0}, {1.0, 1.0}}; };
  p.lipschitz = std::sqrt(2.0);
  p.theta = 1.0;
  p.reference.equilibrium = Vector{{1.5, 0.5}};
  p.reference.closed_form = [](double t, const Vector& u0) -> Vector {
    const double e = std::exp(-t);
    const double c = std::cos(t);
    const double s = std::sin(t);
    return Vector{{1.5 + (u0[0] - 1.5) * e * c + (u0[1] - 0.5) * e * s,
                   0.5 + (u0[1] - 0.5) * e * c + (1.5 - u0[0]) * e * s}};
  };
  p.reference.closed_form_valid = [](const Vector&) { return true; };
  return p;
}

/// A problem paired with a named starting point.
struct Scenario {
  GameProblem problem;
  GamePoint x0;
};

/// Rotation game started at (0.8, -0.9), outside the unit disk. The orbit
/// meets the face x1 = 1, slides up it to (1, 0), then stays on the unit circle.
inline Scenario boundary_sliding_scenario() {
  GameProblem p = rotation_game();
  GamePoint x0(Vector{{0.8, -0.9}}, p.layout());
  return Scenario{std::move(p), std::move(x0)};
}

// ---------------------------------------------------------------------------
// N-linear games
// ---------------------------------------------------------------------------

/// Games where every f_j is multilinear in (x_1, ..., x_N), stored as one
/// coefficient tensor per player (row-major over the block dimensions).
class NLinearGame {
 public:
  NLinearGame(std::vector<std::size_t> dims, std::vector<std::vector<double>> tensors, std::vector<ConvexSet> sets)
      : dims_(std::move(dims)), tensors_(std::move(tensors)), sets_(std::move(sets)) {
    const std::size_t N = dims_.size();
    if (N == 0) throw InvalidArgument("NLinearGame: no players");
    if (tensors_.size() != N || sets_.size() != N) throw DimensionError("NLinearGame: need one tensor and set per player");
    std::size_t total = 1;
    for (std::size_t d : dims_) {
      if (d == 0) throw InvalidArgument("NLinearGame: empty strategy block");
      total *= d;
    }
    for (std::size_t j = 0; j < N; ++j) {
      if (tensors_[j].size() != total) throw DimensionError("NLinearGame: tensor " + std::to_string(j) + " has wrong size");
      for (double c : tensors_[j])
        if (!std::isfinite(c)) throw InvalidArgument("NLinearGame: non-finite payoff entry for player " + std::to_string(j));
      if (static_cast<std::size_t>(sets_[j].dim()) != dims_[j]) throw DimensionError("NLinearGame: set dimension mismatch");
    }
    layout_ = make_layout(dims_);
  }

  [[nodiscard]] std::size_t players() const noexcept { return dims_.size(); }
  [[nodiscard]] const LayoutPtr& layout() const noexcept { return layout_; }
  [[nodiscard]] const std::vector<ConvexSet>& sets() const noexcept { return sets_; }

  [[nodiscard]] double value(std::size_t j, const Vector& x) const {
    double total = 0.0;
    for_each_index([&](const std::vector<std::size_t>& idx, std::size_t flat) {
      double prod = tensors_[j][flat];
      for (std::size_t k = 0; k < dims_.size(); ++k) prod *= x[offset(k, idx[k])];
      total += prod;
    });
    return total;
  }

  [[nodiscard]] Vector gradient(std::size_t j, const Vector& x) const {
    Vector g = Vector::Zero(static_cast<Eigen::Index>(dims_[j]));
    for_each_index([&](const std::vector<std::size_t>& idx, std::size_t flat) {
      double prod = tensors_[j][flat];
      for (std::size_t k = 0; k < dims_.size(); ++k)
        if (k != j) prod *= x[offset(k, idx[k])];
      g[static_cast<Eigen::Index>(idx[j])] += prod;
    });
    return g;
  }

  /// sum_j (f_j(x) + f_j(y)) - sum_j (f_j(y_j, x_-j) + f_j(x_j, y_-j)). Nonnegative
  /// for every pair exactly when the game is monotone.
  [[nodiscard]] double cost_condition_gap(const Vector& x, const Vector& y) const {
    double gap = 0.0;
    for (std::size_t j = 0; j < players(); ++j) {
      const auto off = static_cast<Eigen::Index>(layout_->offset(j));
      const auto n = static_cast<Eigen::Index>(dims_[j]);
      Vector yx = x;
      yx.segment(off, n) = y.segment(off, n);
      Vector xy = y;
      xy.segment(off, n) = x.segment(off, n);
      gap += value(j, x) + value(j, y) - value(j, yx) - value(j, xy);
    }
    return gap;
  }

  [[nodiscard]] GameProblem to_problem(std::string name) const {
    auto self = std::make_shared<const NLinearGame>(*this);
    GameProblem p;
    p.name = std::move(name);
    p.sets = sets_;
    p.grad = [self](std::size_t j, const GamePoint& x) { return self->gradient(j, x.data()); };
    p.value = [self](std::size_t j, const GamePoint& x) { return self->value(j, x.data()); };
    p.theta = 0.0;
    return p;
  }

 private:
  [[nodiscard]] Eigen::Index offset(std::size_t k, std::size_t i) const {
    return static_cast<Eigen::Index>(layout_->offset(k) + i);
  }

  template <typename Fn>
  void for_each_index(Fn&& fn) const {
    std::vector<std::size_t> idx(dims_.size(), 0);
    std::size_t flat = 0;
    for (;;) {
      fn(idx, flat);
      ++flat;
      std::size_t k = dims_.size();
      while (k > 0) {
        --k;
        if (++idx[k] < dims_[k]) break;
        idx[k] = 0;
        if (k == 0) return;
      }
    }
  }

  std::vector<std::size_t> dims_;
  std::vector<std::vector<double>> tensors_;
  std::vector<ConvexSet> sets_;
  LayoutPtr layout_;
};

/// Two-player zero-sum matrix game: f1 = x1' M x2, f2 = -x1' M x2 on
/// probability simplices. Checks the monotone cost condition on samples.
inline NLinearGame bilinear_zero_sum(const Matrix& M, int audit_samples = 64) {
  if (M.rows() == 0 || M.cols() == 0) throw DimensionError("bilinear_zero_sum: empty payoff matrix");
  if (!M.allFinite()) throw InvalidArgument("bilinear_zero_sum: non-finite payoff entry");
  const auto m = static_cast<std::size_t>(M.rows());
  const auto n = static_cast<std::size_t>(M.cols());
  std::vector<double> t1(m * n);
  std::vector<double> t2(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      t1[i * n + k] = M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      t2[i * n + k] = -t1[i * n + k];
    }
  NLinearGame game({m, n}, {std::move(t1), std::move(t2)},
                   {ConvexSet::simplex(M.rows()), ConvexSet::simplex(M.cols())});

  Xorshift64Star rng(0x2e50);
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  for (int s = 0; s < audit_samples; ++s) {
    Vector x(static_cast<Eigen::Index>(m + n));
    Vector y(static_cast<Eigen::Index>(m + n));
    x << game.sets()[0].sample(rng), game.sets()[1].sample(rng);
    y << game.sets()[0].sample(rng), game.sets()[1].sample(rng);
    if (game.cost_condition_gap(x, y) < -1e-12 * scale)
      throw InvalidArgument("bilinear_zero_sum: cost condition violated on a sample");
  }
  return game;
}

inline GameProblem zero_sum_problem(const Matrix& M, std::string name = "zerosum") {
  GameProblem p = bilinear_zero_sum(M).to_problem(std::move(name));
  p.lipschitz = Eigen::JacobiSVD<Matrix>(M).singularValues()(0);
  const Matrix Mc = M;
  p.field = [Mc](const GamePoint& x) -> Vector {
    const Vector& v = x.data();
    Vector g(v.size());
    g << Mc * v.tail(Mc.cols()), -Mc.transpose() * v.head(Mc.rows());
    return g;
  };
  return p;
}

/// Matching pennies, M = [[1, -1], [-1, 1]]; unique equilibrium (1/2, 1/2) x (1/2, 1/2).
inline GameProblem matching_pennies() {
  GameProblem p = zero_sum_problem(Matrix{{1.0, -1.0}, {-1.0, 1.0}}, "matching_pennies");
  p.reference.equilibrium = Vector::Constant(4, 0.5);
  return p;
}

/// Rock-paper-scissors with the skew payoff; unique equilibrium uniform x uniform.
inline GameProblem rock_paper_scissors() {
  GameProblem p = zero_sum_problem(Matrix{{0.0, 1.0, -1.0}, {-1.0, 0.0, 1.0}, {1.0, -1.0, 0.0}}, "rps");
  p.reference.equilibrium = Vector::Constant(6, 1.0 / 3.0);
  return p;
}

// ---------------------------------------------------------------------------
// Quadratic matrix games
// ---------------------------------------------------------------------------

/// f_j(x) = sum_{k,l} (1/2) x_k' A^j_{k,l} x_l on R^{N d}, with symmetric
/// d x d blocks and A^j_{k,l} = A^j_{l,k}. Then grad_{x_j} f_j(x) = sum_k A^j_{j,k} x_k
/// and the game is monotone iff the block matrix B with B_{jk} = A^j_{j,k} has
/// positive semidefinite symmetric part. Both conditions are checked here.
class QuadraticMatrixGame {
 public:
  /// blocks[(j * N + k) * N + l] holds A^j_{k,l}.
  QuadraticMatrixGame(std::size_t players, Eigen::Index d, std::vector<Matrix> blocks)
      : n_(players), d_(d), blocks_(std::move(blocks)) {
    if (n_ == 0 || d_ <= 0) throw InvalidArgument("QuadraticMatrixGame: need N >= 1 and d >= 1");
    if (blocks_.size() != n_ * n_ * n_) throw DimensionError("QuadraticMatrixGame: need N^3 blocks");
    double scale = 1.0;
    for (const Matrix& A : blocks_) {
      if (A.rows() != d_ || A.cols() != d_) throw DimensionError("QuadraticMatrixGame: block is not d x d");
      if (!A.allFinite()) throw InvalidArgument("QuadraticMatrixGame: non-finite entry");
      scale = std::max(scale, A.cwiseAbs().maxCoeff());
    }
    const double tol = 1e-12 * scale;
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t k = 0; k < n_; ++k)
        for (std::size_t l = 0; l < n_; ++l) {
          const Matrix& A = block(j, k, l);
          if ((A - A.transpose()).cwiseAbs().maxCoeff() > tol)
            throw InvalidArgument("QuadraticMatrixGame: A^" + label(j, k, l) + " is not symmetric");
          if ((A - block(j, l, k)).cwiseAbs().maxCoeff() > tol)
            throw InvalidArgument("QuadraticMatrixGame: A^" + label(j, k, l) + " != A^" + label(j, l, k));
        }
    B_ = Matrix::Zero(dim(), dim());
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t k = 0; k < n_; ++k)
        B_.block(static_cast<Eigen::Index>(j) * d_, static_cast<Eigen::Index>(k) * d_, d_, d_) = block(j, j, k);
    const Matrix S = 0.5 * (B_ + B_.transpose());
    min_eig_ = Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (min_eig_ < -1e-10 * std::max(1.0, B_.norm()))
      throw InvalidArgument("QuadraticMatrixGame: monotonicity matrix has negative eigenvalue " + std::to_string(min_eig_));
    op_norm_ = Eigen::JacobiSVD<Matrix>(B_).singularValues()(0);
  }

  [[nodiscard]] std::size_t players() const noexcept { return n_; }
  [[nodiscard]] Eigen::Index block_dim() const noexcept { return d_; }
  [[nodiscard]] Eigen::Index dim() const noexcept { return static_cast<Eigen::Index>(n_) * d_; }
  [[nodiscard]] const Matrix& block(std::size_t j, std::size_t k, std::size_t l) const {
    return blocks_.at((j * n_ + k) * n_ + l);
  }
  /// Stacked field Jacobian; block (j, k) is A^j_{j,k}.
  [[nodiscard]] const Matrix& monotonicity_matrix() const noexcept { return B_; }
  /// Smallest eigenvalue of the symmetric part of the monotonicity matrix (theta).
  [[nodiscard]] double min_eigenvalue() const noexcept { return min_eig_; }

  /// sum_{j,k} A^j_{k,j} y_j . y_k
  [[nodiscard]] double quadratic_form(const Vector& y) const {
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t k = 0; k < n_; ++k) s += seg(y, j).dot(block(j, k, j) * seg(y, k));
    return s;
  }

  [[nodiscard]] double value(std::size_t j, const Vector& x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < n_; ++k)
      for (std::size_t l = 0; l < n_; ++l) s += 0.5 * seg(x, k).dot(block(j, k, l) * seg(x, l));
    return s;
  }

  [[nodiscard]] GameProblem to_problem(std::string name = "quadmatrix") const {
    auto self = std::make_shared<const QuadraticMatrixGame>(*this);
    GameProblem p;
    p.name = std::move(name);
    p.sets.assign(n_, ConvexSet::whole_space(d_));
    p.grad = [self](std::size_t j, const GamePoint& x) -> Vector {
      return self->B_.middleRows(static_cast<Eigen::Index>(j) * self->d_, self->d_) * x.data();
    };
    p.value = [self](std::size_t j, const GamePoint& x) { return self->value(j, x.data()); };
    p.field = [self](const GamePoint& x) -> Vector { return self->B_ * x.data(); };
    p.jacobian = [self](const GamePoint&) -> Matrix { return self->B_; };
    p.lipschitz = op_norm_;
    p.theta = std::max(0.0, min_eig_);
    p.reference.equilibrium = Vector::Zero(dim());
    return p;
  }

 private:
  [[nodiscard]] Eigen::VectorBlock<const Vector> seg(const Vector& v, std::size_t j) const { return v.segment(static_cast<Eigen::Index>(j) * d_, d_); }
  static std::string label(std::size_t j, std::size_t k, std::size_t l) {
    return std::to_string(j) + "_{" + std::to_string(k) + "," + std::to_string(l) + "}";
  }

  std::size_t n_;
  Eigen::Index d_;
  std::vector<Matrix> blocks_;
  Matrix B_;
  double min_eig_ = 0.0;
  double op_norm_ = 0.0;
};

inline QuadraticMatrixGame quadratic_matrix_game(std::size_t players, Eigen::Index d, std::vector<Matrix> blocks) {
  return QuadraticMatrixGame(players, d, std::move(blocks));
}

/// Random monotone instance: random symmetric blocks B_{jk}, diagonal blocks
/// shifted so the symmetric part of B has smallest eigenvalue exactly `theta`.
inline QuadraticMatrixGame random_quadratic_matrix_game(Xorshift64Star& rng, std::size_t players, Eigen::Index d,
                                                        double theta) {
  const auto N = static_cast<Eigen::Index>(players);
  Matrix B(N * d, N * d);
  for (Eigen::Index j = 0; j < N; ++j)
    for (Eigen::Index k = 0; k < N; ++k) {
      Matrix W(d, d);
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) W(a, b) = rng.normal();
      B.block(j * d, k * d, d, d) = 0.5 * (W + W.transpose());
    }
  const double lmin =
      Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (B + B.transpose()), Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  B.diagonal().array() += theta - lmin;

  std::vector<Matrix> blocks(players * players * players, Matrix::Zero(d, d));
  auto at = [&](std::size_t j, std::size_t k, std::size_t l) -> Matrix& { return blocks[(j * players + k) * players + l]; };
  for (std::size_t j = 0; j < players; ++j)
    for (std::size_t k = 0; k < players; ++k) {
      const Matrix Bjk = B.block(static_cast<Eigen::Index>(j) * d, static_cast<Eigen::Index>(k) * d, d, d);
      at(j, j, k) = Bjk;
      at(j, k, j) = Bjk;
    }
  return QuadraticMatrixGame(players, d, std::move(blocks));
}

/// Every built-in finite-dimensional problem, in registry order.
inline std::vector<GameProblem> builtin_problems() {
  return {rotation_game(), quadratic_two_player(), matching_pennies(), rock_paper_scissors()};
}

}  // namespace nashflow
