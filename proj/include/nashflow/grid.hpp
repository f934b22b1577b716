#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "nashflow/error.hpp"
#include "nashflow/game_point.hpp"

namespace nashflow {

/// Uniform grid on the unit interval (dim 1) or unit square (dim 2) with n
/// interior points per axis, spacing 1/(n+1), and zero Dirichlet boundary.
///
/// Unknowns live on interior nodes. The discrete gradient D is the forward
/// difference on the (n+1)^dim cells spanned by node (i, j) and its upper
/// neighbours, boundary values taken as zero. Its transpose gives the
/// divergence, and -D'D is the usual 3-point / 5-point Laplacian, so discrete
/// energies built from D are differentiated exactly.
class Grid {
 public:
  Grid(int dim, int n) : dim_(dim), n_(n) {
    if (dim != 1 && dim != 2) throw InvalidArgument("Grid: dim must be 1 or 2");
    if (n < 2) throw InvalidArgument("Grid: need n >= 2 interior points");
    hx_ = 1.0 / static_cast<double>(n + 1);
  }

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] double spacing() const noexcept { return hx_; }
  /// Quadrature weight of one node, hx^dim.
  [[nodiscard]] double weight() const noexcept { return std::pow(hx_, dim_); }
  [[nodiscard]] Eigen::Index size() const noexcept {
    return dim_ == 1 ? n_ : static_cast<Eigen::Index>(n_) * n_;
  }
  [[nodiscard]] Eigen::Index cells() const noexcept {
    return dim_ == 1 ? n_ + 1 : static_cast<Eigen::Index>(n_ + 1) * (n_ + 1);
  }

  /// Coordinates of interior node k.
  [[nodiscard]] std::array<double, 2> coordinates(Eigen::Index k) const {
    if (dim_ == 1) return {static_cast<double>(k + 1) * hx_, 0.0};
    const Eigen::Index i = k % n_;
    const Eigen::Index j = k / n_;
    return {static_cast<double>(i + 1) * hx_, static_cast<double>(j + 1) * hx_};
  }

  /// Forward-difference gradient: one row per cell, one column per axis.
  [[nodiscard]] Matrix gradient(const Vector& v) const {
    check(v);
    Matrix g(cells(), dim_);
    const double inv = 1.0 / hx_;
    if (dim_ == 1) {
      for (int c = 0; c <= n_; ++c) g(c, 0) = (node(v, c + 1) - node(v, c)) * inv;
      return g;
    }
    for (int cj = 0; cj <= n_; ++cj)
      for (int ci = 0; ci <= n_; ++ci) {
        const Eigen::Index c = ci + static_cast<Eigen::Index>(n_ + 1) * cj;
        const double here = node(v, ci, cj);
        g(c, 0) = (node(v, ci + 1, cj) - here) * inv;
        g(c, 1) = (node(v, ci, cj + 1) - here) * inv;
      }
    return g;
  }

  /// D' w, the adjoint of gradient(); equals minus the discrete divergence.
  [[nodiscard]] Vector gradient_adjoint(const Matrix& w) const {
    if (w.rows() != cells() || w.cols() != dim_) throw DimensionError("gradient_adjoint: wrong shape");
    Vector out = Vector::Zero(size());
    const double inv = 1.0 / hx_;
    if (dim_ == 1) {
      for (int c = 0; c <= n_; ++c) {
        add(out, c + 1, w(c, 0) * inv);
        add(out, c, -w(c, 0) * inv);
      }
      return out;
    }
    for (int cj = 0; cj <= n_; ++cj)
      for (int ci = 0; ci <= n_; ++ci) {
        const Eigen::Index c = ci + static_cast<Eigen::Index>(n_ + 1) * cj;
        add(out, ci + 1, cj, w(c, 0) * inv);
        add(out, ci, cj, -w(c, 0) * inv);
        add(out, ci, cj + 1, w(c, 1) * inv);
        add(out, ci, cj, -w(c, 1) * inv);
      }
    return out;
  }

  /// Discrete Laplacian (negative definite), stencil form of -D'D.
  [[nodiscard]] Vector laplacian(const Vector& v) const {
    check(v);
    Vector out(size());
    const double inv2 = 1.0 / (hx_ * hx_);
    if (dim_ == 1) {
      for (int i = 1; i <= n_; ++i) out[i - 1] = (node(v, i - 1) - 2.0 * node(v, i) + node(v, i + 1)) * inv2;
      return out;
    }
    for (int j = 1; j <= n_; ++j)
      for (int i = 1; i <= n_; ++i)
        out[(i - 1) + static_cast<Eigen::Index>(n_) * (j - 1)] =
            (node(v, i - 1, j) + node(v, i + 1, j) + node(v, i, j - 1) + node(v, i, j + 1) - 4.0 * node(v, i, j)) * inv2;
    return out;
  }

  /// Smallest eigenvalue of -Laplacian: dim * (4 / hx^2) sin^2(pi hx / 2).
  [[nodiscard]] double lambda1() const noexcept {
    const double s = std::sin(std::numbers::pi * hx_ / 2.0);
    return static_cast<double>(dim_) * 4.0 / (hx_ * hx_) * s * s;
  }

  /// Largest eigenvalue of -Laplacian: dim * (4 / hx^2) cos^2(pi hx / 2).
  [[nodiscard]] double lambda_max() const noexcept {
    const double c = std::cos(std::numbers::pi * hx_ / 2.0);
    return static_cast<double>(dim_) * 4.0 / (hx_ * hx_) * c * c;
  }

  /// First Dirichlet eigenfunction prod_axis sin(pi x), an exact discrete eigenvector.
  [[nodiscard]] Vector eigenfunction1() const {
    Vector phi(size());
    for (Eigen::Index k = 0; k < size(); ++k) {
      const auto xy = coordinates(k);
      phi[k] = std::sin(std::numbers::pi * xy[0]) * (dim_ == 2 ? std::sin(std::numbers::pi * xy[1]) : 1.0);
    }
    return phi;
  }

  /// (-Laplacian)^{-1} f: Thomas algorithm in 1D, conjugate gradient (relative
  /// tolerance 1e-12) in 2D.
  [[nodiscard]] Vector solve_neg_laplacian(const Vector& f) const {
    check(f);
    return dim_ == 1 ? thomas(f) : conjugate_gradient(f);
  }

 private:
  void check(const Vector& v) const {
    if (v.size() != size())
      throw DimensionError("Grid: expected " + std::to_string(size()) + " values, got " + std::to_string(v.size()));
  }

  // Node value with zero boundary; indices run 0..n+1.
  [[nodiscard]] double node(const Vector& v, int i) const { return (i <= 0 || i > n_) ? 0.0 : v[i - 1]; }
  [[nodiscard]] double node(const Vector& v, int i, int j) const {
    if (i <= 0 || i > n_ || j <= 0 || j > n_) return 0.0;
    return v[(i - 1) + static_cast<Eigen::Index>(n_) * (j - 1)];
  }
  void add(Vector& v, int i, double x) const {
    if (i > 0 && i <= n_) v[i - 1] += x;
  }
  void add(Vector& v, int i, int j, double x) const {
    if (i > 0 && i <= n_ && j > 0 && j <= n_) v[(i - 1) + static_cast<Eigen::Index>(n_) * (j - 1)] += x;
  }

  [[nodiscard]] Vector thomas(const Vector& f) const {
    const double off = -1.0 / (hx_ * hx_);
    const double diag = 2.0 / (hx_ * hx_);
    std::vector<double> c(static_cast<std::size_t>(n_));
    Vector d = f;
    c[0] = off / diag;
    d[0] = f[0] / diag;
    for (int i = 1; i < n_; ++i) {
      const double m = diag - off * c[static_cast<std::size_t>(i - 1)];
      c[static_cast<std::size_t>(i)] = off / m;
      d[i] = (f[i] - off * d[i - 1]) / m;
    }
    for (int i = n_ - 2; i >= 0; --i) d[i] -= c[static_cast<std::size_t>(i)] * d[i + 1];
    return d;
  }

  [[nodiscard]] Vector conjugate_gradient(const Vector& f) const {
    Vector x = Vector::Zero(size());
    const double fn = f.norm();
    if (fn == 0.0) return x;
    Vector r = f;
    Vector p = r;
    double rr = r.squaredNorm();
    const Eigen::Index max_iter = 10 * size();
    for (Eigen::Index it = 0; it < max_iter; ++it) {
      const Vector q = -laplacian(p);
      const double alpha = rr / p.dot(q);
      x += alpha * p;
      r -= alpha * q;
      const double rr_new = r.squaredNorm();
      if (std::sqrt(rr_new) <= 1e-12 * fn) return x;
      p = r + (rr_new / rr) * p;
      rr = rr_new;
    }
    throw ConvergenceError("solve_neg_laplacian: conjugate gradient did not converge", std::sqrt(rr) / fn);
  }

  int dim_;
  int n_;
  double hx_;
};

}  // namespace nashflow
