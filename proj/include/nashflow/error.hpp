#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nashflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector length does not match the expected dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed argument or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A gradient oracle returned NaN or Inf.
class NonFiniteGradient : public Error {
 public:
  explicit NonFiniteGradient(std::size_t player)
      : Error("non-finite gradient for player " + std::to_string(player)), player_(player) {}

  [[nodiscard]] std::size_t player() const noexcept { return player_; }

 private:
  std::size_t player_;
};

/// An iterative solver ran out of iterations. Carries the last residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (final residual " + std::to_string(residual) + ")"), residual_(residual) {}

  [[nodiscard]] double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace nashflow
