#pragma once

#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nashflow/error.hpp"

namespace nashflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Partition of a flat vector into per-player coordinate blocks.
class BlockLayout {
 public:
  BlockLayout() = default;

  explicit BlockLayout(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
    offsets_.reserve(sizes_.size());
    std::size_t acc = 0;
    for (std::size_t s : sizes_) {
      if (s == 0) throw InvalidArgument("block layout: empty block");
      offsets_.push_back(acc);
      acc += s;
    }
    total_ = acc;
  }

  [[nodiscard]] std::size_t players() const noexcept { return sizes_.size(); }
  [[nodiscard]] std::size_t size(std::size_t j) const { return sizes_.at(j); }
  [[nodiscard]] std::size_t offset(std::size_t j) const { return offsets_.at(j); }
  [[nodiscard]] std::size_t total() const noexcept { return total_; }
  [[nodiscard]] const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }

  friend bool operator==(const BlockLayout& a, const BlockLayout& b) { return a.sizes_ == b.sizes_; }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

using LayoutPtr = std::shared_ptr<const BlockLayout>;

inline LayoutPtr make_layout(std::vector<std::size_t> sizes) {
  return std::make_shared<const BlockLayout>(std::move(sizes));
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// A strategy profile: N per-player blocks stored as one flat vector.
///
/// Invariants: the block sizes sum to the vector length and every entry is
/// finite. Both are checked on construction.
class GamePoint {
 public:
  GamePoint() : layout_(make_layout({})) {}

  GamePoint(Vector data, LayoutPtr layout) : data_(std::move(data)), layout_(std::move(layout)) {
    if (!layout_) throw InvalidArgument("GamePoint: null layout");
    if (static_cast<std::size_t>(data_.size()) != layout_->total())
      throw DimensionError("GamePoint: vector length " + std::to_string(data_.size()) +
                           " does not match layout total " + std::to_string(layout_->total()));
    if (!all_finite(data_)) throw InvalidArgument("GamePoint: non-finite entry");
  }

  GamePoint(Vector data, std::vector<std::size_t> sizes)
      : GamePoint(std::move(data), make_layout(std::move(sizes))) {}

  static GamePoint zeros(const LayoutPtr& layout) {
    return GamePoint(Vector::Zero(static_cast<Eigen::Index>(layout->total())), layout);
  }

  [[nodiscard]] const Vector& data() const noexcept { return data_; }
  [[nodiscard]] const BlockLayout& layout() const noexcept { return *layout_; }
  [[nodiscard]] const LayoutPtr& layout_ptr() const noexcept { return layout_; }
  [[nodiscard]] std::size_t players() const noexcept { return layout_->players(); }
  [[nodiscard]] Eigen::Index size() const noexcept { return data_.size(); }

  [[nodiscard]] auto block(std::size_t j) const {
    return data_.segment(static_cast<Eigen::Index>(layout_->offset(j)),
                         static_cast<Eigen::Index>(layout_->size(j)));
  }

  /// Copy with block j replaced, i.e. the profile (y_j, x_{-j}).
  [[nodiscard]] GamePoint with_block(std::size_t j, const Vector& yj) const {
    if (static_cast<std::size_t>(yj.size()) != layout_->size(j))
      throw DimensionError("with_block: wrong block size");
    Vector d = data_;
    d.segment(static_cast<Eigen::Index>(layout_->offset(j)), yj.size()) = yj;
    return GamePoint(std::move(d), layout_);
  }

  /// Same layout, new data.
  [[nodiscard]] GamePoint rebind(Vector data) const { return GamePoint(std::move(data), layout_); }

 private:
  Vector data_;
  LayoutPtr layout_;
};

}  // namespace nashflow
