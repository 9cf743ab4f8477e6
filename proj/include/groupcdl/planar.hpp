#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "groupcdl/errors.hpp"

namespace groupcdl {

struct ImageTag {};
struct LatentTag {};

/// Channel-major (planar) real-valued raster: sample (c, r, k) lives at
/// c * rows * cols + r * cols + k. Each channel plane is a vectorized image.
template <class Tag>
class Planar {
 public:
  Planar() = default;

  Planar(int channels, int rows, int cols, double fill = 0.0)
      : channels_(channels), rows_(rows), cols_(cols) {
    if (channels < 0 || rows < 0 || cols < 0) {
      throw GeometryError("negative raster dimension");
    }
    data_.assign(static_cast<std::size_t>(channels) * rows * cols, fill);
  }

  int channels() const noexcept { return channels_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(rows_) * cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int c, int r, int k) noexcept {
    return data_[(static_cast<std::size_t>(c) * rows_ + r) * cols_ + k];
  }
  const double& operator()(int c, int r, int k) const noexcept {
    return data_[(static_cast<std::size_t>(c) * rows_ + r) * cols_ + k];
  }

  std::span<double> plane(int c) noexcept { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(int c) const noexcept {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  template <class OtherTag>
  bool same_shape(const Planar<OtherTag>& o) const noexcept {
    return channels_ == o.channels() && rows_ == o.rows() && cols_ == o.cols();
  }

  bool operator==(const Planar&) const = default;

 private:
  int channels_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Image in [0,1] sample units: rows = height N1, cols = width N2, channels C.
using Image = Planar<ImageTag>;

/// Subband representation z: M channels on a Q1 x Q2 grid.
using LatentCode = Planar<LatentTag>;

}  // namespace groupcdl
