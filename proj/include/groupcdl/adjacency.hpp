#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "groupcdl/planar.hpp"

namespace groupcdl {

/// Square W x W circular window on a Q1 x Q2 subband grid. Offsets run over
/// -W/2 .. W/2 on each axis.
struct WindowGeometry {
  int rows = 0;    // Q1
  int cols = 0;    // Q2
  int window = 1;  // W, odd

  /// Validates W (odd, >= 1). A window wider than the grid is clamped to the
  /// largest odd side that fits, with a warning.
  static WindowGeometry make(int rows, int cols, int window);

  int radius() const noexcept { return window / 2; }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(rows) * cols; }
  std::size_t row_entries() const noexcept { return static_cast<std::size_t>(window) * window; }

  /// Column index of window entry t (raster order inside the window) of row i.
  std::size_t neighbor(std::size_t i, std::size_t t) const noexcept;

  bool operator==(const WindowGeometry&) const = default;
};

/// Block-circulant-with-circulant-blocks sparse matrix. Row i stores the W^2
/// entries of its window in raster order; column indices are implicit.
class SparseAdjacency {
 public:
  SparseAdjacency() = default;
  SparseAdjacency(WindowGeometry geometry, bool row_normalized);

  const WindowGeometry& geometry() const noexcept { return geometry_; }
  bool row_normalized() const noexcept { return row_normalized_; }
  void set_row_normalized(bool v) noexcept { row_normalized_ = v; }

  std::span<double> row(std::size_t i) noexcept {
    return {values_.data() + i * geometry_.row_entries(), geometry_.row_entries()};
  }
  std::span<const double> row(std::size_t i) const noexcept {
    return {values_.data() + i * geometry_.row_entries(), geometry_.row_entries()};
  }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool operator==(const SparseAdjacency&) const = default;

 private:
  WindowGeometry geometry_;
  bool row_normalized_ = false;
  std::vector<double> values_;
};

/// Dense M_out x M_in matrix applied independently at every pixel.
class PixelTransform {
 public:
  PixelTransform() = default;
  PixelTransform(int rows, int cols, std::vector<double> entries, bool nonneg = false);

  static PixelTransform identity(int n, double scale = 1.0, bool nonneg = false);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  bool nonneg() const noexcept { return nonneg_; }
  double operator()(int r, int c) const noexcept { return entries_[static_cast<std::size_t>(r) * cols_ + c]; }
  std::span<const double> entries() const noexcept { return entries_; }

  /// out[o] = sum_i W[o][i] in[i] at every pixel; in has cols() channels.
  LatentCode apply(const LatentCode& in) const;
  /// out[i] = sum_o W[o][i] in[o] at every pixel; in has rows() channels.
  LatentCode apply_transposed(const LatentCode& in) const;

  bool operator==(const PixelTransform&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> entries_;
  bool nonneg_ = false;
};

/// S_ij = -||W_theta z[i] - W_phi z[j]||^2 for j in the window of i.
SparseAdjacency similarity_distance(const LatentCode& z, const PixelTransform& wtheta, const PixelTransform& wphi,
                                    const WindowGeometry& geom);

/// S_ij = (W_q z[j]) . (W_k z[i]) / sqrt(M_h) for j in the window of i.
SparseAdjacency similarity_dot(const LatentCode& z, const PixelTransform& wq, const PixelTransform& wk,
                               const WindowGeometry& geom);

/// Softmax over the stored entries of each row (max-subtracted).
SparseAdjacency row_softmax(const SparseAdjacency& s);

/// gamma * fresh + (1 - gamma) * prev, entrywise.
SparseAdjacency blend(const SparseAdjacency& prev, const SparseAdjacency& fresh, double gamma);

/// out_c = G u_c for every channel c of u.
LatentCode apply_channelwise(const SparseAdjacency& g, const LatentCode& u);

SparseAdjacency identity_adjacency(const WindowGeometry& geom);

/// Bytes needed to store one adjacency: Q * W^2 * sample_bytes.
std::uint64_t adjacency_bytes(std::uint64_t subband_pixels, int window, int sample_bytes);

/// Bytes for the `buffers` adjacencies held during inference on an
/// rows x cols image with conv stride `stride`.
std::uint64_t inference_adjacency_bytes(int rows, int cols, int stride, int window, int sample_bytes,
                                        int buffers = 2);

}  // namespace groupcdl
