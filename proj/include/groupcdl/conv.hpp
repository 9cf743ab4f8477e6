#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "groupcdl/planar.hpp"

namespace groupcdl {

/// M filters of C channels and P x P taps acting with stride s under circular
/// boundaries. Tap (a, b) of a filter sits at offset (a - P/2, b - P/2) from
/// the atom's anchor pixel (s * q1, s * q2); storage order is [m][c][a][b].
class ConvDictionary {
 public:
  ConvDictionary() = default;
  ConvDictionary(int filters, int channels, int size, int stride);

  int filters() const noexcept { return filters_; }
  int channels() const noexcept { return channels_; }
  int size() const noexcept { return size_; }
  int stride() const noexcept { return stride_; }
  int center() const noexcept { return size_ / 2; }
  std::size_t filter_length() const noexcept { return static_cast<std::size_t>(channels_) * size_ * size_; }

  double& tap(int m, int c, int a, int b) noexcept { return taps_[index(m, c, a, b)]; }
  double tap(int m, int c, int a, int b) const noexcept { return taps_[index(m, c, a, b)]; }

  std::span<double> filter(int m) noexcept { return {taps_.data() + m * filter_length(), filter_length()}; }
  std::span<const double> filter(int m) const noexcept {
    return {taps_.data() + m * filter_length(), filter_length()};
  }
  std::span<double> taps() noexcept { return taps_; }
  std::span<const double> taps() const noexcept { return taps_; }

  double filter_norm(int m) const;

  /// Same M, C, P and stride.
  bool same_geometry(const ConvDictionary& o) const noexcept {
    return filters_ == o.filters_ && channels_ == o.channels_ && size_ == o.size_ && stride_ == o.stride_;
  }

  ConvDictionary scaled(double factor) const;

  bool operator==(const ConvDictionary&) const = default;

 private:
  std::size_t index(int m, int c, int a, int b) const noexcept {
    return ((static_cast<std::size_t>(m) * channels_ + c) * size_ + a) * size_ + b;
  }

  int filters_ = 0;
  int channels_ = 0;
  int size_ = 0;
  int stride_ = 1;
  std::vector<double> taps_;
};

/// x = D z: zero-insertion upsampling by the stride followed by circular
/// convolution, summed over filters. Output is C x (s*Q1) x (s*Q2).
Image synthesize(const ConvDictionary& dict, const LatentCode& z);

/// z = D^T x, the exact adjoint of synthesize. Image dims must be multiples
/// of the stride.
LatentCode analyze(const ConvDictionary& dict, const Image& x);

/// Rescales every filter with l2 norm above 1 onto the unit sphere. For
/// circular boundaries all translates of a filter share its norm, so this is
/// the projection onto {D : ||D_:j||_2 <= 1 for all columns j}.
ConvDictionary project_constraint(ConvDictionary dict);

/// Power-iteration estimate of ||D||_2 for images of the given size. The
/// estimate is nondecreasing in iters.
double spectral_norm(const ConvDictionary& dict, int rows, int cols, int iters, std::uint64_t seed = 0x5eed);

/// Same, on a 64 x 64 probe grid.
double spectral_norm(const ConvDictionary& dict, int iters);

/// Overcomplete separable 2-D DCT atoms (ceil(sqrt(M')) frequencies per axis
/// sampled on P taps, lowest frequencies first), each scaled to unit norm.
/// Color dictionaries pair spatial atoms with a luminance / two opponent
/// color vectors, so M' = ceil(M / 3) spatial atoms are used.
ConvDictionary dct_dictionary(int filters, int channels, int size, int stride);

/// Seeded Gaussian filters projected to unit norm.
ConvDictionary random_dictionary(int filters, int channels, int size, int stride, std::uint64_t seed);

/// Circular padding up to the next multiple of `multiple` on each axis.
Image pad_to_multiple(const Image& img, int multiple);
Image crop(const Image& img, int rows, int cols);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace groupcdl
