#pragma once

#include <cstdint>
#include <vector>

#include "groupcdl/planar.hpp"
#include "groupcdl/rng.hpp"

namespace groupcdl {

/// Additive white Gaussian noise. sigma is on the [0,255] scale.
struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// y = x + nu with nu ~ N(0, (sigma/255)^2). The output is not clipped.
Image add_awgn(const Image& img, const NoiseSpec& spec);
Image add_awgn(const Image& img, double sigma, Rng& rng);

/// Peak signal-to-noise ratio for unit peak. +inf for identical inputs.
double psnr(const Image& a, const Image& b);

/// Mean SSIM with an 11x11 Gaussian window (std 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1. Windows are restricted to the valid region. Multichannel
/// inputs return the average of the per-channel scores.
double ssim(const Image& a, const Image& b);

struct MeanRemoved {
  Image image;
  std::vector<double> mean;  // one entry per channel
};

MeanRemoved subtract_mean(const Image& img);
Image add_mean(const Image& img, const std::vector<double>& mean);

/// Per-channel mean, corrected by a second pass over the residuals.
std::vector<double> channel_means(const Image& img);

Image clip01(const Image& img);

bool all_finite(const Image& img);

}  // namespace groupcdl
