#include "groupcdl/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace groupcdl {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - u lies in (0, 1], keeping the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Image add_awgn(const Image& img, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) {
    throw std::invalid_argument("noise sigma must be nonnegative");
  }
  Image out = img;
  if (sigma == 0.0) {
    return out;
  }
  const double std_unit = sigma / 255.0;
  for (double& v : out.data()) {
    v += std_unit * rng.normal();
  }
  return out;
}

Image add_awgn(const Image& img, const NoiseSpec& spec) {
  Rng rng(spec.seed);
  return add_awgn(img, spec.sigma, rng);
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw GeometryError("psnr: image dimensions differ");
  }
  if (a.empty()) {
    throw GeometryError("psnr: empty image");
  }
  double sse = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    sse += d * d;
  }
  if (sse == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  const double mse = sse / static_cast<double>(da.size());
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> taps{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Valid-region separable Gaussian filter of a single plane.
std::vector<double> filter_valid(std::span<const double> src, int rows, int cols,
                                 const std::array<double, kSsimWindow>& taps) {
  const int out_rows = rows - kSsimWindow + 1;
  const int out_cols = cols - kSsimWindow + 1;
  std::vector<double> horiz(static_cast<std::size_t>(rows) * out_cols);
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < out_cols; ++k) {
      double acc = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) acc += taps[t] * src[r * cols + k + t];
      horiz[r * out_cols + k] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_rows) * out_cols);
  for (int r = 0; r < out_rows; ++r) {
    for (int k = 0; k < out_cols; ++k) {
      double acc = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) acc += taps[t] * horiz[(r + t) * out_cols + k];
      out[r * out_cols + k] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw GeometryError("ssim: image dimensions differ");
  }
  if (a.rows() < kSsimWindow || a.cols() < kSsimWindow) {
    throw GeometryError("ssim: image smaller than the 11x11 window");
  }
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
  const auto taps = gaussian_taps();
  const int rows = a.rows();
  const int cols = a.cols();
  const std::size_t n = a.plane_size();

  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    const auto pa = a.plane(c);
    const auto pb = b.plane(c);
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, rows, cols, taps);
    const auto mu_b = filter_valid(pb, rows, cols, taps);
    const auto e_aa = filter_valid(aa, rows, cols, taps);
    const auto e_bb = filter_valid(bb, rows, cols, taps);
    const auto e_ab = filter_valid(ab, rows, cols, taps);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i];
      const double mb = mu_b[i];
      const double va = e_aa[i] - ma * ma;
      const double vb = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / a.channels();
}

std::vector<double> channel_means(const Image& img) {
  std::vector<double> mean(img.channels(), 0.0);
  const auto n = static_cast<double>(img.plane_size());
  if (img.plane_size() == 0) return mean;
  for (int c = 0; c < img.channels(); ++c) {
    const auto p = img.plane(c);
    double sum = 0.0;
    for (double v : p) sum += v;
    const double first = sum / n;
    double resid = 0.0;
    for (double v : p) resid += v - first;
    mean[c] = first + resid / n;
  }
  return mean;
}

MeanRemoved subtract_mean(const Image& img) {
  MeanRemoved out{img, channel_means(img)};
  for (int c = 0; c < img.channels(); ++c) {
    const double m = out.mean[c];
    for (double& v : out.image.plane(c)) v -= m;
  }
  return out;
}

Image add_mean(const Image& img, const std::vector<double>& mean) {
  if (static_cast<int>(mean.size()) != img.channels()) {
    throw GeometryError("add_mean: one mean per channel required");
  }
  Image out = img;
  for (int c = 0; c < img.channels(); ++c) {
    for (double& v : out.plane(c)) v += mean[c];
  }
  return out;
}

Image clip01(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

bool all_finite(const Image& img) {
  return std::all_of(img.data().begin(), img.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace groupcdl
