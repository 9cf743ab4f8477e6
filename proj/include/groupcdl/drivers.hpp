#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groupcdl/planar.hpp"
#include "groupcdl/solver.hpp"

namespace groupcdl {

enum class OwMode { Serial, Parallel };

/// Overlapping-window inference: crops of window_side x window_side image
/// pixels placed every `stride` pixels (circularly wrapped at the borders).
struct OWConfig {
  int window_side = 70;
  int stride = 35;
  OwMode mode = OwMode::Serial;
};

struct BenchRecord {
  std::string strategy;  // "sw" or "ow"
  int image = 0;
  int window = 0;         // subband window W (SW) / W of the matching SW run (OW)
  int window_stride = 0;  // s_w in image pixels; 0 for SW
  double psnr = 0.0;
  double ssim = 0.0;
  double seconds = 0.0;
  std::uint64_t pixels_processed = 0;   // image pixels pushed through one layer
  std::uint64_t adjacency_entries = 0;  // stored adjacency values per layer
  double burden_measured = 1.0;         // OW pixels / SW pixels for the same image and W
  double burden_predicted = 1.0;        // window_side^2 / s_w^2
};

struct SwOptions {
  std::optional<int> window;                          // overrides params.window
  std::uint64_t memory_cap_bytes = 8ull << 30;       // for the two adjacency buffers
};

struct DenoiseResult {
  Image image;
  BenchRecord record;
};

/// Sliding-window inference: one forward pass over the whole image with the
/// sparse windowed adjacency. Refuses when the two adjacency buffers would
/// exceed the memory cap.
DenoiseResult denoise_sw(const Image& y, double sigma_hat, const ModelParams& params, const SwOptions& options = {});

/// Overlapping-window inference: every crop goes through its own forward
/// pass with a window covering the whole crop; outputs are averaged with
/// uniform weights on their overlaps. Serial and parallel modes give
/// bit-identical images.
DenoiseResult denoise_ow(const Image& y, double sigma_hat, const ModelParams& params, const OWConfig& ow);

/// Crop origins along one axis: 0, s_w, 2 s_w, ... < extent.
std::vector<int> crop_origins(int extent, int stride);

/// Per-pixel number of crops covering each pixel.
std::vector<int> ow_coverage(int rows, int cols, const OWConfig& ow);

/// Pixels processed by OW relative to SW: window_side^2 / s_w^2.
double burden_factor(double window_side, double stride);

struct BenchGrid {
  std::vector<int> windows;  // subband windows W
  std::vector<int> strides;  // s_w values in image pixels; entries above s_c * W are skipped
  double sigma = 25.0;
  std::uint64_t seed = 0;
  int repeats = 3;           // timed runs after one warmup; the median is reported
  OwMode mode = OwMode::Serial;
  bool include_ow = true;
};

/// Adds one fixed noise realization per image, then evaluates SW for every
/// window and OW for every (window, stride) pair against the clean images.
std::vector<BenchRecord> bench_suite(std::span<const Image> clean, const ModelParams& params, const BenchGrid& grid);

/// CSV header: image,strategy,W,s_w,psnr,ssim,seconds,pixels_processed,
/// adjacency_entries,burden_measured,burden_predicted
void write_bench_csv(std::ostream& out, std::span<const BenchRecord> records);
std::string bench_summary(std::span<const BenchRecord> records);

}  // namespace groupcdl
