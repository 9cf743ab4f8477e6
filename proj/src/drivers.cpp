#include "groupcdl/drivers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "groupcdl/image.hpp"
#include "groupcdl/log.hpp"

namespace groupcdl {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

DenoiseResult denoise_sw(const Image& y, double sigma_hat, const ModelParams& params, const SwOptions& options) {
  const auto start = Clock::now();
  ModelParams local = params;
  if (options.window) local.window = *options.window;
  const int s = params.stride();
  const Image padded = pad_to_multiple(y, s);
  const int q1 = padded.rows() / s;
  const int q2 = padded.cols() / s;
  const WindowGeometry geom = WindowGeometry::make(q1, q2, local.window);
  local.window = geom.window;

  const std::uint64_t needed = inference_adjacency_bytes(padded.rows(), padded.cols(), s, geom.window, sizeof(double));
  if (needed > options.memory_cap_bytes) {
    throw ResourceError("sliding-window adjacency needs " + std::to_string(needed) + " bytes, above the cap of " +
                        std::to_string(options.memory_cap_bytes) + " bytes");
  }

  DenoiseResult out;
  out.image = groupcdl_forward(y, sigma_hat, local).estimate;
  auto& rec = out.record;
  rec.strategy = "sw";
  rec.window = geom.window;
  rec.seconds = seconds_since(start);
  rec.pixels_processed = static_cast<std::uint64_t>(padded.rows()) * padded.cols();
  rec.adjacency_entries = geom.pixels() * geom.row_entries();
  return out;
}

std::vector<int> crop_origins(int extent, int stride) {
  std::vector<int> origins;
  for (int p = 0; p < extent; p += stride) origins.push_back(p);
  return origins;
}

namespace {

void check_ow(const OWConfig& ow, int stride_c) {
  if (ow.window_side < 1) throw std::invalid_argument("OW window side must be positive");
  if (ow.stride < 1 || ow.stride > ow.window_side) {
    throw std::invalid_argument("OW window stride must lie in [1, window_side], got " + std::to_string(ow.stride));
  }
  if (ow.window_side % stride_c != 0 || (ow.window_side / stride_c) % 2 == 0) {
    throw GeometryError("OW window side must be the conv stride times an odd subband window");
  }
}

Image extract_crop(const Image& y, int r0, int c0, int side) {
  Image crop(y.channels(), side, side);
  for (int c = 0; c < y.channels(); ++c) {
    for (int r = 0; r < side; ++r) {
      const int rr = (r0 + r) % y.rows();
      for (int k = 0; k < side; ++k) crop(c, r, k) = y(c, rr, (c0 + k) % y.cols());
    }
  }
  return crop;
}

}  // namespace

std::vector<int> ow_coverage(int rows, int cols, const OWConfig& ow) {
  std::vector<int> count(static_cast<std::size_t>(rows) * cols, 0);
  for (int r0 : crop_origins(rows, ow.stride)) {
    for (int c0 : crop_origins(cols, ow.stride)) {
      for (int r = 0; r < ow.window_side; ++r) {
        for (int k = 0; k < ow.window_side; ++k) ++count[((r0 + r) % rows) * cols + (c0 + k) % cols];
      }
    }
  }
  return count;
}

DenoiseResult denoise_ow(const Image& y, double sigma_hat, const ModelParams& params, const OWConfig& ow) {
  const auto start = Clock::now();
  const int s = params.stride();
  check_ow(ow, s);
  const int side = ow.window_side;
  if (side < s * params.window) {
    warn("OW window side " + std::to_string(side) + " is smaller than the model's effective window " +
         std::to_string(s * params.window));
  }
  ModelParams local = params;
  local.window = side / s;  // covers the whole crop: dense in-crop adjacency

  std::vector<std::pair<int, int>> origins;
  for (int r0 : crop_origins(y.rows(), ow.stride)) {
    for (int c0 : crop_origins(y.cols(), ow.stride)) origins.emplace_back(r0, c0);
  }

  std::vector<Image> outputs(origins.size());
  const auto run = [&](std::size_t i) {
    const Image crop = extract_crop(y, origins[i].first, origins[i].second, side);
    outputs[i] = groupcdl_forward(crop, sigma_hat, local).estimate;
  };
  if (ow.mode == OwMode::Parallel) {
    const auto n = static_cast<std::ptrdiff_t>(origins.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) run(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < origins.size(); ++i) run(i);
  }

  // Fixed crop order in the reduction keeps serial and parallel identical.
  Image sum(y.channels(), y.rows(), y.cols());
  std::vector<int> count(y.plane_size(), 0);
  for (std::size_t i = 0; i < origins.size(); ++i) {
    const auto [r0, c0] = origins[i];
    for (int r = 0; r < side; ++r) {
      const int rr = (r0 + r) % y.rows();
      for (int k = 0; k < side; ++k) {
        const int kk = (c0 + k) % y.cols();
        ++count[static_cast<std::size_t>(rr) * y.cols() + kk];
        for (int c = 0; c < y.channels(); ++c) sum(c, rr, kk) += outputs[i](c, r, k);
      }
    }
  }
  for (int c = 0; c < y.channels(); ++c) {
    auto plane = sum.plane(c);
    for (std::size_t p = 0; p < plane.size(); ++p) plane[p] /= count[p];
  }

  DenoiseResult out;
  out.image = std::move(sum);
  auto& rec = out.record;
  rec.strategy = "ow";
  rec.window = side / s;
  rec.window_stride = ow.stride;
  rec.seconds = seconds_since(start);
  const std::uint64_t crops = origins.size();
  const std::uint64_t latent = static_cast<std::uint64_t>(side / s) * (side / s);
  rec.pixels_processed = crops * side * side;
  rec.adjacency_entries = crops * latent * latent;
  rec.burden_predicted = burden_factor(side, ow.stride);
  return out;
}

double burden_factor(double window_side, double stride) {
  if (!(stride > 0.0) || !(window_side > 0.0)) throw std::invalid_argument("burden factor needs positive sizes");
  return (window_side * window_side) / (stride * stride);
}

namespace {

template <class Fn>
DenoiseResult timed_median(const Fn& fn, int repeats) {
  DenoiseResult result = fn();  // warmup, excluded from timing
  std::vector<double> times;
  for (int i = 0; i < repeats; ++i) {
    DenoiseResult again = fn();
    times.push_back(again.record.seconds);
    result = std::move(again);
  }
  if (!times.empty()) {
    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    result.record.seconds = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
  }
  return result;
}

}  // namespace

std::vector<BenchRecord> bench_suite(std::span<const Image> clean, const ModelParams& params, const BenchGrid& grid) {
  if (grid.windows.empty()) throw std::invalid_argument("bench grid needs at least one window");
  std::vector<BenchRecord> records;
  Rng rng(grid.seed);
  const int s = params.stride();
  for (std::size_t idx = 0; idx < clean.size(); ++idx) {
    const Image& x = clean[idx];
    const Image noisy = add_awgn(x, grid.sigma, rng);
    for (int w : grid.windows) {
      const auto evaluate = [&](DenoiseResult r) {
        const Image shown = clip01(r.image);
        r.record.image = static_cast<int>(idx);
        r.record.psnr = psnr(shown, x);
        r.record.ssim = ssim(shown, x);
        return r.record;
      };
      SwOptions sw_opts;
      sw_opts.window = w;
      BenchRecord sw =
          evaluate(timed_median([&] { return denoise_sw(noisy, grid.sigma, params, sw_opts); }, grid.repeats));
      records.push_back(sw);
      if (!grid.include_ow) continue;
      for (int sw_stride : grid.strides) {
        const int side = s * sw.window;
        if (sw_stride > side) continue;
        OWConfig ow{side, sw_stride, grid.mode};
        BenchRecord rec =
            evaluate(timed_median([&] { return denoise_ow(noisy, grid.sigma, params, ow); }, grid.repeats));
        rec.window = sw.window;
        rec.burden_measured = static_cast<double>(rec.pixels_processed) / static_cast<double>(sw.pixels_processed);
        records.push_back(rec);
      }
    }
  }
  return records;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRecord> records) {
  out << "image,strategy,W,s_w,psnr,ssim,seconds,pixels_processed,adjacency_entries,burden_measured,"
         "burden_predicted\n";
  out << std::setprecision(10);
  for (const auto& r : records) {
    out << r.image << ',' << r.strategy << ',' << r.window << ',' << r.window_stride << ',' << r.psnr << ','
        << r.ssim << ',' << r.seconds << ',' << r.pixels_processed << ',' << r.adjacency_entries << ','
        << r.burden_measured << ',' << r.burden_predicted << '\n';
  }
}

std::string bench_summary(std::span<const BenchRecord> records) {
  struct Agg {
    double psnr = 0, ssim = 0, seconds = 0, burden = 0;
    int n = 0;
  };
  std::map<std::tuple<std::string, int, int>, Agg> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.strategy, r.window, r.window_stride}];
    g.psnr += r.psnr;
    g.ssim += r.ssim;
    g.seconds += r.seconds;
    g.burden += r.burden_measured;
    ++g.n;
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "strategy    W   s_w   psnr(dB)   ssim     seconds   burden\n";
  for (const auto& [key, g] : groups) {
    const auto& [strategy, w, sw] = key;
    os << std::left << std::setw(9) << strategy << std::right << std::setw(4) << w << std::setw(6) << sw
       << std::setw(11) << g.psnr / g.n << std::setw(8) << g.ssim / g.n << std::setw(11) << g.seconds / g.n
       << std::setw(9) << g.burden / g.n << '\n';
  }
  return os.str();
}

}  // namespace groupcdl
