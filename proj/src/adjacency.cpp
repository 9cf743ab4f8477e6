#include "groupcdl/adjacency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "groupcdl/log.hpp"

namespace groupcdl {

WindowGeometry WindowGeometry::make(int rows, int cols, int window) {
  if (rows < 1 || cols < 1) throw GeometryError("window geometry needs a nonempty grid");
  if (window < 1 || window % 2 == 0) {
    throw GeometryError("window side must be a positive odd integer, got " + std::to_string(window));
  }
  const int limit = std::min(rows, cols);
  if (window > limit) {
    const int clamped = limit % 2 == 1 ? limit : limit - 1;
    warn("window side " + std::to_string(window) + " exceeds the " + std::to_string(rows) + "x" +
         std::to_string(cols) + " subband grid; clamped to " + std::to_string(clamped));
    window = clamped;
  }
  return WindowGeometry{rows, cols, window};
}

std::size_t WindowGeometry::neighbor(std::size_t i, std::size_t t) const noexcept {
  const int r = radius();
  const int i1 = static_cast<int>(i / cols);
  const int i2 = static_cast<int>(i % cols);
  int j1 = i1 + static_cast<int>(t / window) - r;
  int j2 = i2 + static_cast<int>(t % window) - r;
  if (j1 < 0) j1 += rows;
  if (j1 >= rows) j1 -= rows;
  if (j2 < 0) j2 += cols;
  if (j2 >= cols) j2 -= cols;
  return static_cast<std::size_t>(j1) * cols + j2;
}

SparseAdjacency::SparseAdjacency(WindowGeometry geometry, bool row_normalized)
    : geometry_(geometry), row_normalized_(row_normalized), values_(geometry.pixels() * geometry.row_entries(), 0.0) {}

PixelTransform::PixelTransform(int rows, int cols, std::vector<double> entries, bool nonneg)
    : rows_(rows), cols_(cols), entries_(std::move(entries)), nonneg_(nonneg) {
  if (rows < 1 || cols < 1 || entries_.size() != static_cast<std::size_t>(rows) * cols) {
    throw GeometryError("pixel transform entries do not match its shape");
  }
  if (nonneg && std::any_of(entries_.begin(), entries_.end(), [](double v) { return !(v >= 0.0); })) {
    throw std::invalid_argument("pixel transform flagged nonnegative has a negative entry");
  }
}

PixelTransform PixelTransform::identity(int n, double scale, bool nonneg) {
  std::vector<double> e(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) e[static_cast<std::size_t>(i) * n + i] = scale;
  return PixelTransform(n, n, std::move(e), nonneg);
}

LatentCode PixelTransform::apply(const LatentCode& in) const {
  if (in.channels() != cols_) throw GeometryError("pixel transform input channel mismatch");
  LatentCode out(rows_, in.rows(), in.cols());
  const std::size_t q = in.plane_size();
  for (int o = 0; o < rows_; ++o) {
    auto dst = out.plane(o);
    for (int i = 0; i < cols_; ++i) {
      const double w = (*this)(o, i);
      if (w == 0.0) continue;
      const auto src = in.plane(i);
      for (std::size_t p = 0; p < q; ++p) dst[p] += w * src[p];
    }
  }
  return out;
}

LatentCode PixelTransform::apply_transposed(const LatentCode& in) const {
  if (in.channels() != rows_) throw GeometryError("pixel transform input channel mismatch");
  LatentCode out(cols_, in.rows(), in.cols());
  const std::size_t q = in.plane_size();
  for (int i = 0; i < cols_; ++i) {
    auto dst = out.plane(i);
    for (int o = 0; o < rows_; ++o) {
      const double w = (*this)(o, i);
      if (w == 0.0) continue;
      const auto src = in.plane(o);
      for (std::size_t p = 0; p < q; ++p) dst[p] += w * src[p];
    }
  }
  return out;
}

namespace {

void check_grid(const LatentCode& z, const WindowGeometry& geom) {
  if (z.rows() != geom.rows || z.cols() != geom.cols) {
    throw GeometryError("latent grid does not match the window geometry");
  }
}

// Pixel-major copy: out[p * channels + c].
std::vector<double> pixel_major(const LatentCode& z) {
  const std::size_t q = z.plane_size();
  const int ch = z.channels();
  std::vector<double> out(q * ch);
  for (int c = 0; c < ch; ++c) {
    const auto src = z.plane(c);
    for (std::size_t p = 0; p < q; ++p) out[p * ch + c] = src[p];
  }
  return out;
}

void check_pair(const LatentCode& z, const PixelTransform& a, const PixelTransform& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw GeometryError("similarity transforms differ in shape");
  if (a.cols() != z.channels()) {
    throw GeometryError("similarity transforms expect " + std::to_string(a.cols()) + " subbands, code has " +
                        std::to_string(z.channels()));
  }
}

}  // namespace

SparseAdjacency similarity_distance(const LatentCode& z, const PixelTransform& wtheta, const PixelTransform& wphi,
                                    const WindowGeometry& geom) {
  check_pair(z, wtheta, wphi);
  check_grid(z, geom);
  const int mh = wtheta.rows();
  const auto fa = pixel_major(wtheta.apply(z));
  const auto fb = pixel_major(wphi.apply(z));
  SparseAdjacency s(geom, false);
  const auto q = static_cast<std::ptrdiff_t>(geom.pixels());
  const std::size_t entries = geom.row_entries();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < q; ++i) {
    auto row = s.row(i);
    const double* a = &fa[i * mh];
    for (std::size_t t = 0; t < entries; ++t) {
      const double* b = &fb[geom.neighbor(i, t) * mh];
      double d2 = 0.0;
      for (int h = 0; h < mh; ++h) {
        const double d = a[h] - b[h];
        d2 += d * d;
      }
      row[t] = -d2;
    }
  }
  return s;
}

SparseAdjacency similarity_dot(const LatentCode& z, const PixelTransform& wq, const PixelTransform& wk,
                               const WindowGeometry& geom) {
  check_pair(z, wq, wk);
  check_grid(z, geom);
  const int mh = wq.rows();
  const auto query = pixel_major(wq.apply(z));
  const auto key = pixel_major(wk.apply(z));
  const double scale = 1.0 / std::sqrt(static_cast<double>(mh));
  SparseAdjacency s(geom, false);
  const auto q = static_cast<std::ptrdiff_t>(geom.pixels());
  const std::size_t entries = geom.row_entries();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < q; ++i) {
    auto row = s.row(i);
    const double* k = &key[i * mh];
    for (std::size_t t = 0; t < entries; ++t) {
      const double* qj = &query[geom.neighbor(i, t) * mh];
      double acc = 0.0;
      for (int h = 0; h < mh; ++h) acc += qj[h] * k[h];
      row[t] = acc * scale;
    }
  }
  return s;
}

SparseAdjacency row_softmax(const SparseAdjacency& s) {
  SparseAdjacency out = s;
  out.set_row_normalized(true);
  const auto q = static_cast<std::ptrdiff_t>(s.geometry().pixels());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < q; ++i) {
    auto row = out.row(i);
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - peak);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return out;
}

SparseAdjacency blend(const SparseAdjacency& prev, const SparseAdjacency& fresh, double gamma) {
  if (!(prev.geometry() == fresh.geometry())) throw GeometryError("blend: adjacency geometries differ");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("blend: gamma must lie in [0, 1]");
  SparseAdjacency out(prev.geometry(), prev.row_normalized() && fresh.row_normalized());
  const auto p = prev.values();
  const auto f = fresh.values();
  auto o = out.values();
  const double keep = 1.0 - gamma;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = gamma * f[i] + keep * p[i];
  return out;
}

LatentCode apply_channelwise(const SparseAdjacency& g, const LatentCode& u) {
  const auto& geom = g.geometry();
  check_grid(u, geom);
  const int ch = u.channels();
  const auto src = pixel_major(u);
  LatentCode out(ch, u.rows(), u.cols());
  const auto q = static_cast<std::ptrdiff_t>(geom.pixels());
  const std::size_t entries = geom.row_entries();
#pragma omp parallel
  {
    std::vector<double> acc(ch);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < q; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const auto row = g.row(i);
      for (std::size_t t = 0; t < entries; ++t) {
        const double w = row[t];
        const double* uj = &src[geom.neighbor(i, t) * ch];
        for (int c = 0; c < ch; ++c) acc[c] += w * uj[c];
      }
      for (int c = 0; c < ch; ++c) out.plane(c)[i] = acc[c];
    }
  }
  return out;
}

SparseAdjacency identity_adjacency(const WindowGeometry& geom) {
  SparseAdjacency g(geom, true);
  const std::size_t center = static_cast<std::size_t>(geom.radius()) * geom.window + geom.radius();
  for (std::size_t i = 0; i < geom.pixels(); ++i) g.row(i)[center] = 1.0;
  return g;
}

std::uint64_t adjacency_bytes(std::uint64_t subband_pixels, int window, int sample_bytes) {
  return subband_pixels * static_cast<std::uint64_t>(window) * window * sample_bytes;
}

std::uint64_t inference_adjacency_bytes(int rows, int cols, int stride, int window, int sample_bytes, int buffers) {
  const std::uint64_t q1 = (rows + stride - 1) / stride;
  const std::uint64_t q2 = (cols + stride - 1) / stride;
  return adjacency_bytes(q1 * q2, window, sample_bytes) * buffers;
}

}  // namespace groupcdl
