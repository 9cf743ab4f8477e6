#include "groupcdl/conv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "groupcdl/rng.hpp"

namespace groupcdl {

ConvDictionary::ConvDictionary(int filters, int channels, int size, int stride)
    : filters_(filters), channels_(channels), size_(size), stride_(stride) {
  if (filters < 1 || channels < 1 || size < 1 || stride < 1) {
    throw GeometryError("dictionary dimensions must be positive");
  }
  taps_.assign(static_cast<std::size_t>(filters) * filter_length(), 0.0);
}

double ConvDictionary::filter_norm(int m) const { return norm2(filter(m)); }

ConvDictionary ConvDictionary::scaled(double factor) const {
  ConvDictionary out = *this;
  for (double& t : out.taps_) t *= factor;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

namespace {

int wrap(int v, int n) {
  const int r = v % n;
  return r < 0 ? r + n : r;
}

// cols[b][q] = (s*q + b - center) mod n
std::vector<int> anchor_table(int taps, int q_count, int stride, int center, int n) {
  std::vector<int> table(static_cast<std::size_t>(taps) * q_count);
  for (int b = 0; b < taps; ++b) {
    for (int q = 0; q < q_count; ++q) table[b * q_count + q] = wrap(stride * q + b - center, n);
  }
  return table;
}

}  // namespace

Image synthesize(const ConvDictionary& dict, const LatentCode& z) {
  if (z.channels() != dict.filters()) {
    throw GeometryError("synthesize: code has " + std::to_string(z.channels()) + " subbands, dictionary has " +
                        std::to_string(dict.filters()));
  }
  const int s = dict.stride();
  const int P = dict.size();
  const int off = dict.center();
  const int q1n = z.rows();
  const int q2n = z.cols();
  const int rows = s * q1n;
  const int cols = s * q2n;
  Image x(dict.channels(), rows, cols);
  if (x.empty()) return x;
  const auto col_of = anchor_table(P, q2n, s, off, cols);

  const int C = dict.channels();
  const int M = dict.filters();
#pragma omp parallel for schedule(static)
  for (int row_task = 0; row_task < C * rows; ++row_task) {
    const int c = row_task / rows;
    const int n = row_task % rows;
    double* out = &x(c, n, 0);
    for (int a = 0; a < P; ++a) {
      const int t = wrap(n + off - a, rows);
      if (t % s != 0) continue;
      const int q1 = t / s;
      for (int m = 0; m < M; ++m) {
        const double* zrow = &z(m, q1, 0);
        for (int b = 0; b < P; ++b) {
          const double h = dict.tap(m, c, a, b);
          const int* cols_b = &col_of[static_cast<std::size_t>(b) * q2n];
          for (int q2 = 0; q2 < q2n; ++q2) out[cols_b[q2]] += h * zrow[q2];
        }
      }
    }
  }
  return x;
}

LatentCode analyze(const ConvDictionary& dict, const Image& x) {
  if (x.channels() != dict.channels()) {
    throw GeometryError("analyze: image has " + std::to_string(x.channels()) + " channels, dictionary has " +
                        std::to_string(dict.channels()));
  }
  const int s = dict.stride();
  if (x.rows() % s != 0 || x.cols() % s != 0) {
    throw GeometryError("analyze: image dims must be multiples of the stride");
  }
  const int P = dict.size();
  const int off = dict.center();
  const int q1n = x.rows() / s;
  const int q2n = x.cols() / s;
  LatentCode z(dict.filters(), q1n, q2n);
  if (z.empty()) return z;
  const auto col_of = anchor_table(P, q2n, s, off, x.cols());

  const int C = dict.channels();
  const int M = dict.filters();
#pragma omp parallel for schedule(static)
  for (int row_task = 0; row_task < M * q1n; ++row_task) {
    const int m = row_task / q1n;
    const int q1 = row_task % q1n;
    double* out = &z(m, q1, 0);
    for (int c = 0; c < C; ++c) {
      for (int a = 0; a < P; ++a) {
        const double* xrow = &x(c, wrap(s * q1 + a - off, x.rows()), 0);
        for (int b = 0; b < P; ++b) {
          const double h = dict.tap(m, c, a, b);
          const int* cols_b = &col_of[static_cast<std::size_t>(b) * q2n];
          for (int q2 = 0; q2 < q2n; ++q2) out[q2] += h * xrow[cols_b[q2]];
        }
      }
    }
  }
  return z;
}

namespace {
constexpr double kNormSlack = 8 * std::numeric_limits<double>::epsilon();
}  // namespace

ConvDictionary project_constraint(ConvDictionary dict) {
  for (int m = 0; m < dict.filters(); ++m) {
    // Norms within rounding of 1 count as feasible, so projecting twice is a
    // no-op.
    const double norm = dict.filter_norm(m);
    if (norm > 1.0 + kNormSlack) {
      for (double& t : dict.filter(m)) t /= norm;
    }
  }
  return dict;
}

double spectral_norm(const ConvDictionary& dict, int rows, int cols, int iters, std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("spectral_norm: iters must be >= 1");
  const int s = dict.stride();
  if (rows % s != 0 || cols % s != 0) throw GeometryError("spectral_norm: probe dims must be multiples of the stride");
  Rng rng(seed);
  LatentCode v(dict.filters(), rows / s, cols / s);
  for (double& e : v.data()) e = rng.normal();
  double vn = norm2(v.data());
  for (double& e : v.data()) e /= vn;

  double estimate = 0.0;
  for (int it = 0; it < iters; ++it) {
    const Image x = synthesize(dict, v);
    estimate = norm2(x.data());
    v = analyze(dict, x);
    vn = norm2(v.data());
    if (vn == 0.0) return 0.0;
    for (double& e : v.data()) e /= vn;
  }
  return estimate;
}

double spectral_norm(const ConvDictionary& dict, int iters) {
  const int probe = 64 - 64 % dict.stride();
  return spectral_norm(dict, probe, probe, iters);
}

ConvDictionary dct_dictionary(int filters, int channels, int size, int stride) {
  if (channels != 1 && channels != 3) throw GeometryError("dct_dictionary: C must be 1 or 3");
  ConvDictionary dict(filters, channels, size, stride);
  const int spatial = channels == 1 ? filters : (filters + 2) / 3;
  const int freqs = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spatial))));

  // 1-D overcomplete DCT basis, zero-mean above DC.
  std::vector<std::vector<double>> basis(freqs, std::vector<double>(size));
  for (int k = 0; k < freqs; ++k) {
    for (int i = 0; i < size; ++i) basis[k][i] = std::cos(i * k * std::numbers::pi / freqs);
    if (k > 0) {
      const double mean = std::accumulate(basis[k].begin(), basis[k].end(), 0.0) / size;
      for (double& v : basis[k]) v -= mean;
    }
  }

  std::vector<std::pair<int, int>> order;
  for (int k1 = 0; k1 < freqs; ++k1) {
    for (int k2 = 0; k2 < freqs; ++k2) order.emplace_back(k1, k2);
  }
  std::stable_sort(order.begin(), order.end(), [](auto l, auto r) {
    const int sl = l.first + l.second;
    const int sr = r.first + r.second;
    if (sl != sr) return sl < sr;
    return std::max(l.first, l.second) < std::max(r.first, r.second);
  });

  const double inv3 = 1.0 / std::sqrt(3.0);
  const double inv2 = 1.0 / std::sqrt(2.0);
  const double inv6 = 1.0 / std::sqrt(6.0);
  const double colors[3][3] = {{inv3, inv3, inv3}, {inv2, 0.0, -inv2}, {inv6, -2.0 * inv6, inv6}};

  for (int m = 0; m < filters; ++m) {
    const int j = channels == 1 ? m : m / 3;
    const auto [k1, k2] = order[j];
    for (int c = 0; c < channels; ++c) {
      const double weight = channels == 1 ? 1.0 : colors[m % 3][c];
      for (int a = 0; a < size; ++a) {
        for (int b = 0; b < size; ++b) dict.tap(m, c, a, b) = weight * basis[k1][a] * basis[k2][b];
      }
    }
    const double norm = dict.filter_norm(m);
    if (norm > 0.0) {
      for (double& t : dict.filter(m)) t /= norm;
    }
  }
  return dict;
}

ConvDictionary random_dictionary(int filters, int channels, int size, int stride, std::uint64_t seed) {
  ConvDictionary dict(filters, channels, size, stride);
  Rng rng(seed);
  for (int m = 0; m < filters; ++m) {
    for (double& t : dict.filter(m)) t = rng.normal();
    const double norm = dict.filter_norm(m);
    for (double& t : dict.filter(m)) t /= norm;
  }
  return dict;
}

Image pad_to_multiple(const Image& img, int multiple) {
  if (multiple < 1) throw std::invalid_argument("pad multiple must be positive");
  const int rows = (img.rows() + multiple - 1) / multiple * multiple;
  const int cols = (img.cols() + multiple - 1) / multiple * multiple;
  if (rows == img.rows() && cols == img.cols()) return img;
  Image out(img.channels(), rows, cols);
  for (int c = 0; c < img.channels(); ++c) {
    for (int r = 0; r < rows; ++r) {
      for (int k = 0; k < cols; ++k) out(c, r, k) = img(c, r % img.rows(), k % img.cols());
    }
  }
  return out;
}

Image crop(const Image& img, int rows, int cols) {
  if (rows > img.rows() || cols > img.cols()) throw GeometryError("crop larger than image");
  Image out(img.channels(), rows, cols);
  for (int c = 0; c < img.channels(); ++c) {
    for (int r = 0; r < rows; ++r) {
      std::copy_n(&img(c, r, 0), cols, &out(c, r, 0));
    }
  }
  return out;
}

}  // namespace groupcdl
