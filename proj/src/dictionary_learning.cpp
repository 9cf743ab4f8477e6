#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "groupcdl/rng.hpp"
#include "groupcdl/solver.hpp"

namespace groupcdl {

ConvDictionary filter_gradient(const LatentCode& z, const Image& residual, int filter_size, int stride) {
  if (residual.rows() != z.rows() * stride || residual.cols() != z.cols() * stride) {
    throw GeometryError("filter_gradient: code and residual geometry disagree");
  }
  ConvDictionary grad(z.channels(), residual.channels(), filter_size, stride);
  const int off = grad.center();
  const int rows = residual.rows();
  const int cols = residual.cols();
  const int q2n = z.cols();
  const auto wrap = [](int v, int n) { return ((v % n) + n) % n; };
  const int M = z.channels();
  const int C = residual.channels();

#pragma omp parallel for schedule(static)
  for (int task = 0; task < M * C; ++task) {
    const int m = task / C;
    const int c = task % C;
    for (int a = 0; a < filter_size; ++a) {
      for (int b = 0; b < filter_size; ++b) {
        double acc = 0.0;
        for (int q1 = 0; q1 < z.rows(); ++q1) {
          const double* zrow = &z(m, q1, 0);
          const double* rrow = &residual(c, wrap(stride * q1 + a - off, rows), 0);
          for (int q2 = 0; q2 < q2n; ++q2) acc += zrow[q2] * rrow[wrap(stride * q2 + b - off, cols)];
        }
        grad.tap(m, c, a, b) = acc;
      }
    }
  }
  return grad;
}

namespace {

double data_term(const ConvDictionary& dict, std::span<const Image> data, const std::vector<LatentCode>& codes) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Image x = synthesize(dict, codes[i]);
    const auto xv = x.data();
    const auto yv = data[i].data();
    for (std::size_t p = 0; p < xv.size(); ++p) {
      const double d = xv[p] - yv[p];
      total += 0.5 * d * d;
    }
  }
  return total;
}

double l1_total(const std::vector<LatentCode>& codes) {
  double total = 0.0;
  for (const auto& z : codes) {
    for (double v : z.data()) total += std::abs(v);
  }
  return total;
}

int wrap(int v, int n) { return ((v % n) + n) % n; }

// Sum of squares over the (2h+1)^2 circular window centered at each pixel.
Image window_energy(const Image& y, int h) {
  Image e(1, y.rows(), y.cols());
  for (int c = 0; c < y.channels(); ++c) {
    for (int r = 0; r < y.rows(); ++r) {
      for (int k = 0; k < y.cols(); ++k) {
        double acc = 0.0;
        for (int a = -h; a <= h; ++a) {
          for (int b = -h; b <= h; ++b) {
            const double v = y(c, wrap(r + a, y.rows()), wrap(k + b, y.cols()));
            acc += v * v;
          }
        }
        e(0, r, k) += acc;
      }
    }
  }
  return e;
}

// Greedy patch initialization. A center scores the fraction of the energy in
// its (2P - 1)^2 neighborhood that falls inside its P x P window, which is 1
// for an isolated, centered structure. Only centers with at least a quarter
// of the peak window energy compete. Centers stay P apart and patches
// correlating above 0.9 with a chosen atom are skipped.
ConvDictionary patch_dictionary(std::span<const Image> data, int filters, int filter_size, int stride) {
  ConvDictionary dict(filters, data.front().channels(), filter_size, stride);
  const int off = filter_size / 2;
  std::vector<Image> score;
  std::vector<std::vector<char>> blocked;
  double peak = 0.0;
  for (const auto& y : data) {
    score.push_back(window_energy(y, off));
    for (double v : score.back().data()) peak = std::max(peak, v);
    blocked.emplace_back(y.plane_size(), 0);
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Image outer = window_energy(data[i], filter_size - 1);
    auto sv = score[i].data();
    for (std::size_t p = 0; p < sv.size(); ++p) {
      if (sv[p] < 0.25 * peak || !(outer.data()[p] > 0.0)) {
        blocked[i][p] = 1;
      } else {
        sv[p] /= outer.data()[p];
      }
    }
  }
  std::vector<double> patch(dict.filter_length());
  int chosen = 0;
  while (chosen < filters) {
    std::size_t bi = 0;
    int br = -1;
    int bc = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (int r = 0; r < data[i].rows(); ++r) {
        for (int k = 0; k < data[i].cols(); ++k) {
          if (!blocked[i][static_cast<std::size_t>(r) * data[i].cols() + k] && score[i](0, r, k) > best) {
            best = score[i](0, r, k);
            bi = i;
            br = r;
            bc = k;
          }
        }
      }
    }
    // Candidates exhausted: the remaining atoms stay zero.
    if (br < 0) break;
    const Image& y = data[bi];
    const int cols = y.cols();
    for (int a = 1 - filter_size; a < filter_size; ++a) {
      for (int b = 1 - filter_size; b < filter_size; ++b) {
        blocked[bi][static_cast<std::size_t>(wrap(br + a, y.rows())) * cols + wrap(bc + b, cols)] = 1;
      }
    }
    std::size_t t = 0;
    for (int c = 0; c < y.channels(); ++c) {
      for (int a = 0; a < filter_size; ++a) {
        for (int b = 0; b < filter_size; ++b) patch[t++] = y(c, wrap(br + a - off, y.rows()), wrap(bc + b - off, cols));
      }
    }
    const double n = norm2(patch);
    if (!(n > 0.0)) break;
    for (double& v : patch) v /= n;
    bool duplicate = false;
    for (int m = 0; m < chosen && !duplicate; ++m) duplicate = std::abs(dot(patch, dict.filter(m))) > 0.9;
    if (duplicate) continue;
    std::copy(patch.begin(), patch.end(), dict.filter(chosen).begin());
    ++chosen;
  }
  return dict;
}

}  // namespace

DictionaryLearningResult dictionary_learn(std::span<const Image> data, const DictionaryLearningConfig& config,
                                          std::optional<ConvDictionary> init) {
  if (data.empty()) throw std::invalid_argument("dictionary_learn: empty dataset");
  if (config.outer_iters < 0 || config.inner_iters < 0) throw std::invalid_argument("iteration counts must be >= 0");
  if (!(config.lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  if (!(config.dict_step >= 0.0)) throw std::invalid_argument("dictionary step must be nonnegative");
  if (config.dict_iters < 1) throw std::invalid_argument("dict_iters must be >= 1");

  ConvDictionary dict;
  if (init) {
    dict = std::move(*init);
  } else if (config.init == DictionaryInit::Dct) {
    dict = dct_dictionary(config.filters, config.channels, config.filter_size, config.stride);
  } else if (config.init == DictionaryInit::Patches) {
    dict = patch_dictionary(data, config.filters, config.filter_size, config.stride);
  } else {
    dict = random_dictionary(config.filters, config.channels, config.filter_size, config.stride, config.seed);
  }
  for (const auto& y : data) {
    if (y.channels() != dict.channels()) throw GeometryError("dictionary_learn: channel mismatch");
    if (y.rows() % dict.stride() != 0 || y.cols() % dict.stride() != 0) {
      throw GeometryError("dictionary_learn: training images must be multiples of the stride");
    }
  }

  DictionaryLearningResult result;
  std::vector<LatentCode> codes;
  for (const auto& y : data) codes.emplace_back(dict.filters(), y.rows() / dict.stride(), y.cols() / dict.stride());
  double step = config.dict_step;

  for (int outer = 0; outer < config.outer_iters; ++outer) {
    // Sparse coding with D fixed, warm-started from the previous codes.
    std::map<std::pair<int, int>, double> steps;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double eta = config.eta;
      if (eta <= 0.0) {
        const auto key = std::make_pair(data[i].rows(), data[i].cols());
        auto it = steps.find(key);
        if (it == steps.end()) {
          const double norm = spectral_norm(dict, key.first, key.second, config.power_iters);
          // Power iteration approaches ||D|| from below; keep a small margin.
          it = steps.emplace(key, 1.0 / (1.01 * norm * norm)).first;
        }
        eta = it->second;
      }
      IstaOptions opts;
      opts.warm_start = &codes[i];
      codes[i] = ista_l1(data[i], dict, config.lambda, eta, config.inner_iters, opts).code;
    }

    const double penalty = config.lambda * l1_total(codes);
    double current = data_term(dict, data, codes);

    // Projected gradient steps on the filters.
    for (int it = 0; it < config.dict_iters && step > 0.0; ++it) {
      ConvDictionary grad(dict.filters(), dict.channels(), dict.size(), dict.stride());
      for (std::size_t i = 0; i < data.size(); ++i) {
        Image residual = synthesize(dict, codes[i]);
        auto rv = residual.data();
        const auto yv = data[i].data();
        for (std::size_t p = 0; p < rv.size(); ++p) rv[p] -= yv[p];
        const ConvDictionary g = filter_gradient(codes[i], residual, dict.size(), dict.stride());
        auto gv = grad.taps();
        const auto part = g.taps();
        for (std::size_t p = 0; p < gv.size(); ++p) gv[p] += part[p];
      }
      for (int attempt = 0; attempt < 60; ++attempt) {
        ConvDictionary trial = dict;
        auto tv = trial.taps();
        const auto gv = grad.taps();
        for (std::size_t p = 0; p < tv.size(); ++p) tv[p] -= step * gv[p];
        trial = project_constraint(std::move(trial));
        double linear = 0.0;
        double move = 0.0;
        const auto dv = dict.taps();
        for (std::size_t p = 0; p < tv.size(); ++p) {
          const double d = tv[p] - dv[p];
          linear += gv[p] * d;
          move += d * d;
        }
        const double candidate = data_term(trial, data, codes);
        if (candidate <= current + linear + move / (2.0 * step)) {
          if (candidate <= current) {
            dict = std::move(trial);
            current = candidate;
          }
          step *= 2.0;
          break;
        }
        step *= 0.5;
      }
    }
    result.objective.push_back(current + penalty);
  }
  result.dictionary = std::move(dict);
  return result;
}

std::vector<double> atom_recovery(const ConvDictionary& learned, const ConvDictionary& reference) {
  if (learned.filter_length() != reference.filter_length()) {
    throw GeometryError("atom_recovery: filters differ in shape");
  }
  std::vector<double> best(reference.filters(), 0.0);
  for (int r = 0; r < reference.filters(); ++r) {
    const double nr = reference.filter_norm(r);
    for (int l = 0; l < learned.filters(); ++l) {
      const double nl = learned.filter_norm(l);
      if (nr == 0.0 || nl == 0.0) continue;
      best[r] = std::max(best[r], std::abs(dot(reference.filter(r), learned.filter(l))) / (nr * nl));
    }
  }
  return best;
}

PlantedProblem planted_problem(int images, int rows, int cols, int filters, int filter_size, double density,
                               std::uint64_t seed) {
  Rng rng(seed);
  PlantedProblem problem{random_dictionary(filters, 1, filter_size, 1, rng.next_u64()), {}};
  for (int i = 0; i < images; ++i) {
    LatentCode z(filters, rows, cols);
    for (double& v : z.data()) {
      if (rng.uniform() < density) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(1.0, 2.0);
    }
    problem.images.push_back(synthesize(problem.truth, z));
  }
  return problem;
}

}  // namespace groupcdl
