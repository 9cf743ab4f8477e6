#include "groupcdl/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "groupcdl/image.hpp"

namespace groupcdl {

std::string to_string(SimilarityKind kind) { return kind == SimilarityKind::Distance ? "distance" : "dot"; }

SimilarityKind similarity_from_string(const std::string& name) {
  if (name == "distance") return SimilarityKind::Distance;
  if (name == "dot") return SimilarityKind::Dot;
  throw std::invalid_argument("unknown similarity kind '" + name + "' (expected distance or dot)");
}

void ModelParams::validate() const {
  const int m = subbands();
  if (m < 1) throw GeometryError("model has an empty dictionary");
  for (const auto& layer : layers) {
    if (!layer.analysis.same_geometry(dictionary) || !layer.synthesis.same_geometry(dictionary)) {
      throw GeometryError("layer operators must share the dictionary geometry");
    }
    layer.thresholds.validate(m);
  }
  if (wtheta.cols() != m || wphi.cols() != m || wtheta.rows() != wphi.rows()) {
    throw GeometryError("W_theta and W_phi must both be M_h x M");
  }
  if (walpha.rows() != m || wbeta.rows() != m || walpha.cols() != wbeta.cols()) {
    throw GeometryError("W_alpha and W_beta must both be M x M_h");
  }
  const auto beta = wbeta.entries();
  if (std::any_of(beta.begin(), beta.end(), [](double v) { return !(v >= 0.0); })) {
    throw std::invalid_argument("W_beta must be entrywise nonnegative");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (update_period < 1) throw std::invalid_argument("adjacency update period must be >= 1");
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("window side must be a positive odd integer");
  const auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(dictionary.taps())) throw std::invalid_argument("dictionary has non-finite taps");
}

Architecture grayscale_architecture() { return Architecture{30, 169, 64, 35, 2, 7, 5, 1}; }

Architecture color_architecture() { return Architecture{24, 96, 48, 35, 2, 7, 5, 3}; }

ClassicalConfig classical_config(double sigma, int window, int channels) {
  if (!(sigma > 0.0)) throw std::invalid_argument("classical setup needs a positive noise level");
  ClassicalConfig config;
  config.channels = channels;
  config.window = window;
  config.tau1 = window == 1 ? 0.3 : 0.15;
  const double unit = sigma / 255.0;
  config.similarity_scale = 1.0 / (unit * unit);
  return config;
}

ModelParams classical_params(const ClassicalConfig& config) {
  return classical_params(config, dct_dictionary(config.subbands, config.channels, config.filter_size, config.stride));
}

ModelParams classical_params(const ClassicalConfig& config, ConvDictionary dictionary) {
  const int probe = config.probe_size - config.probe_size % dictionary.stride();
  // Power iteration is linear in D, so a normalized dictionary has norm 1
  // under the same probe and seed.
  const double norm = spectral_norm(dictionary, probe, probe, config.power_iters);
  if (config.spectral_normalize && norm > 0.0) dictionary = dictionary.scaled(1.0 / norm);
  const double eta = config.spectral_normalize || !(norm > 0.0) ? 1.0 : 1.0 / (norm * norm);
  const int m = dictionary.filters();

  ModelParams params;
  params.dictionary = dictionary;
  const ConvDictionary analysis = dictionary.scaled(eta);
  for (int k = 0; k < config.layers; ++k) {
    ThresholdParams th{std::vector<double>(m, config.tau0), std::vector<double>(m, config.tau1), true};
    for (int j = 0; j < std::min(config.free_subbands, m); ++j) th.tau0[j] = th.tau1[j] = 0.0;
    params.layers.push_back(LayerParams{analysis, dictionary, std::move(th)});
  }
  const double root = std::sqrt(config.similarity_scale);
  params.wtheta = PixelTransform::identity(m, root);
  params.wphi = PixelTransform::identity(m, root);
  params.walpha = PixelTransform::identity(m);
  params.wbeta = PixelTransform::identity(m, 1.0, true);
  params.gamma = config.gamma;
  params.update_period = config.update_period;
  params.window = config.window;
  params.similarity = config.similarity;
  params.tied = true;
  params.validate();
  return params;
}

double classical_step(const ModelParams& params) {
  if (params.layers.empty()) return 0.0;
  return norm2(params.layers.front().analysis.taps()) / norm2(params.dictionary.taps());
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Image difference(const Image& a, const Image& b) {
  Image out = a;
  const auto db = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= db[i];
  return out;
}

double half_sq_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return 0.5 * acc;
}

double l1_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += std::abs(x);
  return acc;
}

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

double l1_objective(const Image& y, const ConvDictionary& dict, const LatentCode& z, double lambda) {
  return half_sq_norm(difference(y, synthesize(dict, z)).data()) + lambda * l1_norm(z.data());
}

IstaResult ista_l1(const Image& y, const ConvDictionary& dict, double lambda, double eta, int iters,
                   const IstaOptions& options) {
  if (y.channels() != dict.channels()) throw GeometryError("ista_l1: image/dictionary channel mismatch");
  const int s = dict.stride();
  if (y.rows() % s != 0 || y.cols() % s != 0) {
    throw GeometryError("ista_l1: image dims must be multiples of the stride");
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("ista_l1: lambda must be nonnegative");
  if (!(eta > 0.0)) throw std::invalid_argument("ista_l1: eta must be positive");
  if (iters < 0) throw std::invalid_argument("ista_l1: iters must be nonnegative");

  IstaResult result;
  LatentCode& z = result.code;
  if (options.warm_start) {
    if (options.warm_start->channels() != dict.filters() || options.warm_start->rows() != y.rows() / s ||
        options.warm_start->cols() != y.cols() / s) {
      throw GeometryError("ista_l1: warm start has the wrong shape");
    }
    z = *options.warm_start;
  } else {
    z = LatentCode(dict.filters(), y.rows() / s, y.cols() / s);
  }
  const std::vector<double> tau(dict.filters(), lambda * eta);
  auto& report = result.report;

  for (int it = 0; it <= iters; ++it) {
    auto t0 = Clock::now();
    const Image residual = difference(synthesize(dict, z), y);
    report.seconds.conv += seconds_since(t0);
    report.objective.push_back(half_sq_norm(residual.data()) + lambda * l1_norm(z.data()));
    if (it == iters) break;

    t0 = Clock::now();
    LatentCode step = analyze(dict, residual);
    report.seconds.conv += seconds_since(t0);
    auto sv = step.data();
    const auto zv = z.data();
    for (std::size_t i = 0; i < sv.size(); ++i) sv[i] = zv[i] - eta * sv[i];

    t0 = Clock::now();
    z = soft_threshold(step, tau);
    report.seconds.threshold += seconds_since(t0);
    if (!finite(z.data())) throw NumericalError("ista_l1: non-finite code at iteration " + std::to_string(it + 1));
    if (options.keep_iterates) report.iterates.push_back(z);
  }
  return result;
}

bool refreshes_adjacency(int k, int update_period) {
  if (k == 0) return false;  // Gamma^(0) = I
  if (k == 1) return true;
  return (k + 1) % update_period == 0;
}

ForwardResult groupcdl_forward(const Image& y, double sigma_hat, const ModelParams& params,
                               const ForwardOptions& options) {
  params.validate();
  if (y.channels() != params.channels()) {
    throw GeometryError("image has " + std::to_string(y.channels()) + " channels, model expects " +
                        std::to_string(params.channels()));
  }
  if (y.empty()) throw GeometryError("empty input image");
  if (!(sigma_hat >= 0.0)) throw std::invalid_argument("noise level must be nonnegative");

  const int s = params.stride();
  const std::vector<double> mean = channel_means(y);
  Image centered = pad_to_multiple(y, s);
  for (int c = 0; c < centered.channels(); ++c) {
    for (double& v : centered.plane(c)) v -= mean[c];
  }

  const int q1 = centered.rows() / s;
  const int q2 = centered.cols() / s;
  const int m = params.subbands();
  const int layers = params.layer_count();

  ForwardResult result;
  auto& report = result.report;
  LatentCode z(m, q1, q2);

  std::vector<std::vector<double>> taus;
  for (const auto& layer : params.layers) {
    taus.push_back(layer.thresholds.at_noise_level(sigma_hat / 255.0));
    result.thresholds_used.insert(result.thresholds_used.end(), taus.back().begin(), taus.back().end());
  }

  const WindowGeometry geom = WindowGeometry::make(q1, q2, params.window);
  SparseAdjacency gamma_prev = identity_adjacency(geom);
  if (options.capture_adjacency_layer && *options.capture_adjacency_layer == 0) {
    result.captured_adjacency = gamma_prev;
  }

  const auto similarity = [&](const LatentCode& code) {
    return params.similarity == SimilarityKind::Distance ? similarity_distance(code, params.wtheta, params.wphi, geom)
                                                         : similarity_dot(code, params.wtheta, params.wphi, geom);
  };

  for (int k = 0; k < layers; ++k) {
    const auto& layer = params.layers[k];
    if (refreshes_adjacency(k, params.update_period)) {
      auto t0 = Clock::now();
      SparseAdjacency fresh = row_softmax(similarity(z));
      gamma_prev = k == 1 ? std::move(fresh) : blend(gamma_prev, fresh, params.gamma);
      report.seconds.similarity += seconds_since(t0);
    }
    if (options.capture_adjacency_layer && *options.capture_adjacency_layer == k + 1) {
      result.captured_adjacency = gamma_prev;
    }

    auto t0 = Clock::now();
    const Image residual = difference(synthesize(layer.synthesis, z), centered);
    LatentCode step = analyze(layer.analysis, residual);
    report.seconds.conv += seconds_since(t0);
    auto sv = step.data();
    const auto zv = z.data();
    for (std::size_t i = 0; i < sv.size(); ++i) sv[i] = zv[i] - sv[i];

    t0 = Clock::now();
    double matvec = 0.0;
    z = group_threshold_learned(step, taus[k], gamma_prev, params.walpha, params.wbeta, &matvec);
    report.seconds.threshold += seconds_since(t0) - matvec;
    report.seconds.matvec += matvec;

    if (!finite(z.data())) throw NumericalError("non-finite latent code after layer " + std::to_string(k));
    if (options.keep_iterates) report.iterates.push_back(z);
    if (options.objective_lambda) {
      report.objective.push_back(half_sq_norm(difference(centered, synthesize(params.dictionary, z)).data()) +
                                 *options.objective_lambda * group_sparsity_norm(z, gamma_prev));
    }
  }

  auto t0 = Clock::now();
  Image estimate = synthesize(params.dictionary, z);
  report.seconds.conv += seconds_since(t0);
  estimate = crop(estimate, y.rows(), y.cols());
  for (int c = 0; c < estimate.channels(); ++c) {
    for (double& v : estimate.plane(c)) v += mean[c];
  }
  if (!all_finite(estimate)) throw NumericalError("non-finite output image");
  result.estimate = std::move(estimate);
  return result;
}

}  // namespace groupcdl
