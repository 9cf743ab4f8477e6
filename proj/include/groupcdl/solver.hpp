#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groupcdl/adjacency.hpp"
#include "groupcdl/conv.hpp"
#include "groupcdl/planar.hpp"
#include "groupcdl/prox.hpp"

namespace groupcdl {

enum class SimilarityKind { Distance, Dot };

std::string to_string(SimilarityKind kind);
SimilarityKind similarity_from_string(const std::string& name);

/// One unrolled layer: r = A^T (B z - y), z <- GT_tau(z - r).
/// `analysis` is applied through analyze(), so it stores the filters of A.
struct LayerParams {
  ConvDictionary analysis;
  ConvDictionary synthesis;
  ThresholdParams thresholds;

  bool operator==(const LayerParams& o) const {
    return analysis == o.analysis && synthesis == o.synthesis && thresholds.tau0 == o.thresholds.tau0 &&
           thresholds.tau1 == o.thresholds.tau1 && thresholds.adaptive == o.thresholds.adaptive;
  }
};

/// Full parameter bundle of the group-sparse forward pass.
struct ModelParams {
  ConvDictionary dictionary;      // D
  std::vector<LayerParams> layers;  // K entries
  PixelTransform wtheta;          // M_h x M
  PixelTransform wphi;            // M_h x M
  PixelTransform walpha;          // M x M_h
  PixelTransform wbeta;           // M x M_h, nonnegative
  double gamma = 0.8;
  int update_period = 5;          // adjacency refresh period (Delta K)
  int window = 35;                // subband window side W
  SimilarityKind similarity = SimilarityKind::Distance;
  bool tied = false;              // A^(k) = eta D, B^(k) = D

  int layer_count() const noexcept { return static_cast<int>(layers.size()); }
  int subbands() const noexcept { return dictionary.filters(); }
  int channels() const noexcept { return dictionary.channels(); }
  int stride() const noexcept { return dictionary.stride(); }
  int compressed_subbands() const noexcept { return walpha.cols(); }

  /// Throws GeometryError / std::invalid_argument on any broken invariant.
  void validate() const;

  bool operator==(const ModelParams&) const = default;
};

/// Hyperparameters of the published architectures.
struct Architecture {
  int layers;
  int subbands;
  int compressed_subbands;
  int window;
  int stride = 2;
  int filter_size = 7;
  int update_period = 5;
  int channels;
};

Architecture grayscale_architecture();
Architecture color_architecture();

/// ISTA-equivalent parameters built from a fixed dictionary.
/// Defaults are the desk-scale classical setup: stride-1 DCT dictionary, 15
/// layers, thresholds tau = 0.15 sigma/255 per subband with the DC subband
/// left unthresholded.
struct ClassicalConfig {
  int channels = 1;
  int subbands = 49;
  int filter_size = 7;
  int stride = 1;
  int layers = 15;
  int window = 7;
  int update_period = 5;
  double tau0 = 0.0;                // threshold offset (lambda * eta)
  double tau1 = 0.15;               // slope in sigma_hat / 255
  int free_subbands = 1;            // leading subbands (DCT lowpass) left unthresholded
  double gamma = 0.8;
  double similarity_scale = 1.0;    // W_theta = W_phi = sqrt(scale) I
  SimilarityKind similarity = SimilarityKind::Distance;
  bool spectral_normalize = true;   // divide D by its spectral norm
  int power_iters = 100;
  int probe_size = 64;             // grid used for the spectral norm
};

/// Classical setup for noise level sigma (0..255 scale) and window W. W = 1
/// gives l1 soft-thresholding with tau = 0.3 sigma/255; W > 1 gives group
/// thresholding with tau = 0.15 sigma/255 and distance similarities scaled
/// by (255 / sigma)^2.
ClassicalConfig classical_config(double sigma, int window, int channels = 1);

/// Tied classical parameters: A^(k) = eta D, B^(k) = D, eta = 1/||D||^2 and
/// identity-like pixel transforms (M_h = M).
ModelParams classical_params(const ClassicalConfig& config);
ModelParams classical_params(const ClassicalConfig& config, ConvDictionary dictionary);

/// Step size the classical builder used (1 / ||D||^2 at the probe grid).
double classical_step(const ModelParams& params);

struct StageTimes {
  double similarity = 0.0;
  double matvec = 0.0;
  double conv = 0.0;
  double threshold = 0.0;
};

struct SolverReport {
  std::vector<double> objective;
  std::optional<double> psnr;
  std::optional<double> ssim;
  StageTimes seconds;
  std::vector<LatentCode> iterates;  // z^(1) .. z^(K) when requested
};

struct IstaOptions {
  const LatentCode* warm_start = nullptr;
  bool keep_iterates = false;
};

struct IstaResult {
  LatentCode code;
  SolverReport report;
};

/// ISTA on 1/2 ||y - D z||^2 + lambda ||z||_1 with step eta. The objective is
/// recorded at z^(0) and after every iteration.
IstaResult ista_l1(const Image& y, const ConvDictionary& dict, double lambda, double eta, int iters,
                   const IstaOptions& options = {});

/// 1/2 ||y - D z||^2 + lambda ||z||_1.
double l1_objective(const Image& y, const ConvDictionary& dict, const LatentCode& z, double lambda);

struct ForwardOptions {
  bool keep_iterates = false;
  /// When set, records 1/2 ||y~ - D z||^2 + lambda psi_Gamma(z) after each layer.
  std::optional<double> objective_lambda;
  /// Layer whose adjacency is captured (0 = initial identity).
  std::optional<int> capture_adjacency_layer;
};

struct ForwardResult {
  Image estimate;
  SolverReport report;
  std::optional<SparseAdjacency> captured_adjacency;
  std::vector<double> thresholds_used;  // flattened K x M, after noise adaptation
};

/// The group-sparse unrolled forward pass: mean removal, K thresholded
/// gradient layers with an adjacency refreshed at layer 1 and whenever
/// (k + 1) mod update_period == 0 (blended with gamma), then synthesis with D
/// and mean restoration. Inputs whose size is not a multiple of the stride
/// are circularly padded and the estimate is cropped back. sigma_hat is on
/// the 0..255 scale; thresholds are tau0 + (sigma_hat / 255) tau1.
ForwardResult groupcdl_forward(const Image& y, double sigma_hat, const ModelParams& params,
                               const ForwardOptions& options = {});

/// True when layer k rebuilds the adjacency.
bool refreshes_adjacency(int k, int update_period);

/// Dct: ODCT atoms. Random: seeded unit-norm Gaussian filters. Patches:
/// normalized data patches at isolated energy peaks, near-duplicates skipped.
enum class DictionaryInit { Dct, Random, Patches };

struct DictionaryLearningConfig {
  double lambda = 0.02;
  double eta = 0.0;          // ISTA step; <= 0 selects 1/||D||^2 each outer iteration
  int inner_iters = 50;
  int outer_iters = 10;
  int filters = 8;           // M
  int filter_size = 7;       // P
  int stride = 1;
  int channels = 1;
  double dict_step = 1.0;    // initial filter step; 0 freezes D
  int dict_iters = 1;        // projected-gradient filter steps per outer iteration
  DictionaryInit init = DictionaryInit::Dct;
  std::uint64_t seed = 1;
  int power_iters = 50;
};

struct DictionaryLearningResult {
  ConvDictionary dictionary;
  std::vector<double> objective;  // summed objective after each outer iteration
};

/// Alternating minimization: warm-started ISTA per image with D fixed, then
/// dict_iters projected-gradient steps on the filters (backtracking by halving).
DictionaryLearningResult dictionary_learn(std::span<const Image> data, const DictionaryLearningConfig& config,
                                          std::optional<ConvDictionary> init = std::nullopt);

/// Gradient of sum 1/2 ||D z - y||^2 w.r.t. the filter taps, given the
/// residual D z - y.
ConvDictionary filter_gradient(const LatentCode& z, const Image& residual, int filter_size, int stride);

/// Best absolute normalized correlation of each reference atom with any atom
/// of `learned`.
std::vector<double> atom_recovery(const ConvDictionary& learned, const ConvDictionary& reference);

struct PlantedProblem {
  ConvDictionary truth;
  std::vector<Image> images;
};

/// Images y = D z with random unit-norm filters and sparse +/-[1,2] codes.
PlantedProblem planted_problem(int images, int rows, int cols, int filters, int filter_size, double density,
                               std::uint64_t seed);

}  // namespace groupcdl
