#include "groupcdl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "groupcdl/drivers.hpp"
#include "groupcdl/errors.hpp"
#include "groupcdl/image.hpp"
#include "groupcdl/image_io.hpp"
#include "groupcdl/parallel.hpp"
#include "groupcdl/params_io.hpp"
#include "groupcdl/solver.hpp"

namespace groupcdl::cli {
namespace fs = std::filesystem;

namespace {

/// Thrown for argument combinations CLI11 cannot express; maps to exit 1.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Common {
  std::uint64_t seed = 0;
  int threads = 0;
};

struct ModelArgs {
  std::string weights;
  bool classical = false;
  std::optional<double> lambda;
  int iters = 0;
  int window = 0;
  int update_period = 0;
  std::string similarity;
};

struct DenoiseArgs {
  std::string input;
  std::string output;
  double sigma = -1.0;
  bool add_noise = false;
  std::string strategy = "sw";
  std::optional<int> stride;
  int ow_side = 0;
  bool ow_parallel = false;
  std::string reference;
  double memory_cap_gib = 8.0;
  int bit_depth = 8;
};

struct LearnArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string objective_csv;
  int filters = 8;
  int size = 7;
  int stride = 1;
  double lambda = 0.02;
  int inner = 50;
  int outer = 10;
  double dict_step = 1.0;
  int dict_iters = 1;
  std::string init = "dct";
  int layers = 15;
  int window = 7;
  bool planted = false;
  int planted_images = 48;
  int planted_size = 32;
  double planted_density = 0.001;
};

struct BenchArgs {
  std::vector<std::string> inputs;
  double sigma = 25.0;
  std::vector<int> grid_w{7};
  std::vector<int> grid_sw;
  int repeats = 3;
  bool ow_parallel = false;
  std::string csv;
};

struct DumpArgs {
  std::string input;
  std::string prefix;
  double sigma = -1.0;
  bool add_noise = false;
  std::optional<int> layer;
  std::vector<std::string> pixels;
};

void add_model_options(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--weights", m.weights, "model parameter file")->check(CLI::ExistingFile);
  cmd->add_flag("--classical", m.classical, "DCT dictionary with tied classical parameters");
  cmd->add_option("--lambda", m.lambda, "classical l1 weight: fixed thresholds lambda * eta, not noise-adaptive")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--iters", m.iters, "classical layer count K")->check(CLI::PositiveNumber);
  cmd->add_option("--window", m.window, "subband window W (odd)")->check(CLI::PositiveNumber);
  cmd->add_option("--update-period", m.update_period, "adjacency update period")->check(CLI::PositiveNumber);
  cmd->add_option("--similarity", m.similarity, "distance or dot")->check(CLI::IsMember({"distance", "dot"}));
}

std::vector<fs::path> collect_images(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (entry.is_regular_file() && (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm")) {
          found.push_back(entry.path());
        }
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

std::vector<Image> load_images(const std::vector<fs::path>& files) {
  std::vector<Image> images;
  for (const auto& f : files) images.push_back(read_image(f));
  if (images.empty()) throw UsageError("no training images found");
  for (const auto& img : images) {
    if (img.channels() != images.front().channels()) throw UsageError("training images mix channel counts");
  }
  return images;
}

ModelParams build_model(const ModelArgs& m, double sigma, int channels) {
  if (!m.weights.empty() && m.classical) throw UsageError("--weights and --classical are exclusive");
  if (m.weights.empty() && !m.classical) throw UsageError("choose a model with --weights or --classical");
  ModelParams params;
  if (!m.weights.empty()) {
    if (m.lambda || m.iters > 0) throw UsageError("--lambda and --iters only apply to --classical");
    params = load_params(m.weights);
    if (m.window > 0) params.window = m.window;
  } else {
    if (!m.lambda && !(sigma > 0.0)) throw UsageError("classical mode needs --sigma > 0 or an explicit --lambda");
    ClassicalConfig config = classical_config(sigma > 0.0 ? sigma : 25.0, m.window > 0 ? m.window : 7, channels);
    if (m.iters > 0) config.layers = m.iters;
    if (m.lambda) {
      config.tau0 = *m.lambda;
      config.tau1 = 0.0;
    }
    params = classical_params(config);
    if (m.lambda) {
      const double eta = classical_step(params);
      for (auto& layer : params.layers) {
        for (double& t : layer.thresholds.tau0) t *= eta;
      }
    }
  }
  if (m.update_period > 0) params.update_period = m.update_period;
  if (!m.similarity.empty()) params.similarity = similarity_from_string(m.similarity);
  params.validate();
  return params;
}

Image noisy_input(const std::string& path, bool add_noise, double sigma, std::uint64_t seed) {
  Image x = read_image(path);
  return add_noise ? add_awgn(x, NoiseSpec{sigma, seed}) : x;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

int cmd_denoise(const DenoiseArgs& a, const ModelArgs& m, const Common& c, std::ostream& out) {
  if (!(a.sigma >= 0.0)) throw UsageError("--sigma must be >= 0");
  if (a.strategy == "ow" && a.stride && *a.stride < 1) throw UsageError("--stride must be >= 1");
  if (a.bit_depth != 8 && a.bit_depth != 16) throw UsageError("--bit-depth must be 8 or 16");

  const Image y = noisy_input(a.input, a.add_noise, a.sigma, c.seed);
  const ModelParams params = build_model(m, a.sigma, y.channels());

  DenoiseResult result;
  if (a.strategy == "sw") {
    SwOptions opts;
    opts.memory_cap_bytes = static_cast<std::uint64_t>(a.memory_cap_gib * double(1ull << 30));
    result = denoise_sw(y, a.sigma, params, opts);
  } else {
    OWConfig ow;
    ow.window_side = a.ow_side > 0 ? a.ow_side : params.stride() * params.window;
    ow.stride = a.stride ? *a.stride : std::max(1, ow.window_side / 2);
    if (ow.stride > ow.window_side) throw UsageError("--stride must not exceed the OW window side");
    ow.mode = a.ow_parallel ? OwMode::Parallel : OwMode::Serial;
    result = denoise_ow(y, a.sigma, params, ow);
  }
  write_image(a.output, result.image, a.bit_depth);

  out << "wrote " << a.output << " (" << a.strategy << ", " << fixed(result.record.seconds, 3) << " s)\n";
  if (!a.reference.empty()) {
    const Image ref = read_image(a.reference);
    if (!ref.same_shape(y)) throw GeometryError("reference shape differs from the input");
    const Image est = clip01(result.image);
    out << "input  psnr " << fixed(psnr(clip01(y), ref), 2) << " dB  ssim " << fixed(ssim(clip01(y), ref), 4) << "\n";
    out << "output psnr " << fixed(psnr(est, ref), 2) << " dB  ssim " << fixed(ssim(est, ref), 4) << "\n";
  }
  return kExitOk;
}

int cmd_learn(const LearnArgs& a, const Common& c, std::ostream& out) {
  if (a.out.empty() && !a.planted) throw UsageError("--out is required");
  if (a.init != "dct" && a.init != "random" && a.init != "patches") {
    throw UsageError("--init must be dct, random or patches");
  }

  DictionaryLearningConfig config;
  config.lambda = a.lambda;
  config.inner_iters = a.inner;
  config.outer_iters = a.outer;
  config.filters = a.filters;
  config.filter_size = a.size;
  config.stride = a.stride;
  config.dict_step = a.dict_step;
  config.dict_iters = a.dict_iters;
  config.init = a.init == "dct" ? DictionaryInit::Dct
                : a.init == "random" ? DictionaryInit::Random
                                     : DictionaryInit::Patches;
  config.seed = c.seed;

  std::optional<PlantedProblem> planted;
  std::vector<Image> images;
  if (a.planted) {
    if (!a.inputs.empty()) throw UsageError("--planted takes no input images");
    if (a.stride != 1) throw UsageError("--planted requires --stride 1");
    planted = planted_problem(a.planted_images, a.planted_size, a.planted_size, a.filters, a.size, a.planted_density,
                              c.seed);
    images = planted->images;
  } else {
    images = load_images(collect_images(a.inputs));
  }
  config.channels = images.front().channels();

  const DictionaryLearningResult learned = dictionary_learn(images, config);

  if (!a.objective_csv.empty()) {
    std::ofstream csv(a.objective_csv);
    if (!csv) throw IoError("cannot write " + a.objective_csv);
    csv << "outer,objective\n" << std::setprecision(17);
    for (std::size_t i = 0; i < learned.objective.size(); ++i) csv << i << ',' << learned.objective[i] << '\n';
    if (!csv) throw IoError("cannot write " + a.objective_csv);
  }
  if (!learned.objective.empty()) {
    out << "objective " << learned.objective.front() << " -> " << learned.objective.back() << " over "
        << learned.objective.size() << " outer iterations\n";
  }

  if (planted) {
    const auto corr = atom_recovery(learned.dictionary, planted->truth);
    const auto hits = std::count_if(corr.begin(), corr.end(), [](double v) { return v >= 0.95; });
    out << "recovery";
    for (double v : corr) out << ' ' << fixed(v, 3);
    out << "\nrecovered " << hits << "/" << corr.size() << " atoms at correlation >= 0.95\n";
  }

  if (!a.out.empty()) {
    ClassicalConfig cc;
    cc.channels = config.channels;
    cc.subbands = a.filters;
    cc.filter_size = a.size;
    cc.stride = a.stride;
    cc.layers = a.layers;
    cc.window = a.window;
    cc.tau0 = a.lambda;
    cc.tau1 = 0.0;
    cc.free_subbands = 0;
    cc.spectral_normalize = false;
    ModelParams params = classical_params(cc, learned.dictionary);
    const double eta = classical_step(params);
    for (auto& layer : params.layers) {
      for (double& t : layer.thresholds.tau0) t *= eta;
    }
    save_params(params, a.out);
    out << "wrote " << a.out << "\n";
  }
  return kExitOk;
}

int cmd_bench(const BenchArgs& a, const ModelArgs& m, const Common& c, std::ostream& out) {
  if (!(a.sigma > 0.0)) throw UsageError("--sigma must be > 0");
  if (a.grid_w.empty()) throw UsageError("--grid-w must not be empty");
  if (a.repeats < 1) throw UsageError("--repeats must be >= 1");
  for (int s : a.grid_sw) {
    if (s < 1) throw UsageError("--grid-sw entries must be >= 1");
  }
  const std::vector<Image> images = load_images(collect_images(a.inputs));

  ModelArgs model = m;
  if (model.window == 0) model.window = a.grid_w.front();
  const ModelParams params = build_model(model, a.sigma, images.front().channels());

  BenchGrid grid;
  grid.windows = a.grid_w;
  grid.strides = a.grid_sw;
  grid.sigma = a.sigma;
  grid.seed = c.seed;
  grid.repeats = a.repeats;
  grid.mode = a.ow_parallel ? OwMode::Parallel : OwMode::Serial;
  grid.include_ow = !a.grid_sw.empty();
  const auto records = bench_suite(images, params, grid);

  if (a.csv.empty()) {
    write_bench_csv(out, records);
  } else {
    std::ofstream csv(a.csv);
    if (!csv) throw IoError("cannot write " + a.csv);
    write_bench_csv(csv, records);
    if (!csv) throw IoError("cannot write " + a.csv);
  }
  out << bench_summary(records);
  return kExitOk;
}

std::pair<int, int> parse_pixel(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw UsageError("--pixel expects r,c: " + text);
  try {
    std::size_t used_r = 0;
    std::size_t used_c = 0;
    const int r = std::stoi(text.substr(0, comma), &used_r);
    const int col = std::stoi(text.substr(comma + 1), &used_c);
    if (used_r != comma || used_c != text.size() - comma - 1) throw UsageError("--pixel expects r,c: " + text);
    return {r, col};
  } catch (const std::logic_error&) {
    throw UsageError("--pixel expects r,c: " + text);
  }
}

int cmd_dump(const DumpArgs& a, const ModelArgs& m, const Common& c, std::ostream& out) {
  if (!(a.sigma >= 0.0)) throw UsageError("--sigma must be >= 0");
  const Image y = noisy_input(a.input, a.add_noise, a.sigma, c.seed);
  const ModelParams params = build_model(m, a.sigma, y.channels());
  const int layer = a.layer.value_or(params.layer_count());
  if (layer < 0 || layer > params.layer_count()) {
    throw UsageError("--layer must be in [0, " + std::to_string(params.layer_count()) + "]");
  }
  const int s = params.stride();
  const int q1 = (y.rows() + s - 1) / s;
  const int q2 = (y.cols() + s - 1) / s;

  std::vector<std::pair<int, int>> pixels;
  for (const auto& p : a.pixels) pixels.push_back(parse_pixel(p));
  if (pixels.empty()) pixels.emplace_back(q1 / 2, q2 / 2);
  for (const auto& [r, col] : pixels) {
    if (r < 0 || r >= q1 || col < 0 || col >= q2) {
      throw UsageError("pixel " + std::to_string(r) + "," + std::to_string(col) + " outside the " +
                       std::to_string(q1) + "x" + std::to_string(q2) + " subband grid");
    }
  }

  ForwardOptions opts;
  opts.capture_adjacency_layer = layer;
  const ForwardResult fr = groupcdl_forward(y, a.sigma, params, opts);
  const SparseAdjacency& g = *fr.captured_adjacency;
  const int w = g.geometry().window;

  out << std::setprecision(12);
  for (const auto& [r, col] : pixels) {
    const auto row = g.row(static_cast<std::size_t>(r) * q2 + col);
    double sum = 0.0;
    double peak = 0.0;
    for (double v : row) {
      sum += v;
      peak = std::max(peak, v);
    }
    Image tile(1, w, w);
    for (int t = 0; t < w * w; ++t) tile.plane(0)[t] = peak > 0.0 ? row[t] / peak : 0.0;
    const std::string path =
        a.prefix + "_l" + std::to_string(layer) + "_r" + std::to_string(r) + "_c" + std::to_string(col) + ".png";
    write_image(path, tile);
    out << "pixel " << r << "," << col << " layer " << layer << " row_sum " << sum << " -> " << path << "\n";
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Group-sparse convolutional dictionary learning denoiser"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI/TOML file; keys of a command live under [command]; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);

  Common common;
  app.add_option("--seed", common.seed, "seed for every random draw of the command");
  app.add_option("--threads", common.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  DenoiseArgs den;
  ModelArgs den_model;
  auto* denoise = app.add_subcommand("denoise", "denoise one image");
  denoise->add_option("input", den.input, "noisy image (or clean with --add-noise)")->required();
  denoise->add_option("output", den.output, "denoised image path")->required();
  denoise->add_option("--sigma", den.sigma, "noise level on the 0..255 scale")->required();
  denoise->add_flag("--add-noise", den.add_noise, "add AWGN of --sigma (seeded by --seed) before denoising");
  denoise->add_option("--strategy", den.strategy, "sw or ow")->check(CLI::IsMember({"sw", "ow"}));
  denoise->add_option("--stride", den.stride, "OW window stride s_w in pixels");
  denoise->add_option("--ow-side", den.ow_side, "OW crop side in pixels (default s_c * W)")->check(CLI::PositiveNumber);
  denoise->add_flag("--ow-parallel", den.ow_parallel, "process OW crops concurrently");
  denoise->add_option("--reference", den.reference, "clean image for PSNR/SSIM");
  denoise->add_option("--memory-cap", den.memory_cap_gib, "adjacency memory cap in GiB")->check(CLI::PositiveNumber);
  denoise->add_option("--bit-depth", den.bit_depth, "8 or 16");
  add_model_options(denoise, den_model);

  LearnArgs learn;
  auto* learn_cmd = app.add_subcommand("learn-dict", "learn a convolutional dictionary");
  learn_cmd->add_option("inputs", learn.inputs, "training images or directories");
  learn_cmd->add_option("--out", learn.out, "model parameter file to write");
  learn_cmd->add_option("--objective-csv", learn.objective_csv, "objective trace (outer,objective)");
  learn_cmd->add_option("--filters", learn.filters, "M")->check(CLI::PositiveNumber);
  learn_cmd->add_option("--size", learn.size, "filter side P")->check(CLI::PositiveNumber);
  learn_cmd->add_option("--stride", learn.stride, "conv stride s_c")->check(CLI::PositiveNumber);
  learn_cmd->add_option("--lambda", learn.lambda, "l1 weight")->check(CLI::NonNegativeNumber);
  learn_cmd->add_option("--inner", learn.inner, "ISTA iterations per outer iteration")->check(CLI::PositiveNumber);
  learn_cmd->add_option("--outer", learn.outer, "outer iterations (0 writes the initial dictionary)")
      ->check(CLI::NonNegativeNumber);
  learn_cmd->add_option("--dict-step", learn.dict_step, "initial filter step (0 freezes D)")
      ->check(CLI::NonNegativeNumber);
  learn_cmd->add_option("--dict-iters", learn.dict_iters, "filter steps per outer iteration")
      ->check(CLI::PositiveNumber);
  learn_cmd->add_option("--init", learn.init, "dct, random or patches")
      ->check(CLI::IsMember({"dct", "random", "patches"}));
  learn_cmd->add_option("--layers", learn.layers, "layers K of the written model")->check(CLI::PositiveNumber);
  learn_cmd->add_option("--window", learn.window, "window W of the written model")->check(CLI::PositiveNumber);
  learn_cmd->add_flag("--planted", learn.planted, "learn on synthetic data from a random planted dictionary");
  learn_cmd->add_option("--planted-images", learn.planted_images)->check(CLI::PositiveNumber);
  learn_cmd->add_option("--planted-size", learn.planted_size)->check(CLI::PositiveNumber);
  learn_cmd->add_option("--planted-density", learn.planted_density)->check(CLI::Range(0.0, 1.0));

  BenchArgs bench;
  ModelArgs bench_model;
  auto* bench_cmd = app.add_subcommand("bench", "compare sliding- and overlapping-window inference");
  bench_cmd->add_option("inputs", bench.inputs, "clean images or directories")->required();
  bench_cmd->add_option("--sigma", bench.sigma, "noise level on the 0..255 scale");
  bench_cmd->add_option("--grid-w", bench.grid_w, "subband windows W");
  bench_cmd->add_option("--grid-sw", bench.grid_sw, "OW strides s_w in pixels (none: SW only)");
  bench_cmd->add_option("--repeats", bench.repeats, "timed runs after one warmup");
  bench_cmd->add_flag("--ow-parallel", bench.ow_parallel, "process OW crops concurrently");
  bench_cmd->add_option("--csv", bench.csv, "CSV output path (default stdout)");
  add_model_options(bench_cmd, bench_model);

  DumpArgs dump;
  ModelArgs dump_model;
  auto* dump_cmd = app.add_subcommand("adjacency-dump", "write adjacency rows as W x W images");
  dump_cmd->add_option("input", dump.input, "input image")->required();
  dump_cmd->add_option("--out", dump.prefix, "output path prefix")->required();
  dump_cmd->add_option("--sigma", dump.sigma, "noise level on the 0..255 scale")->required();
  dump_cmd->add_flag("--add-noise", dump.add_noise, "add AWGN of --sigma (seeded by --seed) first");
  dump_cmd->add_option("--layer", dump.layer, "layer k of the adjacency (0 = identity; default K)");
  dump_cmd->add_option("--pixel", dump.pixels, "subband pixel r,c (repeatable; default the center)");
  add_model_options(dump_cmd, dump_model);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (common.threads > 0) set_num_threads(common.threads);
    if (denoise->parsed()) return cmd_denoise(den, den_model, common, out);
    if (learn_cmd->parsed()) return cmd_learn(learn, common, out);
    if (bench_cmd->parsed()) return cmd_bench(bench, bench_model, common, out);
    return cmd_dump(dump, dump_model, common, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace groupcdl::cli
