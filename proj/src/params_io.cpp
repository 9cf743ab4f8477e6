#include "groupcdl/params_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace groupcdl {
namespace {

constexpr char kMagic[8] = {'G', 'C', 'D', 'L', 'P', 'R', 'M', '\0'};

enum Tag : std::uint32_t {
  kDictionary = 1,
  kAnalysis = 2,
  kSynthesis = 3,
  kTau0 = 4,
  kTau1 = 5,
  kAdaptive = 6,
  kTheta = 7,
  kPhi = 8,
  kAlpha = 9,
  kBeta = 10,
};

std::uint32_t crc(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(0L, data, static_cast<uInt>(n)));
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }

  void block(std::uint32_t tag, std::span<const double> values) {
    const std::size_t start = bytes_.size();
    u32(tag);
    u64(values.size());
    for (double v : values) f64(v);
    u32(crc(bytes_.data() + start, bytes_.size() - start));
  }

  void seal_crc(std::size_t from) { u32(crc(bytes_.data() + from, bytes_.size() - from)); }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

  std::vector<double> block(std::uint32_t expected_tag, std::uint64_t expected_count, const char* what) {
    const std::size_t start = pos_;
    const std::uint32_t tag = u32();
    const std::uint64_t count = u64();
    if (tag != expected_tag) {
      throw FormatError(FormatError::Kind::Checksum, std::string("unexpected block while reading ") + what);
    }
    if (count != expected_count) {
      throw FormatError(FormatError::Kind::Checksum, std::string("wrong element count in block ") + what);
    }
    need(count * 8 + 4);
    std::vector<double> values(count);
    for (auto& v : values) v = f64();
    const std::uint32_t computed = crc(bytes_.data() + start, pos_ - start);
    if (u32() != computed) throw FormatError(FormatError::Kind::Checksum, std::string("checksum mismatch in ") + what);
    return values;
  }

  void check_crc(std::size_t from, const char* what) {
    const std::uint32_t computed = crc(bytes_.data() + from, pos_ - from);
    if (u32() != computed) throw FormatError(FormatError::Kind::Checksum, std::string("checksum mismatch in ") + what);
  }

  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(FormatError::Kind::Checksum, "truncated parameter file (payload checksum cannot be verified)");
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

ConvDictionary make_dict(const ModelParams& shape, std::vector<double> taps) {
  const auto& d = shape.dictionary;
  ConvDictionary out(d.filters(), d.channels(), d.size(), d.stride());
  std::copy(taps.begin(), taps.end(), out.taps().begin());
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_params(const ModelParams& params) {
  params.validate();
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kParamsVersion);
  const auto& d = params.dictionary;
  w.u32(d.channels());
  w.u32(d.filters());
  w.u32(d.size());
  w.u32(d.stride());
  w.u32(params.compressed_subbands());
  w.u32(params.layer_count());
  w.u32(params.update_period);
  w.u32(params.window);
  w.u32(params.similarity == SimilarityKind::Distance ? 0 : 1);
  w.u32(params.tied ? 1 : 0);
  w.f64(params.gamma);
  w.seal_crc(0);

  w.block(kDictionary, d.taps());
  for (const auto& layer : params.layers) {
    w.block(kAnalysis, layer.analysis.taps());
    w.block(kSynthesis, layer.synthesis.taps());
    w.block(kTau0, layer.thresholds.tau0);
    w.block(kTau1, layer.thresholds.tau1);
  }
  std::vector<double> adaptive;
  for (const auto& layer : params.layers) adaptive.push_back(layer.thresholds.adaptive ? 1.0 : 0.0);
  w.block(kAdaptive, adaptive);
  w.block(kTheta, params.wtheta.entries());
  w.block(kPhi, params.wphi.entries());
  w.block(kAlpha, params.walpha.entries());
  w.block(kBeta, params.wbeta.entries());
  w.seal_crc(0);
  return std::move(w.bytes());
}

ModelParams decode_params(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(FormatError::Kind::Magic, "not a model parameter file");
  }
  Reader r(bytes);
  r.skip(sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kParamsVersion) {
    throw FormatError(FormatError::Kind::Version, "unsupported parameter file version " + std::to_string(version) +
                                                      " (expected " + std::to_string(kParamsVersion) + ")");
  }
  const std::uint32_t channels = r.u32();
  const std::uint32_t subbands = r.u32();
  const std::uint32_t filter_size = r.u32();
  const std::uint32_t stride = r.u32();
  const std::uint32_t compressed = r.u32();
  const std::uint32_t layers = r.u32();
  const std::uint32_t update_period = r.u32();
  const std::uint32_t window = r.u32();
  const std::uint32_t similarity = r.u32();
  const std::uint32_t tied = r.u32();
  const double gamma = r.f64();
  r.check_crc(0, "header");

  constexpr std::uint32_t kSane = 1u << 16;
  if (channels == 0 || subbands == 0 || filter_size == 0 || stride == 0 || compressed == 0 || channels > kSane ||
      subbands > kSane || filter_size > kSane || stride > kSane || compressed > kSane || layers > kSane ||
      similarity > 1 || tied > 1) {
    throw FormatError(FormatError::Kind::Invariant, "parameter file header has out-of-range geometry");
  }

  ModelParams p;
  try {
    p.dictionary = ConvDictionary(static_cast<int>(subbands), static_cast<int>(channels),
                                  static_cast<int>(filter_size), static_cast<int>(stride));
    const std::uint64_t taps = p.dictionary.taps().size();
    p.dictionary = make_dict(p, r.block(kDictionary, taps, "dictionary"));
    for (std::uint32_t k = 0; k < layers; ++k) {
      LayerParams layer;
      layer.analysis = make_dict(p, r.block(kAnalysis, taps, "analysis operator"));
      layer.synthesis = make_dict(p, r.block(kSynthesis, taps, "synthesis operator"));
      layer.thresholds.tau0 = r.block(kTau0, subbands, "tau0");
      layer.thresholds.tau1 = r.block(kTau1, subbands, "tau1");
      p.layers.push_back(std::move(layer));
    }
    const auto adaptive = r.block(kAdaptive, layers, "adaptive flags");
    for (std::uint32_t k = 0; k < layers; ++k) p.layers[k].thresholds.adaptive = adaptive[k] != 0.0;
    const std::uint64_t mix = static_cast<std::uint64_t>(subbands) * compressed;
    const int m = static_cast<int>(subbands);
    const int mh = static_cast<int>(compressed);
    auto theta = r.block(kTheta, mix, "W_theta");
    auto phi = r.block(kPhi, mix, "W_phi");
    auto alpha = r.block(kAlpha, mix, "W_alpha");
    auto beta = r.block(kBeta, mix, "W_beta");
    r.check_crc(0, "file");
    if (!r.at_end()) throw FormatError(FormatError::Kind::Checksum, "trailing bytes after parameter payload");

    p.wtheta = PixelTransform(mh, m, std::move(theta));
    p.wphi = PixelTransform(mh, m, std::move(phi));
    p.walpha = PixelTransform(m, mh, std::move(alpha));
    p.wbeta = PixelTransform(m, mh, std::move(beta), true);
    p.gamma = gamma;
    p.update_period = static_cast<int>(update_period);
    p.window = static_cast<int>(window);
    p.similarity = similarity == 0 ? SimilarityKind::Distance : SimilarityKind::Dot;
    p.tied = tied == 1;
    p.validate();
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(FormatError::Kind::Invariant, std::string("invalid parameters: ") + e.what());
  }
  return p;
}

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  const auto bytes = encode_params(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write parameter file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing parameter file: " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open parameter file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_params(bytes);
}

}  // namespace groupcdl
