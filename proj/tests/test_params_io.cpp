#include <doctest.h>
#include <zlib.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "groupcdl/errors.hpp"
#include "groupcdl/params_io.hpp"
#include "oracles.hpp"

using namespace groupcdl;

namespace {

// Untied bundle with random operators, compressed subbands and mixed
// threshold modes: M = 4, M_h = 2, P = 3, s = 2, K = 3.
ModelParams random_params(Rng& rng) {
  ModelParams p;
  p.dictionary = ConvDictionary(4, 1, 3, 2);
  for (double& v : p.dictionary.taps()) v = rng.normal();
  for (int k = 0; k < 3; ++k) {
    LayerParams layer;
    layer.analysis = ConvDictionary(4, 1, 3, 2);
    layer.synthesis = ConvDictionary(4, 1, 3, 2);
    for (double& v : layer.analysis.taps()) v = rng.normal();
    for (double& v : layer.synthesis.taps()) v = rng.normal();
    layer.thresholds.tau0 = {0.1 * k, 0.2, 0.0, 1e-300};
    layer.thresholds.tau1 = {0.5, 0.0, 0.25, 3.0};
    layer.thresholds.adaptive = k != 1;
    p.layers.push_back(std::move(layer));
  }
  p.wtheta = oracle::random_transform(rng, 2, 4);
  p.wphi = oracle::random_transform(rng, 2, 4);
  p.walpha = oracle::random_transform(rng, 4, 2);
  p.wbeta = oracle::random_transform(rng, 4, 2, true);
  p.gamma = 0.7;
  p.update_period = 2;
  p.window = 5;
  p.similarity = SimilarityKind::Dot;
  p.tied = false;
  return p;
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

void write_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void write_f64(std::vector<std::uint8_t>& b, std::size_t at, double v) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) b[at + i] = static_cast<std::uint8_t>(u >> (8 * i));
}

std::uint32_t crc_of(const std::vector<std::uint8_t>& b, std::size_t from, std::size_t to) {
  return static_cast<std::uint32_t>(crc32(0L, b.data() + from, static_cast<uInt>(to - from)));
}

// Header: magic (8), version, 10 geometry words, gamma, header CRC.
constexpr std::size_t kGammaAt = 8 + 4 + 10 * 4;
constexpr std::size_t kHeaderCrcAt = kGammaAt + 8;

void reseal_header(std::vector<std::uint8_t>& b) { write_u32(b, kHeaderCrcAt, crc_of(b, 0, kHeaderCrcAt)); }
void reseal_file(std::vector<std::uint8_t>& b) { write_u32(b, b.size() - 4, crc_of(b, 0, b.size() - 4)); }

FormatError::Kind decode_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_params(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("decode_params accepted a broken file");
  return FormatError::Kind::Io;
}

}  // namespace

TEST_CASE("params io: encode then decode is bit-identical") {
  Rng rng(1);
  for (int t = 0; t < 5; ++t) {
    const ModelParams p = random_params(rng);
    const auto bytes = encode_params(p);
    const ModelParams q = decode_params(bytes);
    CHECK(q == p);
    CHECK(encode_params(q) == bytes);
  }
  const ModelParams classical = classical_params(classical_config(25.0, 7));
  CHECK(decode_params(encode_params(classical)) == classical);
}

TEST_CASE("params io: header fields land where the layout says") {
  Rng rng(2);
  const auto bytes = encode_params(random_params(rng));
  CHECK(std::memcmp(bytes.data(), "GCDLPRM", 8) == 0);
  CHECK(read_u32(bytes, 8) == kParamsVersion);
  CHECK(read_u32(bytes, 12) == 1);  // channels
  CHECK(read_u32(bytes, 16) == 4);  // subbands
  CHECK(read_u32(bytes, 32) == 3);  // layers
  double gamma = 0.0;
  std::uint64_t raw = 0;
  for (int i = 0; i < 8; ++i) raw |= static_cast<std::uint64_t>(bytes[kGammaAt + i]) << (8 * i);
  gamma = std::bit_cast<double>(raw);
  CHECK(gamma == 0.7);
  CHECK(read_u32(bytes, kHeaderCrcAt) == crc_of(bytes, 0, kHeaderCrcAt));
  CHECK(read_u32(bytes, bytes.size() - 4) == crc_of(bytes, 0, bytes.size() - 4));
}

TEST_CASE("params io: every truncation is a checksum error") {
  Rng rng(3);
  auto bytes = encode_params(random_params(rng));
  for (std::size_t keep : {std::size_t{8}, std::size_t{20}, kHeaderCrcAt, kHeaderCrcAt + 4, bytes.size() / 2,
                           bytes.size() - 5, bytes.size() - 1}) {
    CAPTURE(keep);
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(keep));
    CHECK(decode_kind(cut) == FormatError::Kind::Checksum);
  }
  bytes.push_back(0);
  CHECK(decode_kind(bytes) == FormatError::Kind::Checksum);
}

TEST_CASE("params io: flipped payload bits are caught") {
  Rng rng(4);
  const auto bytes = encode_params(random_params(rng));
  for (int t = 0; t < 50; ++t) {
    auto bad = bytes;
    const std::size_t at = 12 + rng.below(bad.size() - 12);
    bad[at] ^= static_cast<std::uint8_t>(1u << rng.below(8));
    CAPTURE(at);
    const auto kind = decode_kind(bad);
    CHECK((kind == FormatError::Kind::Checksum || kind == FormatError::Kind::Invariant));
  }
}

TEST_CASE("params io: gamma = 1.5 with valid checksums is an invariant violation") {
  Rng rng(5);
  auto bytes = encode_params(random_params(rng));
  write_f64(bytes, kGammaAt, 1.5);
  reseal_header(bytes);
  reseal_file(bytes);
  CHECK(decode_kind(bytes) == FormatError::Kind::Invariant);
}

TEST_CASE("params io: a negative W_beta entry with valid checksums is rejected") {
  Rng rng(6);
  auto bytes = encode_params(random_params(rng));
  // W_beta is the last block: tag, count, 8 values, block CRC, then file CRC.
  const std::size_t block_end = bytes.size() - 4;
  const std::size_t block_start = block_end - (4 + 8 + 8 * 8 + 4);
  write_f64(bytes, block_start + 12, -0.25);
  write_u32(bytes, block_end - 4, crc_of(bytes, block_start, block_end - 4));
  reseal_file(bytes);
  CHECK(decode_kind(bytes) == FormatError::Kind::Invariant);
}

TEST_CASE("params io: magic and version errors") {
  Rng rng(7);
  auto bytes = encode_params(random_params(rng));
  auto wrong_magic = bytes;
  wrong_magic[0] = 'X';
  CHECK(decode_kind(wrong_magic) == FormatError::Kind::Magic);
  CHECK(decode_kind({}) == FormatError::Kind::Magic);
  write_u32(bytes, 8, kParamsVersion + 1);
  CHECK(decode_kind(bytes) == FormatError::Kind::Version);
}

TEST_CASE("params io: invalid bundles are refused on save") {
  Rng rng(8);
  ModelParams p = random_params(rng);
  p.gamma = 1.5;
  CHECK_THROWS(encode_params(p));
}

TEST_CASE("params io: file round trip and missing file") {
  Rng rng(9);
  const ModelParams p = random_params(rng);
  const auto path = std::filesystem::temp_directory_path() / "groupcdl_params_io_test.bin";
  save_params(p, path);
  CHECK(load_params(path) == p);
  std::filesystem::remove(path);
  try {
    load_params(path);
    FAIL("missing file loaded");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::Io);
  }
}
