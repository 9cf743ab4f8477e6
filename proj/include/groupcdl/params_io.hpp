#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "groupcdl/solver.hpp"

namespace groupcdl {

inline constexpr std::uint32_t kParamsVersion = 1;

/// Little-endian binary container; see docs/params_format.md for the layout.
std::vector<std::uint8_t> encode_params(const ModelParams& params);
ModelParams decode_params(const std::vector<std::uint8_t>& bytes);

void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace groupcdl
