#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "sharplab/linalg.hpp"

namespace sharplab {

struct CheckpointHeader {
  std::string architecture;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
};

struct Checkpoint {
  CheckpointHeader header;
  Vector params;
};

/// FNV-1a 64 of the raw config bytes.
std::uint64_t config_hash(std::string_view bytes);

/// Layout: "SHLBCKPT", u64 LE header length, JSON header, then the
/// parameters as little-endian float64 (count recorded in the header).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sharplab
