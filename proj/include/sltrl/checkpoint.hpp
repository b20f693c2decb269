#pragma once

// Binary checkpoint: 16-byte header (magic "SLTRLCKP", u32 version, u32
// parameter count, little-endian) followed by little-endian IEEE-754 doubles.
// A JSON sidecar (same stem, ".json") describes the architecture and step.

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "sltrl/policy.hpp"

namespace sltrl {

inline constexpr char kCheckpointMagic[8] = {'S', 'L', 'T', 'R', 'L', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  PolicyParams params;
  std::int64_t step = 0;
};

nlohmann::json arch_to_json(const ArchSpec& arch);
ArchSpec arch_from_json(const nlohmann::json& j);

std::filesystem::path sidecar_path(const std::filesystem::path& bin_path);

// Writes `<path>` and its sidecar atomically (temp file + rename). Throws IoError.
void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params,
                     std::int64_t step);

// Throws IoError on missing/corrupt files and ConfigError on arch mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Atomic whole-file write used by every artifact writer.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace sltrl
