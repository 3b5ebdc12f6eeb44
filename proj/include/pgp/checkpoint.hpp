#pragma once

#include <filesystem>
#include <string>

#include "pgp/model.hpp"

namespace pgp::checkpoint {

inline constexpr unsigned kFormatVersion = 1;

/// Binary layout, little-endian:
///   "PGPCKPT\0", u32 version, u32 len + fingerprint bytes, u32 count,
///   then per parameter: u32 len + name, u64 rows, u64 cols, rows*cols f64.
std::string serialize(const model::ModelSpec& spec, const model::Params& params);

/// Restores parameters for `spec`. Throws CheckpointError on a bad magic,
/// unknown version, fingerprint mismatch, or any shape/name mismatch.
model::Params deserialize(const std::string& bytes, const model::ModelSpec& spec);

void save(const std::filesystem::path& path, const model::ModelSpec& spec, const model::Params& params);
model::Params load(const std::filesystem::path& path, const model::ModelSpec& spec);

}  // namespace pgp::checkpoint
