#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "gmnn/model.hpp"

namespace gmnn {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex_digest(std::uint64_t digest);

// Digest of the canonical (sorted-key, compact) JSON form of the config.
std::uint64_t config_digest(const ModelConfig& config);

// Binary layout, little endian:
//   "GMNNCKPT" | u32 version | u64 config digest | u64 n | n bytes config JSON
//   | u64 tensor count | per tensor: u32 name length, name, u64 rows, u64 cols, rows*cols f64
void write_checkpoint(std::ostream& out, const ModelParams& model);
void save_checkpoint(const std::string& path, const ModelParams& model);

ModelParams read_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::string& path);

}  // namespace gmnn
