#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "compm/nn/layers.hpp"
#include "json.hpp"

namespace compm::nn {

/// Binary parameter archive. All integers and floats are little-endian.
///
///   magic      8 bytes  "CMPMCKPT"
///   version    u32      1
///   dtype      u32      0 = float32, 1 = float64
///   header     u64 length + UTF-8 JSON (config manifest)
///   count      u32      number of arrays
///   per array: u32 name length, name bytes, u32 rank, rank x u64 extents,
///              product(extents) values of `dtype`
enum class StorageType : std::uint32_t { Float32 = 0, Float64 = 1 };

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredArray {
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  nlohmann::json header;
  StorageType storage = StorageType::Float32;
  std::map<std::string, StoredArray> arrays;
};

std::string encode_checkpoint(const nlohmann::json& header, const ParameterList& params,
                              StorageType storage = StorageType::Float32);
Checkpoint decode_checkpoint(const std::string& bytes);

/// Atomic write (temporary file + rename).
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& header, const ParameterList& params,
                     StorageType storage = StorageType::Float32);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies arrays named `source_prefix + suffix` into parameters named `target_prefix + suffix`.
/// Every target under `target_prefix` must be present with a matching shape (FormatError otherwise).
/// Returns the number of parameters assigned.
std::size_t assign_parameters(const Checkpoint& checkpoint, const ParameterList& targets,
                              std::string_view target_prefix = "", std::string_view source_prefix = "");

using ParameterSnapshot = std::vector<std::vector<double>>;
ParameterSnapshot snapshot(const ParameterList& params);
void restore(const ParameterList& params, const ParameterSnapshot& values);

}  // namespace compm::nn
