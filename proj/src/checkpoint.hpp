#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tape.hpp"

namespace cpcseq::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Serialized named-parameter bundle plus the configuration that produced it.
// Binary layout, all integers little-endian:
//   u32 format_version
//   u64 config_len, config bytes (canonical JSON)
//   u64 tensor_count, then per tensor (sorted by name):
//     u64 name_len, name bytes
//     u64 rank, u64 dims[rank]
//     f32 data, row-major
struct TensorBlob {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  nlohmann::json config;
  std::map<std::string, TensorBlob> tensors;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // Conversions between in-memory parameters (double matrices) and the
  // 32-bit on-disk tensors.
  void put(const nn::Parameter& p);
  bool has(const std::string& name) const { return tensors.count(name) != 0; }
  // Copies the named tensor into `p`, checking logical dims.
  void fill(nn::Parameter& p) const;
};

Checkpoint checkpoint_from_params(const std::vector<nn::Parameter*>& params,
                                  nlohmann::json config);

}  // namespace cpcseq::model
