#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "csanet/model.hpp"
#include "csanet/model_config.hpp"
#include "csanet/tensor.hpp"

namespace csanet {

// Binary layout, little-endian throughout:
//
//   "CSAN" | u32 version | u32 config_len | config_len bytes of key=value
//   model config | u32 n_blobs | per blob: u32 name_len | name | u32 ndim |
//   ndim x u32 dims | prod(dims) x f32
//
// Blobs hold every parameter followed by the batch-norm running statistics.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointBlob {
  std::string name;
  Shape shape;
  std::vector<float> values;

  bool operator==(const CheckpointBlob&) const = default;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<CheckpointBlob> blobs;

  bool operator==(const Checkpoint&) const = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws FormatError with the byte offset of the first bad field, or
// ConfigError when the embedded model config is invalid.
Checkpoint decode_checkpoint(std::string_view bytes);

template <typename T>
Checkpoint make_checkpoint(CsanetModel<T>& model);

// Rebuilds a model; every parameter and buffer must be present with the
// expected shape and no blob may be left over.
template <typename T>
CsanetModel<T> model_from_checkpoint(const Checkpoint& ckpt);

// Writes through a temporary file so a failed save leaves no partial output.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace csanet
