#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "csanet/augment.hpp"
#include "csanet/data.hpp"
#include "csanet/key_values.hpp"
#include "csanet/model_config.hpp"

namespace csanet {

struct TrainConfig {
  std::size_t epochs = 2000;
  std::size_t batch_size = 64;
  double lr = 0.0009;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const TrainConfig&) const = default;
};

// Everything a command needs. When `data_path` is empty the synthetic
// recipe is used. The model's channels, time_steps and n_classes are taken
// from the data at run time.
struct RunConfig {
  std::string data_path;
  SynthSpec synth{};
  ModelConfig model{};
  std::size_t sr_segments = 8;
  SplitSpec split{};
  TrainConfig train{};
  std::uint64_t seed = 0;
  bool normalize = false;
  std::string out_dir = "out";
  bool f64 = false;

  SrConfig sr() const { return {sr_segments, model.ablation.sr}; }
  // Throws ConfigError naming the offending key.
  void validate() const;

  bool operator==(const RunConfig&) const;
};

KeyValues run_config_to_key_values(const RunConfig& cfg);
std::string run_config_to_text(const RunConfig& cfg);
// Starts from defaults, applies the keys present and rejects unknown ones.
RunConfig run_config_from_key_values(const KeyValues& kv);
RunConfig run_config_from_text(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

// Ablation presets: Net1 leaves the config unchanged; Net2 disables S&R,
// Net3 the TCNs, Net4 the fusion residual, Net5 top-k and multiscale pooling,
// Net6 multiscale pooling, Net7 top-k. Throws UsageError outside 1..7.
void apply_ablation(RunConfig& cfg, int net);
int parse_ablation_name(std::string_view name);

}  // namespace csanet
