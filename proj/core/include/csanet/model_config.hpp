#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "csanet/attention.hpp"
#include "csanet/key_values.hpp"

namespace csanet {

enum class FusionMode { main_auxiliary, hierarchical };
enum class Readout { last_step, flatten };

const char* fusion_mode_name(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view name);
const char* readout_name(Readout readout);
Readout parse_readout(std::string_view name);

struct TcnConfig {
  std::vector<std::size_t> dilations{1, 2};
  std::size_t kernel = 4;
  std::size_t filters = 32;
  double dropout = 0.3;

  bool operator==(const TcnConfig&) const = default;
};

// Component switches of the ablation study.
struct AblationConfig {
  bool sr = true;
  bool tcn = true;
  bool residual = true;
  bool topk = true;
  bool msca_pool = true;

  bool operator==(const AblationConfig&) const = default;
};

struct ModelConfig {
  std::size_t channels = 22;
  std::size_t time_steps = 1000;
  std::size_t n_classes = 4;

  // One entry per branch.
  std::vector<std::size_t> temporal_kernels{64, 32, 16, 8};
  std::vector<std::size_t> temporal_filters{16, 16, 16, 16};
  std::size_t depth_multiplier = 2;
  std::size_t pool1 = 8;
  std::size_t pool2 = 7;
  std::size_t spa_filters = 32;
  std::size_t spa_kernel = 32;
  double conv_dropout = 0.5;

  // embed_dim, topk_enabled and multiscale_pool_enabled are ignored here;
  // attention() derives them from spa_filters and the ablation switches.
  AttentionConfig attention_base{};
  TcnConfig tcn{};
  FusionMode fusion_mode = FusionMode::main_auxiliary;
  AblationConfig ablation{};
  Readout readout = Readout::last_step;

  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  std::size_t branches() const { return temporal_kernels.size(); }
  // U: token width entering fusion.
  std::size_t feature_width() const { return spa_filters; }
  // T0 = floor(floor(T / P1) / P2).
  std::size_t reduced_length() const { return time_steps / pool1 / pool2; }
  // Width of one branch's readout P_i.
  std::size_t readout_width() const;
  // Width of the concatenated classifier input.
  std::size_t classifier_width() const { return branches() * readout_width(); }

  // Attention settings of the sparse (auxiliary) blocks.
  AttentionConfig attention() const;
  // Attention settings of the main-branch self-attention block (no top-k).
  AttentionConfig main_attention() const;

  // Throws ConfigError naming the offending key.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Serialization under `prefix` (e.g. "model.").
void write_model_config(const ModelConfig& cfg, KeyValues& out, const std::string& prefix = "");
void read_model_config(const KeyValues& in, ModelConfig& cfg, std::set<std::string>& consumed,
                       const std::string& prefix = "");

std::string model_config_to_text(const ModelConfig& cfg);
// Rejects unknown keys and validates the result.
ModelConfig model_config_from_text(std::string_view text);

}  // namespace csanet
