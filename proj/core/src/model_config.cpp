#include "csanet/model_config.hpp"

#include "csanet/error.hpp"

namespace csanet {

const char* fusion_mode_name(FusionMode mode) {
  return mode == FusionMode::hierarchical ? "hierarchical" : "main_auxiliary";
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "main_auxiliary") return FusionMode::main_auxiliary;
  if (name == "hierarchical") return FusionMode::hierarchical;
  throw ConfigError("expected 'main_auxiliary' or 'hierarchical', got '" + std::string(name) + "'", "fusion_mode");
}

const char* readout_name(Readout readout) { return readout == Readout::flatten ? "flatten" : "last_step"; }

Readout parse_readout(std::string_view name) {
  if (name == "last_step") return Readout::last_step;
  if (name == "flatten") return Readout::flatten;
  throw ConfigError("expected 'last_step' or 'flatten', got '" + std::string(name) + "'", "readout");
}

std::size_t ModelConfig::readout_width() const {
  const std::size_t width = ablation.tcn ? tcn.filters : feature_width();
  return readout == Readout::flatten ? width * reduced_length() : width;
}

AttentionConfig ModelConfig::attention() const {
  AttentionConfig a = attention_base;
  a.embed_dim = feature_width();
  a.topk_enabled = ablation.topk;
  a.multiscale_pool_enabled = ablation.msca_pool;
  return a;
}

AttentionConfig ModelConfig::main_attention() const {
  AttentionConfig a = attention();
  a.topk_enabled = false;
  return a;
}

namespace {

void require(bool ok, const std::string& what, const char* key) {
  if (!ok) throw ConfigError(what, key);
}

}  // namespace

void ModelConfig::validate() const {
  require(channels >= 1, "must be positive", "channels");
  require(n_classes >= 2, "at least two classes are required", "n_classes");
  require(!temporal_kernels.empty(), "at least one branch is required", "temporal_kernels");
  require(temporal_filters.size() == temporal_kernels.size(), "needs one entry per temporal kernel",
          "temporal_filters");
  for (std::size_t k : temporal_kernels) require(k >= 1, "kernel lengths must be positive", "temporal_kernels");
  for (std::size_t f : temporal_filters) require(f >= 1, "filter counts must be positive", "temporal_filters");
  require(depth_multiplier >= 1, "must be positive", "depth_multiplier");
  require(pool1 >= 1, "must be positive", "pool1");
  require(pool2 >= 1, "must be positive", "pool2");
  require(time_steps >= pool1 * pool2,
          "trial length " + std::to_string(time_steps) + " is shorter than pool1*pool2 = " +
              std::to_string(pool1 * pool2),
          "time_steps");
  require(spa_filters >= 1, "must be positive", "spa_filters");
  require(spa_kernel >= 1, "must be positive", "spa_kernel");
  for (std::size_t f : temporal_filters) {
    require(f * depth_multiplier == spa_filters,
            "temporal_filters * depth_multiplier must equal spa_filters (" + std::to_string(f) + " * " +
                std::to_string(depth_multiplier) + " != " + std::to_string(spa_filters) + ")",
            "spa_filters");
  }
  require(conv_dropout >= 0.0 && conv_dropout < 1.0, "must lie in [0, 1)", "conv_dropout");

  attention().validate();

  require(!tcn.dilations.empty(), "at least one residual block is required", "tcn.dilations");
  for (std::size_t d : tcn.dilations) require(d >= 1, "dilations must be positive", "tcn.dilations");
  require(tcn.kernel >= 1, "must be positive", "tcn.kernel");
  require(tcn.filters == spa_filters, "must equal spa_filters so the residual skips line up", "tcn.filters");
  require(tcn.dropout >= 0.0 && tcn.dropout < 1.0, "must lie in [0, 1)", "tcn.dropout");

  require(fusion_mode != FusionMode::hierarchical || branches() == 4, "hierarchical fusion needs exactly 4 branches",
          "fusion_mode");
  require(bn_momentum >= 0.0 && bn_momentum <= 1.0, "must lie in [0, 1]", "bn_momentum");
  require(bn_eps > 0.0, "must be positive", "bn_eps");
}

namespace {

template <typename Visitor, typename Config>
void visit_model(Visitor& v, Config& c) {
  v("channels", c.channels);
  v("time_steps", c.time_steps);
  v("n_classes", c.n_classes);
  v("temporal_kernels", c.temporal_kernels);
  v("temporal_filters", c.temporal_filters);
  v("depth_multiplier", c.depth_multiplier);
  v("pool1", c.pool1);
  v("pool2", c.pool2);
  v("spa_filters", c.spa_filters);
  v("spa_kernel", c.spa_kernel);
  v("conv_dropout", c.conv_dropout);

  auto att = v.nested("attention");
  att("heads", c.attention_base.heads);
  att("pool_kernels", c.attention_base.pool_kernels);
  att("pool_pads", c.attention_base.pool_pads);
  att("k1", c.attention_base.k1);
  att("k2", c.attention_base.k2);
  att.enumeration("topk_semantics", c.attention_base.topk_semantics, topk_semantics_name, parse_topk_semantics);

  auto tcn = v.nested("tcn");
  tcn("dilations", c.tcn.dilations);
  tcn("kernel", c.tcn.kernel);
  tcn("filters", c.tcn.filters);
  tcn("dropout", c.tcn.dropout);

  v.enumeration("fusion_mode", c.fusion_mode, fusion_mode_name, parse_fusion_mode);
  v.enumeration("readout", c.readout, readout_name, parse_readout);

  auto abl = v.nested("ablation");
  abl("sr", c.ablation.sr);
  abl("tcn", c.ablation.tcn);
  abl("residual", c.ablation.residual);
  abl("topk", c.ablation.topk);
  abl("msca_pool", c.ablation.msca_pool);

  v("bn_momentum", c.bn_momentum);
  v("bn_eps", c.bn_eps);
}

}  // namespace

void write_model_config(const ModelConfig& cfg, KeyValues& out, const std::string& prefix) {
  FieldWriter w(out, prefix);
  visit_model(w, cfg);
}

void read_model_config(const KeyValues& in, ModelConfig& cfg, std::set<std::string>& consumed,
                       const std::string& prefix) {
  FieldReader r(in, consumed, prefix);
  visit_model(r, cfg);
}

std::string model_config_to_text(const ModelConfig& cfg) {
  KeyValues kv;
  write_model_config(cfg, kv);
  return kv.to_string();
}

ModelConfig model_config_from_text(std::string_view text) {
  const KeyValues kv = KeyValues::parse(text);
  ModelConfig cfg;
  std::set<std::string> consumed;
  read_model_config(kv, cfg, consumed);
  reject_unknown_keys(kv, consumed);
  cfg.validate();
  return cfg;
}

}  // namespace csanet
