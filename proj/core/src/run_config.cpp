#include "csanet/run_config.hpp"

#include <charconv>

#include "csanet/error.hpp"

namespace csanet {

namespace {

template <typename Visitor, typename Config>
void visit_run(Visitor& v, Config& c) {
  auto data = v.nested("data");
  data("path", c.data_path);

  auto synth = v.nested("synth");
  synth("n_per_class", c.synth.n_per_class);
  synth("channels", c.synth.channels);
  synth("time_steps", c.synth.time_steps);
  synth("classes", c.synth.n_classes);
  synth("snr", c.synth.snr);
  synth("fs", c.synth.fs);
  synth("subjects", c.synth.subjects);
  synth("sessions", c.synth.sessions);

  auto sr = v.nested("sr");
  sr("segments", c.sr_segments);

  auto split = v.nested("split");
  split.enumeration("strategy", c.split.strategy, split_strategy_name, parse_split_strategy);
  split("test_sessions", c.split.test_sessions);
  split("folds", c.split.folds);
  split("fold_index", c.split.fold_index);
  split("held_out_subject", c.split.held_out_subject);

  auto train = v.nested("train");
  train("epochs", c.train.epochs);
  train("batch_size", c.train.batch_size);
  train("lr", c.train.lr);
  train("beta1", c.train.beta1);
  train("beta2", c.train.beta2);
  train("eps", c.train.eps);

  v("seed", c.seed);
  v("normalize", c.normalize);
  v("out_dir", c.out_dir);
  v("f64", c.f64);
}

}  // namespace

void RunConfig::validate() const {
  if (sr_segments == 0) throw ConfigError("must be positive", "sr.segments");
  if (train.batch_size == 0) throw ConfigError("must be positive", "train.batch_size");
  if (!(train.lr > 0.0)) throw ConfigError("must be positive", "train.lr");
  if (!(train.beta1 >= 0.0 && train.beta1 < 1.0)) throw ConfigError("must lie in [0, 1)", "train.beta1");
  if (!(train.beta2 >= 0.0 && train.beta2 < 1.0)) throw ConfigError("must lie in [0, 1)", "train.beta2");
  if (!(train.eps > 0.0)) throw ConfigError("must be positive", "train.eps");
  if (data_path.empty()) {
    if (synth.n_classes == 0 || synth.n_classes > 4) throw ConfigError("must lie in [1, 4]", "synth.classes");
    if (synth.channels == 0) throw ConfigError("must be positive", "synth.channels");
    if (synth.time_steps == 0) throw ConfigError("must be positive", "synth.time_steps");
    if (!(synth.snr > 0.0)) throw ConfigError("must be positive", "synth.snr");
    if (!(synth.fs > 0.0)) throw ConfigError("must be positive", "synth.fs");
    if (synth.subjects == 0) throw ConfigError("must be positive", "synth.subjects");
    if (synth.sessions == 0) throw ConfigError("must be positive", "synth.sessions");
  }
}

bool RunConfig::operator==(const RunConfig& o) const {
  return run_config_to_text(*this) == run_config_to_text(o);
}

KeyValues run_config_to_key_values(const RunConfig& cfg) {
  KeyValues kv;
  FieldWriter w(kv, "");
  visit_run(w, cfg);
  write_model_config(cfg.model, kv, "model.");
  return kv;
}

std::string run_config_to_text(const RunConfig& cfg) { return run_config_to_key_values(cfg).to_string(); }

RunConfig run_config_from_key_values(const KeyValues& kv) {
  RunConfig cfg;
  std::set<std::string> consumed;
  FieldReader r(kv, consumed, "");
  visit_run(r, cfg);
  read_model_config(kv, cfg.model, consumed, "model.");
  reject_unknown_keys(kv, consumed);
  cfg.validate();
  return cfg;
}

RunConfig run_config_from_text(std::string_view text) { return run_config_from_key_values(KeyValues::parse(text)); }

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_key_values(KeyValues::load(path));
}

void apply_ablation(RunConfig& cfg, int net) {
  AblationConfig& a = cfg.model.ablation;
  switch (net) {
    case 1: break;
    case 2: a.sr = false; break;
    case 3: a.tcn = false; break;
    case 4: a.residual = false; break;
    case 5: a.topk = false; a.msca_pool = false; break;
    case 6: a.msca_pool = false; break;
    case 7: a.topk = false; break;
    default: throw UsageError("ablation network must be Net1..Net7, got " + std::to_string(net));
  }
}

int parse_ablation_name(std::string_view name) {
  std::string_view digits = name;
  if (digits.starts_with("Net") || digits.starts_with("net")) digits.remove_prefix(3);
  int net = 0;
  const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), net);
  if (digits.empty() || ec != std::errc() || end != digits.data() + digits.size() || net < 1 || net > 7) {
    throw UsageError("ablation network must be Net1..Net7, got '" + std::string(name) + "'");
  }
  return net;
}

}  // namespace csanet
