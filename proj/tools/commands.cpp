#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "csanet/augment.hpp"
#include "csanet/checkpoint.hpp"
#include "csanet/data.hpp"
#include "csanet/error.hpp"
#include "csanet/gradcheck_suite.hpp"
#include "csanet/metrics.hpp"
#include "csanet/model.hpp"
#include "csanet/psd.hpp"
#include "csanet/run_config.hpp"
#include "csanet/training.hpp"

namespace csanet::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool f64 = false;
  std::vector<std::string> overrides;
};

RunConfig resolve_config(const GlobalOptions& g) {
  KeyValues kv = g.config_path.empty() ? run_config_to_key_values(RunConfig{}) : KeyValues::load(g.config_path);
  for (const auto& item : g.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + item + "'");
    kv.set(item.substr(0, eq), item.substr(eq + 1));
  }
  RunConfig cfg = run_config_from_key_values(kv);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.f64) cfg.f64 = true;
  return cfg;
}

// Loads or generates the data and adopts its dimensions into the model config.
// Writing synthetic data alone never touches the model, so it skips that step.
TrialSet load_data(RunConfig& cfg, bool adopt = true) {
  TrialSet set;
  if (!cfg.data_path.empty()) {
    set = read_eegd(cfg.data_path);
  } else {
    SynthSpec spec = cfg.synth;
    spec.seed = stream_seed(cfg.seed, "synth");
    set = synth_generate(spec);
  }
  set.validate();
  if (!adopt) return set;
  cfg.model.channels = set.channels;
  cfg.model.time_steps = set.time_steps;
  cfg.model.n_classes = set.n_classes;
  cfg.model.validate();
  return set;
}

std::pair<TrialSet, TrialSet> split_data(const RunConfig& cfg, const TrialSet& set) {
  SplitSpec spec = cfg.split;
  spec.seed = cfg.seed;
  auto parts = split(set, spec);
  if (cfg.normalize && !parts.first.empty()) {
    const auto norm = ChannelNormalizer::fit(parts.first);
    norm.apply(parts.first);
    norm.apply(parts.second);
  }
  return parts;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
  return buf;
}

template <typename T>
int train_with(const RunConfig& cfg, const TrialSet& train, const TrialSet& test, std::ostream& out) {
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  write_file(dir / "config.txt", run_config_to_text(cfg));

  CsanetModel<T> model(cfg.model, cfg.seed);
  TrainOptions opt;
  opt.epochs = cfg.train.epochs;
  opt.batch_size = cfg.train.batch_size;
  opt.adam = {cfg.train.lr, cfg.train.beta1, cfg.train.beta2, cfg.train.eps};
  opt.sr = cfg.sr();
  opt.seed = cfg.seed;
  Trainer<T> trainer(model, opt);

  std::ofstream log(dir / "train_log.csv", std::ios::trunc);
  if (!log) throw DataError("cannot open " + (dir / "train_log.csv").string() + " for writing");
  log << epoch_csv_header() << "\n" << std::flush;

  out << "training " << model.parameter_counts().total << " parameters on " << train.size() << " trials ("
      << (cfg.f64 ? "f64" : "f32") << ")\n";
  const TrialSet* eval = test.empty() ? nullptr : &test;
  trainer.fit(train, eval, [&](const EpochLog& e) {
    log << epoch_csv_row(e) << "\n" << std::flush;
    out << "epoch " << e.epoch << "/" << cfg.train.epochs << "  loss " << std::setprecision(6) << e.train_loss
        << "  train_acc " << percent(e.train_acc);
    if (e.eval_acc) out << "  eval_acc " << percent(*e.eval_acc);
    out << "  batch " << e.effective_batch << "\n";
    return true;
  });

  save_checkpoint(make_checkpoint(model), dir / "model.ckpt");
  if (eval) {
    const EvalReport report = evaluate(model, test, cfg.train.batch_size);
    write_file(dir / "report.csv", report_to_csv(report));
    write_file(dir / "report.json", report_to_json(report));
    out << report_summary(report);
  }
  out << "wrote " << (dir / "model.ckpt").string() << "\n";
  return 0;
}

int cmd_train(RunConfig cfg, std::ostream& out) {
  const TrialSet data = load_data(cfg);
  const auto [train, test] = split_data(cfg, data);
  if (train.empty()) throw DataError("the split leaves no training trials");
  return cfg.f64 ? train_with<double>(cfg, train, test, out) : train_with<float>(cfg, train, test, out);
}

template <typename T>
EvalReport eval_with(const Checkpoint& ckpt, const TrialSet& set, std::size_t batch_size) {
  CsanetModel<T> model = model_from_checkpoint<T>(ckpt);
  return evaluate(model, set, batch_size);
}

int cmd_eval(RunConfig cfg, const std::string& checkpoint_path, const std::string& subset, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const TrialSet data = load_data(cfg);
  const ModelConfig& m = ckpt.config;
  if (m.channels != data.channels || m.time_steps != data.time_steps || m.n_classes != data.n_classes) {
    throw ConfigError("checkpoint expects " + std::to_string(m.channels) + "x" + std::to_string(m.time_steps) +
                      " trials with " + std::to_string(m.n_classes) + " classes; data is " +
                      std::to_string(data.channels) + "x" + std::to_string(data.time_steps) + " with " +
                      std::to_string(data.n_classes));
  }
  const auto [train, test] = split_data(cfg, data);
  const TrialSet* chosen = nullptr;
  TrialSet all;
  if (subset == "train") {
    chosen = &train;
  } else if (subset == "test") {
    chosen = &test;
  } else {
    all = train;
    all.trials.insert(all.trials.end(), test.trials.begin(), test.trials.end());
    chosen = &all;
  }
  if (chosen->empty()) throw DataError("the '" + subset + "' subset is empty for this split");

  const EvalReport report = cfg.f64 ? eval_with<double>(ckpt, *chosen, cfg.train.batch_size)
                                    : eval_with<float>(ckpt, *chosen, cfg.train.batch_size);
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  write_file(dir / "report.csv", report_to_csv(report));
  write_file(dir / "report.json", report_to_json(report));
  out << report_summary(report);
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, const std::string& scope, std::ostream& out) {
  std::vector<std::string> scopes;
  if (scope == "all") {
    scopes = gradcheck_scopes();
  } else {
    scopes = {scope};
  }
  // Validates the scope before printing anything.
  std::vector<GradCheckReport> reports;
  for (const auto& s : scopes) reports.push_back(run_gradcheck_scope(s, cfg.seed));
  bool ok = true;
  out << std::left << std::setw(18) << "scope" << std::setw(14) << "max_rel_error"
      << "result\n";
  for (std::size_t i = 0; i < scopes.size(); ++i) {
    char err[32];
    std::snprintf(err, sizeof err, "%.3e", reports[i].worst);
    out << std::left << std::setw(18) << scopes[i] << std::setw(14) << err << (reports[i].passed ? "pass" : "FAIL")
        << "\n";
    ok = ok && reports[i].passed;
  }
  return ok ? 0 : 3;
}

int cmd_augment(RunConfig cfg, std::ostream& out) {
  const TrialSet data = load_data(cfg);
  Rng rng = Rng::derive(cfg.seed, "augmentation");
  TrialSet result = data.empty_like();
  const std::size_t bs = cfg.train.batch_size;
  for (std::size_t start = 0; start < data.size(); start += bs) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(data.size(), start + bs); ++i) idx.push_back(i);
    TrialSet batch = sr_augment(data.subset(idx), cfg.sr(), rng);
    for (auto& t : batch.trials) result.trials.push_back(std::move(t));
  }
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  write_eegd(result, dir / "augmented.eegd");
  out << "wrote " << result.size() << " trials (" << data.size() << " original) to "
      << (dir / "augmented.eegd").string() << "\n";
  return 0;
}

int cmd_synth(RunConfig cfg, std::ostream& out) {
  cfg.data_path.clear();
  const TrialSet data = load_data(cfg, false);
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  write_eegd(data, dir / "synth.eegd");
  out << "wrote " << data.size() << " trials (" << data.channels << "x" << data.time_steps << ", "
      << data.n_classes << " classes) to " << (dir / "synth.eegd").string() << "\n";
  return 0;
}

template <typename T>
std::vector<NamedPsd> psd_with(const RunConfig& cfg, const std::optional<Checkpoint>& ckpt, const EEGTrial& trial,
                               std::size_t branch, double fs) {
  CsanetModel<T> model = ckpt ? model_from_checkpoint<T>(*ckpt) : CsanetModel<T>(cfg.model, cfg.seed);
  return branch_psd_report(model, trial, branch, fs);
}

int cmd_psd(RunConfig cfg, const std::string& checkpoint_path, std::size_t trial_index, std::size_t branch,
            std::optional<double> fs, std::ostream& out) {
  std::optional<Checkpoint> ckpt;
  if (!checkpoint_path.empty()) ckpt = load_checkpoint(checkpoint_path);
  const TrialSet data = load_data(cfg);
  if (trial_index >= data.size()) {
    throw DataError("trial " + std::to_string(trial_index) + " out of range (" + std::to_string(data.size()) +
                    " trials)");
  }
  const ModelConfig& m = ckpt ? ckpt->config : cfg.model;
  if (branch < 1 || branch > m.branches()) {
    throw UsageError("--branch must lie in 1.." + std::to_string(m.branches()));
  }
  const double rate = fs.value_or(cfg.synth.fs);
  const auto series = cfg.f64 ? psd_with<double>(cfg, ckpt, data.trials[trial_index], branch - 1, rate)
                              : psd_with<float>(cfg, ckpt, data.trials[trial_index], branch - 1, rate);
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  const fs::path file = dir / ("psd_branch" + std::to_string(branch) + ".csv");
  write_file(file, psd_to_csv(series));
  out << "wrote " << series.size() << " spectra to " << file.string() << "\n";
  return 0;
}

int exit_code_for(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  if (dynamic_cast<const UsageError*>(&e)) return 1;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 2;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"EEG decoding with multi-branch convolutions and sparse cross-attention fusion", "csanet"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "key=value run configuration file");
  app.add_option("--seed", g.seed, "global random seed");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_flag("--f64", g.f64, "run in 64-bit precision");
  app.add_option("--set", g.overrides, "override a configuration key (key=value), repeatable");

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint and per-epoch log");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint, writing CSV and JSON reports");
  std::string eval_checkpoint;
  std::string eval_subset = "test";
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval->add_option("--subset", eval_subset, "trials to score")->check(CLI::IsMember({"train", "test", "all"}));

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks in 64-bit precision");
  std::string scope = "all";
  gradcheck->add_option("--scope", scope, "operation name, model-mini, or all");

  auto* augment = app.add_subcommand("augment", "apply S&R augmentation batch-wise and write EEGD");

  auto* psd = app.add_subcommand("psd", "Welch spectra of a trial before and after a branch's temporal conv");
  std::string psd_checkpoint;
  std::size_t psd_trial = 0;
  std::size_t psd_branch = 1;
  std::optional<double> psd_fs;
  psd->add_option("--checkpoint", psd_checkpoint, "checkpoint file (default: freshly initialized model)");
  psd->add_option("--trial", psd_trial, "trial index");
  psd->add_option("--branch", psd_branch, "branch number, 1-based");
  psd->add_option("--fs", psd_fs, "sampling rate in Hz (default: synth.fs)");

  auto* ablate = app.add_subcommand("ablate", "train one of the Net1..Net7 ablation variants");
  std::string net_name;
  ablate->add_option("--net", net_name, "Net1..Net7")->required();

  auto* synth = app.add_subcommand("synth", "write a synthetic EEGD data set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    RunConfig cfg = resolve_config(g);
    if (*train) return cmd_train(cfg, out);
    if (*eval) return cmd_eval(cfg, eval_checkpoint, eval_subset, out);
    if (*gradcheck) return cmd_gradcheck(cfg, scope, out);
    if (*augment) return cmd_augment(cfg, out);
    if (*psd) return cmd_psd(cfg, psd_checkpoint, psd_trial, psd_branch, psd_fs, out);
    if (*ablate) {
      apply_ablation(cfg, parse_ablation_name(net_name));
      return cmd_train(cfg, out);
    }
    if (*synth) return cmd_synth(cfg, out);
    return 1;
  } catch (const Error& e) {
    return exit_code_for(e, err);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace csanet::cli
