#include "csanet/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "csanet/error.hpp"
#include "csanet/rng.hpp"

namespace csanet {

TrialSet TrialSet::empty_like() const {
  TrialSet out;
  out.channels = channels;
  out.time_steps = time_steps;
  out.n_classes = n_classes;
  out.class_names = class_names;
  return out;
}

TrialSet TrialSet::subset(std::span<const std::size_t> indices) const {
  TrialSet out = empty_like();
  out.trials.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= trials.size()) throw DataError("subset index " + std::to_string(i) + " out of range");
    out.trials.push_back(trials[i]);
  }
  return out;
}

void TrialSet::validate() const {
  const std::size_t expected = channels * time_steps;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    if (t.samples.size() != expected) {
      throw DataError("trial " + std::to_string(i) + " has " + std::to_string(t.samples.size()) +
                      " samples, expected C*T = " + std::to_string(expected));
    }
    if (t.label >= n_classes) {
      throw DataError("trial " + std::to_string(i) + " has label " + std::to_string(t.label) + " >= " +
                      std::to_string(n_classes) + " classes");
    }
    for (float v : t.samples) {
      if (!std::isfinite(v)) throw DataError("trial " + std::to_string(i) + " contains a non-finite sample");
    }
  }
}

// ---- EEGD -----------------------------------------------------------------

namespace {

static_assert(std::numeric_limits<float>::is_iec559, "EEGD assumes IEEE-754 binary32 floats");

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw DataError(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::string_view raw(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated payload reading ") + what, pos_);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_eegd(const TrialSet& set) {
  set.validate();
  std::string out;
  out.reserve(24 + set.trials.size() * (12 + 4 * set.channels * set.time_steps));
  out.append("EEGD");
  put_u32(out, kEegdVersion);
  put_u32(out, checked_u32(set.trials.size(), "trial count"));
  put_u32(out, checked_u32(set.channels, "channel count"));
  put_u32(out, checked_u32(set.time_steps, "time steps"));
  put_u32(out, checked_u32(set.n_classes, "class count"));
  for (const auto& t : set.trials) {
    put_u32(out, t.label);
    put_u32(out, t.subject_id);
    put_u32(out, t.session_id);
    for (float v : t.samples) put_f32(out, v);
  }
  return out;
}

TrialSet decode_eegd(std::string_view bytes) {
  Reader in(bytes);
  if (in.remaining() < 4 || in.raw(4, "magic") != "EEGD") throw FormatError("bad magic, expected \"EEGD\"", 0);
  const std::size_t version_at = in.offset();
  const std::uint32_t version = in.u32("version");
  if (version != kEegdVersion) {
    throw FormatError("unsupported EEGD version " + std::to_string(version), version_at);
  }
  const std::uint32_t n_trials = in.u32("trial count");
  TrialSet set;
  set.channels = in.u32("channel count");
  set.time_steps = in.u32("time steps");
  set.n_classes = in.u32("class count");
  const std::size_t per_trial = set.channels * set.time_steps;
  // Reject absurd headers before allocating.
  if (n_trials > 0 && (per_trial == 0 || in.remaining() / n_trials < 12 + 4 * per_trial)) {
    throw FormatError("payload shorter than the header's " + std::to_string(n_trials) + " trials", in.offset());
  }
  set.trials.reserve(n_trials);
  for (std::uint32_t i = 0; i < n_trials; ++i) {
    EEGTrial t;
    const std::size_t label_at = in.offset();
    t.label = in.u32("label");
    if (t.label >= set.n_classes) {
      throw FormatError("label " + std::to_string(t.label) + " >= class count " + std::to_string(set.n_classes),
                        label_at);
    }
    t.subject_id = in.u32("subject id");
    t.session_id = in.u32("session id");
    t.samples.resize(per_trial);
    for (auto& v : t.samples) v = in.f32("sample");
    set.trials.push_back(std::move(t));
  }
  if (in.remaining() != 0) throw FormatError("trailing bytes after last trial", in.offset());
  return set;
}

void write_eegd(const TrialSet& set, const std::filesystem::path& path) {
  const std::string bytes = encode_eegd(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

TrialSet read_eegd(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_eegd(buffer.str());
}

// ---- synthetic data ---------------------------------------------------------

double synth_class_frequency(std::size_t label) {
  static constexpr double kFrequencies[] = {6.0, 10.0, 20.0, 35.0};
  if (label >= std::size(kFrequencies)) throw ConfigError("synthetic generator supports at most 4 classes");
  return kFrequencies[label];
}

std::vector<std::size_t> synth_class_channels(std::size_t label, std::size_t channels, std::size_t n_classes) {
  std::vector<std::size_t> out;
  if (channels < n_classes) {
    out.resize(channels);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  for (std::size_t c = label; c < channels; c += n_classes) out.push_back(c);
  return out;
}

TrialSet synth_generate(const SynthSpec& spec) {
  if (spec.n_classes == 0 || spec.n_classes > 4) throw ConfigError("class count must lie in [1, 4]", "synth.classes");
  if (spec.channels == 0) throw ConfigError("channel count must be positive", "synth.channels");
  if (spec.time_steps == 0) throw ConfigError("time steps must be positive", "synth.time_steps");
  if (!(spec.snr > 0.0)) throw ConfigError("snr must be positive", "synth.snr");
  if (!(spec.fs > 0.0) || !std::isfinite(spec.fs)) throw ConfigError("sampling rate must be positive", "synth.fs");
  if (spec.subjects == 0 || spec.sessions == 0) throw ConfigError("subject and session counts must be positive");

  TrialSet set;
  set.channels = spec.channels;
  set.time_steps = spec.time_steps;
  set.n_classes = spec.n_classes;
  for (std::size_t k = 0; k < spec.n_classes; ++k) {
    set.class_names.push_back(std::to_string(static_cast<int>(synth_class_frequency(k))) + "hz");
  }

  // Unit-amplitude sine has power 1/2.
  const double noise_std = std::isinf(spec.snr) ? 0.0 : std::sqrt(0.5 / spec.snr);
  Rng rng(spec.seed);
  std::size_t index = 0;
  for (std::size_t rep = 0; rep < spec.n_per_class; ++rep) {
    for (std::size_t k = 0; k < spec.n_classes; ++k, ++index) {
      EEGTrial trial;
      trial.label = static_cast<std::uint32_t>(k);
      trial.subject_id = static_cast<std::uint32_t>(1 + index % spec.subjects);
      trial.session_id = static_cast<std::uint32_t>(1 + (index / spec.subjects) % spec.sessions);
      trial.samples.assign(spec.channels * spec.time_steps, 0.0f);
      const double omega = 2.0 * std::numbers::pi * synth_class_frequency(k) / spec.fs;
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const auto active = synth_class_channels(k, spec.channels, spec.n_classes);
      for (std::size_t c : active) {
        float* row = trial.samples.data() + c * spec.time_steps;
        for (std::size_t t = 0; t < spec.time_steps; ++t) {
          row[t] = static_cast<float>(std::sin(omega * static_cast<double>(t) + phase));
        }
      }
      if (noise_std > 0.0) {
        for (auto& v : trial.samples) v += static_cast<float>(noise_std * rng.normal());
      }
      set.trials.push_back(std::move(trial));
    }
  }
  return set;
}

// ---- splits ------------------------------------------------------------------

const char* split_strategy_name(SplitStrategy strategy) {
  switch (strategy) {
    case SplitStrategy::all: return "all";
    case SplitStrategy::session_holdout: return "session_holdout";
    case SplitStrategy::kfold: return "kfold";
    case SplitStrategy::loso: return "loso";
  }
  return "all";
}

SplitStrategy parse_split_strategy(std::string_view name) {
  if (name == "all") return SplitStrategy::all;
  if (name == "session_holdout") return SplitStrategy::session_holdout;
  if (name == "kfold") return SplitStrategy::kfold;
  if (name == "loso") return SplitStrategy::loso;
  throw ConfigError("unknown split strategy '" + std::string(name) + "'", "split.strategy");
}

std::pair<TrialSet, TrialSet> split(const TrialSet& set, const SplitSpec& spec) {
  std::vector<std::size_t> train_idx, test_idx;
  switch (spec.strategy) {
    case SplitStrategy::all: {
      train_idx.resize(set.size());
      std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
      break;
    }
    case SplitStrategy::session_holdout: {
      if (spec.test_sessions.empty()) throw ConfigError("no test sessions given", "split.test_sessions");
      std::set<std::uint32_t> present;
      for (const auto& t : set.trials) present.insert(t.session_id);
      for (std::uint32_t s : spec.test_sessions) {
        if (!present.count(s)) throw DataError("session " + std::to_string(s) + " not present in the set");
      }
      const std::set<std::uint32_t> test(spec.test_sessions.begin(), spec.test_sessions.end());
      for (std::size_t i = 0; i < set.size(); ++i) {
        (test.count(set.trials[i].session_id) ? test_idx : train_idx).push_back(i);
      }
      break;
    }
    case SplitStrategy::kfold: {
      if (spec.folds < 2) throw ConfigError("k-fold needs at least 2 folds", "split.folds");
      if (spec.fold_index >= spec.folds) throw ConfigError("fold index out of range", "split.fold_index");
      if (set.size() < spec.folds) {
        throw DataError("cannot split " + std::to_string(set.size()) + " trials into " +
                        std::to_string(spec.folds) + " folds");
      }
      std::vector<std::size_t> order(set.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(stream_seed(spec.seed, "kfold"));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
      const std::size_t n = order.size();
      const std::size_t lo = spec.fold_index * n / spec.folds;
      const std::size_t hi = (spec.fold_index + 1) * n / spec.folds;
      for (std::size_t p = 0; p < n; ++p) ((p >= lo && p < hi) ? test_idx : train_idx).push_back(order[p]);
      std::sort(train_idx.begin(), train_idx.end());
      std::sort(test_idx.begin(), test_idx.end());
      break;
    }
    case SplitStrategy::loso: {
      for (std::size_t i = 0; i < set.size(); ++i) {
        (set.trials[i].subject_id == spec.held_out_subject ? test_idx : train_idx).push_back(i);
      }
      if (test_idx.empty()) {
        throw DataError("subject " + std::to_string(spec.held_out_subject) + " not present in the set");
      }
      break;
    }
  }
  return {set.subset(train_idx), set.subset(test_idx)};
}

// ---- normalization -----------------------------------------------------------

ChannelNormalizer ChannelNormalizer::fit(const TrialSet& train) {
  if (train.empty()) throw DataError("cannot fit normalization on an empty set");
  ChannelNormalizer norm;
  norm.mean_.assign(train.channels, 0.0);
  norm.std_.assign(train.channels, 0.0);
  const double count = static_cast<double>(train.size() * train.time_steps);
  for (const auto& t : train.trials) {
    for (std::size_t c = 0; c < train.channels; ++c) {
      for (std::size_t s = 0; s < train.time_steps; ++s) norm.mean_[c] += t.samples[c * train.time_steps + s];
    }
  }
  for (auto& m : norm.mean_) m /= count;
  for (const auto& t : train.trials) {
    for (std::size_t c = 0; c < train.channels; ++c) {
      for (std::size_t s = 0; s < train.time_steps; ++s) {
        const double d = t.samples[c * train.time_steps + s] - norm.mean_[c];
        norm.std_[c] += d * d;
      }
    }
  }
  for (auto& s : norm.std_) {
    s = std::sqrt(s / count);
    if (s < 1e-12) s = 1.0;
  }
  return norm;
}

void ChannelNormalizer::apply(TrialSet& set) const {
  if (set.channels != mean_.size()) throw DataError("normalizer fitted for a different channel count");
  for (auto& t : set.trials) {
    for (std::size_t c = 0; c < set.channels; ++c) {
      for (std::size_t s = 0; s < set.time_steps; ++s) {
        float& v = t.samples[c * set.time_steps + s];
        v = static_cast<float>((v - mean_[c]) / std_[c]);
      }
    }
  }
}

// ---- PERCLOS -----------------------------------------------------------------

PerclosLabel label_perclos(double blink_s, double close_s, double interval_s, double threshold) {
  if (!(interval_s > 0.0)) throw DataError("PERCLOS interval must be positive");
  if (!(blink_s >= 0.0) || !(close_s >= 0.0)) throw DataError("PERCLOS durations must be non-negative");
  if (blink_s + close_s > interval_s) throw DataError("blink + close durations exceed the interval");
  PerclosLabel label;
  label.ratio = (blink_s + close_s) / interval_s;
  label.state = label.ratio > threshold ? VigilanceState::fatigued : VigilanceState::alert;
  return label;
}

}  // namespace csanet
