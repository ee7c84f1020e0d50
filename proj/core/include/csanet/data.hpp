#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace csanet {

// One labeled recording. `samples` is C x T, channel-major.
struct EEGTrial {
  std::vector<float> samples;
  std::uint32_t label = 0;
  std::uint32_t subject_id = 0;
  std::uint32_t session_id = 0;

  bool operator==(const EEGTrial&) const = default;
};

struct TrialSet {
  std::size_t channels = 0;
  std::size_t time_steps = 0;
  std::size_t n_classes = 0;
  std::vector<std::string> class_names;
  std::vector<EEGTrial> trials;

  std::size_t size() const { return trials.size(); }
  bool empty() const { return trials.empty(); }

  // Same metadata, no trials.
  TrialSet empty_like() const;
  // Trials at `indices`, in that order.
  TrialSet subset(std::span<const std::size_t> indices) const;
  // Throws DataError on inhomogeneous shapes, bad labels or non-finite samples.
  void validate() const;

  bool operator==(const TrialSet&) const = default;
};

// ---- EEGD container -------------------------------------------------------
//
//   "EEGD" | u32 version=1 | u32 n_trials | u32 C | u32 T | u32 L
//   per trial: u32 label | u32 subject_id | u32 session_id | C*T f32 samples
//
// All integers and floats little-endian. Class names are not stored.

inline constexpr std::uint32_t kEegdVersion = 1;

std::string encode_eegd(const TrialSet& set);
// Throws FormatError carrying the byte offset of the first bad field.
TrialSet decode_eegd(std::string_view bytes);

void write_eegd(const TrialSet& set, const std::filesystem::path& path);
TrialSet read_eegd(const std::filesystem::path& path);

// ---- synthetic generator ----------------------------------------------------

struct SynthSpec {
  std::size_t n_per_class = 32;
  std::size_t channels = 8;
  std::size_t time_steps = 256;
  std::size_t n_classes = 4;
  // Power ratio of the class sinusoid to the Gaussian noise on its active
  // channels. +infinity produces noise-free trials.
  double snr = 3.0;
  double fs = 250.0;
  std::size_t subjects = 1;
  std::size_t sessions = 1;
  std::uint64_t seed = 0;
};

// Generator frequency (Hz) of class k: 6, 10, 20, 35.
double synth_class_frequency(std::size_t label);
// Channels carrying class k's rhythm: every c with c % L == k (all channels
// when C < L).
std::vector<std::size_t> synth_class_channels(std::size_t label, std::size_t channels, std::size_t n_classes);

// Trials are interleaved by class (0, 1, ..., L-1, 0, 1, ...); subject and
// session ids are 1-based and assigned round-robin.
TrialSet synth_generate(const SynthSpec& spec);

// ---- splits ------------------------------------------------------------------

enum class SplitStrategy { all, session_holdout, kfold, loso };

struct SplitSpec {
  SplitStrategy strategy = SplitStrategy::all;
  // session_holdout: sessions assigned to the test side.
  std::vector<std::uint32_t> test_sessions{};
  // kfold
  std::size_t folds = 5;
  std::size_t fold_index = 0;
  // loso
  std::uint32_t held_out_subject = 0;
  std::uint64_t seed = 0;
};

const char* split_strategy_name(SplitStrategy strategy);
SplitStrategy parse_split_strategy(std::string_view name);

// Disjoint, exhaustive (train, test) partition. `all` returns every trial as
// train and an empty test set.
std::pair<TrialSet, TrialSet> split(const TrialSet& set, const SplitSpec& spec);

// ---- per-channel normalization --------------------------------------------

// z-scoring with statistics fitted on one set (the train side) and applied to
// any other set with the same channel count.
class ChannelNormalizer {
 public:
  static ChannelNormalizer fit(const TrialSet& train);
  void apply(TrialSet& set) const;
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }

 private:
  std::vector<double> mean_;
  std::vector<double> std_;
};

// ---- PERCLOS labelling -----------------------------------------------------

enum class VigilanceState { alert, fatigued };

struct PerclosLabel {
  double ratio = 0.0;
  VigilanceState state = VigilanceState::alert;
};

// ratio = (blink + close) / interval; fatigued iff ratio > threshold.
PerclosLabel label_perclos(double blink_s, double close_s, double interval_s, double threshold = 0.35);

}  // namespace csanet
