#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "csanet/data.hpp"
#include "csanet/rng.hpp"

namespace csanet {

struct SrConfig {
  std::size_t segments = 8;
  bool enabled = true;
};

// [begin, end) sample ranges of the S segments of a length-T trial. The first
// T mod S segments are one sample longer. Throws ConfigError when T < S.
std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t time_steps, std::size_t segments);

// Segmentation-and-reconstruction augmentation.
//
// Returns the input trials followed by one synthetic trial per input trial.
// Synthetic trial j copies the label and subject/session tags of trial j; at
// every segment slot s it takes slot s from a donor drawn uniformly (with
// replacement, per slot) among the batch's trials of the same class, the
// reconstructed trial itself included. Disabled configs return the batch
// unchanged.
TrialSet sr_augment(const TrialSet& batch, const SrConfig& cfg, Rng& rng);

}  // namespace csanet
