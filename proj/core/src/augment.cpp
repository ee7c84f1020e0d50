#include "csanet/augment.hpp"

#include <algorithm>
#include <map>

#include "csanet/error.hpp"

namespace csanet {

std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t time_steps, std::size_t segments) {
  if (segments == 0) throw ConfigError("segment count must be positive", "sr.segments");
  if (time_steps < segments) {
    throw ConfigError("trial length " + std::to_string(time_steps) + " is shorter than " +
                          std::to_string(segments) + " segments",
                      "sr.segments");
  }
  const std::size_t base = time_steps / segments;
  const std::size_t extra = time_steps % segments;
  std::vector<std::pair<std::size_t, std::size_t>> bounds;
  bounds.reserve(segments);
  std::size_t begin = 0;
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    bounds.emplace_back(begin, begin + len);
    begin += len;
  }
  return bounds;
}

TrialSet sr_augment(const TrialSet& batch, const SrConfig& cfg, Rng& rng) {
  if (!cfg.enabled) return batch;
  const auto bounds = segment_bounds(batch.time_steps, cfg.segments);

  std::map<std::uint32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < batch.size(); ++i) by_class[batch.trials[i].label].push_back(i);

  TrialSet out = batch;
  out.trials.reserve(2 * batch.size());
  const std::size_t T = batch.time_steps;
  for (const auto& source : batch.trials) {
    const auto& donors = by_class.at(source.label);
    EEGTrial synth;
    synth.label = source.label;
    synth.subject_id = source.subject_id;
    synth.session_id = source.session_id;
    synth.samples.resize(source.samples.size());
    for (const auto& [begin, end] : bounds) {
      const auto& donor = batch.trials[donors[rng.uniform_index(donors.size())]].samples;
      for (std::size_t c = 0; c < batch.channels; ++c) {
        std::copy(donor.begin() + c * T + begin, donor.begin() + c * T + end, synth.samples.begin() + c * T + begin);
      }
    }
    out.trials.push_back(std::move(synth));
  }
  return out;
}

}  // namespace csanet
