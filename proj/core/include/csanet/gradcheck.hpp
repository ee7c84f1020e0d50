#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csanet/tensor.hpp"

namespace csanet {

struct GradCheckOptions {
  // Central-difference step.
  double step = 1e-4;
  // Pass threshold on the worst relative error.
  double tolerance = 1e-3;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-6;
  // Entries probed per input; 0 probes every entry. A seeded sample is used
  // for larger inputs.
  std::size_t max_entries_per_input = 0;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t probed = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> inputs;
  double worst = 0.0;
  bool passed = false;
};

using LossFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

// Compares reverse-mode gradients of `loss` (which must return a
// single-element tensor) with central finite differences, input by input.
// `inputs` are treated as leaves; their data is perturbed in place and
// restored. Throws NumericalError on non-finite losses or gradients.
GradCheckReport grad_check(const LossFn& loss, std::vector<Parameter<double>> inputs,
                           const GradCheckOptions& options = {});

}  // namespace csanet
