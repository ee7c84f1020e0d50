#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csanet/gradcheck.hpp"
#include "csanet/model_config.hpp"

namespace csanet {

// Named finite-difference checks over the differentiable operations and a
// miniature end-to-end model, all in 64-bit precision.
std::vector<std::string> gradcheck_scopes();

// Throws UsageError for an unknown scope, listing the valid ones.
GradCheckReport run_gradcheck_scope(std::string_view scope, std::uint64_t seed = 0);

// C=3, T=64, L=2 model small enough for exhaustive probing. Every component
// (four branches, sparse fusion, TCNs) stays enabled.
ModelConfig mini_model_config();

}  // namespace csanet
