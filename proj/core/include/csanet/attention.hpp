#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "csanet/rng.hpp"
#include "csanet/tensor.hpp"

namespace csanet {

// How the (k1, k2) pair turns into per-row keep counts.
enum class TopkSemantics {
  denominator,  // keep ceil(len / k): the top 1/k of each row
  count,        // keep min(k, len) entries
};

const char* topk_semantics_name(TopkSemantics s);
TopkSemantics parse_topk_semantics(std::string_view name);

struct AttentionConfig {
  std::size_t embed_dim = 32;
  std::size_t heads = 8;
  std::vector<std::size_t> pool_kernels{3, 5, 7};
  std::vector<std::size_t> pool_pads{1, 2, 3};
  bool topk_enabled = true;
  std::size_t k1 = 2;
  std::size_t k2 = 3;
  TopkSemantics topk_semantics = TopkSemantics::denominator;
  bool multiscale_pool_enabled = true;

  // Throws ConfigError naming the offending key.
  void validate() const;

  bool operator==(const AttentionConfig&) const = default;
};

std::size_t keep_count(std::size_t length, std::size_t k, TopkSemantics semantics);

// Bias-free square projections plus the two mixing scalars. alpha and beta
// are left undefined for blocks without top-k sparsification.
template <typename T>
struct AttentionParams {
  Tensor<T> w_q;  // [U, U], applied as tokens · W
  Tensor<T> w_k;
  Tensor<T> w_v;
  Tensor<T> alpha;  // [1]
  Tensor<T> beta;   // [1]

  // The defined tensors named prefix + {w_q, w_k, w_v, alpha, beta}.
  std::vector<Parameter<T>> named(const std::string& prefix) const;
};

// Projections ~ U(-1/sqrt(U), 1/sqrt(U)); alpha = beta = 1 when `with_mixing`.
template <typename T>
AttentionParams<T> init_attention_params(std::size_t embed_dim, bool with_mixing, Rng& rng);

// Sum of the stride-1 average pools of y [B, U, T0] along time, one per
// (kernel, pad) pair. Zero padding counts towards the divisor.
template <typename T>
Tensor<T> multiscale_pool(const Tensor<T>& y, const AttentionConfig& cfg);

// Multi-head (sparse) cross-attention. Tokens are the T0 time steps of
// x, y [B, U, T0]; queries come from x and keys/values from the (optionally
// pooled) y. Returns [B, U, T0] with heads concatenated along U.
template <typename T>
Tensor<T> msca_forward(const Tensor<T>& x, const Tensor<T>& y, const AttentionParams<T>& params,
                       const AttentionConfig& cfg);

// z + attended, requiring equal shapes.
template <typename T>
Tensor<T> residual_fuse(const Tensor<T>& z, const Tensor<T>& attended);

}  // namespace csanet
