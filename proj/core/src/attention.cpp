#include "csanet/attention.hpp"

#include <cmath>
#include <string>

#include "csanet/error.hpp"
#include "csanet/ops.hpp"

namespace csanet {

const char* topk_semantics_name(TopkSemantics s) {
  return s == TopkSemantics::count ? "count" : "denominator";
}

TopkSemantics parse_topk_semantics(std::string_view name) {
  if (name == "denominator") return TopkSemantics::denominator;
  if (name == "count") return TopkSemantics::count;
  throw ConfigError("expected 'denominator' or 'count', got '" + std::string(name) + "'",
                    "attention.topk_semantics");
}

void AttentionConfig::validate() const {
  if (embed_dim == 0) throw ConfigError("must be positive", "attention.embed_dim");
  if (heads == 0) throw ConfigError("must be positive", "attention.heads");
  if (embed_dim % heads != 0) {
    throw ConfigError("embedding width " + std::to_string(embed_dim) + " is not divisible by " +
                          std::to_string(heads) + " heads",
                      "attention.heads");
  }
  if (pool_kernels.empty()) throw ConfigError("at least one pooling kernel is required", "attention.pool_kernels");
  if (pool_kernels.size() != pool_pads.size()) {
    throw ConfigError("pool_kernels and pool_pads differ in length", "attention.pool_pads");
  }
  for (std::size_t i = 0; i < pool_kernels.size(); ++i) {
    if (pool_kernels[i] == 0 || 2 * pool_pads[i] + 1 != pool_kernels[i]) {
      throw ConfigError("kernel " + std::to_string(pool_kernels[i]) + " with pad " + std::to_string(pool_pads[i]) +
                            " does not preserve the sequence length",
                        "attention.pool_pads");
    }
  }
  if (k1 == 0) throw ConfigError("must be at least 1", "attention.k1");
  if (k2 == 0) throw ConfigError("must be at least 1", "attention.k2");
}

std::size_t keep_count(std::size_t length, std::size_t k, TopkSemantics semantics) {
  if (k == 0) throw ConfigError("top-k parameter must be at least 1");
  if (semantics == TopkSemantics::denominator) return (length + k - 1) / k;
  return std::min(k, length);
}

template <typename T>
std::vector<Parameter<T>> AttentionParams<T>::named(const std::string& prefix) const {
  std::vector<Parameter<T>> out{{prefix + "w_q", w_q}, {prefix + "w_k", w_k}, {prefix + "w_v", w_v}};
  if (alpha.defined()) out.push_back({prefix + "alpha", alpha});
  if (beta.defined()) out.push_back({prefix + "beta", beta});
  return out;
}

template <typename T>
AttentionParams<T> init_attention_params(std::size_t embed_dim, bool with_mixing, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  auto projection = [&] {
    Tensor<T> w({embed_dim, embed_dim});
    for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
    w.set_requires_grad(true);
    return w;
  };
  AttentionParams<T> p;
  p.w_q = projection();
  p.w_k = projection();
  p.w_v = projection();
  if (with_mixing) {
    p.alpha = Tensor<T>::scalar(T{1});
    p.alpha.set_requires_grad(true);
    p.beta = Tensor<T>::scalar(T{1});
    p.beta.set_requires_grad(true);
  }
  return p;
}

template <typename T>
Tensor<T> multiscale_pool(const Tensor<T>& y, const AttentionConfig& cfg) {
  if (y.rank() != 3) throw DimensionError("multiscale_pool expects [B, U, T0], got " + shape_string(y.shape()));
  if (cfg.pool_kernels.size() != cfg.pool_pads.size()) {
    throw ConfigError("pool_kernels and pool_pads differ in length", "attention.pool_pads");
  }
  const std::size_t B = y.dim(0), U = y.dim(1), T0 = y.dim(2);
  const Tensor<T> y4 = reshape(y, {B, U, 1, T0});
  Tensor<T> total;
  for (std::size_t i = 0; i < cfg.pool_kernels.size(); ++i) {
    const std::size_t k = cfg.pool_kernels[i], p = cfg.pool_pads[i];
    if (k == 0 || 2 * p + 1 != k) {
      throw ConfigError("kernel " + std::to_string(k) + " with pad " + std::to_string(p) +
                            " does not preserve the sequence length",
                        "attention.pool_pads");
    }
    Pool2dOptions opt;
    opt.kernel = {1, k};
    opt.stride = {1, 1};
    opt.padding = {0, p};
    opt.include_pad = true;
    Tensor<T> pooled = avg_pool2d(y4, opt);
    total = total.defined() ? add(total, pooled) : pooled;
  }
  return reshape(total, {B, U, T0});
}

namespace {

// [B, T0, U] -> [B, h, T0, dk]
template <typename T>
Tensor<T> split_heads(const Tensor<T>& tokens, std::size_t heads) {
  const std::size_t B = tokens.dim(0), T0 = tokens.dim(1), U = tokens.dim(2);
  return permute(reshape(tokens, {B, T0, heads, U / heads}), {0, 2, 1, 3});
}

}  // namespace

template <typename T>
Tensor<T> msca_forward(const Tensor<T>& x, const Tensor<T>& y, const AttentionParams<T>& params,
                       const AttentionConfig& cfg) {
  if (x.rank() != 3) throw DimensionError("attention expects [B, U, T0] inputs, got " + shape_string(x.shape()));
  if (x.shape() != y.shape()) {
    throw DimensionError("query input " + shape_string(x.shape()) + " and key/value input " +
                         shape_string(y.shape()) + " differ");
  }
  const std::size_t B = x.dim(0), U = x.dim(1), T0 = x.dim(2);
  if (U % cfg.heads != 0) {
    throw ConfigError(std::to_string(U) + " channels are not divisible by " + std::to_string(cfg.heads) + " heads",
                      "attention.heads");
  }
  if (params.w_q.shape() != Shape{U, U} || params.w_k.shape() != Shape{U, U} || params.w_v.shape() != Shape{U, U}) {
    throw DimensionError("attention projections must be [" + std::to_string(U) + "," + std::to_string(U) + "]");
  }
  const std::size_t dk = U / cfg.heads;

  const Tensor<T> kv_source = cfg.multiscale_pool_enabled ? multiscale_pool(y, cfg) : y;
  const Tensor<T> x_tokens = permute(x, {0, 2, 1});
  const Tensor<T> y_tokens = permute(kv_source, {0, 2, 1});

  const Tensor<T> q = split_heads(matmul(x_tokens, params.w_q), cfg.heads);
  const Tensor<T> k = split_heads(matmul(y_tokens, params.w_k), cfg.heads);
  const Tensor<T> v = split_heads(matmul(y_tokens, params.w_v), cfg.heads);

  const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk));
  const Tensor<T> scores = scale(matmul(q, permute(k, {0, 1, 3, 2})), inv_sqrt_dk);

  Tensor<T> weights;
  if (cfg.topk_enabled) {
    if (!params.alpha.defined() || !params.beta.defined()) {
      throw StateError("sparse attention needs the alpha and beta mixing scalars");
    }
    const std::size_t keep1 = keep_count(T0, cfg.k1, cfg.topk_semantics);
    const std::size_t keep2 = keep_count(T0, cfg.k2, cfg.topk_semantics);
    weights = add(mul_scalar(topk_softmax(scores, keep1), params.alpha),
                  mul_scalar(topk_softmax(scores, keep2), params.beta));
  } else {
    weights = softmax(scores);
  }
  const Tensor<T> heads_out = matmul(weights, v);  // [B, h, T0, dk]
  const Tensor<T> merged = reshape(permute(heads_out, {0, 2, 1, 3}), {B, T0, U});
  return permute(merged, {0, 2, 1});
}

template <typename T>
Tensor<T> residual_fuse(const Tensor<T>& z, const Tensor<T>& attended) {
  if (z.shape() != attended.shape()) {
    throw DimensionError("residual operands " + shape_string(z.shape()) + " and " +
                         shape_string(attended.shape()) + " differ");
  }
  return add(z, attended);
}

#define CSANET_INSTANTIATE_ATTENTION(T)                                                                 \
  template struct AttentionParams<T>;                                                                   \
  template AttentionParams<T> init_attention_params<T>(std::size_t, bool, Rng&);                        \
  template Tensor<T> multiscale_pool<T>(const Tensor<T>&, const AttentionConfig&);                      \
  template Tensor<T> msca_forward<T>(const Tensor<T>&, const Tensor<T>&, const AttentionParams<T>&,     \
                                     const AttentionConfig&);                                           \
  template Tensor<T> residual_fuse<T>(const Tensor<T>&, const Tensor<T>&);

CSANET_INSTANTIATE_ATTENTION(float)
CSANET_INSTANTIATE_ATTENTION(double)

}  // namespace csanet
