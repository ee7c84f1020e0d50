#include "csanet/gradcheck_suite.hpp"

#include <functional>
#include <map>

#include "csanet/attention.hpp"
#include "csanet/error.hpp"
#include "csanet/model.hpp"
#include "csanet/ops.hpp"
#include "csanet/rng.hpp"

namespace csanet {

namespace {

using T64 = Tensor<double>;

T64 random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  T64 t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// sum(y * r) for a fixed random r gives every output entry a distinct weight.
T64 weighted_sum(const T64& y, const T64& r) { return sum(mul(y, r)); }

GradCheckReport check_linear(Rng& rng) {
  const std::vector<std::size_t> targets{0, 3, 1};
  return grad_check(
      [&](const std::vector<T64>& in) { return cross_entropy(linear(in[0], in[1], in[2]), targets); },
      {{"x", random_tensor({3, 5}, rng)}, {"weight", random_tensor({4, 5}, rng)}, {"bias", random_tensor({4}, rng)}});
}

GradCheckReport check_conv2d(Rng& rng) {
  Conv2dOptions opt;
  opt.stride = {1, 2};
  opt.padding = {1, 0, 2, 1};
  opt.dilation = {2, 1};
  const T64 r = random_tensor({2, 4, 4, 4}, rng);
  return grad_check(
      [&](const std::vector<T64>& in) { return weighted_sum(conv2d(in[0], in[1], in[2], opt), r); },
      {{"input", random_tensor({2, 3, 5, 6}, rng)},
       {"weight", random_tensor({4, 3, 2, 3}, rng)},
       {"bias", random_tensor({4}, rng)}});
}

GradCheckReport check_depthwise(Rng& rng) {
  Conv2dOptions opt;
  opt.groups = 3;
  opt.padding = Padding2d::symmetric(0, 1);
  const T64 r = random_tensor({2, 6, 3, 7}, rng);
  return grad_check(
      [&](const std::vector<T64>& in) { return weighted_sum(conv2d(in[0], in[1], T64(), opt), r); },
      {{"input", random_tensor({2, 3, 4, 7}, rng)}, {"weight", random_tensor({6, 1, 2, 3}, rng)}});
}

GradCheckReport check_avg_pool(Rng& rng) {
  Pool2dOptions opt;
  opt.kernel = {2, 3};
  opt.stride = {1, 2};
  opt.padding = {1, 1};
  const T64 r = random_tensor({2, 3, 5, 4}, rng);
  return grad_check([&](const std::vector<T64>& in) { return weighted_sum(avg_pool2d(in[0], opt), r); },
                    {{"input", random_tensor({2, 3, 4, 7}, rng)}});
}

GradCheckReport check_batch_norm(Rng& rng) {
  const T64 r = random_tensor({4, 3, 2, 5}, rng);
  return grad_check(
      [&](const std::vector<T64>& in) {
        BatchNormStats<double> stats(3);
        return weighted_sum(batch_norm(in[0], in[1], in[2], stats, true), r);
      },
      {{"input", random_tensor({4, 3, 2, 5}, rng)},
       {"gamma", random_tensor({3}, rng, 0.5, 1.5)},
       {"beta", random_tensor({3}, rng)}});
}

GradCheckReport check_elementwise(Rng& rng) {
  const T64 r = random_tensor({3, 4}, rng);
  return grad_check(
      [&](const std::vector<T64>& in) {
        const T64 e = elu(sub(mul(in[0], in[1]), scale(in[0], 0.5)));
        return add(weighted_sum(add(e, mul_scalar(in[1], in[2])), r), mean(in[0]));
      },
      {{"a", random_tensor({3, 4}, rng, -2.0, 2.0)},
       {"b", random_tensor({3, 4}, rng, -2.0, 2.0)},
       {"s", random_tensor({1}, rng)}});
}

GradCheckReport check_shape_ops(Rng& rng) {
  const T64 r = random_tensor({3, 2, 7}, rng);
  return grad_check(
      [&](const std::vector<T64>& in) {
        const T64 p = permute(reshape(in[0], {2, 3, 4}), {1, 0, 2});     // [3, 2, 4]
        const T64 c = concat(std::vector<T64>{p, slice(in[1], 2, 1, 3)}, 2);  // [3, 2, 7]
        return weighted_sum(c, r);
      },
      {{"a", random_tensor({6, 4}, rng)}, {"b", random_tensor({3, 2, 5}, rng)}});
}

GradCheckReport check_matmul(Rng& rng) {
  const T64 r = random_tensor({2, 3, 4, 2}, rng);
  const T64 r2 = random_tensor({2, 3, 4, 5}, rng);
  return grad_check(
      [&](const std::vector<T64>& in) {
        return add(weighted_sum(matmul(in[0], in[1]), r), weighted_sum(matmul(in[0], in[2]), r2));
      },
      {{"a", random_tensor({2, 3, 4, 3}, rng)},
       {"b_batched", random_tensor({2, 3, 3, 2}, rng)},
       {"b_shared", random_tensor({3, 5}, rng)}});
}

GradCheckReport check_softmax(Rng& rng) {
  const T64 r = random_tensor({4, 6}, rng);
  return grad_check([&](const std::vector<T64>& in) { return weighted_sum(softmax(in[0]), r); },
                    {{"scores", random_tensor({4, 6}, rng, -2.0, 2.0)}});
}

GradCheckReport check_topk_softmax(Rng& rng) {
  const T64 r = random_tensor({5, 7}, rng);
  return grad_check(
      [&](const std::vector<T64>& in) {
        return add(weighted_sum(topk_softmax(in[0], 3), r), weighted_sum(topk_softmax(in[0], 5), r));
      },
      {{"scores", random_tensor({5, 7}, rng, -2.0, 2.0)}});
}

GradCheckReport check_cross_entropy(Rng& rng) {
  const std::vector<std::size_t> targets{2, 0, 1, 2};
  return grad_check([&](const std::vector<T64>& in) { return cross_entropy(in[0], targets); },
                    {{"logits", random_tensor({4, 3}, rng, -2.0, 2.0)}});
}

GradCheckReport check_dropout(Rng& rng) {
  const T64 r = random_tensor({6, 5}, rng);
  const std::uint64_t mask_seed = rng.next_u64();
  return grad_check(
      [&](const std::vector<T64>& in) {
        Rng mask(mask_seed);
        return weighted_sum(dropout(in[0], 0.4, true, mask), r);
      },
      {{"input", random_tensor({6, 5}, rng)}});
}

GradCheckReport check_attention(Rng& rng) {
  AttentionConfig cfg;
  cfg.embed_dim = 8;
  cfg.heads = 2;
  cfg.topk_enabled = true;
  cfg.multiscale_pool_enabled = true;
  AttentionParams<double> p = init_attention_params<double>(8, true, rng);
  p.alpha[0] = 0.8;
  p.beta[0] = 1.3;
  const T64 r = random_tensor({2, 8, 7}, rng);
  auto params = p.named("");
  params.insert(params.begin(), {{"x", random_tensor({2, 8, 7}, rng)}, {"y", random_tensor({2, 8, 7}, rng)}});
  return grad_check(
      [&](const std::vector<T64>& in) {
        AttentionParams<double> q{in[2], in[3], in[4], in[5], in[6]};
        return weighted_sum(residual_fuse(in[0], msca_forward(in[0], in[1], q, cfg)), r);
      },
      params);
}

GradCheckReport check_model_mini(Rng& rng, std::uint64_t seed) {
  const ModelConfig cfg = mini_model_config();
  CsanetModel<double> model(cfg, seed);
  const T64 x = random_tensor({2, 1, cfg.channels, cfg.time_steps}, rng, -2.0, 2.0);
  const std::vector<std::size_t> targets{0, 1};
  const std::uint64_t dropout_seed = rng.next_u64();
  return grad_check(
      [&](const std::vector<T64>&) {
        Rng drop(dropout_seed);
        return cross_entropy(model.forward(x, true, &drop), targets);
      },
      model.parameters());
}

}  // namespace

ModelConfig mini_model_config() {
  ModelConfig cfg;
  cfg.channels = 3;
  cfg.time_steps = 64;
  cfg.n_classes = 2;
  cfg.temporal_kernels = {16, 8, 4, 2};
  cfg.temporal_filters = {2, 2, 2, 2};
  cfg.depth_multiplier = 2;
  cfg.pool1 = 4;
  cfg.pool2 = 4;
  cfg.spa_filters = 4;
  cfg.spa_kernel = 4;
  cfg.attention_base.heads = 2;
  cfg.tcn.kernel = 2;
  cfg.tcn.filters = 4;
  return cfg;
}

std::vector<std::string> gradcheck_scopes() {
  return {"linear",     "conv2d",  "depthwise_conv2d", "avg_pool2d",   "batch_norm",    "elementwise", "shape_ops",
          "matmul",     "softmax", "topk_softmax",     "cross_entropy", "dropout",      "attention",   "model-mini"};
}

GradCheckReport run_gradcheck_scope(std::string_view scope, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, scope);
  if (scope == "linear") return check_linear(rng);
  if (scope == "conv2d") return check_conv2d(rng);
  if (scope == "depthwise_conv2d") return check_depthwise(rng);
  if (scope == "avg_pool2d") return check_avg_pool(rng);
  if (scope == "batch_norm") return check_batch_norm(rng);
  if (scope == "elementwise") return check_elementwise(rng);
  if (scope == "shape_ops") return check_shape_ops(rng);
  if (scope == "matmul") return check_matmul(rng);
  if (scope == "softmax") return check_softmax(rng);
  if (scope == "topk_softmax") return check_topk_softmax(rng);
  if (scope == "cross_entropy") return check_cross_entropy(rng);
  if (scope == "dropout") return check_dropout(rng);
  if (scope == "attention") return check_attention(rng);
  if (scope == "model-mini") return check_model_mini(rng, seed);
  std::string valid;
  for (const auto& s : gradcheck_scopes()) valid += (valid.empty() ? "" : ", ") + s;
  throw UsageError("unknown gradcheck scope '" + std::string(scope) + "'; valid scopes: " + valid + ", all");
}

}  // namespace csanet
