#include <gtest/gtest.h>

#include "csanet/attention.hpp"
#include "csanet/error.hpp"
#include "csanet/ops.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace csanet;
using testutil::random_tensor;
using testutil::values;

namespace {

AttentionParams<double> random_params(std::size_t U, Rng& rng, double alpha, double beta) {
  AttentionParams<double> p;
  p.w_q = random_tensor({U, U}, rng);
  p.w_k = random_tensor({U, U}, rng);
  p.w_v = random_tensor({U, U}, rng);
  p.alpha = Tensor<double>::scalar(alpha);
  p.beta = Tensor<double>::scalar(beta);
  return p;
}

// Sum of zero-padded, full-divisor moving averages along time.
std::vector<double> pooled_oracle(const std::vector<double>& y, std::size_t B, std::size_t U, std::size_t T,
                                  const std::vector<std::size_t>& kernels) {
  std::vector<double> total(y.size(), 0.0);
  for (std::size_t k : kernels) {
    oracle::Pool g{B, U, 1, T, 1, k, 1, 1, 0, (k - 1) / 2};
    const auto p = oracle::avg_pool(g, y);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += p[i];
  }
  return total;
}

}  // namespace

TEST(KeepCount, BothSemantics) {
  EXPECT_EQ(keep_count(17, 2, TopkSemantics::denominator), 9u);
  EXPECT_EQ(keep_count(17, 3, TopkSemantics::denominator), 6u);
  EXPECT_EQ(keep_count(17, 2, TopkSemantics::count), 2u);
  EXPECT_EQ(keep_count(2, 3, TopkSemantics::count), 2u);
  EXPECT_EQ(keep_count(1, 5, TopkSemantics::denominator), 1u);
  EXPECT_THROW(keep_count(4, 0, TopkSemantics::count), ConfigError);
  EXPECT_EQ(parse_topk_semantics(topk_semantics_name(TopkSemantics::count)), TopkSemantics::count);
  EXPECT_THROW(parse_topk_semantics("half"), ConfigError);
}

TEST(AttentionConfig, Validation) {
  AttentionConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.heads = 5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.pool_pads = {1, 1, 3};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.pool_pads = {1, 2};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.k1 = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(MultiscalePool, ConstantInteriorAndEdgeDamping) {
  const Tensor<double> y({1, 1, 9}, 1.0);
  const auto p = values(multiscale_pool(y, AttentionConfig{}));
  ASSERT_EQ(p.size(), 9u);
  EXPECT_NEAR(p[4], 3.0, 1e-12);  // three kernels each averaging ones
  EXPECT_NEAR(p[0], 2.0 / 3 + 3.0 / 5 + 4.0 / 7, 1e-12);
  AttentionConfig bad;
  bad.pool_kernels = {4};
  bad.pool_pads = {1};
  EXPECT_THROW(multiscale_pool(y, bad), ConfigError);
}

TEST(Msca, DenseMatchesOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t heads = 1 + rng.uniform_index(4), U = heads * (1 + rng.uniform_index(4));
    const std::size_t B = 1 + rng.uniform_index(2), T = 1 + rng.uniform_index(12);
    const auto x = random_tensor({B, U, T}, rng), y = random_tensor({B, U, T}, rng);
    auto p = random_params(U, rng, 1, 1);
    AttentionConfig cfg;
    cfg.embed_dim = U;
    cfg.heads = heads;
    cfg.topk_enabled = false;
    cfg.multiscale_pool_enabled = false;
    const auto got = msca_forward(x, y, p, cfg);
    ASSERT_EQ(got.shape(), (Shape{B, U, T}));
    const auto want = oracle::attention(values(x), values(y), B, U, T, heads, values(p.w_q), values(p.w_k),
                                        values(p.w_v), 0, 0, 1, 1);
    ASSERT_LT(oracle::max_abs_diff(values(got), want), 1e-6) << "trial " << trial;
  }
}

TEST(Msca, SparsePooledMatchesOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t heads = 1 + rng.uniform_index(3), U = heads * (1 + rng.uniform_index(3));
    const std::size_t B = 1 + rng.uniform_index(2), T = 1 + rng.uniform_index(20);
    const auto x = random_tensor({B, U, T}, rng), y = random_tensor({B, U, T}, rng);
    const double a = rng.uniform(0.2, 2.0), b = rng.uniform(0.2, 2.0);
    auto p = random_params(U, rng, a, b);
    AttentionConfig cfg;
    cfg.embed_dim = U;
    cfg.heads = heads;
    cfg.k1 = 1 + rng.uniform_index(4);
    cfg.k2 = 1 + rng.uniform_index(4);
    cfg.topk_semantics = rng.uniform() < 0.5 ? TopkSemantics::denominator : TopkSemantics::count;
    const auto got = msca_forward(x, y, p, cfg);
    const auto pooled = pooled_oracle(values(y), B, U, T, {3, 5, 7});
    const auto want =
        oracle::attention(values(x), pooled, B, U, T, heads, values(p.w_q), values(p.w_k), values(p.w_v),
                          keep_count(T, cfg.k1, cfg.topk_semantics), keep_count(T, cfg.k2, cfg.topk_semantics), a, b);
    ASSERT_LT(oracle::max_abs_diff(values(got), want), 1e-6) << "trial " << trial;
  }
}

TEST(Msca, UnitMixingWithFullKeepIsTwiceDense) {
  Rng rng(3);
  const std::size_t U = 8, T = 6;
  const auto x = random_tensor({2, U, T}, rng), y = random_tensor({2, U, T}, rng);
  auto p = random_params(U, rng, 1, 1);
  AttentionConfig sparse;
  sparse.embed_dim = U;
  sparse.heads = 2;
  sparse.multiscale_pool_enabled = false;
  sparse.topk_semantics = TopkSemantics::denominator;
  sparse.k1 = sparse.k2 = 1;  // keep every score
  AttentionConfig dense = sparse;
  dense.topk_enabled = false;
  const auto s = values(msca_forward(x, y, p, sparse)), d = values(msca_forward(x, y, p, dense));
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], 2.0 * d[i], 1e-12);
}

TEST(Msca, ShapeErrors) {
  Rng rng(4);
  auto p = random_params(8, rng, 1, 1);
  AttentionConfig cfg;
  cfg.embed_dim = 8;
  cfg.heads = 2;
  EXPECT_THROW(msca_forward(Tensor<double>({1, 8, 5}), Tensor<double>({1, 8, 6}), p, cfg), DimensionError);
  EXPECT_THROW(msca_forward(Tensor<double>({1, 4, 5}), Tensor<double>({1, 4, 5}), p, cfg), DimensionError);
  cfg.heads = 3;
  EXPECT_THROW(msca_forward(Tensor<double>({1, 8, 5}), Tensor<double>({1, 8, 5}), p, cfg), ConfigError);
  cfg.heads = 2;
  p.alpha = Tensor<double>();
  EXPECT_THROW(msca_forward(Tensor<double>({1, 8, 5}), Tensor<double>({1, 8, 5}), p, cfg), StateError);
}

TEST(Msca, InitAndNaming) {
  Rng rng(5);
  const auto with = init_attention_params<float>(32, true, rng);
  const auto without = init_attention_params<float>(32, false, rng);
  EXPECT_EQ(with.named("fusion2.").size(), 5u);
  EXPECT_EQ(with.named("fusion2.")[3].name, "fusion2.alpha");
  EXPECT_EQ(with.alpha.item(), 1.0f);
  EXPECT_EQ(without.named("fusion1.").size(), 3u);
  const float bound = 1.0f / std::sqrt(32.0f);
  for (float v : with.w_q.data()) EXPECT_LE(std::abs(v), bound);
}

TEST(ResidualFuse, AddsAndChecksShape) {
  const Tensor<double> z({1, 2, 3}, 1.0), a({1, 2, 3}, 2.0);
  const auto sum = residual_fuse(z, a);
  for (double v : sum.data()) EXPECT_EQ(v, 3.0);
  EXPECT_THROW(residual_fuse(z, Tensor<double>({1, 2, 4})), DimensionError);
}
