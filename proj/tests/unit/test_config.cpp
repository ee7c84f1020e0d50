#include <gtest/gtest.h>

#include <limits>

#include "csanet/error.hpp"
#include "csanet/key_values.hpp"
#include "csanet/model_config.hpp"
#include "csanet/run_config.hpp"
#include "test_util.hpp"

using namespace csanet;

TEST(KeyValues, ParseTrimsAndSkipsComments) {
  const auto kv = KeyValues::parse("# header\n\n  a = 1 \nb.c=hello world\n");
  ASSERT_EQ(kv.entries().size(), 2u);
  EXPECT_EQ(*kv.find("a"), "1");
  EXPECT_EQ(*kv.find("b.c"), "hello world");
  EXPECT_EQ(kv.find("missing"), nullptr);
  EXPECT_EQ(KeyValues::parse(kv.to_string()).entries(), kv.entries());
}

TEST(KeyValues, MalformedAndDuplicateLines) {
  EXPECT_THROW(KeyValues::parse("novalue\n"), ConfigError);
  EXPECT_THROW(KeyValues::parse("=3\n"), ConfigError);
  try {
    KeyValues::parse("a=1\na=2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "a");
  }
  EXPECT_THROW(KeyValues::load("/nonexistent/dir/x.cfg"), ConfigError);
}

TEST(KeyValues, ValueCodecs) {
  bool b = false;
  decode_value("true", b, "k");
  EXPECT_TRUE(b);
  EXPECT_THROW(decode_value("yes", b, "k"), ConfigError);
  std::size_t n = 0;
  decode_value(" 42 ", n, "k");
  EXPECT_EQ(n, 42u);
  EXPECT_THROW(decode_value("-1", n, "k"), ConfigError);
  EXPECT_THROW(decode_value("4x", n, "k"), ConfigError);
  std::vector<std::size_t> list;
  decode_value("3,5,7", list, "k");
  EXPECT_EQ(list, (std::vector<std::size_t>{3, 5, 7}));
  EXPECT_EQ(encode_value(list), "3,5,7");
  double d = 0;
  EXPECT_THROW(decode_value("nan", d, "k"), ConfigError);
  decode_value(encode_value(std::numeric_limits<double>::infinity()), d, "k");
  EXPECT_TRUE(std::isinf(d));
}

TEST(KeyValues, DoublesRoundTripExactly) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.uniform_index(80)) - 40);
    double back = 0;
    decode_value(encode_value(v), back, "k");
    ASSERT_EQ(back, v);
  }
  EXPECT_EQ(encode_value(0.0009), "0.0009");
}

TEST(ModelConfigText, RoundTripAndUnknownKeys) {
  ModelConfig cfg;
  cfg.temporal_kernels = {9, 5};
  cfg.temporal_filters = {8, 8};
  cfg.spa_filters = 16;
  cfg.tcn.filters = 16;
  cfg.fusion_mode = FusionMode::main_auxiliary;
  cfg.readout = Readout::flatten;
  cfg.attention_base.topk_semantics = TopkSemantics::count;
  cfg.ablation.msca_pool = false;
  cfg.conv_dropout = 0.25;
  EXPECT_EQ(model_config_from_text(model_config_to_text(cfg)), cfg);
  EXPECT_THROW(model_config_from_text("channels=4\nbogus=1\n"), ConfigError);
  EXPECT_THROW(model_config_from_text("fusion_mode=sideways\n"), ConfigError);
  EXPECT_THROW(model_config_from_text("tcn.filters=8\n"), ConfigError);  // validation runs
}

TEST(RunConfigText, DefaultsAndRoundTrip) {
  RunConfig cfg;
  EXPECT_EQ(run_config_from_text(""), cfg);
  cfg.data_path = "data/x.eegd";
  cfg.synth.snr = std::numeric_limits<double>::infinity();
  cfg.split.strategy = SplitStrategy::session_holdout;
  cfg.split.test_sessions = {2, 3};
  cfg.train.lr = 1e-3;
  cfg.seed = 123456789012345ull;
  cfg.f64 = true;
  cfg.model.ablation.sr = false;
  const auto text = run_config_to_text(cfg);
  EXPECT_NE(text.find("model.ablation.sr=false"), std::string::npos);
  EXPECT_EQ(run_config_from_text(text), cfg);

  testutil::TempDir dir("cfg");
  KeyValues::parse(text).save(dir.path() / "run.cfg");
  EXPECT_EQ(load_run_config(dir.path() / "run.cfg"), cfg);
}

TEST(RunConfigText, ErrorsNameTheKey) {
  try {
    run_config_from_text("train.epochs=abc\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "train.epochs");
  }
  try {
    run_config_from_text("model.tcn.bogus=3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "model.tcn.bogus");
  }
  RunConfig bad;
  bad.train.batch_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Ablation, PresetsToggleSingleComponents) {
  const AblationConfig on{};
  auto preset = [](int net) {
    RunConfig c;
    apply_ablation(c, net);
    return c.model.ablation;
  };
  EXPECT_EQ(preset(1), on);
  EXPECT_EQ(preset(2), (AblationConfig{false, true, true, true, true}));
  EXPECT_EQ(preset(3), (AblationConfig{true, false, true, true, true}));
  EXPECT_EQ(preset(4), (AblationConfig{true, true, false, true, true}));
  EXPECT_EQ(preset(5), (AblationConfig{true, true, true, false, false}));
  EXPECT_EQ(preset(6), (AblationConfig{true, true, true, true, false}));
  EXPECT_EQ(preset(7), (AblationConfig{true, true, true, false, true}));
  RunConfig c;
  EXPECT_THROW(apply_ablation(c, 8), UsageError);
  EXPECT_EQ(parse_ablation_name("Net5"), 5);
  EXPECT_EQ(parse_ablation_name("3"), 3);
  EXPECT_THROW(parse_ablation_name("Net0"), UsageError);
  EXPECT_THROW(parse_ablation_name("Net12"), UsageError);
  RunConfig sr_off;
  apply_ablation(sr_off, 2);
  EXPECT_FALSE(sr_off.sr().enabled);
}
