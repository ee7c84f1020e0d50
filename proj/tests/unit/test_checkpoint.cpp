#include <gtest/gtest.h>

#include "csanet/checkpoint.hpp"
#include "csanet/error.hpp"
#include "csanet/gradcheck_suite.hpp"
#include "test_util.hpp"

using namespace csanet;
using testutil::random_tensor;
using testutil::values;

namespace {

Checkpoint random_checkpoint(Rng& rng) {
  Checkpoint c;
  c.config = mini_model_config();
  c.config.readout = rng.uniform() < 0.5 ? Readout::flatten : Readout::last_step;
  const std::size_t n = rng.uniform_index(5);
  for (std::size_t i = 0; i < n; ++i) {
    CheckpointBlob b;
    b.name = "blob" + std::to_string(i) + std::string(rng.uniform_index(4), 'x');
    const std::size_t rank = 1 + rng.uniform_index(4);
    std::size_t numel = 1;
    for (std::size_t r = 0; r < rank; ++r) {
      b.shape.push_back(1 + rng.uniform_index(4));
      numel *= b.shape.back();
    }
    for (std::size_t k = 0; k < numel; ++k) b.values.push_back(static_cast<float>(rng.normal()));
    c.blobs.push_back(std::move(b));
  }
  return c;
}

}  // namespace

TEST(Checkpoint, EncodeDecodeFuzz) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto c = random_checkpoint(rng);
    EXPECT_EQ(decode_checkpoint(encode_checkpoint(c)), c) << "case " << i;
  }
}

TEST(Checkpoint, CorruptionIsDetected) {
  Rng rng(2);
  auto c = random_checkpoint(rng);
  c.blobs.push_back({"w", {2}, {1.0f, 2.0f}});
  const auto bytes = encode_checkpoint(c);
  std::string magic = bytes;
  magic[1] = 'Z';
  EXPECT_THROW(decode_checkpoint(magic), FormatError);
  std::string version = bytes;
  version[4] = 9;
  EXPECT_THROW(decode_checkpoint(version), FormatError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, cut)), FormatError) << cut;
  EXPECT_THROW(decode_checkpoint(bytes + "!"), FormatError);
}

TEST(Checkpoint, ModelRoundTripReproducesPredictions) {
  auto cfg = mini_model_config();
  CsanetModel<float> model(cfg, 7);
  Rng rng(3), drop(4);
  const auto x = random_tensor<float>({4, 1, cfg.channels, cfg.time_steps}, rng);
  model.forward(x, true, &drop);  // move the running statistics off their defaults
  const auto ckpt = make_checkpoint(model);
  EXPECT_EQ(ckpt.config, cfg);
  EXPECT_EQ(ckpt.blobs.size(), model.parameters().size() + model.buffers().size());

  testutil::TempDir dir("ckpt");
  save_checkpoint(ckpt, dir.path() / "m.ckpt");
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "m.ckpt.partial"));
  auto restored = model_from_checkpoint<float>(load_checkpoint(dir.path() / "m.ckpt"));
  NoGradGuard guard;
  EXPECT_EQ(values(restored.forward(x, false, nullptr)), values(model.forward(x, false, nullptr)));

  // Double-precision restore of a float checkpoint agrees to float accuracy.
  auto wide = model_from_checkpoint<double>(ckpt);
  const auto xd = Tensor<double>(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
  const auto a = values(wide.forward(xd, false, nullptr)), b = values(model.forward(x, false, nullptr));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-3);
}

TEST(Checkpoint, StrictBlobMatching) {
  CsanetModel<float> model(mini_model_config(), 0);
  const auto good = make_checkpoint(model);

  auto missing = good;
  missing.blobs.pop_back();
  EXPECT_THROW(model_from_checkpoint<float>(missing), DataError);

  auto extra = good;
  extra.blobs.push_back({"stray", {1}, {0.0f}});
  EXPECT_THROW(model_from_checkpoint<float>(extra), DataError);

  auto reshaped = good;
  reshaped.blobs[0].shape = {reshaped.blobs[0].values.size()};
  EXPECT_THROW(model_from_checkpoint<float>(reshaped), DataError);
}

TEST(Checkpoint, MissingFile) {
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), DataError);
}
