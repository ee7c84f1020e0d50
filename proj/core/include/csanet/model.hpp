#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csanet/attention.hpp"
#include "csanet/data.hpp"
#include "csanet/model_config.hpp"
#include "csanet/ops.hpp"
#include "csanet/rng.hpp"
#include "csanet/tensor.hpp"

namespace csanet {

// Parameter-count breakdown. Group names are "branch<i>", "fusion<i>",
// "tcn<i>" (1-based) and "classifier".
struct ParameterCount {
  std::string group;
  std::size_t count = 0;
};

struct ParameterCounts {
  std::vector<ParameterCount> groups;
  std::size_t total = 0;

  // 0 when the group is absent.
  std::size_t of(std::string_view group) const;
};

// Closed-form counts from the configuration alone.
ParameterCounts count_parameters(const ModelConfig& cfg);

// A named non-trainable buffer (batch-norm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  std::vector<T>* values;
};

// Affine batch norm with its running statistics.
template <typename T>
struct BatchNorm2d {
  Tensor<T> gamma;
  Tensor<T> beta;
  BatchNormStats<T> stats;
};

template <typename T>
struct BranchParams {
  Tensor<T> temporal_conv;   // [F, 1, 1, K]
  BatchNorm2d<T> bn1;
  Tensor<T> depthwise_conv;  // [F*D, 1, C, 1], groups F
  BatchNorm2d<T> bn2;
  Tensor<T> spatial_conv;    // [F6, F*D, 1, spa_kernel]
  BatchNorm2d<T> bn3;
};

template <typename T>
struct TcnBlockParams {
  Tensor<T> conv1;  // [Ft, U, 1, Kt]
  BatchNorm2d<T> bn1;
  Tensor<T> conv2;  // [Ft, Ft, 1, Kt]
  BatchNorm2d<T> bn2;
};

// The assembled network: per-branch conv feature extractors, attention
// fusion, per-branch TCNs and a linear classifier over their readouts.
//
// Convolutions are bias-free since each one feeds a batch norm. Dropout
// draws come from the Rng passed to the forward functions; it may be null
// when `training` is false.
template <typename T>
class CsanetModel {
 public:
  // Validates `cfg`, then initializes parameters from the "init" substream
  // of `seed`.
  CsanetModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // x [B, 1, C, T] -> logits [B, L].
  Tensor<T> forward(const Tensor<T>& x, bool training, Rng* rng);

  // x [B, 1, C, T] -> Z_i [B, U, T0]; `branch` is 0-based.
  Tensor<T> branch_forward(const Tensor<T>& x, std::size_t branch, bool training, Rng* rng);
  // Z_1..Z_n -> M_1..M_n.
  std::vector<Tensor<T>> fuse_branches(const std::vector<Tensor<T>>& z);
  // M_i [B, U, T0] -> P_i [B, readout_width].
  Tensor<T> tcn_forward(const Tensor<T>& m, std::size_t branch, bool training, Rng* rng);
  // TCN blocks without the readout: [B, U, T0] -> [B, Ft, T0].
  Tensor<T> tcn_sequence(const Tensor<T>& m, std::size_t branch, bool training, Rng* rng);

  // Output of the temporal convolution of `branch` alone, [B, F, C, T].
  Tensor<T> temporal_features(const Tensor<T>& x, std::size_t branch);

  std::vector<Parameter<T>> parameters() const;
  std::vector<Buffer<T>> buffers();
  ParameterCounts parameter_counts() const;
  void zero_grad();

  BranchParams<T>& branch(std::size_t i) { return branches_.at(i); }
  AttentionParams<T>& fusion(std::size_t i) { return fusion_.at(i); }
  std::vector<TcnBlockParams<T>>& tcn(std::size_t i) { return tcn_.at(i); }
  Tensor<T>& classifier_weight() { return classifier_weight_; }
  Tensor<T>& classifier_bias() { return classifier_bias_; }

 private:
  Tensor<T> bn(const Tensor<T>& x, BatchNorm2d<T>& norm, bool training);
  Tensor<T> drop(const Tensor<T>& x, double p, bool training, Rng* rng);

  ModelConfig cfg_;
  std::vector<BranchParams<T>> branches_;
  std::vector<AttentionParams<T>> fusion_;
  std::vector<std::vector<TcnBlockParams<T>>> tcn_;
  Tensor<T> classifier_weight_;  // [L, classifier_width]
  Tensor<T> classifier_bias_;    // [L]
};

// Stacks trials into the model input [B, 1, C, T].
template <typename T>
Tensor<T> trials_to_tensor(const TrialSet& set, std::span<const std::size_t> indices);
template <typename T>
Tensor<T> trials_to_tensor(const TrialSet& set);

// Row-wise argmax of logits [B, L].
template <typename T>
std::vector<std::size_t> predict_classes(const Tensor<T>& logits);

extern template class CsanetModel<float>;
extern template class CsanetModel<double>;

}  // namespace csanet
