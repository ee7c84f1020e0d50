#include "csanet/model.hpp"

#include <cmath>

#include "csanet/error.hpp"

namespace csanet {

std::size_t ParameterCounts::of(std::string_view group) const {
  for (const auto& g : groups) {
    if (g.group == group) return g.count;
  }
  return 0;
}

ParameterCounts count_parameters(const ModelConfig& cfg) {
  cfg.validate();
  ParameterCounts out;
  auto add_group = [&](std::string name, std::size_t n) {
    out.groups.push_back({std::move(name), n});
    out.total += n;
  };
  const std::size_t n = cfg.branches();
  const std::size_t U = cfg.feature_width();
  const std::size_t D = cfg.depth_multiplier;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t F = cfg.temporal_filters[i];
    const std::size_t temporal = F * cfg.temporal_kernels[i] + 2 * F;
    const std::size_t depthwise = F * D * cfg.channels + 2 * F * D;
    const std::size_t spatial = cfg.spa_filters * F * D * cfg.spa_kernel + 2 * cfg.spa_filters;
    add_group("branch" + std::to_string(i + 1), temporal + depthwise + spatial);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const bool mixing = i > 0 && cfg.ablation.topk;
    add_group("fusion" + std::to_string(i + 1), 3 * U * U + (mixing ? 2 : 0));
  }
  if (cfg.ablation.tcn) {
    const std::size_t Ft = cfg.tcn.filters, Kt = cfg.tcn.kernel;
    const std::size_t per_block = (Ft * U * Kt + 2 * Ft) + (Ft * Ft * Kt + 2 * Ft);
    for (std::size_t i = 0; i < n; ++i) add_group("tcn" + std::to_string(i + 1), cfg.tcn.dilations.size() * per_block);
  }
  add_group("classifier", cfg.n_classes * cfg.classifier_width() + cfg.n_classes);
  return out;
}

namespace {

template <typename T>
Tensor<T> uniform_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor<T> w(std::move(shape));
  for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  w.set_requires_grad(true);
  return w;
}

template <typename T>
BatchNorm2d<T> make_bn(std::size_t channels) {
  BatchNorm2d<T> bn{Tensor<T>({channels}, T{1}), Tensor<T>({channels}, T{0}), BatchNormStats<T>(channels)};
  bn.gamma.set_requires_grad(true);
  bn.beta.set_requires_grad(true);
  return bn;
}

// Zero padding along time that keeps the length unchanged; the odd sample of
// an even kernel goes to the right.
Padding2d same_time_padding(std::size_t kernel) {
  const std::size_t total = kernel - 1;
  return {0, 0, total / 2, total - total / 2};
}

template <typename T>
void push_bn(std::vector<Parameter<T>>& out, const std::string& prefix, const BatchNorm2d<T>& bn) {
  out.push_back({prefix + ".gamma", bn.gamma});
  out.push_back({prefix + ".beta", bn.beta});
}

template <typename T>
void push_bn_buffers(std::vector<Buffer<T>>& out, const std::string& prefix, BatchNorm2d<T>& bn) {
  out.push_back({prefix + ".running_mean", &bn.stats.running_mean});
  out.push_back({prefix + ".running_var", &bn.stats.running_var});
}

}  // namespace

template <typename T>
CsanetModel<T>::CsanetModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = Rng::derive(seed, "init");
  const std::size_t n = cfg_.branches();
  const std::size_t U = cfg_.feature_width();
  const std::size_t D = cfg_.depth_multiplier;

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t F = cfg_.temporal_filters[i], K = cfg_.temporal_kernels[i];
    BranchParams<T> b;
    b.temporal_conv = uniform_weight<T>({F, 1, 1, K}, K, rng);
    b.bn1 = make_bn<T>(F);
    b.depthwise_conv = uniform_weight<T>({F * D, 1, cfg_.channels, 1}, cfg_.channels, rng);
    b.bn2 = make_bn<T>(F * D);
    b.spatial_conv = uniform_weight<T>({cfg_.spa_filters, F * D, 1, cfg_.spa_kernel}, F * D * cfg_.spa_kernel, rng);
    b.bn3 = make_bn<T>(cfg_.spa_filters);
    branches_.push_back(std::move(b));
  }
  for (std::size_t i = 0; i < n; ++i) {
    fusion_.push_back(init_attention_params<T>(U, i > 0 && cfg_.ablation.topk, rng));
  }
  tcn_.resize(n);
  if (cfg_.ablation.tcn) {
    const std::size_t Ft = cfg_.tcn.filters, Kt = cfg_.tcn.kernel;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < cfg_.tcn.dilations.size(); ++d) {
        TcnBlockParams<T> blk;
        blk.conv1 = uniform_weight<T>({Ft, U, 1, Kt}, U * Kt, rng);
        blk.bn1 = make_bn<T>(Ft);
        blk.conv2 = uniform_weight<T>({Ft, Ft, 1, Kt}, Ft * Kt, rng);
        blk.bn2 = make_bn<T>(Ft);
        tcn_[i].push_back(std::move(blk));
      }
    }
  }
  const std::size_t width = cfg_.classifier_width();
  classifier_weight_ = uniform_weight<T>({cfg_.n_classes, width}, width, rng);
  classifier_bias_ = Tensor<T>({cfg_.n_classes}, T{0});
  classifier_bias_.set_requires_grad(true);
}

template <typename T>
Tensor<T> CsanetModel<T>::bn(const Tensor<T>& x, BatchNorm2d<T>& norm, bool training) {
  return batch_norm(x, norm.gamma, norm.beta, norm.stats, training, static_cast<T>(cfg_.bn_momentum),
                    static_cast<T>(cfg_.bn_eps));
}

template <typename T>
Tensor<T> CsanetModel<T>::drop(const Tensor<T>& x, double p, bool training, Rng* rng) {
  if (!training || p == 0.0) return x;
  if (!rng) throw StateError("training-mode forward pass needs a dropout random stream");
  return dropout(x, p, training, *rng);
}

template <typename T>
Tensor<T> CsanetModel<T>::temporal_features(const Tensor<T>& x, std::size_t branch) {
  if (branch >= branches_.size()) throw ConfigError("branch index out of range");
  Conv2dOptions opt;
  opt.padding = same_time_padding(cfg_.temporal_kernels[branch]);
  return conv2d(x, branches_[branch].temporal_conv, Tensor<T>(), opt);
}

template <typename T>
Tensor<T> CsanetModel<T>::branch_forward(const Tensor<T>& x, std::size_t branch, bool training, Rng* rng) {
  if (branch >= branches_.size()) throw ConfigError("branch index out of range");
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.channels || x.dim(3) != cfg_.time_steps) {
    throw DimensionError("model input must be [B, 1, " + std::to_string(cfg_.channels) + ", " +
                         std::to_string(cfg_.time_steps) + "], got " + shape_string(x.shape()));
  }
  BranchParams<T>& p = branches_[branch];
  const std::size_t B = x.dim(0);

  Tensor<T> h = bn(temporal_features(x, branch), p.bn1, training);

  Conv2dOptions depthwise;
  depthwise.groups = cfg_.temporal_filters[branch];
  h = elu(bn(conv2d(h, p.depthwise_conv, Tensor<T>(), depthwise), p.bn2, training));
  Pool2dOptions pool1;
  pool1.kernel = {1, cfg_.pool1};
  pool1.stride = {1, cfg_.pool1};
  h = drop(avg_pool2d(h, pool1), cfg_.conv_dropout, training, rng);

  Conv2dOptions spatial;
  spatial.padding = same_time_padding(cfg_.spa_kernel);
  h = elu(bn(conv2d(h, p.spatial_conv, Tensor<T>(), spatial), p.bn3, training));
  Pool2dOptions pool2;
  pool2.kernel = {1, cfg_.pool2};
  pool2.stride = {1, cfg_.pool2};
  h = drop(avg_pool2d(h, pool2), cfg_.conv_dropout, training, rng);

  return reshape(h, {B, cfg_.spa_filters, cfg_.reduced_length()});
}

template <typename T>
std::vector<Tensor<T>> CsanetModel<T>::fuse_branches(const std::vector<Tensor<T>>& z) {
  if (z.size() != fusion_.size()) {
    throw DimensionError("expected " + std::to_string(fusion_.size()) + " branch outputs, got " +
                         std::to_string(z.size()));
  }
  for (const auto& zi : z) {
    if (zi.shape() != z[0].shape()) {
      throw DimensionError("branch outputs disagree: " + shape_string(z[0].shape()) + " vs " +
                           shape_string(zi.shape()));
    }
  }
  const AttentionConfig main_cfg = cfg_.main_attention();
  const AttentionConfig aux_cfg = cfg_.attention();
  auto combine = [&](const Tensor<T>& zi, const Tensor<T>& attended) {
    return cfg_.ablation.residual ? residual_fuse(zi, attended) : attended;
  };

  std::vector<Tensor<T>> m;
  m.reserve(z.size());
  m.push_back(combine(z[0], msca_forward(z[0], z[0], fusion_[0], main_cfg)));
  for (std::size_t i = 1; i < z.size(); ++i) {
    const Tensor<T> attended = cfg_.fusion_mode == FusionMode::hierarchical
                                   ? msca_forward(m[i - 1], z[i], fusion_[i], aux_cfg)
                                   : msca_forward(z[i], z[0], fusion_[i], aux_cfg);
    m.push_back(combine(z[i], attended));
  }
  return m;
}

template <typename T>
Tensor<T> CsanetModel<T>::tcn_sequence(const Tensor<T>& m, std::size_t branch, bool training, Rng* rng) {
  if (m.rank() != 3) throw DimensionError("TCN input must be [B, U, T0], got " + shape_string(m.shape()));
  const std::size_t B = m.dim(0), T0 = m.dim(2);
  if (!cfg_.ablation.tcn) return m;
  Tensor<T> h = reshape(m, {B, m.dim(1), 1, T0});
  for (std::size_t blk = 0; blk < tcn_.at(branch).size(); ++blk) {
    TcnBlockParams<T>& p = tcn_[branch][blk];
    const std::size_t d = cfg_.tcn.dilations[blk];
    Conv2dOptions causal;
    causal.padding = {0, 0, (cfg_.tcn.kernel - 1) * d, 0};
    causal.dilation = {1, d};
    Tensor<T> y = drop(elu(bn(conv2d(h, p.conv1, Tensor<T>(), causal), p.bn1, training)), cfg_.tcn.dropout,
                       training, rng);
    y = drop(elu(bn(conv2d(y, p.conv2, Tensor<T>(), causal), p.bn2, training)), cfg_.tcn.dropout, training, rng);
    h = add(y, h);
  }
  return reshape(h, {B, cfg_.tcn.filters, T0});
}

template <typename T>
Tensor<T> CsanetModel<T>::tcn_forward(const Tensor<T>& m, std::size_t branch, bool training, Rng* rng) {
  const Tensor<T> seq = tcn_sequence(m, branch, training, rng);
  const std::size_t B = seq.dim(0), W = seq.dim(1), T0 = seq.dim(2);
  if (cfg_.readout == Readout::flatten) return reshape(seq, {B, W * T0});
  return reshape(slice(seq, 2, T0 - 1, 1), {B, W});
}

template <typename T>
Tensor<T> CsanetModel<T>::forward(const Tensor<T>& x, bool training, Rng* rng) {
  std::vector<Tensor<T>> z;
  z.reserve(branches_.size());
  for (std::size_t i = 0; i < branches_.size(); ++i) z.push_back(branch_forward(x, i, training, rng));
  const std::vector<Tensor<T>> m = fuse_branches(z);
  std::vector<Tensor<T>> readouts;
  readouts.reserve(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) readouts.push_back(tcn_forward(m[i], i, training, rng));
  const Tensor<T> features = readouts.size() == 1 ? readouts[0] : concat(readouts, 1);
  return linear(features, classifier_weight_, classifier_bias_);
}

template <typename T>
std::vector<Parameter<T>> CsanetModel<T>::parameters() const {
  std::vector<Parameter<T>> out;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const std::string pre = "branch" + std::to_string(i + 1);
    const auto& b = branches_[i];
    out.push_back({pre + ".temporal_conv.weight", b.temporal_conv});
    push_bn(out, pre + ".bn1", b.bn1);
    out.push_back({pre + ".depthwise_conv.weight", b.depthwise_conv});
    push_bn(out, pre + ".bn2", b.bn2);
    out.push_back({pre + ".spatial_conv.weight", b.spatial_conv});
    push_bn(out, pre + ".bn3", b.bn3);
  }
  for (std::size_t i = 0; i < fusion_.size(); ++i) {
    for (auto& p : fusion_[i].named("fusion" + std::to_string(i + 1) + ".")) out.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < tcn_.size(); ++i) {
    for (std::size_t blk = 0; blk < tcn_[i].size(); ++blk) {
      const std::string pre = "tcn" + std::to_string(i + 1) + ".block" + std::to_string(blk + 1);
      const auto& p = tcn_[i][blk];
      out.push_back({pre + ".conv1.weight", p.conv1});
      push_bn(out, pre + ".bn1", p.bn1);
      out.push_back({pre + ".conv2.weight", p.conv2});
      push_bn(out, pre + ".bn2", p.bn2);
    }
  }
  out.push_back({"classifier.weight", classifier_weight_});
  out.push_back({"classifier.bias", classifier_bias_});
  return out;
}

template <typename T>
std::vector<Buffer<T>> CsanetModel<T>::buffers() {
  std::vector<Buffer<T>> out;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const std::string pre = "branch" + std::to_string(i + 1);
    push_bn_buffers(out, pre + ".bn1", branches_[i].bn1);
    push_bn_buffers(out, pre + ".bn2", branches_[i].bn2);
    push_bn_buffers(out, pre + ".bn3", branches_[i].bn3);
  }
  for (std::size_t i = 0; i < tcn_.size(); ++i) {
    for (std::size_t blk = 0; blk < tcn_[i].size(); ++blk) {
      const std::string pre = "tcn" + std::to_string(i + 1) + ".block" + std::to_string(blk + 1);
      push_bn_buffers(out, pre + ".bn1", tcn_[i][blk].bn1);
      push_bn_buffers(out, pre + ".bn2", tcn_[i][blk].bn2);
    }
  }
  return out;
}

template <typename T>
ParameterCounts CsanetModel<T>::parameter_counts() const {
  ParameterCounts out;
  for (const auto& p : parameters()) {
    const std::string group = p.name.substr(0, p.name.find('.'));
    if (out.groups.empty() || out.groups.back().group != group) out.groups.push_back({group, 0});
    out.groups.back().count += p.tensor.numel();
    out.total += p.tensor.numel();
  }
  return out;
}

template <typename T>
void CsanetModel<T>::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

template <typename T>
Tensor<T> trials_to_tensor(const TrialSet& set, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("cannot build an input tensor from zero trials");
  const std::size_t per = set.channels * set.time_steps;
  std::vector<T> values;
  values.reserve(indices.size() * per);
  for (std::size_t i : indices) {
    if (i >= set.size()) throw DataError("trial index out of range");
    const auto& s = set.trials[i].samples;
    if (s.size() != per) throw DataError("trial " + std::to_string(i) + " does not have C*T samples");
    for (float v : s) values.push_back(static_cast<T>(v));
  }
  return Tensor<T>({indices.size(), 1, set.channels, set.time_steps}, std::move(values));
}

template <typename T>
Tensor<T> trials_to_tensor(const TrialSet& set) {
  std::vector<std::size_t> all(set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return trials_to_tensor<T>(set, all);
}

template <typename T>
std::vector<std::size_t> predict_classes(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw DimensionError("logits must be [B, L], got " + shape_string(logits.shape()));
  const std::size_t B = logits.dim(0), L = logits.dim(1);
  const auto d = logits.data();
  std::vector<std::size_t> out(B);
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < L; ++c) {
      if (d[b * L + c] > d[b * L + best]) best = c;
    }
    out[b] = best;
  }
  return out;
}

template class CsanetModel<float>;
template class CsanetModel<double>;
template Tensor<float> trials_to_tensor<float>(const TrialSet&, std::span<const std::size_t>);
template Tensor<double> trials_to_tensor<double>(const TrialSet&, std::span<const std::size_t>);
template Tensor<float> trials_to_tensor<float>(const TrialSet&);
template Tensor<double> trials_to_tensor<double>(const TrialSet&);
template std::vector<std::size_t> predict_classes<float>(const Tensor<float>&);
template std::vector<std::size_t> predict_classes<double>(const Tensor<double>&);

}  // namespace csanet
