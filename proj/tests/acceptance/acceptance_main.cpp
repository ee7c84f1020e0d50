// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
// the measured quantity; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "csanet/attention.hpp"
#include "csanet/augment.hpp"
#include "csanet/checkpoint.hpp"
#include "csanet/data.hpp"
#include "csanet/gradcheck_suite.hpp"
#include "csanet/metrics.hpp"
#include "csanet/model.hpp"
#include "csanet/ops.hpp"
#include "csanet/psd.hpp"
#include "csanet/run_config.hpp"
#include "csanet/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace csanet;
using testutil::random_tensor;
using testutil::values;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Synthetic set of the overfit criterion: 4 classes, C=8, T=256, SNR 3.
TrialSet synthetic(std::size_t per_class, std::uint64_t seed = 0) {
  SynthSpec spec;
  spec.n_per_class = per_class;
  spec.channels = 8;
  spec.time_steps = 256;
  spec.n_classes = 4;
  spec.snr = 3.0;
  spec.seed = seed;
  return synth_generate(spec);
}

// Default architecture, dimensions adopted from the data.
ModelConfig default_model_for(const TrialSet& data) {
  ModelConfig m;
  m.channels = data.channels;
  m.time_steps = data.time_steps;
  m.n_classes = data.n_classes;
  return m;
}

TrainOptions default_train(std::size_t epochs, const SrConfig& sr, std::uint64_t seed) {
  const TrainConfig t;
  TrainOptions o;
  o.epochs = epochs;
  o.batch_size = t.batch_size;
  o.adam = {t.lr, t.beta1, t.beta2, t.eps};
  o.sr = sr;
  o.seed = seed;
  return o;
}

// ---- 1 ----------------------------------------------------------------------
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string failed;
  for (const auto& scope : gradcheck_scopes()) {
    const auto r = run_gradcheck_scope(scope, 0);
    worst = std::max(worst, r.worst);
    if (!r.passed || r.worst > 1e-3) failed += " " + scope;
  }
  const double dt = seconds_since(t0);
  return {failed.empty() && dt < 120.0,
          fmt("worst rel err %.3g (<= 1e-3), %.1f s (< 120 s)", worst, dt) + (failed.empty() ? "" : "; failed:" + failed)};
}

// ---- 2 ----------------------------------------------------------------------
Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  const int cases = 100;
  double conv_err = 0, lin_err = 0, pool_err = 0, att_err = 0;
  for (int i = 0; i < cases; ++i) {
    oracle::Conv g{};
    g.groups = 1 + rng.uniform_index(2);
    g.B = 1 + rng.uniform_index(2);
    g.Cin = g.groups * (1 + rng.uniform_index(3));
    g.Cout = g.groups * (1 + rng.uniform_index(3));
    g.kh = 1 + rng.uniform_index(3);
    g.kw = 1 + rng.uniform_index(5);
    g.sh = 1 + rng.uniform_index(2);
    g.sw = 1 + rng.uniform_index(2);
    g.dw = 1 + rng.uniform_index(2);
    g.pt = rng.uniform_index(2);
    g.pb = rng.uniform_index(2);
    g.pl = rng.uniform_index(3);
    g.pr = rng.uniform_index(3);
    g.H = g.kh + rng.uniform_index(4);
    g.W = g.dw * (g.kw - 1) + 1 + rng.uniform_index(8);
    const auto x = random_tensor({g.B, g.Cin, g.H, g.W}, rng);
    const auto w = random_tensor({g.Cout, g.Cin / g.groups, g.kh, g.kw}, rng);
    const auto b = random_tensor({g.Cout}, rng);
    Conv2dOptions opt;
    opt.stride = {g.sh, g.sw};
    opt.padding = {g.pt, g.pb, g.pl, g.pr};
    opt.dilation = {g.dh, g.dw};
    opt.groups = g.groups;
    conv_err = std::max(conv_err, oracle::max_abs_diff(values(conv2d(x, w, b, opt)),
                                                       oracle::conv2d(g, values(x), values(w), values(b))));

    const std::size_t rows = 1 + rng.uniform_index(6), din = 1 + rng.uniform_index(10), dout = 1 + rng.uniform_index(8);
    const auto lx = random_tensor({rows, din}, rng), lw = random_tensor({dout, din}, rng), lb = random_tensor({dout}, rng);
    lin_err = std::max(lin_err, oracle::max_abs_diff(values(linear(lx, lw, lb)),
                                                     oracle::linear(values(lx), rows, din, values(lw), dout, values(lb))));

    oracle::Pool p{};
    p.B = 1 + rng.uniform_index(2);
    p.C = 1 + rng.uniform_index(3);
    p.kh = 1;
    p.kw = 1 + rng.uniform_index(7);
    p.sh = 1;
    p.sw = 1 + rng.uniform_index(p.kw);
    p.ph = 0;
    p.pw = rng.uniform_index(p.kw);
    p.H = 1 + rng.uniform_index(3);
    p.W = p.kw + rng.uniform_index(12);
    const auto px = random_tensor({p.B, p.C, p.H, p.W}, rng);
    Pool2dOptions popt;
    popt.kernel = {p.kh, p.kw};
    popt.stride = {p.sh, p.sw};
    popt.padding = {p.ph, p.pw};
    pool_err = std::max(pool_err, oracle::max_abs_diff(values(avg_pool2d(px, popt)), oracle::avg_pool(p, values(px))));

    const std::size_t heads = 1 + rng.uniform_index(4), U = heads * (1 + rng.uniform_index(4));
    const std::size_t B = 1 + rng.uniform_index(2), T = 1 + rng.uniform_index(18);
    const auto ax = random_tensor({B, U, T}, rng), ay = random_tensor({B, U, T}, rng);
    AttentionParams<double> ap;
    ap.w_q = random_tensor({U, U}, rng);
    ap.w_k = random_tensor({U, U}, rng);
    ap.w_v = random_tensor({U, U}, rng);
    AttentionConfig acfg;
    acfg.embed_dim = U;
    acfg.heads = heads;
    acfg.topk_enabled = false;
    acfg.multiscale_pool_enabled = false;
    att_err = std::max(att_err, oracle::max_abs_diff(values(msca_forward(ax, ay, ap, acfg)),
                                                     oracle::attention(values(ax), values(ay), B, U, T, heads,
                                                                       values(ap.w_q), values(ap.w_k), values(ap.w_v),
                                                                       0, 0, 1, 1)));
  }
  const double dt = seconds_since(t0);
  const double worst = std::max({conv_err, lin_err, pool_err, att_err});
  return {worst <= 1e-6 && dt < 60.0,
          fmt("%.0f shapes each; max err conv %.2g, linear %.2g, ", cases, conv_err, lin_err) +
              fmt("avg_pool %.2g, attention %.2g (<= 1e-6); ", pool_err, att_err) + fmt("%.2f s (< 60 s)", dt)};
}

// ---- 3 ----------------------------------------------------------------------
Outcome sparsity_invariants() {
  Rng rng(3);
  double worst_sum = 0;
  bool counts_ok = true;
  for (int i = 0; i < 500; ++i) {
    const std::size_t rows = 1 + rng.uniform_index(6), len = 1 + rng.uniform_index(30);
    const auto sem = rng.uniform() < 0.5 ? TopkSemantics::denominator : TopkSemantics::count;
    const std::size_t keep = keep_count(len, 1 + rng.uniform_index(5), sem);
    const auto y = topk_softmax(random_tensor({rows, len}, rng, -4, 4), keep);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0;
      std::size_t nz = 0;
      for (std::size_t c = 0; c < len; ++c) {
        s += y[r * len + c];
        nz += y[r * len + c] != 0.0;
      }
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
      counts_ok &= nz == keep;
    }
  }
  // alpha=1, beta=0 with keep = T0 for both terms reduces to dense attention.
  double dense_err = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t heads = 1 + rng.uniform_index(4), U = heads * (1 + rng.uniform_index(3));
    const std::size_t T0 = 1 + rng.uniform_index(17);
    const auto x = random_tensor({2, U, T0}, rng), y = random_tensor({2, U, T0}, rng);
    AttentionParams<double> p;
    p.w_q = random_tensor({U, U}, rng);
    p.w_k = random_tensor({U, U}, rng);
    p.w_v = random_tensor({U, U}, rng);
    p.alpha = Tensor<double>::scalar(1.0);
    p.beta = Tensor<double>::scalar(0.0);
    AttentionConfig sparse;
    sparse.embed_dim = U;
    sparse.heads = heads;
    sparse.multiscale_pool_enabled = false;
    sparse.topk_semantics = TopkSemantics::count;
    sparse.k1 = sparse.k2 = T0;
    AttentionConfig dense = sparse;
    dense.topk_enabled = false;
    dense_err = std::max(dense_err, oracle::max_abs_diff(values(msca_forward(x, y, p, sparse)),
                                                         values(msca_forward(x, y, p, dense))));
  }
  return {worst_sum <= 1e-6 && counts_ok && dense_err <= 1e-6,
          fmt("max |row sum - 1| %.2g (<= 1e-6), nonzeros == keep: ", worst_sum) + (counts_ok ? "yes" : "no") +
              fmt("; keep=T0 alpha=1 beta=0 vs dense %.2g (<= 1e-6)", dense_err)};
}

// ---- 4 ----------------------------------------------------------------------
Outcome shapes_and_formulas() {
  const ModelConfig cfg;  // 22 channels, 1000 samples, 4 classes
  const std::size_t U = cfg.temporal_filters[0] * cfg.depth_multiplier;
  CsanetModel<float> model(cfg, 0);
  Rng rng(4);
  NoGradGuard guard;
  const auto x = random_tensor<float>({3, 1, 22, 1000}, rng);
  const auto z = model.branch_forward(x, 0, false, nullptr);
  const auto logits = model.forward(x, false, nullptr);
  const bool ok = U == 32 && cfg.feature_width() == 32 && cfg.reduced_length() == 17 &&
                  z.shape() == Shape{3, 32, 17} && logits.shape() == Shape{3, 4};
  return {ok, "U = " + std::to_string(cfg.feature_width()) + " (32), T0 = " + std::to_string(cfg.reduced_length()) +
                  " (17), branch output " + shape_string(z.shape()) + ", logits " + shape_string(logits.shape()) +
                  " (expected [3,4])"};
}

// ---- 5 ----------------------------------------------------------------------
Outcome sr_contract() {
  const auto t0 = Clock::now();
  Rng rng(5);
  std::size_t violations = 0;
  for (int i = 0; i < 1000; ++i) {
    TrialSet batch;
    batch.channels = 1 + rng.uniform_index(4);
    batch.time_steps = 8 + rng.uniform_index(60);
    batch.n_classes = 4;
    const std::size_t n = 1 + rng.uniform_index(16);
    for (std::size_t k = 0; k < n; ++k) {
      EEGTrial t;
      t.label = static_cast<std::uint32_t>(rng.uniform_index(4));
      for (std::size_t s = 0; s < batch.channels * batch.time_steps; ++s) t.samples.push_back(static_cast<float>(rng.normal()));
      batch.trials.push_back(std::move(t));
    }
    const SrConfig sr{1 + rng.uniform_index(8), true};
    const auto out = sr_augment(batch, sr, rng);
    if (out.size() != 2 * n) {
      ++violations;
      continue;
    }
    const std::size_t C = batch.channels, T = batch.time_steps;
    for (std::size_t j = 0; j < n; ++j) {
      const auto& syn = out.trials[n + j];
      if (!(out.trials[j] == batch.trials[j]) || syn.label != batch.trials[j].label) ++violations;
      for (const auto& [b, e] : segment_bounds(T, sr.segments)) {
        bool found = false;
        for (std::size_t d = 0; d < n && !found; ++d) {
          if (batch.trials[d].label != syn.label) continue;
          bool same = true;
          for (std::size_t c = 0; c < C && same; ++c)
            for (std::size_t t = b; t < e && same; ++t) {
              const float u = syn.samples[c * T + t], v = batch.trials[d].samples[c * T + t];
              same = std::memcmp(&u, &v, sizeof u) == 0;
            }
          found = same;
        }
        violations += !found;
      }
    }
  }
  const double dt = seconds_since(t0);
  return {violations == 0 && dt < 30.0,
          "1000 batches, " + std::to_string(violations) + " violations (0), " + fmt("%.2f s (< 30 s)", dt)};
}

// ---- 6 ----------------------------------------------------------------------
Outcome overfit() {
  const auto t0 = Clock::now();
  const TrialSet data = synthetic(32, stream_seed(0, "synth"));
  CsanetModel<float> model(default_model_for(data), 0);
  Trainer<float> trainer(model, default_train(300, SrConfig{8, true}, 0));
  double best = 0;
  std::size_t epochs = 0;
  trainer.fit(data, nullptr, [&](const EpochLog& log) {
    best = std::max(best, log.train_acc);
    epochs = log.epoch;
    return log.train_acc < 0.95;
  });
  const double final_acc = evaluate(model, data).accuracy;
  const double dt = seconds_since(t0);
  return {final_acc >= 0.95 && epochs <= 300,
          fmt("train accuracy %.4f (>= 0.95) after %.0f epochs (<= 300), %.0f s", final_acc, double(epochs), dt)};
}

// ---- 7 ----------------------------------------------------------------------
Outcome ablation_structure() {
  const auto t0 = Clock::now();
  const TrialSet data = synthetic(32, stream_seed(0, "synth"));
  std::vector<std::size_t> eff(8, 0);
  std::string problems;
  bool net3_no_tcn = false;
  for (int net = 1; net <= 7; ++net) {
    RunConfig run;
    run.model = default_model_for(data);
    apply_ablation(run, net);
    try {
      CsanetModel<float> model(run.model, run.seed);
      if (net == 3) {
        net3_no_tcn = true;
        for (const auto& g : model.parameter_counts().groups) net3_no_tcn &= !g.group.starts_with("tcn");
        for (const auto& p : model.parameters()) net3_no_tcn &= !p.name.starts_with("tcn");
      }
      Trainer<float> trainer(model, default_train(5, run.sr(), run.seed));
      const auto logs = trainer.fit(data);
      if (logs.size() != 5) problems += " Net" + std::to_string(net) + ":epochs";
      for (const auto& l : logs)
        if (!std::isfinite(l.train_loss)) problems += " Net" + std::to_string(net) + ":loss";
      eff[net] = logs.front().effective_batch;
    } catch (const std::exception& e) {
      problems += " Net" + std::to_string(net) + ":" + e.what();
    }
  }
  const bool ok = problems.empty() && eff[1] == 2 * 64 && eff[2] == 64 && net3_no_tcn;
  return {ok, "Net1..Net7 trained 5 epochs; effective batch Net1 " + std::to_string(eff[1]) + " (128), Net2 " +
                  std::to_string(eff[2]) + " (64); Net3 tcn groups absent: " + (net3_no_tcn ? "yes" : "no") +
                  fmt("; %.0f s", seconds_since(t0)) + (problems.empty() ? "" : "; errors:" + problems)};
}

// ---- 8 ----------------------------------------------------------------------
Outcome fusion_modes() {
  const auto t0 = Clock::now();
  const TrialSet data = synthetic(32, stream_seed(0, "synth"));
  std::vector<Shape> shapes;
  std::string problems;
  for (FusionMode mode : {FusionMode::main_auxiliary, FusionMode::hierarchical}) {
    ModelConfig cfg = default_model_for(data);
    cfg.fusion_mode = mode;
    CsanetModel<float> model(cfg, 0);
    Trainer<float> trainer(model, default_train(5, SrConfig{8, true}, 0));
    const auto logs = trainer.fit(data);
    if (logs.size() != 5 || !std::isfinite(logs.back().train_loss)) problems += std::string(" ") + fusion_mode_name(mode);
    NoGradGuard guard;
    const std::vector<std::size_t> idx{0, 1, 2};
    shapes.push_back(model.forward(trials_to_tensor<float>(data, idx), false, nullptr).shape());
  }
  const bool ok = problems.empty() && shapes[0] == shapes[1] && shapes[0] == Shape{3, 4};
  return {ok, "main_auxiliary " + shape_string(shapes[0]) + ", hierarchical " + shape_string(shapes[1]) +
                  fmt("; 5 epochs each, %.0f s", seconds_since(t0)) + (problems.empty() ? "" : "; failed:" + problems)};
}

// ---- 9 ----------------------------------------------------------------------
Outcome metrics_exactness() {
  const auto m = ConfusionMatrix::from_rows({{40, 10}, {20, 30}});
  const double k = kappa(m), acc = accuracy(m);
  const double k_diag = kappa(ConfusionMatrix::from_rows({{5, 0, 0}, {0, 7, 0}, {0, 0, 3}}));
  const double k_unif = kappa(ConfusionMatrix::from_rows({{4, 4}, {4, 4}}));
  const std::vector<double> subj{0.9, 0.7, 0.8};
  // Population std of {0.9, 0.7, 0.8}: sqrt(((0.1)^2 + (0.1)^2 + 0) / 3).
  const double sd = std_across(subj), sd_ref = std::sqrt(0.02 / 3.0);
  const double eps = 4 * std::numeric_limits<double>::epsilon();
  const bool ok = std::abs(k - 0.4) <= eps && k_diag == 1.0 && k_unif == 0.0 && std::abs(acc - 0.7) <= eps &&
                  std::abs(sd - sd_ref) <= eps;
  return {ok, fmt("kappa %.17g (0.4), diag %.17g (1), ", k, k_diag) + fmt("uniform %.17g (0), accuracy %.17g (0.7), ", k_unif, acc) +
                  fmt("std %.17g (%.17g)", sd, sd_ref)};
}

// ---- 10 ---------------------------------------------------------------------
Outcome psd_checks() {
  const double fs = 200.0;
  std::vector<double> x(1000);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::sin(2 * std::numbers::pi * 10.0 * t / fs);
  const auto est = welch_psd(x, fs);
  const std::size_t peak = std::max_element(est.power.begin(), est.power.end()) - est.power.begin();
  const double df = est.freqs[1] - est.freqs[0];
  const auto zero = welch_psd(std::vector<double>(1000, 0.0), fs);
  const double zmax = *std::max_element(zero.power.begin(), zero.power.end());
  const bool ok = std::abs(est.freqs[peak] - 10.0) <= df && zmax == 0.0;
  return {ok, fmt("peak at %.4f Hz (10 +/- %.4f), zero-signal max power %.3g (0)", est.freqs[peak], df, zmax)};
}

// ---- 11 ---------------------------------------------------------------------
template <typename T>
std::vector<double> loss_log(const TrialSet& data) {
  CsanetModel<T> model(default_model_for(data), 11);
  Trainer<T> trainer(model, default_train(5, SrConfig{8, true}, 11));
  std::vector<double> out;
  for (const auto& l : trainer.fit(data)) out.push_back(l.train_loss);
  return out;
}

Outcome determinism() {
  const auto t0 = Clock::now();
  const TrialSet data = synthetic(8, 11);
  const auto d1 = loss_log<double>(data), d2 = loss_log<double>(data);
  const auto f1 = loss_log<float>(data), f2 = loss_log<float>(data);
  bool bitwise = d1.size() == 5 && d2.size() == 5;
  for (std::size_t i = 0; bitwise && i < d1.size(); ++i) bitwise = std::memcmp(&d1[i], &d2[i], sizeof(double)) == 0;
  double fdiff = f1.size() == 5 && f2.size() == 5 ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(f1.size(), f2.size()); ++i) fdiff = std::max(fdiff, std::abs(f1[i] - f2[i]));
  return {bitwise && fdiff <= 1e-7, std::string("64-bit loss logs bitwise equal: ") + (bitwise ? "yes" : "no") +
                                        fmt("; 32-bit max divergence %.3g (<= 1e-7); %.0f s", fdiff, seconds_since(t0))};
}

// ---- 12 ---------------------------------------------------------------------
float random_float_bits(Rng& rng) {
  // Mix ordinary values with raw bit patterns (denormals, signed zeros, huge).
  if (rng.uniform() < 0.5) return static_cast<float>(rng.normal());
  std::uint32_t bits = static_cast<std::uint32_t>(rng.next_u64());
  if ((bits & 0x7F800000u) == 0x7F800000u) bits &= 0xBF7FFFFFu;  // keep it finite
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

Outcome round_trips() {
  Rng rng(12);
  int ckpt_ok = 0, eegd_ok = 0;
  for (int i = 0; i < 100; ++i) {
    Checkpoint c;
    c.config = mini_model_config();
    c.config.conv_dropout = rng.uniform(0.0, 0.9);
    c.config.bn_eps = std::ldexp(rng.uniform(0.5, 1.0), -static_cast<int>(rng.uniform_index(30)));
    c.config.readout = rng.uniform() < 0.5 ? Readout::flatten : Readout::last_step;
    c.config.fusion_mode = rng.uniform() < 0.5 ? FusionMode::hierarchical : FusionMode::main_auxiliary;
    c.config.ablation.topk = rng.uniform() < 0.5;
    const std::size_t blobs = rng.uniform_index(6);
    for (std::size_t b = 0; b < blobs; ++b) {
      CheckpointBlob blob;
      blob.name = "p" + std::to_string(b) + ".w";
      const std::size_t rank = 1 + rng.uniform_index(4);
      std::size_t numel = 1;
      for (std::size_t r = 0; r < rank; ++r) numel *= blob.shape.emplace_back(1 + rng.uniform_index(5));
      for (std::size_t k = 0; k < numel; ++k) blob.values.push_back(random_float_bits(rng));
      c.blobs.push_back(std::move(blob));
    }
    const std::string bytes = encode_checkpoint(c);
    const Checkpoint back = decode_checkpoint(bytes);
    bool ok = back.config == c.config && back.blobs.size() == c.blobs.size() && encode_checkpoint(back) == bytes;
    for (std::size_t b = 0; ok && b < c.blobs.size(); ++b)
      ok = back.blobs[b].name == c.blobs[b].name && back.blobs[b].shape == c.blobs[b].shape &&
           same_bits(back.blobs[b].values, c.blobs[b].values);
    ckpt_ok += ok;

    TrialSet set;
    set.channels = 1 + rng.uniform_index(6);
    set.time_steps = 1 + rng.uniform_index(40);
    set.n_classes = 1 + rng.uniform_index(4);
    const std::size_t n = rng.uniform_index(8);
    for (std::size_t t = 0; t < n; ++t) {
      EEGTrial trial;
      trial.label = static_cast<std::uint32_t>(rng.uniform_index(set.n_classes));
      trial.subject_id = static_cast<std::uint32_t>(rng.next_u64());
      trial.session_id = static_cast<std::uint32_t>(rng.next_u64());
      for (std::size_t k = 0; k < set.channels * set.time_steps; ++k) trial.samples.push_back(random_float_bits(rng));
      set.trials.push_back(std::move(trial));
    }
    const std::string eb = encode_eegd(set);
    const TrialSet eback = decode_eegd(eb);
    bool eok = eback.size() == set.size() && eback.channels == set.channels && eback.time_steps == set.time_steps &&
               eback.n_classes == set.n_classes && encode_eegd(eback) == eb;
    for (std::size_t t = 0; eok && t < set.size(); ++t)
      eok = eback.trials[t].label == set.trials[t].label && eback.trials[t].subject_id == set.trials[t].subject_id &&
            eback.trials[t].session_id == set.trials[t].session_id &&
            same_bits(eback.trials[t].samples, set.trials[t].samples);
    eegd_ok += eok;
  }
  return {ckpt_ok == 100 && eegd_ok == 100,
          std::to_string(ckpt_ok) + "/100 checkpoints and " + std::to_string(eegd_ok) + "/100 EEGD sets bit-exact"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient suite passes finite-difference checks", gradient_suite},
      {"ops match naive oracles", oracle_equivalence},
      {"sparse attention invariants", sparsity_invariants},
      {"feature widths, reduced length and logit shape", shapes_and_formulas},
      {"segmentation-and-reconstruction contract", sr_contract},
      {"overfits the synthetic set", overfit},
      {"ablation variants build and train", ablation_structure},
      {"both fusion modes train", fusion_modes},
      {"metrics match closed forms", metrics_exactness},
      {"Welch spectrum peak and zero signal", psd_checks},
      {"seeded training is reproducible", determinism},
      {"checkpoint and EEGD round-trips", round_trips},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
