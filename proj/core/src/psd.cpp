#include "csanet/psd.hpp"

#include <cmath>
#include <complex>
#include <memory>
#include <numbers>

#include <fftw3.h>

#include "csanet/error.hpp"
#include "csanet/key_values.hpp"

namespace csanet {

namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
struct PlanDestroy {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};

}  // namespace

PsdEstimate welch_psd(std::span<const double> signal, double fs, const WelchOptions& options) {
  if (!(fs > 0.0) || !std::isfinite(fs)) throw ConfigError("sampling rate must be positive");
  if (!(options.overlap >= 0.0 && options.overlap < 1.0)) throw ConfigError("overlap must lie in [0, 1)");
  if (signal.empty()) throw DataError("PSD of an empty signal");
  const std::size_t n = options.segment_len ? options.segment_len : std::min<std::size_t>(256, signal.size());
  if (n > signal.size()) {
    throw DataError("signal of length " + std::to_string(signal.size()) + " is shorter than one segment of " +
                    std::to_string(n));
  }
  for (double v : signal) {
    if (!std::isfinite(v)) throw NumericalError("PSD input contains a non-finite sample");
  }
  const std::size_t noverlap = static_cast<std::size_t>(std::floor(options.overlap * static_cast<double>(n)));
  const std::size_t step = std::max<std::size_t>(1, n - noverlap);
  const std::size_t n_segments = (signal.size() - n) / step + 1;
  const std::size_t bins = n / 2 + 1;

  std::vector<double> window(n);
  double window_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    window_energy += window[i] * window[i];
  }
  if (n == 1) {
    window[0] = 1.0;
    window_energy = 1.0;
  }

  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, FftwFree> out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  std::unique_ptr<fftw_plan_s, PlanDestroy> plan(
      fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));

  PsdEstimate est;
  est.power.assign(bins, 0.0);
  est.freqs.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) est.freqs[k] = fs * static_cast<double>(k) / static_cast<double>(n);

  for (std::size_t s = 0; s < n_segments; ++s) {
    const double* seg = signal.data() + s * step;
    for (std::size_t i = 0; i < n; ++i) in.get()[i] = seg[i] * window[i];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = out.get()[k][0], im = out.get()[k][1];
      est.power[k] += re * re + im * im;
    }
  }
  const double norm = 1.0 / (static_cast<double>(n_segments) * fs * window_energy);
  for (std::size_t k = 0; k < bins; ++k) {
    const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
    est.power[k] *= unpaired ? norm : 2.0 * norm;
  }
  return est;
}

template <typename T>
std::vector<NamedPsd> branch_psd_report(CsanetModel<T>& model, const EEGTrial& trial, std::size_t branch, double fs,
                                        const WelchOptions& options) {
  const ModelConfig& cfg = model.config();
  const std::size_t C = cfg.channels, Tn = cfg.time_steps;
  if (trial.samples.size() != C * Tn) throw ConfigError("trial dimensions do not match the model");

  std::vector<NamedPsd> out;
  std::vector<double> avg(Tn, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < Tn; ++t) avg[t] += trial.samples[c * Tn + t];
  }
  for (auto& v : avg) v /= static_cast<double>(C);
  out.push_back({"input", welch_psd(avg, fs, options)});

  NoGradGuard no_grad;
  std::vector<T> values(trial.samples.begin(), trial.samples.end());
  const Tensor<T> x({1, 1, C, Tn}, std::move(values));
  const Tensor<T> features = model.temporal_features(x, branch);  // [1, F, C, T]
  const auto data = features.data();
  const std::size_t F = features.dim(1);
  for (std::size_t f = 0; f < F; ++f) {
    std::fill(avg.begin(), avg.end(), 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t t = 0; t < Tn; ++t) avg[t] += static_cast<double>(data[(f * C + c) * Tn + t]);
    }
    for (auto& v : avg) v /= static_cast<double>(C);
    out.push_back({"feature" + std::to_string(f + 1), welch_psd(avg, fs, options)});
  }
  return out;
}

std::string psd_to_csv(const std::vector<NamedPsd>& series) {
  std::string out;
  for (std::size_t s = 0; s < series.size(); ++s) {
    if (s) out += "\n";
    out += "# " + series[s].name + "\nfreq_hz,power\n";
    const auto& est = series[s].estimate;
    for (std::size_t k = 0; k < est.freqs.size(); ++k) {
      out += encode_value(est.freqs[k]) + "," + encode_value(est.power[k]) + "\n";
    }
  }
  return out;
}

template std::vector<NamedPsd> branch_psd_report<float>(CsanetModel<float>&, const EEGTrial&, std::size_t, double,
                                                       const WelchOptions&);
template std::vector<NamedPsd> branch_psd_report<double>(CsanetModel<double>&, const EEGTrial&, std::size_t, double,
                                                        const WelchOptions&);

}  // namespace csanet
