#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csanet/data.hpp"
#include "csanet/model.hpp"

namespace csanet {

struct PsdEstimate {
  std::vector<double> freqs;  // Hz
  std::vector<double> power;  // per Hz
};

struct WelchOptions {
  // 0 selects min(256, signal length).
  std::size_t segment_len = 0;
  double overlap = 0.5;
};

// One-sided Welch estimate with a periodic Hann window and no detrending:
// the average over segments of |FFT(w * x)|^2 / (fs * sum w^2), with every
// bin except DC and Nyquist doubled.
PsdEstimate welch_psd(std::span<const double> signal, double fs, const WelchOptions& options = {});

struct NamedPsd {
  std::string name;
  PsdEstimate estimate;
};

// PSD of the channel-averaged raw trial ("input") and of each temporal-conv
// feature map of `branch` (0-based), channel-averaged likewise
// ("feature<k>", 1-based).
template <typename T>
std::vector<NamedPsd> branch_psd_report(CsanetModel<T>& model, const EEGTrial& trial, std::size_t branch, double fs,
                                        const WelchOptions& options = {});

// Blocks of `# name`, `freq_hz,power` and one row per bin, separated by blank
// lines.
std::string psd_to_csv(const std::vector<NamedPsd>& series);

}  // namespace csanet
