#include "csanet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csanet/error.hpp"
#include "csanet/rng.hpp"

namespace csanet {

namespace {

std::vector<Tensor<double>> handles(const std::vector<Parameter<double>>& inputs) {
  std::vector<Tensor<double>> out;
  out.reserve(inputs.size());
  for (const auto& p : inputs) out.push_back(p.tensor);
  return out;
}

double evaluate(const LossFn& loss, const std::vector<Tensor<double>>& args) {
  const Tensor<double> value = loss(args);
  const double v = value.item();
  if (!std::isfinite(v)) throw NumericalError("grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const LossFn& loss, std::vector<Parameter<double>> inputs, const GradCheckOptions& options) {
  const auto args = handles(inputs);
  for (auto& p : inputs) {
    p.tensor.set_requires_grad(true);
    p.tensor.zero_grad();
  }
  {
    Tensor<double> value = loss(args);
    if (!std::isfinite(value.item())) throw NumericalError("grad_check: loss is not finite");
    value.backward();
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& p : inputs) {
    auto g = p.tensor.grad();
    for (double v : g) {
      if (!std::isfinite(v)) throw NumericalError("grad_check: gradient of '" + p.name + "' is not finite");
    }
    analytic.emplace_back(g.begin(), g.end());
  }

  GradCheckReport report;
  Rng rng(options.seed);
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto data = inputs[k].tensor.data();
    std::vector<std::size_t> probe(data.size());
    std::iota(probe.begin(), probe.end(), std::size_t{0});
    if (options.max_entries_per_input > 0 && probe.size() > options.max_entries_per_input) {
      // Partial Fisher-Yates picks a seeded subset without replacement.
      for (std::size_t i = 0; i < options.max_entries_per_input; ++i) {
        std::swap(probe[i], probe[i + rng.uniform_index(probe.size() - i)]);
      }
      probe.resize(options.max_entries_per_input);
      std::sort(probe.begin(), probe.end());
    }
    GradCheckEntry entry{inputs[k].name, probe.size(), 0.0};
    for (std::size_t i : probe) {
      const double saved = data[i];
      data[i] = saved + options.step;
      const double plus = evaluate(loss, args);
      data[i] = saved - options.step;
      const double minus = evaluate(loss, args);
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(a - numeric) / denom);
    }
    report.worst = std::max(report.worst, entry.max_rel_error);
    report.inputs.push_back(std::move(entry));
  }
  report.passed = report.worst <= options.tolerance;
  return report;
}

}  // namespace csanet
