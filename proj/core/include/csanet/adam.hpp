#pragma once

#include <cstdint>
#include <vector>

#include "csanet/tensor.hpp"

namespace csanet {

struct AdamOptions {
  double lr = 0.0009;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Gradients are read, never modified; the caller
// zeroes them between steps.
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Parameter<T>> params, AdamOptions options = {});

  // Throws StateError if any parameter lacks a gradient of matching size.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  // First and second moment buffers of parameter i.
  const std::vector<T>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<T>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<Parameter<T>> params_;
  AdamOptions options_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::uint64_t step_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace csanet
