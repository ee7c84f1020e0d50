#include "csanet/adam.hpp"

#include <cmath>
#include <utility>

#include "csanet/error.hpp"

namespace csanet {

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0.0)) throw ConfigError("learning rate must be positive", "train.lr");
  if (!(options_.beta1 >= 0.0 && options_.beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(options_.beta2 >= 0.0 && options_.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(options_.eps > 0.0)) throw ConfigError("eps must be positive");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), T{0});
    v_.emplace_back(p.tensor.numel(), T{0});
  }
}

template <typename T>
void Adam<T>::step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) throw StateError("adam: parameter '" + p.name + "' has no gradient");
    if (p.tensor.grad().size() != p.tensor.numel()) {
      throw StateError("adam: gradient of '" + p.name + "' does not match its shape");
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const T b1 = static_cast<T>(options_.beta1);
  const T b2 = static_cast<T>(options_.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(options_.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(options_.beta2, t));
  const T lr = static_cast<T>(options_.lr);
  const T eps = static_cast<T>(options_.eps);

  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto theta = params_[k].tensor.data();
    auto g = std::as_const(params_[k].tensor).grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      const T m_hat = m[i] / correction1;
      const T v_hat = v[i] / correction2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace csanet
