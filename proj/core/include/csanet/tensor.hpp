#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace csanet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Thread-local switch controlling whether operations record the backward
// graph. Evaluation code disables it through NoGradGuard.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Storage and graph record behind a Tensor handle.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is first accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads `grad` of this node and accumulates into the parents' grads.
  std::function<void(TensorNode&)> backward_fn;

  TensorNode() = default;
  TensorNode(const TensorNode&) = delete;
  TensorNode& operator=(const TensorNode&) = delete;

  // Releases long ancestor chains without recursing once per graph level.
  ~TensorNode() {
    backward_fn = nullptr;
    std::vector<std::shared_ptr<TensorNode>> pending = std::move(parents);
    while (!pending.empty()) {
      std::shared_ptr<TensorNode> node = std::move(pending.back());
      pending.pop_back();
      if (!node || node.use_count() != 1) continue;
      node->backward_fn = nullptr;
      for (auto& p : node->parents) pending.push_back(std::move(p));
      node->parents.clear();
    }
  }

  // Returns the gradient buffer, allocating zeros on first use.
  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T{0});
    return grad;
  }
};

// Dense row-major n-d array with an optional gradient buffer.
//
// Tensor is a shared handle: copies alias the same storage, as parameters
// must be visible both to the model and to the optimizer. Use clone() for a
// deep copy. Operations producing a Tensor record a backward closure when
// grad mode is on and any input requires a gradient.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data().size(); }

  std::span<T> data();
  std::span<const T> data() const;
  T& operator[](std::size_t i) { return node_->data[i]; }
  const T& operator[](std::size_t i) const { return node_->data[i]; }
  // Value of a single-element tensor.
  T item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<T> grad();
  std::span<const T> grad() const;
  // Sets the gradient to zeros, allocating the buffer if needed.
  void zero_grad();
  // Drops the gradient buffer entirely.
  void clear_grad();

  // Reverse-mode sweep from this single-element tensor. Gradients accumulate
  // into every reachable tensor that requires them.
  void backward();

  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<TensorNode<T>> node);

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

// A trainable tensor with a path-like unique name, e.g.
// "branch1.temporal_conv.weight".
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace csanet
