#include "csanet/tensor.hpp"

#include <unordered_set>
#include <utility>

#include "csanet/error.hpp"

namespace csanet {

namespace {
thread_local bool grad_mode_enabled = true;
}  // namespace

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool enabled) { grad_mode_enabled = enabled; }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) {
  check_shape(shape);
  node_ = std::make_shared<TensorNode<T>>();
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) {
  check_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("tensor of shape " + shape_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_ = std::make_shared<TensorNode<T>>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <typename T>
Tensor<T> Tensor<T>::from_node(std::shared_ptr<TensorNode<T>> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!node_) throw StateError("use of an undefined tensor");
  return node_->shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(s));
  }
  return s[axis];
}

template <typename T>
std::span<T> Tensor<T>::data() {
  if (!node_) throw StateError("use of an undefined tensor");
  return node_->data;
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  if (!node_) throw StateError("use of an undefined tensor");
  return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw DimensionError("item() needs a single-element tensor, got " + shape_string(shape()));
  return node_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  if (!node_) throw StateError("use of an undefined tensor");
  node_->requires_grad = on;
  return *this;
}

template <typename T>
std::span<T> Tensor<T>::grad() {
  if (!has_grad()) throw StateError("tensor has no gradient");
  return node_->grad;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!has_grad()) throw StateError("tensor has no gradient");
  return node_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (!node_) throw StateError("use of an undefined tensor");
  node_->grad.assign(node_->data.size(), T{0});
}

template <typename T>
void Tensor<T>::clear_grad() {
  if (node_) {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
  }
}

template <typename T>
void Tensor<T>::backward() {
  if (!node_) throw StateError("backward() on an undefined tensor");
  if (node_->data.size() != 1) {
    throw DimensionError("backward() needs a single-element tensor, got " + shape_string(node_->shape));
  }
  if (!node_->requires_grad) throw StateError("backward() on a tensor that does not require grad");

  // Iterative post-order DFS gives a topological order of the graph.
  std::vector<TensorNode<T>*> order;
  std::unordered_set<TensorNode<T>*> visited;
  std::vector<std::pair<TensorNode<T>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next_parent] = stack.back();
    if (next_parent < node->parents.size()) {
      TensorNode<T>* parent = node->parents[next_parent++].get();
      if (parent && parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<T>* node = *it;
    if (node->backward_fn && !node->grad.empty()) {
      node->backward_fn(*node);
      // Only leaves keep their gradient.
      node->grad = std::vector<T>();
    }
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(shape(), std::vector<T>(node_->data));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor copy(shape(), std::vector<T>(node_->data));
  copy.node_->requires_grad = node_->requires_grad;
  return copy;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace csanet
