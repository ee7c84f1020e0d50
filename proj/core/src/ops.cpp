#include "csanet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <utility>

#include "csanet/error.hpp"

namespace csanet {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

template <typename T>
using BackwardFn = std::function<void(TensorNode<T>&)>;

// Wraps freshly computed data into a Tensor, recording the backward closure
// only when grad mode is on and some input needs a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::vector<NodePtr<T>> inputs, BackwardFn<T> fn) {
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  if (GradMode::enabled()) {
    const bool needs_grad =
        std::any_of(inputs.begin(), inputs.end(), [](const NodePtr<T>& p) { return p && p->requires_grad; });
    if (needs_grad) {
      node->requires_grad = true;
      node->parents = std::move(inputs);
      node->backward_fn = std::move(fn);
    }
  }
  return Tensor<T>::from_node(std::move(node));
}

// Parent `k` if it wants a gradient, else nullptr.
template <typename T>
TensorNode<T>* grad_target(TensorNode<T>& self, std::size_t k) {
  TensorNode<T>* p = self.parents[k].get();
  return (p && p->requires_grad) ? p : nullptr;
}

template <typename T>
void require_defined(const Tensor<T>& t, const char* op) {
  if (!t.defined()) throw StateError(std::string(op) + ": undefined input tensor");
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op) {
  require_defined(t, op);
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

// y[i] += a * x[i]
template <typename T>
inline void axpy(T* __restrict__ y, const T* __restrict__ x, T a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Dot product with eight independent partial sums; fixed association order.
template <typename T>
inline T dot(const T* __restrict__ a, const T* __restrict__ b, std::size_t n) {
  T part[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) part[j] += a[i + j] * b[i + j];
  }
  T tail{0};
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((part[0] + part[1]) + (part[2] + part[3])) + ((part[4] + part[5]) + (part[6] + part[7])) + tail;
}

// Output positions o in [lo, hi) whose input index o*stride + offset lies in
// [0, extent).
std::pair<std::size_t, std::size_t> valid_range(std::ptrdiff_t offset, std::size_t stride, std::size_t extent,
                                                std::size_t out_extent) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  std::ptrdiff_t lo = 0;
  if (offset < 0) lo = (-offset + s - 1) / s;
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(extent) - 1 - offset;
  if (last < 0) return {0, 0};
  std::ptrdiff_t hi = last / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_extent));
  if (lo >= hi) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* p = grad_target(self, k)) {
        auto g = p->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (auto* p = grad_target(self, 1)) {
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode<T>& self) {
    const auto& x = self.parents[0]->data;
    const auto& y = self.parents[1]->data;
    if (auto* p = grad_target(self, 0)) {
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i];
    }
    if (auto* p = grad_target(self, 1)) {
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  require_defined(a, "scale");
  auto x = a.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return make_result<T>(a.shape(), std::move(out), {a.node()}, [factor](TensorNode<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    }
  });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, const Tensor<T>& s) {
  require_defined(a, "mul_scalar");
  require_defined(s, "mul_scalar");
  if (s.numel() != 1) throw DimensionError("mul_scalar: scalar operand has shape " + shape_string(s.shape()));
  auto x = a.data();
  const T factor = s.item();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return make_result<T>(a.shape(), std::move(out), {a.node(), s.node()}, [](TensorNode<T>& self) {
    const auto& x = self.parents[0]->data;
    const T factor = self.parents[1]->data[0];
    if (auto* p = grad_target(self, 0)) {
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    }
    if (auto* p = grad_target(self, 1)) {
      p->grad_buffer()[0] += dot(self.grad.data(), x.data(), x.size());
    }
  });
}

template <typename T>
Tensor<T> elu(const Tensor<T>& x, T alpha) {
  require_defined(x, "elu");
  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > T{0} ? in[i] : alpha * std::expm1(in[i]);
  return make_result<T>(x.shape(), std::move(out), {x.node()}, [alpha](TensorNode<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      const auto& in = p->data;
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T d = in[i] > T{0} ? T{1} : self.data[i] + alpha;
        g[i] += self.grad[i] * d;
      }
    }
  });
}

// ---- reductions ------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  require_defined(x, "sum");
  T total{0};
  for (T v : x.data()) total += v;
  return make_result<T>(Shape{1}, {total}, {x.node()}, [](TensorNode<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      auto g = p->grad_buffer();
      for (auto& v : g) v += self.grad[0];
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  require_defined(x, "mean");
  T total{0};
  for (T v : x.data()) total += v;
  const T n = static_cast<T>(x.numel());
  return make_result<T>(Shape{1}, {total / n}, {x.node()}, [n](TensorNode<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      auto g = p->grad_buffer();
      for (auto& v : g) v += self.grad[0] / n;
    }
  });
}

// ---- shape -----------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  if (shape.empty()) throw DimensionError("reshape: target shape needs at least one axis");
  auto in = x.data();
  std::vector<T> out(in.begin(), in.end());
  return make_result<T>(std::move(shape), std::move(out), {x.node()}, [](TensorNode<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes) {
  require_defined(x, "permute");
  const Shape& in_shape = x.shape();
  const std::size_t rank = in_shape.size();
  if (axes.size() != rank) throw DimensionError("permute: axis list does not match rank");
  std::vector<bool> seen(rank, false);
  for (std::size_t a : axes) {
    if (a >= rank || seen[a]) throw DimensionError("permute: axes are not a permutation");
    seen[a] = true;
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[axes[i]];
  const auto in_strides = strides_of(in_shape);
  const std::size_t n = x.numel();

  // source[o] = flat input index feeding flat output index o.
  auto source = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> index(rank, 0);
  std::size_t offset = 0;
  for (std::size_t o = 0; o < n; ++o) {
    (*source)[o] = offset;
    for (std::size_t i = rank; i-- > 0;) {
      ++index[i];
      offset += in_strides[axes[i]];
      if (index[i] < out_shape[i]) break;
      offset -= in_strides[axes[i]] * out_shape[i];
      index[i] = 0;
    }
  }
  auto in = x.data();
  std::vector<T> out(n);
  for (std::size_t o = 0; o < n; ++o) out[o] = in[(*source)[o]];
  return make_result<T>(std::move(out_shape), std::move(out), {x.node()}, [source](TensorNode<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      auto g = p->grad_buffer();
      for (std::size_t o = 0; o < source->size(); ++o) g[(*source)[o]] += self.grad[o];
    }
  });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  require_defined(x, "slice");
  const Shape& in_shape = x.shape();
  if (axis >= in_shape.size()) throw DimensionError("slice: axis out of range");
  if (length == 0 || start + length > in_shape[axis]) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds axis extent " + std::to_string(in_shape[axis]));
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in_shape[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < in_shape.size(); ++i) inner *= in_shape[i];
  const std::size_t extent = in_shape[axis];
  Shape out_shape = in_shape;
  out_shape[axis] = length;

  auto in = x.data();
  std::vector<T> out(outer * length * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>((o * extent + start) * inner), length * inner,
                out.begin() + static_cast<std::ptrdiff_t>(o * length * inner));
  }
  return make_result<T>(std::move(out_shape), std::move(out), {x.node()},
                        [outer, inner, extent, start, length](TensorNode<T>& self) {
                          if (auto* p = grad_target(self, 0)) {
                            auto g = p->grad_buffer();
                            for (std::size_t o = 0; o < outer; ++o) {
                              T* dst = g.data() + (o * extent + start) * inner;
                              const T* src = self.grad.data() + o * length * inner;
                              for (std::size_t i = 0; i < length * inner; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  for (const auto& p : parts) require_defined(p, "concat");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range");
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw DimensionError("concat: shape mismatch " + shape_string(s) + " vs " + shape_string(first));
      }
    }
    extents.push_back(s[axis]);
    total += s[axis];
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  Shape out_shape = first;
  out_shape[axis] = total;

  std::vector<T> out(outer * total * inner);
  std::size_t position = 0;
  std::vector<NodePtr<T>> nodes;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto in = parts[k].data();
    const std::size_t block = extents[k] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(o * block), block,
                  out.begin() + static_cast<std::ptrdiff_t>((o * total + position) * inner));
    }
    position += extents[k];
    nodes.push_back(parts[k].node());
  }
  return make_result<T>(std::move(out_shape), std::move(out), std::move(nodes),
                        [outer, inner, total, extents](TensorNode<T>& self) {
                          std::size_t position = 0;
                          for (std::size_t k = 0; k < extents.size(); ++k) {
                            const std::size_t block = extents[k] * inner;
                            if (auto* p = grad_target(self, k)) {
                              auto g = p->grad_buffer();
                              for (std::size_t o = 0; o < outer; ++o) {
                                const T* src = self.grad.data() + (o * total + position) * inner;
                                T* dst = g.data() + o * block;
                                for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                              }
                            }
                            position += extents[k];
                          }
                        });
}

// ---- linear algebra --------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) throw DimensionError("matmul: operands need rank >= 2");
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa[sa.size() - 1];
  const std::size_t n = sb[sb.size() - 1];
  if (sb[sb.size() - 2] != k) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_string(sa) + " x " + shape_string(sb));
  }
  const bool shared_b = sb.size() == 2;
  if (!shared_b) {
    if (sb.size() != sa.size() || !std::equal(sa.begin(), sa.end() - 2, sb.begin())) {
      throw DimensionError("matmul: batch axes differ: " + shape_string(sa) + " x " + shape_string(sb));
    }
  }
  const std::size_t batch = a.numel() / (m * k);
  Shape out_shape(sa.begin(), sa.end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);

  auto ad = a.data();
  auto bd = b.data();
  std::vector<T> out(batch * m * n, T{0});
  for (std::size_t t = 0; t < batch; ++t) {
    const T* A = ad.data() + t * m * k;
    const T* B = bd.data() + (shared_b ? 0 : t * k * n);
    T* C = out.data() + t * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) axpy(C + i * n, B + kk * n, A[i * k + kk], n);
    }
  }
  return make_result<T>(std::move(out_shape), std::move(out), {a.node(), b.node()},
                        [batch, m, k, n, shared_b](TensorNode<T>& self) {
                          const auto& ad = self.parents[0]->data;
                          const auto& bd = self.parents[1]->data;
                          auto* pa = grad_target(self, 0);
                          auto* pb = grad_target(self, 1);
                          std::span<T> ga = pa ? pa->grad_buffer() : std::span<T>();
                          std::span<T> gb = pb ? pb->grad_buffer() : std::span<T>();
                          for (std::size_t t = 0; t < batch; ++t) {
                            const T* A = ad.data() + t * m * k;
                            const T* B = bd.data() + (shared_b ? 0 : t * k * n);
                            const T* G = self.grad.data() + t * m * n;
                            if (pa) {
                              T* GA = ga.data() + t * m * k;
                              for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t kk = 0; kk < k; ++kk) GA[i * k + kk] += dot(G + i * n, B + kk * n, n);
                              }
                            }
                            if (pb) {
                              T* GB = gb.data() + (shared_b ? 0 : t * k * n);
                              for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t kk = 0; kk < k; ++kk) axpy(GB + kk * n, G + i * n, A[i * k + kk], n);
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_defined(x, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t d_out = weight.dim(0);
  const std::size_t d_in = weight.dim(1);
  if (x.shape().back() != d_in) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not end in " + std::to_string(d_in));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.numel() != d_out)) {
    throw DimensionError("linear: bias has " + std::to_string(bias.numel()) + " entries, expected " +
                         std::to_string(d_out));
  }
  const std::size_t rows = x.numel() / d_in;
  Shape out_shape = x.shape();
  out_shape.back() = d_out;

  auto xd = x.data();
  auto wd = weight.data();
  std::vector<T> out(rows * d_out);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < d_out; ++o) {
      out[r * d_out + o] = (has_bias ? bias[o] : T{0}) + dot(xd.data() + r * d_in, wd.data() + o * d_in, d_in);
    }
  }
  std::vector<NodePtr<T>> nodes{x.node(), weight.node()};
  if (has_bias) nodes.push_back(bias.node());
  return make_result<T>(std::move(out_shape), std::move(out), std::move(nodes),
                        [rows, d_in, d_out, has_bias](TensorNode<T>& self) {
                          const auto& xd = self.parents[0]->data;
                          const auto& wd = self.parents[1]->data;
                          const T* G = self.grad.data();
                          if (auto* p = grad_target(self, 0)) {
                            auto g = p->grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t o = 0; o < d_out; ++o) {
                                axpy(g.data() + r * d_in, wd.data() + o * d_in, G[r * d_out + o], d_in);
                              }
                            }
                          }
                          if (auto* p = grad_target(self, 1)) {
                            auto g = p->grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t o = 0; o < d_out; ++o) {
                                axpy(g.data() + o * d_in, xd.data() + r * d_in, G[r * d_out + o], d_in);
                              }
                            }
                          }
                          if (has_bias) {
                            if (auto* p = grad_target(self, 2)) {
                              auto g = p->grad_buffer();
                              for (std::size_t r = 0; r < rows; ++r) {
                                for (std::size_t o = 0; o < d_out; ++o) g[o] += G[r * d_out + o];
                              }
                            }
                          }
                        });
}

// ---- convolution -----------------------------------------------------------

namespace {

struct ConvGeometry {
  std::size_t batch, in_channels, height, width;
  std::size_t out_channels, in_per_group, kernel_h, kernel_w;
  std::size_t out_h, out_w, groups, out_per_group;
  std::size_t stride_h, stride_w, dilation_h, dilation_w;
  std::ptrdiff_t pad_top, pad_left;
};

// Visits every (output row, input row, kernel tap) triple of the convolution
// in a fixed order. `fn(b, oc, ic, weight_index, out_row_offset,
// in_row_offset, col_offset, ow_lo, ow_hi)` handles one contiguous stripe.
template <typename Fn>
void for_each_conv_stripe(const ConvGeometry& g, Fn&& fn) {
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
      const std::size_t group = oc / g.out_per_group;
      for (std::size_t icg = 0; icg < g.in_per_group; ++icg) {
        const std::size_t ic = group * g.in_per_group + icg;
        for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
          const std::ptrdiff_t row_offset = static_cast<std::ptrdiff_t>(kh * g.dilation_h) - g.pad_top;
          const auto [oh_lo, oh_hi] = valid_range(row_offset, g.stride_h, g.height, g.out_h);
          for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
            const std::ptrdiff_t col_offset = static_cast<std::ptrdiff_t>(kw * g.dilation_w) - g.pad_left;
            const auto [ow_lo, ow_hi] = valid_range(col_offset, g.stride_w, g.width, g.out_w);
            if (ow_lo >= ow_hi) continue;
            const std::size_t w_index = ((oc * g.in_per_group + icg) * g.kernel_h + kh) * g.kernel_w + kw;
            for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
              const auto ih = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(oh * g.stride_h) + row_offset);
              const std::size_t out_row = ((b * g.out_channels + oc) * g.out_h + oh) * g.out_w;
              const std::size_t in_row = ((b * g.in_channels + ic) * g.height + ih) * g.width;
              fn(w_index, out_row, in_row, col_offset, ow_lo, ow_hi);
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dOptions& options) {
  require_rank(input, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.height = input.dim(2);
  g.width = input.dim(3);
  g.out_channels = weight.dim(0);
  g.in_per_group = weight.dim(1);
  g.kernel_h = weight.dim(2);
  g.kernel_w = weight.dim(3);
  g.groups = options.groups;
  if (g.groups == 0) throw ConfigError("conv2d: groups must be positive");
  if (g.in_channels % g.groups != 0 || g.out_channels % g.groups != 0) {
    throw ConfigError("conv2d: groups=" + std::to_string(g.groups) + " must divide Cin=" +
                      std::to_string(g.in_channels) + " and Cout=" + std::to_string(g.out_channels));
  }
  if (g.in_per_group != g.in_channels / g.groups) {
    throw DimensionError("conv2d: weight " + shape_string(weight.shape()) + " incompatible with input " +
                         shape_string(input.shape()) + " and groups=" + std::to_string(g.groups));
  }
  if (options.stride[0] == 0 || options.stride[1] == 0 || options.dilation[0] == 0 || options.dilation[1] == 0) {
    throw ConfigError("conv2d: stride and dilation must be positive");
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != g.out_channels) throw DimensionError("conv2d: bias size differs from Cout");
  g.out_per_group = g.out_channels / g.groups;
  g.stride_h = options.stride[0];
  g.stride_w = options.stride[1];
  g.dilation_h = options.dilation[0];
  g.dilation_w = options.dilation[1];
  g.pad_top = static_cast<std::ptrdiff_t>(options.padding.top);
  g.pad_left = static_cast<std::ptrdiff_t>(options.padding.left);
  const std::size_t span_h = g.dilation_h * (g.kernel_h - 1) + 1;
  const std::size_t span_w = g.dilation_w * (g.kernel_w - 1) + 1;
  const std::size_t padded_h = g.height + options.padding.top + options.padding.bottom;
  const std::size_t padded_w = g.width + options.padding.left + options.padding.right;
  if (padded_h < span_h || padded_w < span_w) {
    throw DimensionError("conv2d: kernel extent " + std::to_string(span_h) + "x" + std::to_string(span_w) +
                         " exceeds padded input " + std::to_string(padded_h) + "x" + std::to_string(padded_w));
  }
  g.out_h = (padded_h - span_h) / g.stride_h + 1;
  g.out_w = (padded_w - span_w) / g.stride_w + 1;

  auto in = input.data();
  auto w = weight.data();
  std::vector<T> out(g.batch * g.out_channels * g.out_h * g.out_w, T{0});
  if (has_bias) {
    const std::size_t plane = g.out_h * g.out_w;
    for (std::size_t b = 0; b < g.batch; ++b) {
      for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        std::fill_n(out.begin() + static_cast<std::ptrdiff_t>((b * g.out_channels + oc) * plane), plane, bias[oc]);
      }
    }
  }
  const std::size_t sw = g.stride_w;
  for_each_conv_stripe(g, [&](std::size_t wi, std::size_t out_row, std::size_t in_row, std::ptrdiff_t col,
                              std::size_t lo, std::size_t hi) {
    T* o = out.data() + out_row;
    const T* x = in.data() + in_row;
    const T wv = w[wi];
    if (sw == 1) {
      axpy(o + lo, x + (static_cast<std::ptrdiff_t>(lo) + col), wv, hi - lo);
    } else {
      for (std::size_t ow = lo; ow < hi; ++ow) o[ow] += wv * x[static_cast<std::ptrdiff_t>(ow * sw) + col];
    }
  });

  Shape out_shape{g.batch, g.out_channels, g.out_h, g.out_w};
  std::vector<NodePtr<T>> nodes{input.node(), weight.node()};
  if (has_bias) nodes.push_back(bias.node());
  return make_result<T>(std::move(out_shape), std::move(out), std::move(nodes), [g, has_bias](TensorNode<T>& self) {
    const auto& in = self.parents[0]->data;
    const auto& w = self.parents[1]->data;
    const T* gout = self.grad.data();
    const std::size_t sw = g.stride_w;
    if (auto* p = grad_target(self, 0)) {
      T* gin = p->grad_buffer().data();
      for_each_conv_stripe(g, [&](std::size_t wi, std::size_t out_row, std::size_t in_row, std::ptrdiff_t col,
                                  std::size_t lo, std::size_t hi) {
        const T wv = w[wi];
        T* gi = gin + in_row;
        const T* go = gout + out_row;
        if (sw == 1) {
          axpy(gi + (static_cast<std::ptrdiff_t>(lo) + col), go + lo, wv, hi - lo);
        } else {
          for (std::size_t ow = lo; ow < hi; ++ow) gi[static_cast<std::ptrdiff_t>(ow * sw) + col] += wv * go[ow];
        }
      });
    }
    if (auto* p = grad_target(self, 1)) {
      T* gw = p->grad_buffer().data();
      for_each_conv_stripe(g, [&](std::size_t wi, std::size_t out_row, std::size_t in_row, std::ptrdiff_t col,
                                  std::size_t lo, std::size_t hi) {
        const T* x = in.data() + in_row;
        const T* go = gout + out_row;
        if (sw == 1) {
          gw[wi] += dot(go + lo, x + (static_cast<std::ptrdiff_t>(lo) + col), hi - lo);
        } else {
          T acc{0};
          for (std::size_t ow = lo; ow < hi; ++ow) acc += go[ow] * x[static_cast<std::ptrdiff_t>(ow * sw) + col];
          gw[wi] += acc;
        }
      });
    }
    if (has_bias) {
      if (auto* p = grad_target(self, 2)) {
        auto gb = p->grad_buffer();
        const std::size_t plane = g.out_h * g.out_w;
        for (std::size_t b = 0; b < g.batch; ++b) {
          for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
            const T* go = gout + (b * g.out_channels + oc) * plane;
            T acc{0};
            for (std::size_t i = 0; i < plane; ++i) acc += go[i];
            gb[oc] += acc;
          }
        }
      }
    }
  });
}

// ---- pooling ---------------------------------------------------------------

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, const Pool2dOptions& options) {
  require_rank(input, 4, "avg_pool2d");
  const std::size_t kh = options.kernel[0], kw = options.kernel[1];
  const std::size_t sh = options.stride[0], sw = options.stride[1];
  const std::size_t ph = options.padding[0], pw = options.padding[1];
  if (kh == 0 || kw == 0 || sh == 0 || sw == 0) throw ConfigError("avg_pool2d: kernel and stride must be positive");
  if (ph >= kh || pw >= kw) throw ConfigError("avg_pool2d: padding must be smaller than the kernel");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h + 2 * ph < kh || w + 2 * pw < kw) {
    throw DimensionError("avg_pool2d: window " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " larger than padded input " + shape_string(input.shape()));
  }
  const std::size_t oh = (h + 2 * ph - kh) / sh + 1;
  const std::size_t ow = (w + 2 * pw - kw) / sw + 1;
  const bool include_pad = options.include_pad;

  // Window bounds clipped to the input; divisor per output cell.
  struct Window {
    std::size_t lo, hi;
  };
  auto window = [](std::size_t o, std::size_t stride, std::size_t pad, std::size_t k, std::size_t extent) {
    const auto start = static_cast<std::ptrdiff_t>(o * stride) - static_cast<std::ptrdiff_t>(pad);
    const auto stop = start + static_cast<std::ptrdiff_t>(k);
    return Window{static_cast<std::size_t>(std::max<std::ptrdiff_t>(start, 0)),
                  static_cast<std::size_t>(std::min<std::ptrdiff_t>(stop, static_cast<std::ptrdiff_t>(extent)))};
  };
  std::vector<Window> rows(oh), cols(ow);
  for (std::size_t i = 0; i < oh; ++i) rows[i] = window(i, sh, ph, kh, h);
  for (std::size_t j = 0; j < ow; ++j) cols[j] = window(j, sw, pw, kw, w);

  auto in = input.data();
  std::vector<T> out(n * c * oh * ow);
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const T* x = in.data() + plane * h * w;
    T* y = out.data() + plane * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        T acc{0};
        for (std::size_t r = rows[i].lo; r < rows[i].hi; ++r) {
          for (std::size_t q = cols[j].lo; q < cols[j].hi; ++q) acc += x[r * w + q];
        }
        const std::size_t count =
            include_pad ? kh * kw : (rows[i].hi - rows[i].lo) * (cols[j].hi - cols[j].lo);
        y[i * ow + j] = acc / static_cast<T>(count);
      }
    }
  }
  return make_result<T>(Shape{n, c, oh, ow}, std::move(out), {input.node()},
                        [=](TensorNode<T>& self) {
                          if (auto* p = grad_target(self, 0)) {
                            auto g = p->grad_buffer();
                            for (std::size_t plane = 0; plane < n * c; ++plane) {
                              T* gx = g.data() + plane * h * w;
                              const T* gy = self.grad.data() + plane * oh * ow;
                              for (std::size_t i = 0; i < oh; ++i) {
                                for (std::size_t j = 0; j < ow; ++j) {
                                  const std::size_t count = include_pad ? kh * kw
                                                                        : (rows[i].hi - rows[i].lo) *
                                                                              (cols[j].hi - cols[j].lo);
                                  const T share = gy[i * ow + j] / static_cast<T>(count);
                                  for (std::size_t r = rows[i].lo; r < rows[i].hi; ++r) {
                                    for (std::size_t q = cols[j].lo; q < cols[j].hi; ++q) gx[r * w + q] += share;
                                  }
                                }
                              }
                            }
                          }
                        });
}

// ---- batch norm ------------------------------------------------------------

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormStats<T>& stats,
                     bool training, T momentum, T eps) {
  require_defined(x, "batch_norm");
  if (x.rank() < 2) throw DimensionError("batch_norm: input needs a channel axis");
  const std::size_t batch = x.dim(0);
  const std::size_t channels = x.dim(1);
  const std::size_t inner = x.numel() / (batch * channels);
  if (gamma.numel() != channels || beta.numel() != channels) {
    throw DimensionError("batch_norm: gamma/beta must have " + std::to_string(channels) + " entries");
  }
  if (stats.running_mean.size() != channels || stats.running_var.size() != channels) {
    throw DimensionError("batch_norm: running statistics sized for a different channel count");
  }
  if (training && batch < 2) throw ConfigError("batch_norm: training mode needs a batch of at least 2");

  const std::size_t count = batch * inner;
  auto in = x.data();
  auto gm = gamma.data();
  auto bt = beta.data();
  auto xhat = std::make_shared<std::vector<T>>(in.size());
  auto inv_std = std::make_shared<std::vector<T>>(channels);
  std::vector<T> out(in.size());

  for (std::size_t c = 0; c < channels; ++c) {
    T mu, var;
    if (training) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = in.data() + (b * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += row[i];
      }
      const double m = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = in.data() + (b * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = row[i] - m;
          ss += d * d;
        }
      }
      const double v = ss / static_cast<double>(count);
      mu = static_cast<T>(m);
      var = static_cast<T>(v);
      const double unbiased = v * static_cast<double>(count) / static_cast<double>(count - 1);
      stats.running_mean[c] = (T{1} - momentum) * stats.running_mean[c] + momentum * mu;
      stats.running_var[c] = (T{1} - momentum) * stats.running_var[c] + momentum * static_cast<T>(unbiased);
    } else {
      mu = stats.running_mean[c];
      var = stats.running_var[c];
    }
    const T is = T{1} / std::sqrt(var + eps);
    (*inv_std)[c] = is;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const T xh = (in[base + i] - mu) * is;
        (*xhat)[base + i] = xh;
        out[base + i] = gm[c] * xh + bt[c];
      }
    }
  }

  return make_result<T>(x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()},
                        [=](TensorNode<T>& self) {
                          const auto& gm = self.parents[1]->data;
                          const T* gy = self.grad.data();
                          auto* px = grad_target(self, 0);
                          auto* pg = grad_target(self, 1);
                          auto* pb = grad_target(self, 2);
                          std::span<T> gx = px ? px->grad_buffer() : std::span<T>();
                          const T n = static_cast<T>(count);
                          for (std::size_t c = 0; c < channels; ++c) {
                            T sum_g{0}, sum_gx{0};
                            for (std::size_t b = 0; b < batch; ++b) {
                              const std::size_t base = (b * channels + c) * inner;
                              for (std::size_t i = 0; i < inner; ++i) {
                                sum_g += gy[base + i];
                                sum_gx += gy[base + i] * (*xhat)[base + i];
                              }
                            }
                            if (pg) pg->grad_buffer()[c] += sum_gx;
                            if (pb) pb->grad_buffer()[c] += sum_g;
                            if (!px) continue;
                            const T is = (*inv_std)[c];
                            for (std::size_t b = 0; b < batch; ++b) {
                              const std::size_t base = (b * channels + c) * inner;
                              for (std::size_t i = 0; i < inner; ++i) {
                                if (training) {
                                  gx[base + i] += gm[c] * is / n *
                                                  (n * gy[base + i] - sum_g - (*xhat)[base + i] * sum_gx);
                                } else {
                                  gx[base + i] += gm[c] * is * gy[base + i];
                                }
                              }
                            }
                          }
                        });
}

// ---- dropout ---------------------------------------------------------------

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng) {
  require_defined(x, "dropout");
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(x.numel());
  for (auto& m : *mask) m = rng.uniform() < p ? T{0} : keep_scale;
  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * (*mask)[i];
  return make_result<T>(x.shape(), std::move(out), {x.node()}, [mask](TensorNode<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
    }
  });
}

// ---- softmax family --------------------------------------------------------

namespace {

template <typename T>
void softmax_backward_rows(TensorNode<T>& self, std::size_t row_len) {
  if (auto* p = grad_target(self, 0)) {
    auto g = p->grad_buffer();
    const std::size_t rows = self.data.size() / row_len;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = self.data.data() + r * row_len;
      const T* gy = self.grad.data() + r * row_len;
      T inner{0};
      for (std::size_t i = 0; i < row_len; ++i) inner += gy[i] * y[i];
      T* gx = g.data() + r * row_len;
      for (std::size_t i = 0; i < row_len; ++i) gx[i] += y[i] * (gy[i] - inner);
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  require_defined(x, "softmax");
  const std::size_t row_len = x.shape().back();
  const std::size_t rows = x.numel() / row_len;
  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = in.data() + r * row_len;
    T* yr = out.data() + r * row_len;
    const T mx = *std::max_element(xr, xr + row_len);
    T total{0};
    for (std::size_t i = 0; i < row_len; ++i) {
      yr[i] = std::exp(xr[i] - mx);
      total += yr[i];
    }
    for (std::size_t i = 0; i < row_len; ++i) yr[i] /= total;
  }
  return make_result<T>(x.shape(), std::move(out), {x.node()},
                        [row_len](TensorNode<T>& self) { softmax_backward_rows(self, row_len); });
}

template <typename T>
std::vector<std::size_t> topk_indices(std::span<const T> row, std::size_t keep) {
  if (keep == 0 || keep > row.size()) {
    throw ConfigError("top-k keep count " + std::to_string(keep) + " outside [1, " + std::to_string(row.size()) + "]");
  }
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Strict total order: larger score first, lower index first among ties.
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

template <typename T>
Tensor<T> topk_softmax(const Tensor<T>& x, std::size_t keep) {
  require_defined(x, "topk_softmax");
  const std::size_t row_len = x.shape().back();
  if (keep == 0 || keep > row_len) {
    throw ConfigError("topk_softmax: keep count " + std::to_string(keep) + " outside [1, " +
                      std::to_string(row_len) + "]");
  }
  const std::size_t rows = x.numel() / row_len;
  auto in = x.data();
  std::vector<T> out(in.size(), T{0});
  for (std::size_t r = 0; r < rows; ++r) {
    const std::span<const T> xr(in.data() + r * row_len, row_len);
    T* yr = out.data() + r * row_len;
    const auto kept = topk_indices(xr, keep);
    T mx = xr[kept.front()];
    for (std::size_t i : kept) mx = std::max(mx, xr[i]);
    T total{0};
    for (std::size_t i : kept) {
      yr[i] = std::exp(xr[i] - mx);
      total += yr[i];
    }
    for (std::size_t i : kept) yr[i] /= total;
  }
  // Masked entries have y == 0, so the plain softmax backward routes no
  // gradient through them.
  return make_result<T>(x.shape(), std::move(out), {x.node()},
                        [row_len](TensorNode<T>& self) { softmax_backward_rows(self, row_len); });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  if (targets.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for batch of " +
                         std::to_string(batch));
  }
  for (std::size_t t : targets) {
    if (t >= classes) {
      throw DataError("cross_entropy: target " + std::to_string(t) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  auto in = logits.data();
  auto probs = std::make_shared<std::vector<T>>(in.size());
  auto labels = std::make_shared<std::vector<std::size_t>>(targets.begin(), targets.end());
  T loss{0};
  for (std::size_t b = 0; b < batch; ++b) {
    const T* row = in.data() + b * classes;
    const T mx = *std::max_element(row, row + classes);
    T total{0};
    for (std::size_t l = 0; l < classes; ++l) {
      (*probs)[b * classes + l] = std::exp(row[l] - mx);
      total += (*probs)[b * classes + l];
    }
    for (std::size_t l = 0; l < classes; ++l) (*probs)[b * classes + l] /= total;
    loss += (std::log(total) + mx) - row[targets[b]];
  }
  loss /= static_cast<T>(batch);
  return make_result<T>(Shape{1}, {loss}, {logits.node()}, [probs, labels, batch, classes](TensorNode<T>& self) {
    if (auto* p = grad_target(self, 0)) {
      auto g = p->grad_buffer();
      const T scale = self.grad[0] / static_cast<T>(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t l = 0; l < classes; ++l) {
          const T onehot = (*labels)[b] == l ? T{1} : T{0};
          g[b * classes + l] += scale * ((*probs)[b * classes + l] - onehot);
        }
      }
    }
  });
}

template <typename T>
void check_finite(const Tensor<T>& x, const char* what) {
  for (T v : x.data()) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite value in ") + what);
  }
}

#define CSANET_INSTANTIATE_OPS(T)                                                                               \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                                \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                                \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                                \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                                             \
  template Tensor<T> mul_scalar<T>(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> elu<T>(const Tensor<T>&, T);                                                               \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                                  \
  template Tensor<T> mean<T>(const Tensor<T>&);                                                                 \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                                       \
  template Tensor<T> permute<T>(const Tensor<T>&, const std::vector<std::size_t>&);                             \
  template Tensor<T> slice<T>(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                         \
  template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, std::size_t);                                     \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Conv2dOptions&);     \
  template Tensor<T> avg_pool2d<T>(const Tensor<T>&, const Pool2dOptions&);                                     \
  template Tensor<T> batch_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, BatchNormStats<T>&,    \
                                   bool, T, T);                                                                 \
  template Tensor<T> dropout<T>(const Tensor<T>&, double, bool, Rng&);                                          \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                                              \
  template Tensor<T> topk_softmax<T>(const Tensor<T>&, std::size_t);                                            \
  template std::vector<std::size_t> topk_indices<T>(std::span<const T>, std::size_t);                           \
  template Tensor<T> cross_entropy<T>(const Tensor<T>&, std::span<const std::size_t>);                          \
  template void check_finite<T>(const Tensor<T>&, const char*);

CSANET_INSTANTIATE_OPS(float)
CSANET_INSTANTIATE_OPS(double)

#undef CSANET_INSTANTIATE_OPS

}  // namespace csanet
