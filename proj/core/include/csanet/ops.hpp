#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "csanet/rng.hpp"
#include "csanet/tensor.hpp"

// Differentiable tensor operations. All functions are instantiated for float
// and double. Unless stated otherwise, axes follow the NCHW convention.
namespace csanet {

// ---- elementwise -----------------------------------------------------------

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
// a * s where s holds a single (learnable) value.
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, const Tensor<T>& s);
// x for x > 0, alpha * (exp(x) - 1) otherwise.
template <typename T> Tensor<T> elu(const Tensor<T>& x, T alpha = T{1});

// ---- reductions ------------------------------------------------------------

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

// ---- shape -----------------------------------------------------------------

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
// Output axis i is input axis axes[i].
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes);
template <typename T> Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

// ---- linear algebra --------------------------------------------------------

// a: [..., M, K], b: [..., K, N] with identical leading axes, or b: [K, N]
// shared across the batch. Returns [..., M, N].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Affine map over the trailing axis: x [..., Din], weight [Dout, Din],
// optional bias [Dout] (pass an undefined tensor for none).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// ---- convolution and pooling -----------------------------------------------

struct Padding2d {
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;

  static Padding2d symmetric(std::size_t h, std::size_t w) { return {h, h, w, w}; }
};

struct Conv2dOptions {
  std::array<std::size_t, 2> stride{1, 1};
  Padding2d padding{};
  std::array<std::size_t, 2> dilation{1, 1};
  std::size_t groups = 1;
};

// Cross-correlation. input [B, Cin, H, W], weight [Cout, Cin/groups, kh, kw],
// optional bias [Cout]. Output extent per axis:
//   floor((H + pad_total - dilation*(kh-1) - 1) / stride) + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dOptions& options = {});

struct Pool2dOptions {
  std::array<std::size_t, 2> kernel{1, 1};
  std::array<std::size_t, 2> stride{1, 1};
  std::array<std::size_t, 2> padding{0, 0};
  // When true the divisor is always kh*kw, so padded zeros pull the mean down.
  bool include_pad = true;
};

template <typename T> Tensor<T> avg_pool2d(const Tensor<T>& input, const Pool2dOptions& options);

// ---- normalization and regularization --------------------------------------

template <typename T>
struct BatchNormStats {
  std::vector<T> running_mean;
  std::vector<T> running_var;

  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean(channels, T{0}), running_var(channels, T{1}) {}
};

// Per-channel normalization over every axis but 1. In training mode the batch
// statistics are used and the running statistics updated with
// running = (1 - momentum) * running + momentum * batch (unbiased variance).
// Training mode needs a batch of at least two.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BatchNormStats<T>& stats, bool training, T momentum = T(0.1), T eps = T(1e-5));

// Inverted dropout. Identity when !training or p == 0; otherwise zeroes each
// entry with probability p and scales survivors by 1 / (1 - p).
template <typename T> Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng);

// ---- probabilistic heads ---------------------------------------------------

// Softmax along the last axis.
template <typename T> Tensor<T> softmax(const Tensor<T>& x);

// Softmax along the last axis after masking all but the `keep` largest
// scores of each row to -inf. Ties at the threshold keep the lowest index.
// The mask is a constant for differentiation.
template <typename T> Tensor<T> topk_softmax(const Tensor<T>& x, std::size_t keep);

// Indices kept by topk_softmax for one row, in ascending index order.
template <typename T> std::vector<std::size_t> topk_indices(std::span<const T> row, std::size_t keep);

// Mean negative log-likelihood of `targets` under softmax(logits).
// logits [B, L]; returns a single-element tensor.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets);

// ---- checks ----------------------------------------------------------------

// Throws NumericalError naming `what` if x contains NaN or Inf.
template <typename T> void check_finite(const Tensor<T>& x, const char* what);

}  // namespace csanet
