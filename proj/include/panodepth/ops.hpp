#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "panodepth/tensor.hpp"

// Differentiable kernels. Every function records a graph edge when grad mode
// is on and an input requires a gradient.
namespace panodepth {

enum class Activation { ReLU, GeLU, Sigmoid, Identity };

// Elementwise arithmetic. `b` may equal a's shape or be a suffix of it, in
// which case it is broadcast over a's leading axes.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T value);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

// [M,K] x [K,P] -> [M,P]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// x[..., K] * weight[K, P] (+ bias[P]) -> [..., P]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias = nullptr);
// Batched product: a[B,M,K] x b[B,K,P], or b[B,P,K] transposed when trans_b.
template <typename T> Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool trans_b = false);

template <typename T> Tensor<T> activation(const Tensor<T>& x, Activation kind);
template <typename T> Tensor<T> relu(const Tensor<T>& x) { return activation(x, Activation::ReLU); }
template <typename T> Tensor<T> gelu(const Tensor<T>& x) { return activation(x, Activation::GeLU); }
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x) { return activation(x, Activation::Sigmoid); }

// Max-subtracted softmax along `axis`.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

// Normalizes each row of the last axis, then applies gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));
// Per-sample, per-channel normalization over H,W of a B,C,H,W tensor (no affine).
template <typename T> Tensor<T> instance_norm(const Tensor<T>& x, T eps = T(1e-5));

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

// x[B,Cin,H,W], weight[Cout, Cin/groups, k, k], bias[Cout]
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                 Conv2dOptions options = {});

template <typename T> Tensor<T> zero_pad2d(const Tensor<T>& x, std::size_t pad);
template <typename T> Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t kernel, std::size_t stride);
// Half-pixel-centred bilinear resampling of a B,C,H,W tensor.
template <typename T> Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t height, std::size_t width);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);

// Depth losses over pixels where mask != 0. BerHu threshold c = 0.2 * max |error|
// is treated as a constant during differentiation.
template <typename T>
Tensor<T> berhu_loss(const Tensor<T>& pred, const Tensor<T>& target, const std::vector<std::uint8_t>& mask);
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target, const std::vector<std::uint8_t>& mask);

// C = alpha * op(A) * op(B) + beta * C, row-major.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc);

}  // namespace panodepth
