#include <cmath>

#include "op_util.hpp"

namespace panodepth {

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) throw DimensionError("softmax: axis out of range for " + shape_str(x.shape()));
  const auto& s = x.shape();
  const std::size_t n = s[axis];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t outer = x.size() / (n * inner);
  std::vector<T> out(x.size());
  const auto xd = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T peak = xd[base];
      for (std::size_t j = 1; j < n; ++j) peak = std::max(peak, xd[base + j * inner]);
      T total = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const T e = std::exp(xd[base + j * inner] - peak);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= total;
    }
  }
  return detail::make_result<T>(
      s, std::move(out), {&x},
      [outer, n, inner](detail::Node<T>& self) {
        T* gx = detail::input_grad(self, 0);
        const auto& y = self.data;
        const auto& g = self.grad;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            T dot = 0;
            for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
            for (std::size_t j = 0; j < n; ++j) {
              const std::size_t idx = base + j * inner;
              gx[idx] += y[idx] * (g[idx] - dot);
            }
          }
        }
      },
      "softmax");
}

namespace {

// Shared row normalization: y = (x - mean) / sqrt(var + eps); returns inv std per row.
template <typename T>
std::vector<T> normalize_rows(std::span<const T> x, std::size_t rows, std::size_t width, T eps,
                              std::vector<T>& normalized) {
  std::vector<T> inv_std(rows);
  normalized.resize(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = x.data() + r * width;
    T mu = 0;
    for (std::size_t j = 0; j < width; ++j) mu += row[j];
    mu /= static_cast<T>(width);
    T var = 0;
    for (std::size_t j = 0; j < width; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(width);
    const T inv = T(1) / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < width; ++j) normalized[r * width + j] = (row[j] - mu) * inv;
  }
  return inv_std;
}

// dx for y = (x - mean) * inv, given dy over each row.
template <typename T>
void normalize_rows_backward(const T* dy, const T* xhat, const T* inv_std, std::size_t rows, std::size_t width,
                             T* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* gr = dy + r * width;
    const T* hr = xhat + r * width;
    T mean_g = 0, mean_gh = 0;
    for (std::size_t j = 0; j < width; ++j) {
      mean_g += gr[j];
      mean_gh += gr[j] * hr[j];
    }
    mean_g /= static_cast<T>(width);
    mean_gh /= static_cast<T>(width);
    for (std::size_t j = 0; j < width; ++j) {
      dx[r * width + j] += inv_std[r] * (gr[j] - mean_g - hr[j] * mean_gh);
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t width = x.dim(x.rank() - 1);
  if (gamma.size() != width || beta.size() != width) {
    throw DimensionError("layer_norm: affine parameters " + shape_str(gamma.shape()) + " do not match width " +
                         std::to_string(width));
  }
  const std::size_t rows = x.size() / width;
  std::vector<T> xhat;
  std::vector<T> inv_std = normalize_rows<T>(x.data(), rows, width, eps, xhat);
  std::vector<T> out(x.size());
  const auto gd = gamma.data();
  const auto bd = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < width; ++j) out[r * width + j] = xhat[r * width + j] * gd[j] + bd[j];
  }
  return detail::make_result<T>(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [rows, width, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node<T>& self) {
        const auto& g = self.grad;
        const auto& gd = detail::input_data(self, 1);
        if (T* gx = detail::input_grad(self, 0)) {
          std::vector<T> dy(g.size());
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < width; ++j) dy[r * width + j] = g[r * width + j] * gd[j];
          }
          normalize_rows_backward(dy.data(), xhat.data(), inv_std.data(), rows, width, gx);
        }
        if (T* gg = detail::input_grad(self, 1)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < width; ++j) gg[j] += g[r * width + j] * xhat[r * width + j];
          }
        }
        if (T* gb = detail::input_grad(self, 2)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < width; ++j) gb[j] += g[r * width + j];
          }
        }
      },
      "layer_norm");
}

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, T eps) {
  if (x.rank() != 4) throw DimensionError("instance_norm expects B,C,H,W, got " + shape_str(x.shape()));
  const std::size_t width = x.dim(2) * x.dim(3);
  const std::size_t rows = x.dim(0) * x.dim(1);
  std::vector<T> xhat;
  std::vector<T> inv_std = normalize_rows<T>(x.data(), rows, width, eps, xhat);
  std::vector<T> out = xhat;
  return detail::make_result<T>(
      x.shape(), std::move(out), {&x},
      [rows, width, inv_std = std::move(inv_std)](detail::Node<T>& self) {
        T* gx = detail::input_grad(self, 0);
        normalize_rows_backward(self.grad.data(), self.data.data(), inv_std.data(), rows, width, gx);
      },
      "instance_norm");
}

#define INSTANTIATE(T)                                                               \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                         \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> instance_norm(const Tensor<T>&, T);
PANODEPTH_INSTANTIATE(INSTANTIATE)
#undef INSTANTIATE

}  // namespace panodepth
