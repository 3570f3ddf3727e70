#include <cmath>

#include "op_util.hpp"

namespace panodepth {

namespace {

// Broadcast extent of `b` against `a`: number of elements b repeats over.
template <typename T>
std::size_t broadcast_inner(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  bool ok = sb.size() <= sa.size();
  for (std::size_t i = 0; ok && i < sb.size(); ++i) ok = sb[sb.size() - 1 - i] == sa[sa.size() - 1 - i];
  if (!ok) {
    throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(sb) + " onto " + shape_str(sa));
  }
  return b.size();
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t inner = broadcast_inner(a, b, "add");
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i % inner];
  return detail::make_result<T>(
      a.shape(), std::move(out), {&a, &b},
      [inner](detail::Node<T>& self) {
        const auto& g = self.grad;
        if (T* ga = detail::input_grad(self, 0)) {
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (T* gb = detail::input_grad(self, 1)) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % inner] += g[i];
        }
      },
      "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t inner = broadcast_inner(a, b, "sub");
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i % inner];
  return detail::make_result<T>(
      a.shape(), std::move(out), {&a, &b},
      [inner](detail::Node<T>& self) {
        const auto& g = self.grad;
        if (T* ga = detail::input_grad(self, 0)) {
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (T* gb = detail::input_grad(self, 1)) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % inner] -= g[i];
        }
      },
      "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t inner = broadcast_inner(a, b, "mul");
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i % inner];
  return detail::make_result<T>(
      a.shape(), std::move(out), {&a, &b},
      [inner](detail::Node<T>& self) {
        const auto& g = self.grad;
        const auto& ad = detail::input_data(self, 0);
        const auto& bd = detail::input_data(self, 1);
        if (T* ga = detail::input_grad(self, 0)) {
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd[i % inner];
        }
        if (T* gb = detail::input_grad(self, 1)) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % inner] += g[i] * ad[i];
        }
      },
      "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return detail::make_result<T>(
      a.shape(), std::move(out), {&a},
      [factor](detail::Node<T>& self) {
        T* ga = detail::input_grad(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += factor * self.grad[i];
      },
      "scale");
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v += value;
  return detail::make_result<T>(
      a.shape(), std::move(out), {&a},
      [](detail::Node<T>& self) {
        T* ga = detail::input_grad(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
      },
      "add_scalar");
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double total = 0.0;
  for (T v : a.data()) total += v;
  return detail::make_result<T>(
      Shape{1}, std::vector<T>{static_cast<T>(total)}, {&a},
      [](detail::Node<T>& self) {
        T* ga = detail::input_grad(self, 0);
        const T g = self.grad[0];
        const std::size_t n = self.inputs[0]->data.size();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g;
      },
      "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  std::vector<T> out(x.size());
  const auto xd = x.data();
  switch (kind) {
    case Activation::ReLU:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > T(0) ? xd[i] : T(0);
      break;
    case Activation::GeLU:
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = T(0.5) * xd[i] * (T(1) + std::erf(xd[i] / std::sqrt(T(2))));
      }
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-xd[i]));
      break;
    case Activation::Identity:
      std::copy(xd.begin(), xd.end(), out.begin());
      break;
  }
  return detail::make_result<T>(
      x.shape(), std::move(out), {&x},
      [kind](detail::Node<T>& self) {
        T* gx = detail::input_grad(self, 0);
        const auto& xd = detail::input_data(self, 0);
        const auto& g = self.grad;
        switch (kind) {
          case Activation::ReLU:
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xd[i] > T(0) ? g[i] : T(0);
            break;
          case Activation::GeLU: {
            const T inv_sqrt2pi = T(0.3989422804014327);
            for (std::size_t i = 0; i < g.size(); ++i) {
              const T cdf = T(0.5) * (T(1) + std::erf(xd[i] / std::sqrt(T(2))));
              const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * xd[i] * xd[i]);
              gx[i] += g[i] * (cdf + xd[i] * pdf);
            }
            break;
          }
          case Activation::Sigmoid:
            for (std::size_t i = 0; i < g.size(); ++i) {
              const T s = self.data[i];
              gx[i] += g[i] * s * (T(1) - s);
            }
            break;
          case Activation::Identity:
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            break;
        }
      },
      "activation");
}

#define INSTANTIATE(T)                                                  \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> scale(const Tensor<T>&, T);                        \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                   \
  template Tensor<T> sum(const Tensor<T>&);                             \
  template Tensor<T> mean(const Tensor<T>&);                            \
  template Tensor<T> activation(const Tensor<T>&, Activation);
PANODEPTH_INSTANTIATE(INSTANTIATE)
#undef INSTANTIATE

}  // namespace panodepth
