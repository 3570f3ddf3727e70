#pragma once

#include <string>
#include <vector>

#include "panodepth/ops.hpp"
#include "panodepth/random.hpp"
#include "panodepth/tensor.hpp"

namespace panodepth {

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParameterList = std::vector<NamedParameter<T>>;

template <typename T>
std::size_t count_params(const ParameterList<T>& params) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.tensor.size();
  return total;
}

// Anything that owns learnable tensors. Parameter names are dotted paths.
template <typename T>
class Module {
 public:
  virtual ~Module() = default;
  virtual void collect(const std::string& prefix, ParameterList<T>& out) const = 0;

  ParameterList<T> parameters() const {
    ParameterList<T> out;
    collect("", out);
    return out;
  }
  std::size_t parameter_count() const { return count_params(parameters()); }
};

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

// Kaiming-uniform weights (bound sqrt(6 / fan_in)).
template <typename T>
Tensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  t.set_requires_grad(true);
  return t;
}

template <typename T>
Tensor<T> parameter(Shape shape, T fill) {
  Tensor<T> t(std::move(shape), fill);
  t.set_requires_grad(true);
  return t;
}

// x[..., in] -> x[..., out]; weight stored [in, out].
template <typename T>
class Linear : public Module<T> {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, bool with_bias, Rng& rng)
      : weight(kaiming_uniform<T>({in, out}, in, rng)) {
    if (with_bias) bias = parameter<T>({out}, T(0));
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias.defined() ? &bias : nullptr); }

  void collect(const std::string& prefix, ParameterList<T>& out) const override {
    out.push_back({join_name(prefix, "weight"), weight});
    if (bias.defined()) out.push_back({join_name(prefix, "bias"), bias});
  }

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
class Conv2d : public Module<T> {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, Conv2dOptions options, bool with_bias, Rng& rng)
      : options(options),
        weight(kaiming_uniform<T>({out, in / options.groups, kernel, kernel}, in / options.groups * kernel * kernel,
                                  rng)) {
    if (with_bias) bias = parameter<T>({out}, T(0));
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    return conv2d(x, weight, bias.defined() ? &bias : nullptr, options);
  }

  void collect(const std::string& prefix, ParameterList<T>& out) const override {
    out.push_back({join_name(prefix, "weight"), weight});
    if (bias.defined()) out.push_back({join_name(prefix, "bias"), bias});
  }

  std::size_t out_channels() const { return weight.dim(0); }

  Conv2dOptions options;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
class LayerNorm : public Module<T> {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t width) : gamma(parameter<T>({width}, T(1))), beta(parameter<T>({width}, T(0))) {}

  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta); }

  void collect(const std::string& prefix, ParameterList<T>& out) const override {
    out.push_back({join_name(prefix, "gamma"), gamma});
    out.push_back({join_name(prefix, "beta"), beta});
  }

  Tensor<T> gamma;
  Tensor<T> beta;
};

// Two linear layers separated by GeLU.
template <typename T>
class FeedForward : public Module<T> {
 public:
  FeedForward() = default;
  FeedForward(std::size_t width, std::size_t hidden, Rng& rng)
      : fc1(width, hidden, true, rng), fc2(hidden, width, true, rng) {}

  Tensor<T> operator()(const Tensor<T>& x) const { return fc2(gelu(fc1(x))); }

  void collect(const std::string& prefix, ParameterList<T>& out) const override {
    fc1.collect(join_name(prefix, "fc1"), out);
    fc2.collect(join_name(prefix, "fc2"), out);
  }

  Linear<T> fc1;
  Linear<T> fc2;
};

}  // namespace panodepth
