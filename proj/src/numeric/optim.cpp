#include "panodepth/optim.hpp"

#include <cmath>

namespace panodepth {

template <typename T>
AdamState<T> AdamState<T>::for_parameters(std::span<const Tensor<T>> params, AdamOptions options) {
  AdamState<T> state;
  state.options = options;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.size(), T(0));
    state.second_moment.emplace_back(p.size(), T(0));
  }
  return state;
}

template <typename T>
void adam_step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads, AdamState<T>& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " + std::to_string(state.first_moment.size()) +
                         " moment buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || state.first_moment[i].size() != params[i].size()) {
      throw DimensionError("adam_step: parameter " + std::to_string(i) + " " + shape_str(params[i].shape()) +
                           " vs gradient " + shape_str(grads[i].shape()));
    }
  }
  ++state.step;
  const auto& o = state.options;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(o.beta1), b2 = static_cast<T>(o.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    const auto g = grads[i].data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const double m_hat = static_cast<double>(m[j]) / bc1;
      const double v_hat = static_cast<double>(v[j]) / bc2;
      p[j] -= static_cast<T>(o.learning_rate * m_hat / (std::sqrt(v_hat) + o.eps));
    }
  }
}

template <typename T>
Adam<T>::Adam(ParameterList<T> params, AdamOptions options) : params_(std::move(params)) {
  std::vector<Tensor<T>> tensors;
  for (const auto& p : params_) tensors.push_back(p.tensor);
  state_ = AdamState<T>::for_parameters(tensors, options);
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
void Adam<T>::step() {
  std::vector<Tensor<T>> tensors;
  std::vector<Tensor<T>> grads;
  for (auto& p : params_) {
    tensors.push_back(p.tensor);
    grads.push_back(p.tensor.grad());
  }
  adam_step<T>(tensors, grads, state_);
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::span<Tensor<float>>, std::span<const Tensor<float>>, AdamState<float>&);
template void adam_step(std::span<Tensor<double>>, std::span<const Tensor<double>>, AdamState<double>&);
template class Adam<float>;
template class Adam<double>;

}  // namespace panodepth
