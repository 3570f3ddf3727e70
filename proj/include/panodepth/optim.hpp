#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "panodepth/nn.hpp"
#include "panodepth/tensor.hpp"

namespace panodepth {

struct AdamOptions {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;

  // Zeroed moments shaped like `params`.
  static AdamState for_parameters(std::span<const Tensor<T>> params, AdamOptions options);
};

// One bias-corrected Adam update of `params` (in place) from `grads`.
template <typename T>
void adam_step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads, AdamState<T>& state);

// Convenience optimizer over a module's parameter list, reading tensor grads.
template <typename T>
class Adam {
 public:
  Adam(ParameterList<T> params, AdamOptions options);

  void zero_grad();
  void step();

  AdamState<T>& state() { return state_; }
  const AdamState<T>& state() const { return state_; }
  const ParameterList<T>& parameters() const { return params_; }

 private:
  ParameterList<T> params_;
  AdamState<T> state_;
};

}  // namespace panodepth
