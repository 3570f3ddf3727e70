#pragma once

#include <vector>

#include "panodepth/ops.hpp"
#include "panodepth/tensor.hpp"

namespace panodepth::detail {

// Gradient buffer of input `i` of `node`, or nullptr when it does not need one.
template <typename T>
inline T* input_grad(Node<T>& node, std::size_t i) {
  auto& in = node.inputs[i];
  if (!in || !in->requires_grad) return nullptr;
  return in->ensure_grad().data();
}

template <typename T>
inline const std::vector<T>& input_data(Node<T>& node, std::size_t i) {
  return node.inputs[i]->data;
}

}  // namespace panodepth::detail

#define PANODEPTH_INSTANTIATE(MACRO) \
  MACRO(float)                       \
  MACRO(double)
