#include <algorithm>
#include <cmath>

#include "op_util.hpp"

namespace panodepth {

namespace {

template <typename T>
void check_loss_inputs(const Tensor<T>& pred, const Tensor<T>& target, const std::vector<std::uint8_t>& mask,
                       const char* op) {
  if (pred.shape() != target.shape() || mask.size() != pred.size()) {
    throw DimensionError(std::string(op) + ": prediction " + shape_str(pred.shape()) + ", target " +
                         shape_str(target.shape()) + " and mask of " + std::to_string(mask.size()) +
                         " elements disagree");
  }
}

// Scalar loss whose derivative w.r.t. each prediction is precomputed.
template <typename T>
Tensor<T> masked_loss(const Tensor<T>& pred, T value, std::vector<T> slope, const char* op) {
  return detail::make_result<T>(
      Shape{1}, std::vector<T>{value}, {&pred},
      [slope = std::move(slope)](detail::Node<T>& self) {
        T* gp = detail::input_grad(self, 0);
        const T g = self.grad[0];
        for (std::size_t i = 0; i < slope.size(); ++i) gp[i] += g * slope[i];
      },
      op);
}

template <typename T>
T sign(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

}  // namespace

template <typename T>
Tensor<T> berhu_loss(const Tensor<T>& pred, const Tensor<T>& target, const std::vector<std::uint8_t>& mask) {
  check_loss_inputs(pred, target, mask, "berhu_loss");
  const auto pd = pred.data();
  const auto td = target.data();
  std::size_t count = 0;
  T max_err = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++count;
    max_err = std::max(max_err, std::abs(pd[i] - td[i]));
  }
  if (count == 0) throw ContractError("berhu_loss: no valid pixels");
  const T c = T(0.2) * max_err;
  const T inv_count = T(1) / static_cast<T>(count);
  double total = 0.0;
  std::vector<T> slope(mask.size(), T(0));
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const T diff = pd[i] - td[i];
    const T e = std::abs(diff);
    if (e <= c || c <= T(0)) {
      total += e;
      slope[i] = sign(diff) * inv_count;
    } else {
      total += (e * e + c * c) / (T(2) * c);
      slope[i] = diff / c * inv_count;
    }
  }
  return masked_loss(pred, static_cast<T>(total) * inv_count, std::move(slope), "berhu_loss");
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target, const std::vector<std::uint8_t>& mask) {
  check_loss_inputs(pred, target, mask, "l1_loss");
  const auto pd = pred.data();
  const auto td = target.data();
  std::size_t count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  if (count == 0) throw ContractError("l1_loss: no valid pixels");
  const T inv_count = T(1) / static_cast<T>(count);
  double total = 0.0;
  std::vector<T> slope(mask.size(), T(0));
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const T diff = pd[i] - td[i];
    total += std::abs(diff);
    slope[i] = sign(diff) * inv_count;
  }
  return masked_loss(pred, static_cast<T>(total) * inv_count, std::move(slope), "l1_loss");
}

#define INSTANTIATE(T)                                                                               \
  template Tensor<T> berhu_loss(const Tensor<T>&, const Tensor<T>&, const std::vector<std::uint8_t>&); \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&, const std::vector<std::uint8_t>&);
PANODEPTH_INSTANTIATE(INSTANTIATE)
#undef INSTANTIATE

}  // namespace panodepth
