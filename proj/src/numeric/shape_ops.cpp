#include <algorithm>
#include <numeric>

#include "op_util.hpp"

namespace panodepth {

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  return detail::make_result<T>(
      std::move(shape), std::vector<T>(x.data().begin(), x.data().end()), {&x},
      [](detail::Node<T>& self) {
        T* gx = detail::input_grad(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
      },
      "reshape");
}

namespace {

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// For each output flat index, the source flat index under `order`.
std::vector<std::size_t> permutation_map(const Shape& in_shape, const std::vector<std::size_t>& order) {
  const std::size_t rank = in_shape.size();
  const auto in_strides = strides_of(in_shape);
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[order[i]];
  std::vector<std::size_t> map(numel(in_shape));
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < map.size(); ++flat) {
    map[flat] = src;
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      src += in_strides[order[ax]];
      if (idx[ax] < out_shape[ax]) break;
      src -= in_strides[order[ax]] * out_shape[ax];
      idx[ax] = 0;
    }
  }
  return map;
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order) {
  const std::size_t rank = x.rank();
  std::vector<std::size_t> check(order);
  std::sort(check.begin(), check.end());
  std::vector<std::size_t> iota(rank);
  std::iota(iota.begin(), iota.end(), 0);
  if (check != iota) throw DimensionError("permute: invalid axis order for " + shape_str(x.shape()));
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = x.shape()[order[i]];
  auto map = permutation_map(x.shape(), order);
  std::vector<T> out(x.size());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[map[i]];
  return detail::make_result<T>(
      std::move(out_shape), std::move(out), {&x},
      [map = std::move(map)](detail::Node<T>& self) {
        T* gx = detail::input_grad(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) gx[map[i]] += self.grad[i];
      },
      "permute");
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
    out_shape[axis] += s[axis];
    widths.push_back(s[axis]);
  }
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  const std::size_t total = out_shape[axis];
  std::vector<T> out(numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pd = parts[k].data();
    const std::size_t block = widths[k] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pd.begin() + o * block, block, out.begin() + (o * total + offset) * inner);
    }
    offset += widths[k];
  }
  std::vector<const Tensor<T>*> inputs;
  for (const auto& p : parts) inputs.push_back(&p);
  return detail::make_result<T>(
      std::move(out_shape), std::move(out), inputs,
      [widths, inner, outer, total](detail::Node<T>& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          const std::size_t block = widths[k] * inner;
          if (T* gp = detail::input_grad(self, k)) {
            for (std::size_t o = 0; o < outer; ++o) {
              const T* src = self.grad.data() + (o * total + offset) * inner;
              T* dst = gp + o * block;
              for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
            }
          }
          offset += widths[k];
        }
      },
      "concat");
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank() || start + length > x.dim(axis)) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of bounds for axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  const Shape& s = x.shape();
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t outer = x.size() / (s[axis] * inner);
  const std::size_t full = s[axis];
  Shape out_shape = s;
  out_shape[axis] = length;
  std::vector<T> out(numel(out_shape));
  const auto xd = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xd.begin() + (o * full + start) * inner, length * inner, out.begin() + o * length * inner);
  }
  return detail::make_result<T>(
      std::move(out_shape), std::move(out), {&x},
      [outer, full, start, length, inner](detail::Node<T>& self) {
        T* gx = detail::input_grad(self, 0);
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = self.grad.data() + o * length * inner;
          T* dst = gx + (o * full + start) * inner;
          for (std::size_t i = 0; i < length * inner; ++i) dst[i] += src[i];
        }
      },
      "slice");
}

#define INSTANTIATE(T)                                                                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                  \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);        \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);
PANODEPTH_INSTANTIATE(INSTANTIATE)
#undef INSTANTIATE

}  // namespace panodepth
