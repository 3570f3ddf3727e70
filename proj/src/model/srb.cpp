#include "panodepth/srb.hpp"

#include "numeric/op_util.hpp"

namespace panodepth {

template <typename T>
Tensor<T> srb_pool_branch(const Tensor<T>& map) {
  const std::size_t h = map.dim(2), w = map.dim(3);
  auto pooled = avg_pool2d(zero_pad2d(map, 1), 2, 2);
  return slice(slice(pooled, 2, 0, h / 2), 3, 0, w / 2);
}

template <typename T>
SpatialResidualBlock<T>::SpatialResidualBlock(std::size_t d_in, std::size_t conv_filters, Rng& rng)
    : linear_norm(d_in),
      widen(d_in, 2 * d_in, true, rng),
      conv_norm(d_in),
      strided_conv(d_in, conv_filters, 1, {.stride = 2, .padding = 0, .groups = 1}, true, rng),
      merge(3 * d_in + conv_filters, 2 * d_in, true, rng),
      d_in_(d_in) {}

template <typename T>
Tensor<T> SpatialResidualBlock<T>::operator()(const Tensor<T>& tokens, TokenGrid grid,
                                              SrbBranches<T>* branches) const {
  if (tokens.rank() != 3 || tokens.dim(2) != d_in_ || tokens.dim(1) != grid.count()) {
    throw DimensionError("srb: tokens " + shape_str(tokens.shape()) + " vs grid " + std::to_string(grid.height) +
                         "x" + std::to_string(grid.width) + " and width " + std::to_string(d_in_));
  }
  if (grid.height % 2 != 0 || grid.width % 2 != 0) {
    throw DimensionError("srb: grid extents must be even, got " + std::to_string(grid.height) + "x" +
                         std::to_string(grid.width));
  }
  const std::size_t n_out = grid.count() / 4;
  auto subsample = [](const Tensor<T>& map) { return avg_pool2d(map, 1, 2); };

  auto b1 = widen(map_to_tokens(subsample(tokens_to_map(linear_norm(tokens), grid))));
  auto b2 = map_to_tokens(srb_pool_branch(tokens_to_map(tokens, grid)));
  auto b3 = map_to_tokens(relu(strided_conv(tokens_to_map(conv_norm(tokens), grid))));

  b1 = add(b1, positional_encoding<T>(n_out, b1.dim(2)));
  b2 = add(b2, positional_encoding<T>(n_out, b2.dim(2)));
  b3 = add(b3, positional_encoding<T>(n_out, b3.dim(2)));
  if (branches) *branches = {b1, b2, b3};
  return add(b1, merge(concat<T>({b1, b2, b3}, 2)));
}

template <typename T>
void SpatialResidualBlock<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  linear_norm.collect(join_name(prefix, "linear_norm"), out);
  widen.collect(join_name(prefix, "widen"), out);
  conv_norm.collect(join_name(prefix, "conv_norm"), out);
  strided_conv.collect(join_name(prefix, "strided_conv"), out);
  merge.collect(join_name(prefix, "merge"), out);
}

#define INSTANTIATE(T)                                           \
  template Tensor<T> srb_pool_branch(const Tensor<T>&);          \
  template class SpatialResidualBlock<T>;
PANODEPTH_INSTANTIATE(INSTANTIATE)

}  // namespace panodepth
