#include "panodepth/depth_head.hpp"

#include "numeric/op_util.hpp"

namespace panodepth {

template <typename T>
Tensor<T> RawDepthHead<T>::operator()(const Tensor<T>& tokens, TokenGrid grid, std::size_t height,
                                      std::size_t width) const {
  if (tokens.rank() != 3 || tokens.dim(1) != grid.count() || tokens.dim(2) != projection.in_features()) {
    throw DimensionError("unpatchify_raw_depth: tokens " + shape_str(tokens.shape()) + " vs grid " +
                         std::to_string(grid.height) + "x" + std::to_string(grid.width) + " of width " +
                         std::to_string(projection.in_features()));
  }
  auto map = fold(projection(tokens), grid, 1, raw_patch_);
  return resize_bilinear(map, height, width);
}

template <typename T>
ContextAdjustment<T>::ContextAdjustment(const std::array<std::size_t, 4>& pyramid_channels, const HeadConfig& cfg,
                                        Rng& rng)
    : d_max_(cfg.d_max) {
  const std::size_t pc = cfg.pyramid_channels, cc = cfg.cal_channels;
  for (std::size_t k = 0; k < 4; ++k) reducers[k] = Conv2d<T>(pyramid_channels[k], pc, 1, {}, true, rng);
  const std::size_t composite_channels = 4 * pc + 1;
  const Conv2dOptions same{.stride = 1, .padding = 1, .groups = 1};
  entry = Conv2d<T>(composite_channels, cc, 3, same, true, rng);
  residual_a = Conv2d<T>(cc, cc, 3, same, true, rng);
  residual_b = Conv2d<T>(cc, cc, 3, same, true, rng);
  output = Conv2d<T>(cc + composite_channels, 1, 1, {}, true, rng);
}

template <typename T>
Tensor<T> ContextAdjustment<T>::composite(const FeaturePyramid<T>& pyramid, const Tensor<T>& raw_depth) const {
  const std::size_t h = raw_depth.dim(2), w = raw_depth.dim(3);
  std::vector<Tensor<T>> parts;
  for (std::size_t k = 0; k < 4; ++k) parts.push_back(resize_bilinear(reducers[k](pyramid.levels[k]), h, w));
  parts.push_back(raw_depth);
  return concat(parts, 1);
}

template <typename T>
Tensor<T> ContextAdjustment<T>::operator()(const FeaturePyramid<T>& pyramid, const Tensor<T>& raw_depth) const {
  if (!raw_depth.all_finite()) throw NumericError("context_adjust: raw depth contains non-finite values");
  auto comp = composite(pyramid, raw_depth);
  auto a = relu(entry(comp));
  auto r = sigmoid(add(residual_b(relu(residual_a(a))), a));
  auto fused = output(concat<T>({r, comp}, 1));
  return scale(sigmoid(fused), static_cast<T>(d_max_));
}

template <typename T>
void ContextAdjustment<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  for (std::size_t k = 0; k < 4; ++k) reducers[k].collect(join_name(prefix, "reduce_fm" + std::to_string(k + 1)), out);
  entry.collect(join_name(prefix, "entry"), out);
  residual_a.collect(join_name(prefix, "residual_a"), out);
  residual_b.collect(join_name(prefix, "residual_b"), out);
  output.collect(join_name(prefix, "output"), out);
}

#define INSTANTIATE(T)                  \
  template class RawDepthHead<T>;       \
  template class ContextAdjustment<T>;
PANODEPTH_INSTANTIATE(INSTANTIATE)

}  // namespace panodepth
