#include "panodepth/backbone.hpp"

#include "numeric/op_util.hpp"

namespace panodepth {

std::vector<std::size_t> harmonic_links(std::size_t k) {
  std::vector<std::size_t> links;
  for (std::size_t step = 1; step <= k; step *= 2) {
    if (k % step != 0) break;
    links.push_back(k - step);
  }
  return links;
}

template <typename T>
SeparableConvLayer<T>::SeparableConvLayer(std::size_t in, std::size_t out, Rng& rng)
    : depthwise(in, in, 3, {.stride = 1, .padding = 1, .groups = in}, true, rng),
      pointwise(in, out, 1, {}, true, rng) {}

template <typename T>
Tensor<T> SeparableConvLayer<T>::operator()(const Tensor<T>& x) const {
  auto h = relu(instance_norm(depthwise(x)));
  return relu(instance_norm(pointwise(h)));
}

template <typename T>
void SeparableConvLayer<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  depthwise.collect(join_name(prefix, "depthwise"), out);
  pointwise.collect(join_name(prefix, "pointwise"), out);
}

template <typename T>
HNetBlock<T>::HNetBlock(std::size_t in, std::size_t out, std::size_t growth, std::size_t layer_total, Rng& rng)
    : in_channels_(in), growth_(growth) {
  auto width_of = [&](std::size_t idx) { return idx == 0 ? in : growth; };
  for (std::size_t k = 1; k <= layer_total; ++k) {
    std::size_t cin = 0;
    for (auto link : harmonic_links(k)) cin += width_of(link);
    layers.emplace_back(cin, growth, rng);
  }
  std::size_t outputs = 1;  // final layer
  for (std::size_t k = 1; k < layer_total; k += 2) ++outputs;
  transition = Conv2d<T>(outputs * growth, out, 1, {}, false, rng);
}

template <typename T>
Tensor<T> HNetBlock<T>::operator()(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != in_channels_) {
    throw DimensionError("hnet_block: expected [B," + std::to_string(in_channels_) + ",H,W], got " +
                         shape_str(x.shape()));
  }
  std::vector<Tensor<T>> outputs{x};
  for (std::size_t k = 1; k <= layers.size(); ++k) {
    std::vector<Tensor<T>> inputs;
    for (auto link : harmonic_links(k)) inputs.push_back(outputs[link]);
    const auto in = inputs.size() == 1 ? inputs[0] : concat(inputs, 1);
    outputs.push_back(layers[k - 1](in));
  }
  std::vector<Tensor<T>> kept{outputs.back()};
  for (std::size_t k = 1; k < layers.size(); k += 2) kept.push_back(outputs[k]);
  return relu(instance_norm(transition(concat(kept, 1))));
}

template <typename T>
void HNetBlock<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  for (std::size_t k = 0; k < layers.size(); ++k) layers[k].collect(join_name(prefix, "layer" + std::to_string(k + 1)), out);
  transition.collect(join_name(prefix, "transition"), out);
}

template <typename T>
Backbone<T>::Backbone(const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  std::size_t in = 3;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t c = cfg.channels[k];
    auto& s = stages[k];
    s.conv = Conv2d<T>(in, c, 3, {.stride = cfg.strides[k], .padding = 1, .groups = 1}, false, rng);
    s.hnet = HNetBlock<T>(c, c, cfg.growth, cfg.hnet_layers, rng);
    s.merge = Conv2d<T>(2 * c, c, 1, {}, false, rng);
    in = c;
  }
}

template <typename T>
FeaturePyramid<T> Backbone<T>::operator()(const Tensor<T>& image) const {
  if (image.rank() != 4 || image.dim(1) != 3) {
    throw DimensionError("backbone: expected [B,3,H,W], got " + shape_str(image.shape()));
  }
  const std::size_t div = cfg_.stride_product();
  if (image.dim(2) % div != 0 || image.dim(3) % div != 0) {
    throw ConfigError("backbone: input " + std::to_string(image.dim(2)) + "x" + std::to_string(image.dim(3)) +
                      " not divisible by the stride product " + std::to_string(div));
  }
  FeaturePyramid<T> pyramid;
  Tensor<T> x = image;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& s = stages[k];
    auto c = relu(instance_norm(s.conv(x)));
    auto h = s.hnet(c);
    x = relu(instance_norm(s.merge(concat<T>({c, h}, 1))));
    pyramid.levels[k] = x;
  }
  return pyramid;
}

template <typename T>
void Backbone<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string stage = join_name(prefix, "stage" + std::to_string(k + 1));
    stages[k].conv.collect(join_name(stage, "conv"), out);
    stages[k].hnet.collect(join_name(stage, "hnet"), out);
    stages[k].merge.collect(join_name(stage, "merge"), out);
  }
}

template <typename T>
std::size_t Backbone<T>::layer_count() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += 1 + s.hnet.layer_count() + 1;
  return n;
}

template <typename T>
PyramidShape Backbone<T>::pyramid_shape(std::size_t height, std::size_t width) const {
  PyramidShape shape;
  for (std::size_t k = 0; k < 4; ++k) {
    height = (height - 1) / cfg_.strides[k] + 1;
    width = (width - 1) / cfg_.strides[k] + 1;
    shape.channels[k] = cfg_.channels[k];
    shape.heights[k] = height;
    shape.widths[k] = width;
  }
  return shape;
}

template class SeparableConvLayer<float>;
template class SeparableConvLayer<double>;
template class HNetBlock<float>;
template class HNetBlock<double>;
template class Backbone<float>;
template class Backbone<double>;

}  // namespace panodepth
