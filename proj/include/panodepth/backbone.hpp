#pragma once

#include <array>
#include <vector>

#include "panodepth/config.hpp"
#include "panodepth/nn.hpp"

namespace panodepth {

// Indices of earlier layers feeding layer k (layer 0 is the block input):
// k - 2^j for every j with 2^j dividing k.
std::vector<std::size_t> harmonic_links(std::size_t k);

// Depth-wise 3x3 -> norm -> ReLU -> point-wise 1x1 -> norm -> ReLU.
template <typename T>
class SeparableConvLayer : public Module<T> {
 public:
  SeparableConvLayer() = default;
  SeparableConvLayer(std::size_t in, std::size_t out, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParameterList<T>& out) const override;

  std::size_t in_channels() const { return depthwise.weight.dim(0); }

  Conv2d<T> depthwise;
  Conv2d<T> pointwise;
};

template <typename T>
class HNetBlock : public Module<T> {
 public:
  HNetBlock() = default;
  HNetBlock(std::size_t in, std::size_t out, std::size_t growth, std::size_t layers, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParameterList<T>& out) const override;

  std::size_t in_channels() const { return in_channels_; }
  std::size_t layer_count() const { return layers.size(); }
  // Channel count entering layer k (1-based).
  std::size_t layer_input_channels(std::size_t k) const { return layers.at(k - 1).in_channels(); }

  std::vector<SeparableConvLayer<T>> layers;
  Conv2d<T> transition;

 private:
  std::size_t in_channels_ = 0;
  std::size_t growth_ = 0;
};

struct PyramidShape {
  std::array<std::size_t, 4> channels{};
  std::array<std::size_t, 4> heights{};
  std::array<std::size_t, 4> widths{};
};

template <typename T>
struct FeaturePyramid {
  std::array<Tensor<T>, 4> levels;  // fm1..fm4
  const Tensor<T>& final_feature() const { return levels[3]; }
};

template <typename T>
class Backbone : public Module<T> {
 public:
  Backbone() = default;
  Backbone(const BackboneConfig& cfg, Rng& rng);

  FeaturePyramid<T> operator()(const Tensor<T>& image) const;
  void collect(const std::string& prefix, ParameterList<T>& out) const override;

  // Layers under the counting convention: conv blocks + HNet layers + merges.
  std::size_t layer_count() const;
  PyramidShape pyramid_shape(std::size_t height, std::size_t width) const;
  const BackboneConfig& config() const { return cfg_; }

  struct Stage {
    Conv2d<T> conv;
    HNetBlock<T> hnet;
    Conv2d<T> merge;
  };
  std::array<Stage, 4> stages;

 private:
  BackboneConfig cfg_;
};

}  // namespace panodepth
