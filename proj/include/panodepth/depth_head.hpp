#pragma once

#include "panodepth/backbone.hpp"
#include "panodepth/config.hpp"
#include "panodepth/nn.hpp"
#include "panodepth/tokenizer.hpp"

namespace panodepth {

// Per-token linear map to raw_patch^2 depth values, folded on the token grid
// and bilinearly resampled to the target resolution.
template <typename T>
class RawDepthHead : public Module<T> {
 public:
  RawDepthHead() = default;
  RawDepthHead(std::size_t d_model, std::size_t raw_patch, Rng& rng)
      : projection(d_model, raw_patch * raw_patch, true, rng), raw_patch_(raw_patch) {}

  // tokens [B,M,D] -> [B,1,height,width]
  Tensor<T> operator()(const Tensor<T>& tokens, TokenGrid grid, std::size_t height, std::size_t width) const;
  void collect(const std::string& prefix, ParameterList<T>& out) const override {
    projection.collect(join_name(prefix, "projection"), out);
  }
  std::size_t raw_patch() const { return raw_patch_; }

  Linear<T> projection;

 private:
  std::size_t raw_patch_ = 0;
};

// Context adjustment layer fusing the feature pyramid with the raw depth.
template <typename T>
class ContextAdjustment : public Module<T> {
 public:
  ContextAdjustment() = default;
  ContextAdjustment(const std::array<std::size_t, 4>& pyramid_channels, const HeadConfig& cfg, Rng& rng);

  // Returns depth in [0, d_max], shaped like raw_depth.
  Tensor<T> operator()(const FeaturePyramid<T>& pyramid, const Tensor<T>& raw_depth) const;
  // Concatenation of the resized, reduced pyramid maps and the raw depth.
  Tensor<T> composite(const FeaturePyramid<T>& pyramid, const Tensor<T>& raw_depth) const;
  void collect(const std::string& prefix, ParameterList<T>& out) const override;

  double d_max() const { return d_max_; }

  std::array<Conv2d<T>, 4> reducers;
  Conv2d<T> entry;
  Conv2d<T> residual_a;
  Conv2d<T> residual_b;
  Conv2d<T> output;

 private:
  double d_max_ = 10.0;
};

}  // namespace panodepth
