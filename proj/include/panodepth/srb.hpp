#pragma once

#include "panodepth/nn.hpp"
#include "panodepth/tokenizer.hpp"

namespace panodepth {

// Per-branch outputs, kept for inspection and tests.
template <typename T>
struct SrbBranches {
  Tensor<T> linear;  // [B, N/4, 2*D_in]
  Tensor<T> pooled;  // [B, N/4, D_in]
  Tensor<T> conv;    // [B, N/4, c3]
};

// Spatial residual block: halves the token grid in both directions and
// doubles the token width.
template <typename T>
class SpatialResidualBlock : public Module<T> {
 public:
  SpatialResidualBlock() = default;
  SpatialResidualBlock(std::size_t d_in, std::size_t conv_filters, Rng& rng);

  // tokens [B, h*w, D_in] -> [B, (h/2)(w/2), 2*D_in]
  Tensor<T> operator()(const Tensor<T>& tokens, TokenGrid grid, SrbBranches<T>* branches = nullptr) const;
  void collect(const std::string& prefix, ParameterList<T>& out) const override;

  std::size_t in_width() const { return d_in_; }
  std::size_t out_width() const { return 2 * d_in_; }
  static TokenGrid output_grid(TokenGrid grid) { return {grid.height / 2, grid.width / 2}; }

  LayerNorm<T> linear_norm;
  Linear<T> widen;
  LayerNorm<T> conv_norm;
  Conv2d<T> strided_conv;
  Linear<T> merge;

 private:
  std::size_t d_in_ = 0;
};

// Zero-pad by one, 2x2/2 average pool, keep the leading h/2 x w/2 windows.
template <typename T> Tensor<T> srb_pool_branch(const Tensor<T>& map);

}  // namespace panodepth
