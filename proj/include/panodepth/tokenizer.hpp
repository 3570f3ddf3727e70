#pragma once

#include "panodepth/config.hpp"
#include "panodepth/nn.hpp"

namespace panodepth {

struct TokenGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t count() const { return height * width; }
  bool operator==(const TokenGrid&) const = default;
};

// [B,C,H,W] -> [B, (H/p)(W/p), C*p*p]; tokens in raster order over the patch
// grid, each token laid out as (channel, row-in-patch, column-in-patch).
template <typename T> Tensor<T> patchify(const Tensor<T>& feature, std::size_t p);
// Inverse of patchify.
template <typename T> Tensor<T> fold(const Tensor<T>& tokens, TokenGrid grid, std::size_t channels, std::size_t p);

// [N, D] sinusoidal table: sin on even dims, cos on odd dims.
template <typename T> Tensor<T> positional_encoding(std::size_t n, std::size_t d);

// [B,N,D] tokens -> [B,h,w,D]-ordered map laid out [B,D,h,w], and back.
template <typename T> Tensor<T> tokens_to_map(const Tensor<T>& tokens, TokenGrid grid);
template <typename T> Tensor<T> map_to_tokens(const Tensor<T>& map);

template <typename T>
class Tokenizer : public Module<T> {
 public:
  Tokenizer() = default;
  Tokenizer(std::size_t in_channels, std::size_t patch, std::size_t d_model, EmbeddingMode mode, Rng& rng);

  Tensor<T> project(const Tensor<T>& patches) const { return projection(patches); }
  // Merges patch embeddings with the positional table ([N,D]).
  Tensor<T> combine(const Tensor<T>& embeddings, const Tensor<T>& pos) const;
  // feature [B,C,H,W] -> tokens [B,N,D] (positional encoding included).
  Tensor<T> operator()(const Tensor<T>& feature, bool with_position = true) const;

  void collect(const std::string& prefix, ParameterList<T>& out) const override;

  TokenGrid grid_for(std::size_t height, std::size_t width) const { return {height / patch_, width / patch_}; }
  std::size_t patch() const { return patch_; }
  EmbeddingMode mode() const { return mode_; }

  Linear<T> projection;
  Linear<T> concat_projection;  // only in concat_project mode

 private:
  std::size_t patch_ = 0;
  EmbeddingMode mode_ = EmbeddingMode::Add;
};

}  // namespace panodepth
