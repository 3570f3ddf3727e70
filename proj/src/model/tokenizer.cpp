#include "panodepth/tokenizer.hpp"

#include <cmath>

#include "numeric/op_util.hpp"

namespace panodepth {

template <typename T>
Tensor<T> patchify(const Tensor<T>& feature, std::size_t p) {
  if (feature.rank() != 4) throw DimensionError("patchify: expected [B,C,H,W], got " + shape_str(feature.shape()));
  const auto b = feature.dim(0), c = feature.dim(1), h = feature.dim(2), w = feature.dim(3);
  if (p == 0 || h % p != 0 || w % p != 0) {
    throw DimensionError("patchify: extent " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by patch " + std::to_string(p));
  }
  const auto gh = h / p, gw = w / p;
  auto x = reshape(feature, {b, c, gh, p, gw, p});
  x = permute(x, {0, 2, 4, 1, 3, 5});
  return reshape(x, {b, gh * gw, c * p * p});
}

template <typename T>
Tensor<T> fold(const Tensor<T>& tokens, TokenGrid grid, std::size_t channels, std::size_t p) {
  if (tokens.rank() != 3 || tokens.dim(1) != grid.count() || tokens.dim(2) != channels * p * p) {
    throw DimensionError("fold: tokens " + shape_str(tokens.shape()) + " do not match grid " +
                         std::to_string(grid.height) + "x" + std::to_string(grid.width) + " with " +
                         std::to_string(channels) + " channels and patch " + std::to_string(p));
  }
  const auto b = tokens.dim(0);
  auto x = reshape(tokens, {b, grid.height, grid.width, channels, p, p});
  x = permute(x, {0, 3, 1, 4, 2, 5});
  return reshape(x, {b, channels, grid.height * p, grid.width * p});
}

template <typename T>
Tensor<T> positional_encoding(std::size_t n, std::size_t d) {
  if (d % 2 != 0) throw ConfigError("positional_encoding: width must be even, got " + std::to_string(d));
  std::vector<T> table(n * d);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, 2.0 * static_cast<double>(i) / d);
      table[pos * d + 2 * i] = static_cast<T>(std::sin(angle));
      table[pos * d + 2 * i + 1] = static_cast<T>(std::cos(angle));
    }
  }
  return Tensor<T>({n, d}, std::move(table));
}

template <typename T>
Tensor<T> tokens_to_map(const Tensor<T>& tokens, TokenGrid grid) {
  if (tokens.rank() != 3 || tokens.dim(1) != grid.count()) {
    throw DimensionError("tokens " + shape_str(tokens.shape()) + " do not fill a " + std::to_string(grid.height) +
                         "x" + std::to_string(grid.width) + " grid");
  }
  auto x = reshape(tokens, {tokens.dim(0), grid.height, grid.width, tokens.dim(2)});
  return permute(x, {0, 3, 1, 2});
}

template <typename T>
Tensor<T> map_to_tokens(const Tensor<T>& map) {
  auto x = permute(map, {0, 2, 3, 1});
  return reshape(x, {map.dim(0), map.dim(2) * map.dim(3), map.dim(1)});
}

template <typename T>
Tokenizer<T>::Tokenizer(std::size_t in_channels, std::size_t patch, std::size_t d_model, EmbeddingMode mode,
                        Rng& rng)
    : projection(in_channels * patch * patch, d_model, true, rng), patch_(patch), mode_(mode) {
  if (mode == EmbeddingMode::ConcatProject) concat_projection = Linear<T>(2 * d_model, d_model, true, rng);
}

template <typename T>
Tensor<T> Tokenizer<T>::combine(const Tensor<T>& embeddings, const Tensor<T>& pos) const {
  if (embeddings.rank() != 3 || pos.rank() != 2 || pos.dim(0) != embeddings.dim(1) ||
      pos.dim(1) != embeddings.dim(2)) {
    throw DimensionError("combine_embeddings: embeddings " + shape_str(embeddings.shape()) + " vs positions " +
                         shape_str(pos.shape()));
  }
  if (mode_ == EmbeddingMode::Add) return add(embeddings, pos);
  // Broadcast the table over the batch, then concatenate on the feature axis.
  const auto b = embeddings.dim(0);
  std::vector<Tensor<T>> rows(b, reshape(pos, {1, pos.dim(0), pos.dim(1)}));
  return concat_projection(concat<T>({embeddings, concat(rows, 0)}, 2));
}

template <typename T>
Tensor<T> Tokenizer<T>::operator()(const Tensor<T>& feature, bool with_position) const {
  auto emb = project(patchify(feature, patch_));
  auto pos = with_position ? positional_encoding<T>(emb.dim(1), emb.dim(2)) : Tensor<T>::zeros({emb.dim(1), emb.dim(2)});
  return combine(emb, pos);
}

template <typename T>
void Tokenizer<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  projection.collect(join_name(prefix, "projection"), out);
  if (concat_projection.weight.defined()) concat_projection.collect(join_name(prefix, "concat_projection"), out);
}

#define INSTANTIATE(T)                                                                   \
  template Tensor<T> patchify(const Tensor<T>&, std::size_t);                            \
  template Tensor<T> fold(const Tensor<T>&, TokenGrid, std::size_t, std::size_t);        \
  template Tensor<T> positional_encoding<T>(std::size_t, std::size_t);                   \
  template Tensor<T> tokens_to_map(const Tensor<T>&, TokenGrid);                         \
  template Tensor<T> map_to_tokens(const Tensor<T>&);                                    \
  template class Tokenizer<T>;
PANODEPTH_INSTANTIATE(INSTANTIATE)

}  // namespace panodepth
