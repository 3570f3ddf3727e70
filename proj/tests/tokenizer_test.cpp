#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "panodepth/errors.hpp"
#include "panodepth/tokenizer.hpp"
#include "test_support.hpp"

namespace panodepth {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

template <typename T>
Tensor<T> reorder_tokens(const Tensor<T>& x, const std::vector<std::size_t>& order) {
  std::vector<Tensor<T>> rows;
  for (auto i : order) rows.push_back(slice(x, 1, i, 1));
  return concat(rows, 1);
}

TEST(Patchify, TokenCount) {
  auto tokens = patchify(Tensor<float>::zeros({2, 3, 16, 32}), 8);
  EXPECT_EQ(tokens.shape(), (Shape{2, 8, 3 * 64}));
}

TEST(Patchify, FullExtentPatchIsWholeMap) {
  Rng rng(1);
  auto x = random_tensor<double>({1, 2, 4, 4}, rng);
  auto tokens = patchify(x, 4);
  ASSERT_EQ(tokens.shape(), (Shape{1, 1, 32}));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(tokens[i], x[i]);
}

TEST(Patchify, RasterOrderOverPatchGrid) {
  Tensor<double> x({1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
  auto tokens = patchify(x, 2);
  // Token 1 is the top-right patch: rows 0-1, columns 2-3.
  EXPECT_EQ(tokens.at({0, 1, 0}), 2.0);
  EXPECT_EQ(tokens.at({0, 1, 1}), 3.0);
  EXPECT_EQ(tokens.at({0, 1, 2}), 6.0);
  EXPECT_EQ(tokens.at({0, 2, 0}), 8.0);
}

TEST(Patchify, FoldRoundTripIsExact) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t p = 1 + rng.below(4), gh = 1 + rng.below(3), gw = 1 + rng.below(4), c = 1 + rng.below(3);
    auto x = random_tensor<double>({2, c, gh * p, gw * p}, rng);
    auto back = fold(patchify(x, p), TokenGrid{gh, gw}, c, p);
    ASSERT_EQ(back.shape(), x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_EQ(back[i], x[i]);
  }
}

TEST(Patchify, IndivisibleExtentIsDimensionError) {
  EXPECT_THROW(patchify(Tensor<float>::zeros({1, 1, 10, 16}), 8), DimensionError);
  EXPECT_THROW(fold(Tensor<float>::zeros({1, 3, 4}), TokenGrid{1, 2}, 1, 2), DimensionError);
}

TEST(PositionalEncoding, Examples) {
  auto pe = positional_encoding<double>(4, 8);
  for (std::size_t i = 0; i < 8; i += 2) {
    EXPECT_EQ(pe.at({0, i}), 0.0);
    EXPECT_EQ(pe.at({0, i + 1}), 1.0);
  }
  EXPECT_NEAR(pe.at({1, 0}), 0.841471, 1e-6);
  EXPECT_NEAR(pe.at({1, 1}), std::cos(1.0), 1e-12);
  EXPECT_NEAR(pe.at({3, 2}), std::sin(3.0 / std::pow(10000.0, 2.0 / 8)), 1e-12);
  auto again = positional_encoding<double>(4, 8);
  for (std::size_t i = 0; i < pe.size(); ++i) EXPECT_EQ(pe[i], again[i]);
}

TEST(PositionalEncoding, BoundedAndDistinctRows) {
  const std::size_t n = 2048, d = 16;
  auto pe = positional_encoding<double>(n, d);
  std::set<std::vector<double>> rows;
  for (std::size_t pos = 0; pos < n; ++pos) {
    std::vector<double> row(d);
    for (std::size_t i = 0; i < d; ++i) {
      row[i] = pe.at({pos, i});
      ASSERT_GE(row[i], -1.0);
      ASSERT_LE(row[i], 1.0);
    }
    rows.insert(row);
  }
  EXPECT_EQ(rows.size(), n);
}

TEST(PositionalEncoding, OddWidthIsConfigError) {
  EXPECT_THROW(positional_encoding<float>(4, 7), ConfigError);
}

TEST(Tokenizer, ZeroPatchesGiveZeroEmbeddings) {
  Rng rng(3);
  Tokenizer<float> tok(3, 2, 16, EmbeddingMode::Add, rng);
  auto emb = tok.project(Tensor<float>::zeros({1, 5, 12}));
  for (float v : emb.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Tokenizer, OutputShapeAndWidth) {
  Rng rng(4);
  Tokenizer<float> tok(4, 8, 256, EmbeddingMode::Add, rng);
  NoGradGuard guard;
  auto tokens = tok(random_tensor<float>({2, 4, 16, 32}, rng));
  EXPECT_EQ(tokens.shape(), (Shape{2, 8, 256}));
  EXPECT_EQ(tok.grid_for(16, 32), (TokenGrid{2, 4}));
}

TEST(Tokenizer, ProjectionIsPermutationEquivariant) {
  Rng rng(5);
  Tokenizer<double> tok(2, 2, 8, EmbeddingMode::Add, rng);
  auto patches = random_tensor<double>({1, 6, 8}, rng);
  const std::vector<std::size_t> order{4, 0, 5, 2, 1, 3};
  auto lhs = tok.project(reorder_tokens(patches, order));
  auto rhs = reorder_tokens(tok.project(patches), order);
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
}

TEST(Tokenizer, AddModeCombination) {
  Rng rng(6);
  Tokenizer<double> tok(1, 1, 6, EmbeddingMode::Add, rng);
  auto emb = random_tensor<double>({2, 3, 6}, rng);
  EXPECT_EQ(max_abs_diff(tok.combine(emb, Tensor<double>::zeros({3, 6})), emb), 0.0);

  auto pos = positional_encoding<double>(3, 6);
  auto out = tok.combine(Tensor<double>::zeros({1, 3, 6}), pos);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out.at({0, 0, i}), pos.at({0, i}));
}

TEST(Tokenizer, ConcatProjectKeepsWidth) {
  Rng rng(7);
  Tokenizer<double> tok(1, 1, 6, EmbeddingMode::ConcatProject, rng);
  auto out = tok.combine(random_tensor<double>({2, 3, 6}, rng), positional_encoding<double>(3, 6));
  EXPECT_EQ(out.shape(), (Shape{2, 3, 6}));
  EXPECT_EQ(tok.concat_projection.weight.shape(), (Shape{12, 6}));
}

TEST(Tokenizer, CombineShapeMismatchIsDimensionError) {
  Rng rng(8);
  Tokenizer<double> tok(1, 1, 6, EmbeddingMode::Add, rng);
  EXPECT_THROW(tok.combine(Tensor<double>::zeros({1, 3, 6}), Tensor<double>::zeros({4, 6})), DimensionError);
}

TEST(TokenMap, RoundTrip) {
  Rng rng(9);
  auto tokens = random_tensor<double>({2, 6, 5}, rng);
  auto map = tokens_to_map(tokens, TokenGrid{2, 3});
  EXPECT_EQ(map.shape(), (Shape{2, 5, 2, 3}));
  EXPECT_EQ(map.at({1, 4, 1, 2}), tokens.at({1, 5, 4}));
  EXPECT_EQ(max_abs_diff(map_to_tokens(map), tokens), 0.0);
}

}  // namespace
}  // namespace panodepth
