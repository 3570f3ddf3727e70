#pragma once

#include <vector>

#include "panodepth/config.hpp"
#include "panodepth/nn.hpp"
#include "panodepth/tokenizer.hpp"

namespace panodepth {

template <typename T>
struct AttentionOutput {
  Tensor<T> output;   // [B, N, Dv]
  Tensor<T> weights;  // [B, N, M], rows sum to one
};

// Collects every dense attention matrix produced during a forward pass.
template <typename T>
struct AttentionTrace {
  std::vector<Tensor<T>> weights;
};

// softmax(Q K^T / sqrt(Dk)) V over Q[B,N,Dk], K[B,M,Dk], V[B,M,Dv].
template <typename T>
AttentionOutput<T> attention_core(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v);

// Attention across the time axis of Q,K,V [B,T,N,Dk]: token n of frame t
// attends to every frame's tokens inside a window x window neighbourhood of n
// on the patch grid.
template <typename T>
Tensor<T> windowed_temporal_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, TokenGrid grid,
                                      std::size_t window);

// One bias-free matrix U_QKV in R^{D x 3Dk}, split into thirds.
template <typename T>
class QkvProjection : public Module<T> {
 public:
  QkvProjection() = default;
  QkvProjection(std::size_t d_model, std::size_t d_k, Rng& rng) : u_qkv(d_model, 3 * d_k, false, rng), d_k_(d_k) {}

  struct Result {
    Tensor<T> q, k, v;
  };
  Result operator()(const Tensor<T>& x) const;
  // Columns of U_QKV that produce Q.
  Tensor<T> query_matrix() const { return slice(u_qkv.weight, 1, 0, d_k_); }

  void collect(const std::string& prefix, ParameterList<T>& out) const override {
    u_qkv.collect(join_name(prefix, "u_qkv"), out);
  }
  std::size_t d_k() const { return d_k_; }

  Linear<T> u_qkv;

 private:
  std::size_t d_k_ = 0;
};

// Standard multi-head self-attention with D x D query/key/value/output maps.
template <typename T>
class MultiHeadSelfAttention : public Module<T> {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(std::size_t d_model, std::size_t heads, Rng& rng);

  // Queries and keys are computed from `qk_input`, values from `v_input`.
  Tensor<T> operator()(const Tensor<T>& qk_input, const Tensor<T>& v_input, AttentionTrace<T>* trace = nullptr) const;
  void collect(const std::string& prefix, ParameterList<T>& out) const override;

  Linear<T> query, key, value, output;

 private:
  std::size_t heads_ = 1;
};

// Self-attention followed by cross-attention against the pre-attention tokens.
template <typename T>
class SelfCrossAttention : public Module<T> {
 public:
  SelfCrossAttention() = default;
  SelfCrossAttention(std::size_t d_model, std::size_t d_k, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x, const Tensor<T>& pos, AttentionTrace<T>* trace = nullptr) const;
  void collect(const std::string& prefix, ParameterList<T>& out) const override;

  QkvProjection<T> qkv;
  Linear<T> self_out;
  LayerNorm<T> self_norm;
  Linear<T> cross_out;
  LayerNorm<T> cross_norm;
};

template <typename T>
class EncoderBlock : public Module<T> {
 public:
  EncoderBlock() = default;
  EncoderBlock(std::size_t d_model, const TransformerConfig& cfg, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x, const Tensor<T>& pos, AttentionTrace<T>* trace = nullptr) const;
  void collect(const std::string& prefix, ParameterList<T>& out) const override;

  bool use_sca() const { return use_sca_; }

  SelfCrossAttention<T> sca;
  MultiHeadSelfAttention<T> mhsa;
  LayerNorm<T> mhsa_norm;
  FeedForward<T> ffn;
  LayerNorm<T> ffn_norm;

 private:
  std::size_t d_model_ = 0;
  bool use_sca_ = true;
};

// Spatial and temporal patches: temporal attention (skipped when T = 1)
// followed by spatial attention over each frame, both with residual adds.
template <typename T>
class SpatialTemporalPatches : public Module<T> {
 public:
  SpatialTemporalPatches() = default;
  SpatialTemporalPatches(std::size_t d_model, std::size_t d_k, std::size_t window, Rng& rng);

  // x: [B,T,N,D]
  Tensor<T> operator()(const Tensor<T>& x, TokenGrid grid, AttentionTrace<T>* trace = nullptr) const;
  Tensor<T> temporal(const Tensor<T>& x, TokenGrid grid) const;
  Tensor<T> spatial(const Tensor<T>& x, AttentionTrace<T>* trace = nullptr) const;
  void collect(const std::string& prefix, ParameterList<T>& out) const override;

  QkvProjection<T> temporal_qkv;
  Linear<T> temporal_out;
  QkvProjection<T> spatial_qkv;
  Linear<T> spatial_out;

 private:
  std::size_t window_ = 3;
};

template <typename T>
class DecoderBlock : public Module<T> {
 public:
  DecoderBlock() = default;
  DecoderBlock(std::size_t d_model, const TransformerConfig& cfg, Rng& rng);

  // x: [B,N,D] (one frame) or [B,T,N,D]; pos: [N,D].
  Tensor<T> operator()(const Tensor<T>& x, const Tensor<T>& pos, TokenGrid grid,
                       AttentionTrace<T>* trace = nullptr) const;
  void collect(const std::string& prefix, ParameterList<T>& out) const override;

  bool use_stp() const { return use_stp_; }

  SpatialTemporalPatches<T> stp;
  MultiHeadSelfAttention<T> mhsa;
  LayerNorm<T> attention_norm;
  FeedForward<T> ffn;
  LayerNorm<T> ffn_norm;

 private:
  std::size_t d_model_ = 0;
  bool use_stp_ = true;
};

}  // namespace panodepth
