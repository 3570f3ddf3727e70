#include "numeric/op_util.hpp"
#include "panodepth/transformer.hpp"

namespace panodepth {

namespace {

template <typename T>
void require_width(const Tensor<T>& x, std::size_t rank, std::size_t width, const char* who) {
  if (x.rank() != rank || x.dim(rank - 1) != width) {
    throw DimensionError(std::string(who) + ": expected rank-" + std::to_string(rank) + " tokens of width " +
                         std::to_string(width) + ", got " + shape_str(x.shape()));
  }
}

}  // namespace

template <typename T>
SelfCrossAttention<T>::SelfCrossAttention(std::size_t d_model, std::size_t d_k, Rng& rng)
    : qkv(d_model, d_k, rng),
      self_out(d_k, d_model, true, rng),
      self_norm(d_model),
      cross_out(d_k, d_model, true, rng),
      cross_norm(d_model) {}

template <typename T>
Tensor<T> SelfCrossAttention<T>::operator()(const Tensor<T>& x, const Tensor<T>& pos,
                                            AttentionTrace<T>* trace) const {
  const auto r = qkv(x);
  auto self_attn = attention_core(r.q, r.k, r.v);
  auto y = self_norm(add(x, self_out(self_attn.output)));
  // Cross-attention: the query mixes the self-attention result, the
  // positional table, and Q; keys and values stay those of the input tokens.
  auto cross_q = add(r.q, linear(add(y, pos), qkv.query_matrix()));
  auto cross_attn = attention_core(cross_q, r.k, r.v);
  if (trace) {
    trace->weights.push_back(self_attn.weights);
    trace->weights.push_back(cross_attn.weights);
  }
  return cross_norm(add(y, cross_out(cross_attn.output)));
}

template <typename T>
void SelfCrossAttention<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  qkv.collect(join_name(prefix, "qkv"), out);
  self_out.collect(join_name(prefix, "self_out"), out);
  self_norm.collect(join_name(prefix, "self_norm"), out);
  cross_out.collect(join_name(prefix, "cross_out"), out);
  cross_norm.collect(join_name(prefix, "cross_norm"), out);
}

template <typename T>
EncoderBlock<T>::EncoderBlock(std::size_t d_model, const TransformerConfig& cfg, Rng& rng)
    : d_model_(d_model), use_sca_(cfg.use_sca) {
  if (use_sca_) {
    sca = SelfCrossAttention<T>(d_model, cfg.d_k, rng);
  } else {
    mhsa = MultiHeadSelfAttention<T>(d_model, cfg.heads, rng);
    mhsa_norm = LayerNorm<T>(d_model);
  }
  ffn = FeedForward<T>(d_model, cfg.ffn_ratio * d_model, rng);
  ffn_norm = LayerNorm<T>(d_model);
}

template <typename T>
Tensor<T> EncoderBlock<T>::operator()(const Tensor<T>& x, const Tensor<T>& pos, AttentionTrace<T>* trace) const {
  require_width(x, 3, d_model_, "encoder_block");
  auto z = use_sca_ ? sca(x, pos, trace) : mhsa_norm(add(x, mhsa(x, x, trace)));
  return ffn_norm(add(z, ffn(z)));
}

template <typename T>
void EncoderBlock<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  if (use_sca_) {
    sca.collect(join_name(prefix, "sca"), out);
  } else {
    mhsa.collect(join_name(prefix, "mhsa"), out);
    mhsa_norm.collect(join_name(prefix, "mhsa_norm"), out);
  }
  ffn.collect(join_name(prefix, "ffn"), out);
  ffn_norm.collect(join_name(prefix, "ffn_norm"), out);
}

template <typename T>
SpatialTemporalPatches<T>::SpatialTemporalPatches(std::size_t d_model, std::size_t d_k, std::size_t window, Rng& rng)
    : temporal_qkv(d_model, d_k, rng),
      temporal_out(d_k, d_model, true, rng),
      spatial_qkv(d_model, d_k, rng),
      spatial_out(d_k, d_model, true, rng),
      window_(window) {}

template <typename T>
Tensor<T> SpatialTemporalPatches<T>::temporal(const Tensor<T>& x, TokenGrid grid) const {
  const auto r = temporal_qkv(x);
  return add(x, temporal_out(windowed_temporal_attention(r.q, r.k, r.v, grid, window_)));
}

template <typename T>
Tensor<T> SpatialTemporalPatches<T>::spatial(const Tensor<T>& x, AttentionTrace<T>* trace) const {
  const std::size_t b = x.dim(0), t = x.dim(1), n = x.dim(2), d = x.dim(3);
  auto flat = reshape(x, {b * t, n, d});
  const auto r = spatial_qkv(flat);
  auto attn = attention_core(r.q, r.k, r.v);
  if (trace) trace->weights.push_back(attn.weights);
  return reshape(add(flat, spatial_out(attn.output)), {b, t, n, d});
}

template <typename T>
Tensor<T> SpatialTemporalPatches<T>::operator()(const Tensor<T>& x, TokenGrid grid, AttentionTrace<T>* trace) const {
  require_width(x, 4, temporal_qkv.u_qkv.in_features(), "stp");
  if (x.dim(1) == 0) throw DimensionError("stp: temporal axis must be at least 1");
  const auto h = x.dim(1) > 1 ? temporal(x, grid) : x;
  return spatial(h, trace);
}

template <typename T>
void SpatialTemporalPatches<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  temporal_qkv.collect(join_name(prefix, "temporal_qkv"), out);
  temporal_out.collect(join_name(prefix, "temporal_out"), out);
  spatial_qkv.collect(join_name(prefix, "spatial_qkv"), out);
  spatial_out.collect(join_name(prefix, "spatial_out"), out);
}

template <typename T>
DecoderBlock<T>::DecoderBlock(std::size_t d_model, const TransformerConfig& cfg, Rng& rng)
    : d_model_(d_model), use_stp_(cfg.use_stp) {
  if (use_stp_) stp = SpatialTemporalPatches<T>(d_model, cfg.d_k, cfg.stp_window, rng);
  mhsa = MultiHeadSelfAttention<T>(d_model, cfg.heads, rng);
  attention_norm = LayerNorm<T>(d_model);
  ffn = FeedForward<T>(d_model, cfg.ffn_ratio * d_model, rng);
  ffn_norm = LayerNorm<T>(d_model);
}

template <typename T>
Tensor<T> DecoderBlock<T>::operator()(const Tensor<T>& x, const Tensor<T>& pos, TokenGrid grid,
                                      AttentionTrace<T>* trace) const {
  const bool single = x.rank() == 3;
  require_width(x, single ? 3 : 4, d_model_, "decoder_block");
  const std::size_t b = x.dim(0), t = single ? 1 : x.dim(1), n = x.dim(single ? 1 : 2);
  auto frames = single ? reshape(x, {b, 1, n, d_model_}) : x;
  if (use_stp_) frames = stp(frames, grid, trace);
  auto flat = reshape(frames, {b * t, n, d_model_});
  auto h = attention_norm(add(flat, mhsa(add(flat, pos), flat, trace)));
  auto out = ffn_norm(add(h, ffn(h)));
  return single ? reshape(out, {b, n, d_model_}) : reshape(out, {b, t, n, d_model_});
}

template <typename T>
void DecoderBlock<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  if (use_stp_) stp.collect(join_name(prefix, "stp"), out);
  mhsa.collect(join_name(prefix, "mhsa"), out);
  attention_norm.collect(join_name(prefix, "attention_norm"), out);
  ffn.collect(join_name(prefix, "ffn"), out);
  ffn_norm.collect(join_name(prefix, "ffn_norm"), out);
}

#define INSTANTIATE(T)                     \
  template class SelfCrossAttention<T>;    \
  template class EncoderBlock<T>;          \
  template class SpatialTemporalPatches<T>; \
  template class DecoderBlock<T>;
PANODEPTH_INSTANTIATE(INSTANTIATE)

}  // namespace panodepth
