#include <algorithm>
#include <cmath>
#include <limits>

#include "numeric/op_util.hpp"
#include "panodepth/transformer.hpp"

namespace panodepth {

template <typename T>
AttentionOutput<T> attention_core(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
  if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3 || q.dim(0) != k.dim(0) || k.dim(0) != v.dim(0) ||
      q.dim(2) != k.dim(2) || k.dim(1) != v.dim(1)) {
    throw DimensionError("attention_core: Q " + shape_str(q.shape()) + ", K " + shape_str(k.shape()) + ", V " +
                         shape_str(v.shape()));
  }
  const T factor = T(1) / static_cast<T>(std::sqrt(static_cast<double>(q.dim(2))));
  auto weights = softmax(scale(bmm(q, k, true), factor), 2);
  return {bmm(weights, v), weights};
}

namespace {

std::vector<std::vector<std::size_t>> window_neighbours(TokenGrid grid, std::size_t window) {
  const auto r = static_cast<long>(window / 2);
  std::vector<std::vector<std::size_t>> out(grid.count());
  for (long y = 0; y < static_cast<long>(grid.height); ++y) {
    for (long x = 0; x < static_cast<long>(grid.width); ++x) {
      auto& list = out[y * grid.width + x];
      for (long yy = std::max(0L, y - r); yy <= std::min<long>(grid.height - 1, y + r); ++yy) {
        for (long xx = std::max(0L, x - r); xx <= std::min<long>(grid.width - 1, x + r); ++xx) {
          list.push_back(yy * grid.width + xx);
        }
      }
    }
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> windowed_temporal_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, TokenGrid grid,
                                      std::size_t window) {
  if (q.rank() != 4 || q.shape() != k.shape() || v.rank() != 4 || v.dim(0) != q.dim(0) || v.dim(1) != q.dim(1) ||
      v.dim(2) != q.dim(2) || q.dim(2) != grid.count()) {
    throw DimensionError("windowed_temporal_attention: Q " + shape_str(q.shape()) + ", K " + shape_str(k.shape()) +
                         ", V " + shape_str(v.shape()) + " on a " + std::to_string(grid.count()) + "-token grid");
  }
  const std::size_t batch = q.dim(0), frames = q.dim(1), n = q.dim(2), dk = q.dim(3), dv = v.dim(3);
  const auto neighbours = window_neighbours(grid, window);
  const T factor = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dk)));
  const auto& qd = q.node()->data;
  const auto& kd = k.node()->data;
  const auto& vd = v.node()->data;

  // Key (frame, token) pairs of query token i are laid out frame-major.
  auto key_row = [frames, n](std::size_t b, std::size_t t, std::size_t tok) { return (b * frames + t) * n + tok; };

  std::vector<T> out(batch * frames * n * dv, T(0));
  auto weights = std::make_shared<std::vector<std::vector<T>>>(batch * frames * n);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t row = key_row(b, t, i);
        const T* qi = &qd[row * dk];
        const auto& nb = neighbours[i];
        auto& a = (*weights)[row];
        a.resize(frames * nb.size());
        T max_score = -std::numeric_limits<T>::infinity();
        for (std::size_t tt = 0; tt < frames; ++tt) {
          for (std::size_t j = 0; j < nb.size(); ++j) {
            const T* kj = &kd[key_row(b, tt, nb[j]) * dk];
            T s = 0;
            for (std::size_t c = 0; c < dk; ++c) s += qi[c] * kj[c];
            s *= factor;
            a[tt * nb.size() + j] = s;
            max_score = std::max(max_score, s);
          }
        }
        T total = 0;
        for (auto& s : a) total += (s = std::exp(s - max_score));
        for (auto& s : a) s /= total;
        T* o = &out[row * dv];
        for (std::size_t tt = 0; tt < frames; ++tt) {
          for (std::size_t j = 0; j < nb.size(); ++j) {
            const T w = a[tt * nb.size() + j];
            const T* vj = &vd[key_row(b, tt, nb[j]) * dv];
            for (std::size_t c = 0; c < dv; ++c) o[c] += w * vj[c];
          }
        }
      }
    }
  }

  auto back = [=](detail::Node<T>& node) {
    T* gq = detail::input_grad(node, 0);
    T* gk = detail::input_grad(node, 1);
    T* gv = detail::input_grad(node, 2);
    const auto& qv = detail::input_data(node, 0);
    const auto& kv = detail::input_data(node, 1);
    const auto& vv = detail::input_data(node, 2);
    const auto& go = node.grad;
    std::vector<T> da;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t row = key_row(b, t, i);
          const auto& nb = neighbours[i];
          const auto& a = (*weights)[row];
          const T* g = &go[row * dv];
          da.assign(a.size(), T(0));
          T dot = 0;
          for (std::size_t tt = 0; tt < frames; ++tt) {
            for (std::size_t j = 0; j < nb.size(); ++j) {
              const std::size_t idx = tt * nb.size() + j;
              const std::size_t key = key_row(b, tt, nb[j]);
              T s = 0;
              for (std::size_t c = 0; c < dv; ++c) s += g[c] * vv[key * dv + c];
              da[idx] = s;
              dot += a[idx] * s;
              if (gv) {
                for (std::size_t c = 0; c < dv; ++c) gv[key * dv + c] += a[idx] * g[c];
              }
            }
          }
          if (!gq && !gk) continue;
          for (std::size_t tt = 0; tt < frames; ++tt) {
            for (std::size_t j = 0; j < nb.size(); ++j) {
              const std::size_t idx = tt * nb.size() + j;
              const std::size_t key = key_row(b, tt, nb[j]);
              const T ds = a[idx] * (da[idx] - dot) * factor;
              for (std::size_t c = 0; c < dk; ++c) {
                if (gq) gq[row * dk + c] += ds * kv[key * dk + c];
                if (gk) gk[key * dk + c] += ds * qv[row * dk + c];
              }
            }
          }
        }
      }
    }
  };
  return detail::make_result<T>({batch, frames, n, dv}, std::move(out), {&q, &k, &v}, back,
                                "windowed_temporal_attention");
}

template <typename T>
typename QkvProjection<T>::Result QkvProjection<T>::operator()(const Tensor<T>& x) const {
  auto qkv = u_qkv(x);
  const std::size_t axis = qkv.rank() - 1;
  return {slice(qkv, axis, 0, d_k_), slice(qkv, axis, d_k_, d_k_), slice(qkv, axis, 2 * d_k_, d_k_)};
}

template <typename T>
MultiHeadSelfAttention<T>::MultiHeadSelfAttention(std::size_t d_model, std::size_t heads, Rng& rng)
    : query(d_model, d_model, true, rng),
      key(d_model, d_model, true, rng),
      value(d_model, d_model, true, rng),
      output(d_model, d_model, true, rng),
      heads_(heads) {
  if (heads == 0 || d_model % heads != 0) throw ConfigError("MHSA: heads must divide the model width");
}

template <typename T>
Tensor<T> MultiHeadSelfAttention<T>::operator()(const Tensor<T>& qk_input, const Tensor<T>& v_input,
                                                AttentionTrace<T>* trace) const {
  if (qk_input.rank() != 3 || qk_input.shape() != v_input.shape() || qk_input.dim(2) != query.in_features()) {
    throw DimensionError("MHSA: expected [B,N," + std::to_string(query.in_features()) + "] inputs, got " +
                         shape_str(qk_input.shape()) + " and " + shape_str(v_input.shape()));
  }
  const std::size_t b = qk_input.dim(0), n = qk_input.dim(1), d = qk_input.dim(2), dh = d / heads_;
  auto split = [&](const Tensor<T>& t) {
    if (heads_ == 1) return t;
    return reshape(permute(reshape(t, {b, n, heads_, dh}), {0, 2, 1, 3}), {b * heads_, n, dh});
  };
  auto attn = attention_core(split(query(qk_input)), split(key(qk_input)), split(value(v_input)));
  if (trace) trace->weights.push_back(attn.weights);
  auto merged = heads_ == 1 ? attn.output
                            : reshape(permute(reshape(attn.output, {b, heads_, n, dh}), {0, 2, 1, 3}), {b, n, d});
  return output(merged);
}

template <typename T>
void MultiHeadSelfAttention<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  query.collect(join_name(prefix, "query"), out);
  key.collect(join_name(prefix, "key"), out);
  value.collect(join_name(prefix, "value"), out);
  output.collect(join_name(prefix, "output"), out);
}

#define INSTANTIATE(T)                                                                                       \
  template AttentionOutput<T> attention_core(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> windowed_temporal_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                                 TokenGrid, std::size_t);                                    \
  template class QkvProjection<T>;                                                                           \
  template class MultiHeadSelfAttention<T>;
PANODEPTH_INSTANTIATE(INSTANTIATE)

}  // namespace panodepth
