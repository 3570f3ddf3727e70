#include <algorithm>
#include <cmath>

#include "op_util.hpp"

namespace panodepth {

namespace {

struct ConvGeometry {
  std::size_t batch, cin, height, width, cout, kernel, stride, padding, groups;
  std::size_t out_h, out_w;
  std::size_t cin_g() const { return cin / groups; }
  std::size_t cout_g() const { return cout / groups; }
  std::size_t patch() const { return cin_g() * kernel * kernel; }
  std::size_t out_pixels() const { return out_h * out_w; }
  bool pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
  bool depthwise() const { return groups == cin && cout == cin && groups > 1; }
};

// Output columns [lo, hi) whose input column ox * stride + kx - padding lies
// inside [0, width).
struct ColumnRange {
  std::size_t lo, hi;
};

ColumnRange valid_columns(const ConvGeometry& g, std::size_t kx) {
  const long s = static_cast<long>(g.stride), shift = static_cast<long>(kx) - static_cast<long>(g.padding);
  const long lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
  const long last = static_cast<long>(g.width) - 1 - shift;
  const long hi = last < 0 ? 0 : last / s + 1;
  return {static_cast<std::size_t>(std::min<long>(lo, static_cast<long>(g.out_w))),
          static_cast<std::size_t>(std::clamp<long>(hi, lo, static_cast<long>(g.out_w)))};
}

// Calls visit(oy, ox_begin, ox_end, offset) for each output-row segment of
// the flat output range [q0, q0 + len); offset is the segment's position in
// that range.
template <typename F>
void for_each_row_segment(const ConvGeometry& g, std::size_t q0, std::size_t len, F&& visit) {
  std::size_t q = q0;
  const std::size_t end = q0 + len;
  while (q < end) {
    const std::size_t oy = q / g.out_w, ox = q % g.out_w;
    const std::size_t stop = std::min(g.out_w, ox + (end - q));
    visit(oy, ox, stop, q - q0);
    q += stop - ox;
  }
}

// Columns [q0, q0+len) of the im2col matrix for one (sample, group) slice.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, std::size_t q0, std::size_t len, T* col) {
  const std::size_t k = g.kernel, s = g.stride;
  for (std::size_t c = 0; c < g.cin_g(); ++c) {
    const T* plane = x + c * g.height * g.width;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = col + ((c * k + ky) * k + kx) * len;
        const auto valid = valid_columns(g, kx);
        for_each_row_segment(g, q0, len, [&](std::size_t oy, std::size_t a, std::size_t b, std::size_t off) {
          T* dst = row + off - a;
          const long iy = static_cast<long>(oy * s + ky) - static_cast<long>(g.padding);
          const std::size_t lo = std::max(a, valid.lo), hi = std::min(b, valid.hi);
          if (iy < 0 || iy >= static_cast<long>(g.height) || lo >= hi) {
            std::fill(dst + a, dst + b, T(0));
            return;
          }
          std::fill(dst + a, dst + lo, T(0));
          const T* src = plane + static_cast<std::size_t>(iy) * g.width + lo * s + kx - g.padding;
          if (s == 1) {
            std::copy(src, src + (hi - lo), dst + lo);
          } else {
            for (std::size_t i = 0; i < hi - lo; ++i) dst[lo + i] = src[i * s];
          }
          std::fill(dst + hi, dst + b, T(0));
        });
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, std::size_t q0, std::size_t len, T* dx) {
  const std::size_t k = g.kernel, s = g.stride;
  for (std::size_t c = 0; c < g.cin_g(); ++c) {
    T* plane = dx + c * g.height * g.width;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = col + ((c * k + ky) * k + kx) * len;
        const auto valid = valid_columns(g, kx);
        for_each_row_segment(g, q0, len, [&](std::size_t oy, std::size_t a, std::size_t b, std::size_t off) {
          const long iy = static_cast<long>(oy * s + ky) - static_cast<long>(g.padding);
          const std::size_t lo = std::max(a, valid.lo), hi = std::min(b, valid.hi);
          if (iy < 0 || iy >= static_cast<long>(g.height) || lo >= hi) return;
          const T* src = row + off - a + lo;
          T* dst = plane + static_cast<std::size_t>(iy) * g.width + lo * s + kx - g.padding;
          for (std::size_t i = 0; i < hi - lo; ++i) dst[i * s] += src[i];
        });
      }
    }
  }
}

std::size_t chunk_length(const ConvGeometry& g) {
  constexpr std::size_t kBudget = std::size_t(1) << 20;
  return std::max<std::size_t>(1, std::min(g.out_pixels(), kBudget / std::max<std::size_t>(1, g.patch())));
}

template <typename T>
void depthwise_forward(const T* x, const T* w, const ConvGeometry& g, T* out) {
  const std::size_t k = g.kernel, s = g.stride;
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t c = 0; c < g.cin; ++c) {
      const T* plane = x + (b * g.cin + c) * g.height * g.width;
      const T* wk = w + c * k * k;
      T* o = out + (b * g.cout + c) * g.out_pixels();
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const T wv = wk[ky * k + kx];
          const auto valid = valid_columns(g, kx);
          if (valid.lo >= valid.hi) continue;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long iy = static_cast<long>(oy * s + ky) - static_cast<long>(g.padding);
            if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
            const T* src = plane + static_cast<std::size_t>(iy) * g.width + valid.lo * s + kx - g.padding;
            T* dst = o + oy * g.out_w + valid.lo;
            for (std::size_t i = 0; i < valid.hi - valid.lo; ++i) dst[i] += wv * src[i * s];
          }
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward(const T* x, const T* w, const T* gout, const ConvGeometry& g, T* gx, T* gw) {
  const std::size_t k = g.kernel, s = g.stride;
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t c = 0; c < g.cin; ++c) {
      const T* plane = x + (b * g.cin + c) * g.height * g.width;
      T* gplane = gx ? gx + (b * g.cin + c) * g.height * g.width : nullptr;
      const T* wk = w + c * k * k;
      T* gwk = gw ? gw + c * k * k : nullptr;
      const T* go = gout + (b * g.cout + c) * g.out_pixels();
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const T wv = wk[ky * k + kx];
          const auto valid = valid_columns(g, kx);
          if (valid.lo >= valid.hi) continue;
          T wacc = 0;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const long iy = static_cast<long>(oy * s + ky) - static_cast<long>(g.padding);
            if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
            const std::size_t base = static_cast<std::size_t>(iy) * g.width + valid.lo * s + kx - g.padding;
            const std::size_t n = valid.hi - valid.lo;
            const T* grow = go + oy * g.out_w + valid.lo;
            if (gwk) {
              const T* src = plane + base;
              for (std::size_t i = 0; i < n; ++i) wacc += grow[i] * src[i * s];
            }
            if (gplane) {
              T* dst = gplane + base;
              for (std::size_t i = 0; i < n; ++i) dst[i * s] += grow[i] * wv;
            }
          }
          if (gwk) gwk[ky * k + kx] += wacc;
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias, Conv2dOptions options) {
  if (x.rank() != 4 || weight.rank() != 4) {
    throw DimensionError("conv2d expects 4-D input and weight, got " + shape_str(x.shape()) + " and " +
                         shape_str(weight.shape()));
  }
  ConvGeometry g{};
  g.batch = x.dim(0);
  g.cin = x.dim(1);
  g.height = x.dim(2);
  g.width = x.dim(3);
  g.cout = weight.dim(0);
  g.kernel = weight.dim(2);
  g.stride = options.stride;
  g.padding = options.padding;
  g.groups = options.groups;
  if (g.groups == 0 || g.stride == 0 || g.cin % g.groups != 0 || g.cout % g.groups != 0) {
    throw DimensionError("conv2d: channels " + std::to_string(g.cin) + "->" + std::to_string(g.cout) +
                         " not divisible by groups " + std::to_string(g.groups));
  }
  if (weight.dim(1) != g.cin_g() || weight.dim(3) != g.kernel) {
    throw DimensionError("conv2d: weight " + shape_str(weight.shape()) + " does not fit input " +
                         shape_str(x.shape()) + " with groups " + std::to_string(g.groups));
  }
  if (g.height + 2 * g.padding < g.kernel || g.width + 2 * g.padding < g.kernel) {
    throw DimensionError("conv2d: kernel " + std::to_string(g.kernel) + " larger than padded input " +
                         shape_str(x.shape()));
  }
  if (bias && bias->size() != g.cout) {
    throw DimensionError("conv2d: bias " + shape_str(bias->shape()) + " does not match " + std::to_string(g.cout));
  }
  g.out_h = (g.height + 2 * g.padding - g.kernel) / g.stride + 1;
  g.out_w = (g.width + 2 * g.padding - g.kernel) / g.stride + 1;

  const std::size_t opix = g.out_pixels();
  std::vector<T> out(g.batch * g.cout * opix, T(0));
  if (bias) {
    const auto bd = bias->data();
    for (std::size_t b = 0; b < g.batch; ++b) {
      for (std::size_t c = 0; c < g.cout; ++c) {
        std::fill_n(out.begin() + (b * g.cout + c) * opix, opix, bd[c]);
      }
    }
  }
  const T* xd = x.data().data();
  const T* wd = weight.data().data();
  if (g.depthwise()) {
    depthwise_forward(xd, wd, g, out.data());
  } else {
    const std::size_t chunk = chunk_length(g);
    std::vector<T> col(g.pointwise() ? 0 : g.patch() * chunk);
    for (std::size_t b = 0; b < g.batch; ++b) {
      for (std::size_t grp = 0; grp < g.groups; ++grp) {
        const T* xs = xd + (b * g.cin + grp * g.cin_g()) * g.height * g.width;
        const T* ws = wd + grp * g.cout_g() * g.patch();
        T* os = out.data() + (b * g.cout + grp * g.cout_g()) * opix;
        for (std::size_t q0 = 0; q0 < opix; q0 += chunk) {
          const std::size_t len = std::min(chunk, opix - q0);
          if (g.pointwise()) {
            gemm<T>(false, false, g.cout_g(), len, g.patch(), T(1), ws, g.patch(), xs + q0, opix, T(1), os + q0, opix);
          } else {
            im2col(xs, g, q0, len, col.data());
            gemm<T>(false, false, g.cout_g(), len, g.patch(), T(1), ws, g.patch(), col.data(), len, T(1), os + q0,
                    opix);
          }
        }
      }
    }
  }

  return detail::make_result<T>(
      Shape{g.batch, g.cout, g.out_h, g.out_w}, std::move(out), {&x, &weight, bias},
      [g](detail::Node<T>& self) {
        const T* go = self.grad.data();
        const T* xd = detail::input_data(self, 0).data();
        const T* wd = detail::input_data(self, 1).data();
        T* gx = detail::input_grad(self, 0);
        T* gw = detail::input_grad(self, 1);
        const std::size_t opix = g.out_pixels();
        if (self.inputs[2]) {
          if (T* gb = detail::input_grad(self, 2)) {
            for (std::size_t b = 0; b < g.batch; ++b) {
              for (std::size_t c = 0; c < g.cout; ++c) {
                const T* row = go + (b * g.cout + c) * opix;
                T acc = 0;
                for (std::size_t q = 0; q < opix; ++q) acc += row[q];
                gb[c] += acc;
              }
            }
          }
        }
        if (!gx && !gw) return;
        if (g.depthwise()) {
          depthwise_backward(xd, wd, go, g, gx, gw);
          return;
        }
        const std::size_t chunk = chunk_length(g);
        std::vector<T> col(g.patch() * chunk);
        std::vector<T> dcol(g.pointwise() ? 0 : g.patch() * chunk);
        for (std::size_t b = 0; b < g.batch; ++b) {
          for (std::size_t grp = 0; grp < g.groups; ++grp) {
            const std::size_t xoff = (b * g.cin + grp * g.cin_g()) * g.height * g.width;
            const T* ws = wd + grp * g.cout_g() * g.patch();
            const T* gos = go + (b * g.cout + grp * g.cout_g()) * opix;
            for (std::size_t q0 = 0; q0 < opix; q0 += chunk) {
              const std::size_t len = std::min(chunk, opix - q0);
              if (g.pointwise()) {
                if (gw) {
                  gemm<T>(false, true, g.cout_g(), g.patch(), len, T(1), gos + q0, opix, xd + xoff + q0, opix, T(1),
                          gw + grp * g.cout_g() * g.patch(), g.patch());
                }
                if (gx) {
                  gemm<T>(true, false, g.patch(), len, g.cout_g(), T(1), ws, g.patch(), gos + q0, opix, T(1),
                          gx + xoff + q0, opix);
                }
                continue;
              }
              if (gw) {
                im2col(xd + xoff, g, q0, len, col.data());
                gemm<T>(false, true, g.cout_g(), g.patch(), len, T(1), gos + q0, opix, col.data(), len, T(1),
                        gw + grp * g.cout_g() * g.patch(), g.patch());
              }
              if (gx) {
                gemm<T>(true, false, g.patch(), len, g.cout_g(), T(1), ws, g.patch(), gos + q0, opix, T(0),
                        dcol.data(), len);
                col2im(dcol.data(), g, q0, len, gx + xoff);
              }
            }
          }
        }
      },
      "conv2d");
}

template <typename T>
Tensor<T> zero_pad2d(const Tensor<T>& x, std::size_t pad) {
  if (x.rank() != 4) throw DimensionError("zero_pad2d expects B,C,H,W, got " + shape_str(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ph = h + 2 * pad, pw = w + 2 * pad;
  std::vector<T> out(planes * ph * pw, T(0));
  const auto xd = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < h; ++y) {
      std::copy_n(xd.begin() + (p * h + y) * w, w, out.begin() + (p * ph + y + pad) * pw + pad);
    }
  }
  return detail::make_result<T>(
      Shape{x.dim(0), x.dim(1), ph, pw}, std::move(out), {&x},
      [planes, h, w, pad, ph, pw](detail::Node<T>& self) {
        T* gx = detail::input_grad(self, 0);
        for (std::size_t p = 0; p < planes; ++p) {
          for (std::size_t y = 0; y < h; ++y) {
            const T* src = self.grad.data() + (p * ph + y + pad) * pw + pad;
            T* dst = gx + (p * h + y) * w;
            for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
          }
        }
      },
      "zero_pad2d");
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t kernel, std::size_t stride) {
  if (x.rank() != 4) throw DimensionError("avg_pool2d expects B,C,H,W, got " + shape_str(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (kernel == 0 || stride == 0 || kernel > h || kernel > w) {
    throw DimensionError("avg_pool2d: window " + std::to_string(kernel) + " does not fit input " + shape_str(x.shape()));
  }
  const std::size_t oh = (h - kernel) / stride + 1, ow = (w - kernel) / stride + 1;
  const T inv = T(1) / static_cast<T>(kernel * kernel);
  std::vector<T> out(planes * oh * ow, T(0));
  const auto xd = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T acc = 0;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          for (std::size_t kx = 0; kx < kernel; ++kx) acc += xd[(p * h + oy * stride + ky) * w + ox * stride + kx];
        }
        out[(p * oh + oy) * ow + ox] = acc * inv;
      }
    }
  }
  return detail::make_result<T>(
      Shape{x.dim(0), x.dim(1), oh, ow}, std::move(out), {&x},
      [planes, h, w, oh, ow, kernel, stride, inv](detail::Node<T>& self) {
        T* gx = detail::input_grad(self, 0);
        for (std::size_t p = 0; p < planes; ++p) {
          for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const T gv = self.grad[(p * oh + oy) * ow + ox] * inv;
              for (std::size_t ky = 0; ky < kernel; ++ky) {
                for (std::size_t kx = 0; kx < kernel; ++kx) gx[(p * h + oy * stride + ky) * w + ox * stride + kx] += gv;
              }
            }
          }
        }
      },
      "avg_pool2d");
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t height, std::size_t width) {
  if (x.rank() != 4 || height == 0 || width == 0) {
    throw DimensionError("resize_bilinear expects B,C,H,W and a positive target, got " + shape_str(x.shape()));
  }
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h == height && w == width) {
    return detail::make_result<T>(
        x.shape(), std::vector<T>(x.data().begin(), x.data().end()), {&x},
        [](detail::Node<T>& self) {
          T* gx = detail::input_grad(self, 0);
          for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
        },
        "resize_bilinear");
  }
  auto ty = bilinear_taps(h, height);
  auto tx = bilinear_taps(w, width);
  std::vector<T> out(planes * height * width);
  const auto xd = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* plane = xd.data() + p * h * w;
    for (std::size_t y = 0; y < height; ++y) {
      const auto& a = ty[y];
      for (std::size_t xx = 0; xx < width; ++xx) {
        const auto& b = tx[xx];
        const T fy = static_cast<T>(a.frac), fx = static_cast<T>(b.frac);
        const T top = plane[a.lo * w + b.lo] * (T(1) - fx) + plane[a.lo * w + b.hi] * fx;
        const T bot = plane[a.hi * w + b.lo] * (T(1) - fx) + plane[a.hi * w + b.hi] * fx;
        out[(p * height + y) * width + xx] = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  return detail::make_result<T>(
      Shape{x.dim(0), x.dim(1), height, width}, std::move(out), {&x},
      [planes, h, w, height, width, ty = std::move(ty), tx = std::move(tx)](detail::Node<T>& self) {
        T* gx = detail::input_grad(self, 0);
        for (std::size_t p = 0; p < planes; ++p) {
          T* plane = gx + p * h * w;
          for (std::size_t y = 0; y < height; ++y) {
            const auto& a = ty[y];
            for (std::size_t xx = 0; xx < width; ++xx) {
              const auto& b = tx[xx];
              const T g = self.grad[(p * height + y) * width + xx];
              const T fy = static_cast<T>(a.frac), fx = static_cast<T>(b.frac);
              plane[a.lo * w + b.lo] += g * (T(1) - fy) * (T(1) - fx);
              plane[a.lo * w + b.hi] += g * (T(1) - fy) * fx;
              plane[a.hi * w + b.lo] += g * fy * (T(1) - fx);
              plane[a.hi * w + b.hi] += g * fy * fx;
            }
          }
        }
      },
      "resize_bilinear");
}

#define INSTANTIATE(T)                                                                     \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, Conv2dOptions); \
  template Tensor<T> zero_pad2d(const Tensor<T>&, std::size_t);                            \
  template Tensor<T> avg_pool2d(const Tensor<T>&, std::size_t, std::size_t);               \
  template Tensor<T> resize_bilinear(const Tensor<T>&, std::size_t, std::size_t);
PANODEPTH_INSTANTIATE(INSTANTIATE)
#undef INSTANTIATE

}  // namespace panodepth
