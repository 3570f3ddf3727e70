#include <cblas.h>

#include "op_util.hpp"

namespace panodepth {

template <>
void gemm<float>(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
                 const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
                 std::size_t ldc) {
  if (m == 0 || n == 0) return;
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a, static_cast<int>(lda), b,
              static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

template <>
void gemm<double>(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
                  const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
                  std::size_t ldc) {
  if (m == 0 || n == 0) return;
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a, static_cast<int>(lda), b,
              static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  std::vector<T> out(m * p, T(0));
  gemm<T>(false, false, m, p, k, T(1), a.data().data(), k, b.data().data(), p, T(0), out.data(), p);
  return detail::make_result<T>(
      Shape{m, p}, std::move(out), {&a, &b},
      [m, k, p](detail::Node<T>& self) {
        const T* g = self.grad.data();
        if (T* ga = detail::input_grad(self, 0)) {
          gemm<T>(false, true, m, k, p, T(1), g, p, detail::input_data(self, 1).data(), p, T(1), ga, k);
        }
        if (T* gb = detail::input_grad(self, 1)) {
          gemm<T>(true, false, k, p, m, T(1), detail::input_data(self, 0).data(), k, g, p, T(1), gb, p);
        }
      },
      "matmul");
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias) {
  if (x.rank() < 1 || weight.rank() != 2 || x.dim(x.rank() - 1) != weight.dim(0)) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
  }
  const std::size_t k = weight.dim(0), p = weight.dim(1);
  if (bias && (bias->rank() != 1 || bias->dim(0) != p)) {
    throw DimensionError("linear: bias " + shape_str(bias->shape()) + " does not match width " + std::to_string(p));
  }
  const std::size_t rows = x.size() / k;
  std::vector<T> out(rows * p, T(0));
  if (bias) {
    const auto bd = bias->data();
    for (std::size_t r = 0; r < rows; ++r) std::copy(bd.begin(), bd.end(), out.begin() + r * p);
  }
  gemm<T>(false, false, rows, p, k, T(1), x.data().data(), k, weight.data().data(), p, bias ? T(1) : T(0),
          out.data(), p);
  Shape shape = x.shape();
  shape.back() = p;
  return detail::make_result<T>(
      std::move(shape), std::move(out), {&x, &weight, bias},
      [rows, k, p](detail::Node<T>& self) {
        const T* g = self.grad.data();
        if (T* gx = detail::input_grad(self, 0)) {
          gemm<T>(false, true, rows, k, p, T(1), g, p, detail::input_data(self, 1).data(), p, T(1), gx, k);
        }
        if (T* gw = detail::input_grad(self, 1)) {
          gemm<T>(true, false, k, p, rows, T(1), detail::input_data(self, 0).data(), k, g, p, T(1), gw, p);
        }
        if (self.inputs[2]) {
          if (T* gb = detail::input_grad(self, 2)) {
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t j = 0; j < p; ++j) gb[j] += g[r * p + j];
            }
          }
        }
      },
      "linear");
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool trans_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
    throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t bk = trans_b ? b.dim(2) : b.dim(1);
  const std::size_t p = trans_b ? b.dim(1) : b.dim(2);
  if (bk != k) {
    throw DimensionError("bmm: inner extents differ for " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  std::vector<T> out(batch * m * p, T(0));
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  const std::size_t ldb = trans_b ? k : p;
  for (std::size_t i = 0; i < batch; ++i) {
    gemm<T>(false, trans_b, m, p, k, T(1), ad + i * m * k, k, bd + i * k * p, ldb, T(0), out.data() + i * m * p, p);
  }
  return detail::make_result<T>(
      Shape{batch, m, p}, std::move(out), {&a, &b},
      [batch, m, k, p, trans_b](detail::Node<T>& self) {
        const T* g = self.grad.data();
        const T* ad = detail::input_data(self, 0).data();
        const T* bd = detail::input_data(self, 1).data();
        T* ga = detail::input_grad(self, 0);
        T* gb = detail::input_grad(self, 1);
        const std::size_t ldb = trans_b ? k : p;
        for (std::size_t i = 0; i < batch; ++i) {
          const T* gi = g + i * m * p;
          const T* bi = bd + i * k * p;
          if (ga) {
            // dA = dC * op(B)^T
            gemm<T>(false, !trans_b, m, k, p, T(1), gi, p, bi, ldb, T(1), ga + i * m * k, k);
          }
          if (gb) {
            if (trans_b) {
              // B stored [P,K]: dB = dC^T * A
              gemm<T>(true, false, p, k, m, T(1), gi, p, ad + i * m * k, k, T(1), gb + i * k * p, k);
            } else {
              gemm<T>(true, false, k, p, m, T(1), ad + i * m * k, k, gi, p, T(1), gb + i * k * p, p);
            }
          }
        }
      },
      "bmm");
}

#define INSTANTIATE(T)                                                           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*); \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&, bool);
PANODEPTH_INSTANTIATE(INSTANTIATE)
#undef INSTANTIATE

}  // namespace panodepth
