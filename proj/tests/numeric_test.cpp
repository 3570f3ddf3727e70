#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "panodepth/errors.hpp"
#include "panodepth/optim.hpp"
#include "test_support.hpp"

namespace panodepth {
namespace {

using testing::max_abs_diff;
using testing::op_gradient_error;
using testing::random_away_from_zero;
using testing::random_shape;
using testing::random_tensor;

Tensor<double> make(Shape shape, std::vector<double> v) { return Tensor<double>(std::move(shape), std::move(v)); }

TEST(Matmul, Examples) {
  auto b = make({2, 3}, {1, 2, 3, 4, 5, 6});
  auto id = make({2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(max_abs_diff(matmul(id, b), b), 0.0);

  auto r = matmul(make({2, 2}, {1, 2, 3, 4}), make({2, 1}, {1, 1}));
  EXPECT_EQ(r.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(r[0], 3);
  EXPECT_DOUBLE_EQ(r[1], 7);

  auto z = matmul(Tensor<double>::zeros({4, 2}), b);
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
  }
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  auto x = random_tensor<double>({2, 3, 5, 4}, rng);
  Tensor<double> w({3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) w.at({c, c, 0, 0}) = 1.0;
  EXPECT_EQ(max_abs_diff(conv2d<double>(x, w, nullptr), x), 0.0);
}

TEST(Conv2d, OnesKernelSumsWindow) {
  auto y = conv2d<double>(Tensor<double>::ones({1, 1, 3, 3}), Tensor<double>::ones({1, 1, 3, 3}), nullptr);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y[0], 9.0);
}

TEST(Conv2d, LinearWithoutBias) {
  Rng rng(2);
  auto x = random_tensor<double>({1, 2, 6, 6}, rng);
  auto w = random_tensor<double>({4, 2, 3, 3}, rng);
  const Conv2dOptions opt{.stride = 2, .padding = 1, .groups = 1};
  auto lhs = conv2d<double>(scale(x, 2.0), w, nullptr, opt);
  auto rhs = scale(conv2d<double>(x, w, nullptr, opt), 2.0);
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
}

TEST(Conv2d, OutputExtentFormula) {
  for (std::size_t h : {5, 6, 7}) {
    for (std::size_t stride : {1, 2}) {
      for (std::size_t pad : {0, 1}) {
        auto y = conv2d<double>(Tensor<double>::ones({1, 1, h, h + 1}), Tensor<double>::ones({2, 1, 3, 3}), nullptr,
                        {.stride = stride, .padding = pad, .groups = 1});
        EXPECT_EQ(y.dim(2), (h + 2 * pad - 3) / stride + 1);
        EXPECT_EQ(y.dim(3), (h + 1 + 2 * pad - 3) / stride + 1);
      }
    }
  }
}

TEST(Conv2d, DepthwiseMatchesPerChannelDense) {
  Rng rng(3);
  const std::size_t channels = 5;
  auto x = random_tensor<float>({2, channels, 7, 9}, rng);
  auto w = random_tensor<float>({channels, 1, 3, 3}, rng);
  auto b = random_tensor<float>({channels}, rng);
  const Conv2dOptions dw{.stride = 1, .padding = 1, .groups = channels};
  auto grouped = conv2d(x, w, &b, dw);
  for (std::size_t c = 0; c < channels; ++c) {
    auto xc = slice(x, 1, c, 1);
    auto wc = slice(w, 0, c, 1);
    auto bc = slice(b, 0, c, 1);
    auto dense = conv2d(xc, wc, &bc, {.stride = 1, .padding = 1, .groups = 1});
    auto part = slice(grouped, 1, c, 1);
    for (std::size_t i = 0; i < dense.size(); ++i) ASSERT_NEAR(part[i], dense[i], 1e-6f) << "channel " << c;
  }
}

TEST(Conv2d, RejectsBadGroupsAndOversizeKernel) {
  EXPECT_THROW(conv2d<double>(Tensor<double>::ones({1, 3, 4, 4}), Tensor<double>::ones({3, 1, 3, 3}), nullptr,
                      {.stride = 1, .padding = 0, .groups = 2}),
               DimensionError);
  EXPECT_THROW(conv2d<double>(Tensor<double>::ones({1, 1, 2, 2}), Tensor<double>::ones({1, 1, 3, 3}), nullptr),
               DimensionError);
}

TEST(PadPool, Examples) {
  Rng rng(4);
  auto x = random_tensor<double>({1, 2, 3, 4}, rng);
  EXPECT_EQ(max_abs_diff(zero_pad2d(x, 0), x), 0.0);

  auto padded = zero_pad2d(x, 1);
  ASSERT_EQ(padded.shape(), (Shape{1, 2, 5, 6}));
  EXPECT_EQ(padded.at({0, 1, 0, 0}), 0.0);
  EXPECT_EQ(padded.at({0, 1, 4, 5}), 0.0);
  EXPECT_EQ(padded.at({0, 1, 2, 3}), x.at({0, 1, 1, 2}));

  auto pooled = avg_pool2d(make({1, 1, 2, 2}, {1, 3, 5, 7}), 2, 2);
  ASSERT_EQ(pooled.size(), 1u);
  EXPECT_DOUBLE_EQ(pooled[0], 4.0);

  auto flat = avg_pool2d(Tensor<double>::full({1, 3, 6, 4}, 2.5), 2, 2);
  for (double v : flat.data()) EXPECT_DOUBLE_EQ(v, 2.5);

  EXPECT_THROW(avg_pool2d(Tensor<double>::ones({1, 1, 2, 2}), 3, 1), DimensionError);
}

TEST(Activation, Examples) {
  auto r = relu(make({2}, {-1, 2}));
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 2.0);
  EXPECT_EQ(gelu(make({1}, {0}))[0], 0.0);
  EXPECT_EQ(sigmoid(make({1}, {0}))[0], 0.5);
  // 1 * Phi(1) with Phi(1) = 0.8413447460685429
  EXPECT_NEAR(gelu(make({1}, {1}))[0], 0.841345, 1e-6);
}

TEST(Softmax, Examples) {
  auto a = softmax(make({2}, {0, 0}), 0);
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);

  auto b = softmax(make({2}, {std::log(2.0), 0}), 0);
  EXPECT_NEAR(b[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(b[1], 1.0 / 3.0, 1e-15);

  auto c = softmax(Tensor<float>({2}, std::vector<float>{1000, 1000}), 0);
  EXPECT_EQ(c[0], 0.5f);
  EXPECT_EQ(c[1], 0.5f);
}

TEST(Softmax, RowsSumToOneOnEveryAxis) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto shape = random_shape(rng, 3, 1, 6);
    auto x = random_tensor<float>(shape, rng, -20, 20);
    for (std::size_t axis = 0; axis < 3; ++axis) {
      auto y = softmax(x, axis);
      const std::size_t n = shape[axis];
      std::size_t inner = 1;
      for (std::size_t d = axis + 1; d < 3; ++d) inner *= shape[d];
      const std::size_t outer = x.size() / (n * inner);
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
          double total = 0;
          for (std::size_t k = 0; k < n; ++k) {
            const float v = y[(o * n + k) * inner + i];
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
            total += v;
          }
          EXPECT_NEAR(total, 1.0, 1e-6);
        }
      }
    }
  }
}

TEST(LayerNorm, Examples) {
  auto gamma = Tensor<double>::ones({2});
  auto beta = Tensor<double>::zeros({2});
  auto constant = layer_norm(make({1, 2}, {3, 3}), gamma, beta);
  EXPECT_EQ(constant[0], 0.0);
  EXPECT_EQ(constant[1], 0.0);

  auto y = layer_norm(make({1, 2}, {1, 3}), gamma, beta);
  EXPECT_NEAR(y[0], -1.0, 1e-5);
  EXPECT_NEAR(y[1], 1.0, 1e-5);
}

TEST(LayerNorm, ShiftInvariantAndNormalized) {
  Rng rng(6);
  const std::size_t rows = 7, width = 16;
  auto x = random_tensor<double>({rows, width}, rng, -5, 5);
  auto gamma = Tensor<double>::ones({width});
  auto beta = Tensor<double>::zeros({width});
  auto y = layer_norm(x, gamma, beta);
  auto shifted = layer_norm(add_scalar(x, 42.0), gamma, beta);
  EXPECT_LT(max_abs_diff(y, shifted), 1e-9);
  for (std::size_t r = 0; r < rows; ++r) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < width; ++c) m += y[r * width + c];
    m /= width;
    for (std::size_t c = 0; c < width; ++c) v += (y[r * width + c] - m) * (y[r * width + c] - m);
    v /= width;
    EXPECT_LT(std::abs(m), 1e-5);
    EXPECT_NEAR(v, 1.0, 1e-3);
  }
}

TEST(Backward, Examples) {
  auto x = make({3}, {1, -2, 5});
  x.set_requires_grad(true);
  backward(sum(x));
  const auto grad_of = x.grad();
  for (double g : grad_of.data()) EXPECT_EQ(g, 1.0);

  auto y = make({2}, {1, 2});
  y.set_requires_grad(true);
  auto unused = make({2}, {7, 7});
  unused.set_requires_grad(true);
  backward(sum(mul(y, y)));
  EXPECT_DOUBLE_EQ(y.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(y.grad()[1], 4.0);
  const auto unused_grad = unused.grad();
  for (double g : unused_grad.data()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, AccumulatesAcrossConsumers) {
  auto x = make({2}, {3, 4});
  x.set_requires_grad(true);
  backward(sum(add(mul(x, x), scale(x, 3.0))));
  EXPECT_DOUBLE_EQ(x.grad()[0], 9.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 11.0);
}

TEST(Backward, NonScalarLossIsAContractError) {
  auto x = make({2}, {1, 2});
  x.set_requires_grad(true);
  EXPECT_THROW(backward(mul(x, x)), ContractError);
}

TEST(FiniteDiff, Examples) {
  std::function<Tensor<double>(const Tensor<double>&)> total = [](const Tensor<double>& t) { return sum(t); };
  Rng rng(7);
  auto g = finite_diff_gradient(total, random_tensor<double>({4}, rng));
  for (double v : g.data()) EXPECT_NEAR(v, 1.0, 1e-9);

  std::function<Tensor<double>(const Tensor<double>&)> squares = [](const Tensor<double>& t) {
    return sum(mul(t, t));
  };
  EXPECT_NEAR(finite_diff_gradient(squares, make({1}, {3}))[0], 6.0, 1e-6);

  std::function<Tensor<double>(const Tensor<double>&)> blowup = [](const Tensor<double>& t) {
    return scale(sum(t), std::numeric_limits<double>::infinity());
  };
  EXPECT_THROW(finite_diff_gradient(blowup, make({1}, {1})), NumericError);
}

// Reverse-mode gradients of every differentiable kernel against central
// differences on random small shapes.
template <typename T>
struct GradientCase {
  const char* name;
  std::function<double(Rng&, double)> run;
};

template <typename T>
std::vector<GradientCase<T>> gradient_cases() {
  using V = std::vector<Tensor<T>>;
  auto rt = [](const Shape& s, Rng& rng) { return random_tensor<T>(s, rng); };
  std::vector<GradientCase<T>> cases;
  auto binary = [&](const char* name, Tensor<T> (*fn)(const Tensor<T>&, const Tensor<T>&)) {
    cases.push_back({name, [=](Rng& rng, double h) {
                       const auto shape = random_shape(rng, 1 + rng.below(3), 1, 4);
                       // Half the trials broadcast a suffix of the shape.
                       Shape bs = shape;
                       if (rng.below(2) == 1) bs.erase(bs.begin(), bs.begin() + rng.below(shape.size()));
                       return op_gradient_error<T>([fn](const V& in) { return fn(in[0], in[1]); },
                                                   {rt(shape, rng), rt(bs, rng)}, rng, h);
                     }});
  };
  binary("add", &add<T>);
  binary("sub", &sub<T>);
  binary("mul", &mul<T>);
  cases.push_back({"scale", [=](Rng& rng, double h) {
                     const T f = static_cast<T>(rng.uniform(-2, 2));
                     return op_gradient_error<T>([f](const V& in) { return scale(in[0], f); },
                                                 {rt(random_shape(rng, 2, 1, 5), rng)}, rng, h);
                   }});
  cases.push_back({"add_scalar", [=](Rng& rng, double h) {
                     return op_gradient_error<T>([](const V& in) { return add_scalar(in[0], T(0.7)); },
                                                 {rt(random_shape(rng, 2, 1, 5), rng)}, rng, h);
                   }});
  cases.push_back({"sum", [=](Rng& rng, double h) {
                     return op_gradient_error<T>([](const V& in) { return sum(in[0]); },
                                                 {rt(random_shape(rng, 3, 1, 4), rng)}, rng, h);
                   }});
  cases.push_back({"mean", [=](Rng& rng, double h) {
                     return op_gradient_error<T>([](const V& in) { return mean(in[0]); },
                                                 {rt(random_shape(rng, 3, 1, 4), rng)}, rng, h);
                   }});
  cases.push_back({"matmul", [=](Rng& rng, double h) {
                     const auto s = random_shape(rng, 3, 1, 5);
                     return op_gradient_error<T>([](const V& in) { return matmul(in[0], in[1]); },
                                                 {rt({s[0], s[1]}, rng), rt({s[1], s[2]}, rng)}, rng, h);
                   }});
  cases.push_back({"linear", [=](Rng& rng, double h) {
                     const auto s = random_shape(rng, 4, 1, 4);
                     return op_gradient_error<T>([](const V& in) { return linear(in[0], in[1], &in[2]); },
                                                 {rt({s[0], s[1], s[2]}, rng), rt({s[2], s[3]}, rng), rt({s[3]}, rng)},
                                                 rng, h);
                   }});
  cases.push_back({"bmm", [=](Rng& rng, double h) {
                     const auto s = random_shape(rng, 4, 1, 4);
                     const bool trans = rng.below(2) == 1;
                     const Shape bs = trans ? Shape{s[0], s[3], s[2]} : Shape{s[0], s[2], s[3]};
                     return op_gradient_error<T>([trans](const V& in) { return bmm(in[0], in[1], trans); },
                                                 {rt({s[0], s[1], s[2]}, rng), rt(bs, rng)}, rng, h);
                   }});
  cases.push_back({"relu", [=](Rng& rng, double h) {
                     return op_gradient_error<T>([](const V& in) { return relu(in[0]); },
                                                 {random_away_from_zero<T>(random_shape(rng, 2, 1, 6), rng, 0.05)}, rng,
                                                 h);
                   }});
  cases.push_back({"gelu", [=](Rng& rng, double h) {
                     return op_gradient_error<T>([](const V& in) { return gelu(in[0]); },
                                                 {rt(random_shape(rng, 2, 1, 6), rng)}, rng, h);
                   }});
  cases.push_back({"sigmoid", [=](Rng& rng, double h) {
                     return op_gradient_error<T>([](const V& in) { return sigmoid(in[0]); },
                                                 {rt(random_shape(rng, 2, 1, 6), rng)}, rng, h);
                   }});
  cases.push_back({"softmax", [=](Rng& rng, double h) {
                     const std::size_t axis = rng.below(3);
                     return op_gradient_error<T>([axis](const V& in) { return softmax(in[0], axis); },
                                                 {rt(random_shape(rng, 3, 1, 4), rng)}, rng, h);
                   }});
  cases.push_back({"layer_norm", [=](Rng& rng, double h) {
                     // Rows with a small spread curve sharply; a ramp keeps the
                     // variance away from zero so the difference quotient is accurate.
                     const Shape s{1 + rng.below(4), 3 + rng.below(4)};
                     auto x = rt(s, rng);
                     for (std::size_t i = 0; i < x.size(); ++i) x[i] += static_cast<T>(i % s[1]);
                     return op_gradient_error<T>([](const V& in) { return layer_norm(in[0], in[1], in[2]); },
                                                 {x, rt({s[1]}, rng), rt({s[1]}, rng)}, rng, h);
                   }});
  cases.push_back({"instance_norm", [=](Rng& rng, double h) {
                     const auto s = random_shape(rng, 4, 2, 4);
                     return op_gradient_error<T>([](const V& in) { return instance_norm(in[0]); }, {rt(s, rng)}, rng,
                                                 h);
                   }});
  cases.push_back({"conv2d", [=](Rng& rng, double h) {
                     const std::size_t groups = 1 + rng.below(2);
                     const std::size_t cin = groups * (1 + rng.below(2)), cout = groups * (1 + rng.below(2));
                     const std::size_t k = rng.below(2) == 0 ? 1 : 3;
                     const Conv2dOptions opt{.stride = 1 + rng.below(2), .padding = rng.below(2), .groups = groups};
                     const std::size_t hgt = 3 + rng.below(3), wid = 3 + rng.below(3);
                     return op_gradient_error<T>(
                         [opt](const V& in) { return conv2d(in[0], in[1], &in[2], opt); },
                         {rt({1 + rng.below(2), cin, hgt, wid}, rng), rt({cout, cin / groups, k, k}, rng),
                          rt({cout}, rng)},
                         rng, h);
                   }});
  cases.push_back({"zero_pad2d", [=](Rng& rng, double h) {
                     const std::size_t pad = rng.below(3);
                     return op_gradient_error<T>([pad](const V& in) { return zero_pad2d(in[0], pad); },
                                                 {rt(random_shape(rng, 4, 1, 4), rng)}, rng, h);
                   }});
  cases.push_back({"avg_pool2d", [=](Rng& rng, double h) {
                     const std::size_t k = 1 + rng.below(2), s = 1 + rng.below(2);
                     return op_gradient_error<T>([k, s](const V& in) { return avg_pool2d(in[0], k, s); },
                                                 {rt(random_shape(rng, 4, 2, 5), rng)}, rng, h);
                   }});
  cases.push_back({"resize_bilinear", [=](Rng& rng, double h) {
                     const std::size_t th = 1 + rng.below(8), tw = 1 + rng.below(8);
                     return op_gradient_error<T>([th, tw](const V& in) { return resize_bilinear(in[0], th, tw); },
                                                 {rt(random_shape(rng, 4, 1, 5), rng)}, rng, h);
                   }});
  cases.push_back({"reshape", [=](Rng& rng, double h) {
                     const auto s = random_shape(rng, 3, 1, 4);
                     return op_gradient_error<T>([s](const V& in) { return reshape(in[0], {s[0] * s[1], s[2]}); },
                                                 {rt(s, rng)}, rng, h);
                   }});
  cases.push_back({"permute", [=](Rng& rng, double h) {
                     std::vector<std::size_t> order{0, 1, 2, 3};
                     for (std::size_t i = 3; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
                     return op_gradient_error<T>([order](const V& in) { return permute(in[0], order); },
                                                 {rt(random_shape(rng, 4, 1, 3), rng)}, rng, h);
                   }});
  cases.push_back({"concat", [=](Rng& rng, double h) {
                     const std::size_t axis = rng.below(3);
                     auto a = random_shape(rng, 3, 1, 3);
                     auto b = a;
                     b[axis] = 1 + rng.below(3);
                     return op_gradient_error<T>([axis](const V& in) { return concat(in, axis); },
                                                 {rt(a, rng), rt(b, rng)}, rng, h);
                   }});
  cases.push_back({"slice", [=](Rng& rng, double h) {
                     const auto s = random_shape(rng, 3, 2, 5);
                     const std::size_t axis = rng.below(3);
                     const std::size_t start = rng.below(s[axis]);
                     const std::size_t len = 1 + rng.below(s[axis] - start);
                     return op_gradient_error<T>([=](const V& in) { return slice(in[0], axis, start, len); },
                                                 {rt(s, rng)}, rng, h);
                   }});
  cases.push_back({"l1_loss", [=](Rng& rng, double h) {
                     const auto s = random_shape(rng, 2, 1, 5);
                     auto target = rt(s, rng);
                     auto pred = add(target, random_away_from_zero<T>(s, rng, 0.05));
                     std::vector<std::uint8_t> mask(pred.size());
                     for (auto& m : mask) m = rng.below(4) != 0;
                     mask[0] = 1;
                     return op_gradient_error<T>([target, mask](const V& in) { return l1_loss(in[0], target, mask); },
                                                 {pred}, rng, h);
                   }});
  return cases;
}

template <typename T>
void check_all_gradients(double step, double tolerance) {
  Rng rng(2024);
  for (const auto& c : gradient_cases<T>()) {
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) worst = std::max(worst, c.run(rng, step));
    EXPECT_LT(worst, tolerance) << c.name;
  }
}

TEST(Gradients, DoublePrecisionAgreesWithFiniteDifferences) { check_all_gradients<double>(1e-3, 1e-5); }

TEST(Gradients, SinglePrecisionAgreesWithFiniteDifferences) { check_all_gradients<float>(1e-2, 1e-3); }

// BerHu's threshold is held constant in the backward pass, so its gradient is
// compared with the closed-form piecewise slope.
TEST(Gradients, BerhuSlopeMatchesClosedForm) {
  auto pred = make({4}, {0.0, 1.0, 3.0, -2.0});
  auto target = make({4}, {0.05, 0.9, 1.0, 0.0});
  const std::vector<std::uint8_t> mask{1, 1, 1, 0};
  pred.set_requires_grad(true);
  auto loss = berhu_loss(pred, target, mask);
  // errors -0.05, 0.1, 2.0 ; c = 0.2 * 2.0 = 0.4
  const double c = 0.4;
  EXPECT_NEAR(loss.item(), (0.05 + 0.1 + (4.0 + c * c) / (2 * c)) / 3.0, 1e-12);
  backward(loss);
  auto g = pred.grad();
  EXPECT_NEAR(g[0], -1.0 / 3.0, 1e-12);
  EXPECT_NEAR(g[1], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(g[2], 2.0 / c / 3.0, 1e-12);
  EXPECT_EQ(g[3], 0.0);
}

TEST(Losses, RejectEmptyMask) {
  auto p = Tensor<float>::ones({3});
  EXPECT_THROW(berhu_loss(p, p, {0, 0, 0}), ContractError);
  EXPECT_THROW(l1_loss(p, p, {0, 0, 0}), ContractError);
  EXPECT_THROW(l1_loss(p, p, {1, 1}), DimensionError);
}

TEST(Determinism, RepeatedKernelsAreBitIdentical) {
  Rng rng(9);
  auto x = random_tensor<float>({2, 4, 9, 7}, rng);
  auto w = random_tensor<float>({6, 2, 3, 3}, rng);
  const Conv2dOptions opt{.stride = 2, .padding = 1, .groups = 2};
  auto a = softmax(instance_norm(conv2d<float>(x, w, nullptr, opt)), 3);
  auto b = softmax(instance_norm(conv2d<float>(x, w, nullptr, opt)), 3);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
}

TEST(Adam, ZeroGradientLeavesParameterUnchanged) {
  std::vector<Tensor<double>> params{make({3}, {1, -2, 3})};
  std::vector<Tensor<double>> grads{Tensor<double>::zeros({3})};
  auto state = AdamState<double>::for_parameters(params, {});
  adam_step<double>(params, grads, state);
  EXPECT_EQ(params[0][0], 1.0);
  EXPECT_EQ(params[0][1], -2.0);
  EXPECT_EQ(params[0][2], 3.0);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  std::vector<Tensor<double>> params{make({3}, {0, 0, 0})};
  std::vector<Tensor<double>> grads{make({3}, {0.3, -5.0, 1e-3})};
  AdamOptions opt;
  opt.learning_rate = 1e-2;
  auto state = AdamState<double>::for_parameters(params, opt);
  adam_step<double>(params, grads, state);
  // m_hat = g, v_hat = g^2 -> update = lr * g / (|g| + eps)
  for (std::size_t i = 0; i < 3; ++i) {
    const double g = grads[0][i];
    EXPECT_NEAR(params[0][i], -opt.learning_rate * g / (std::abs(g) + opt.eps), 1e-15);
    EXPECT_NEAR(std::abs(params[0][i]), opt.learning_rate, 1e-7);
  }
}

TEST(Adam, ConstantGradientDriftsMonotonically) {
  std::vector<Tensor<double>> params{make({2}, {0, 0})};
  std::vector<Tensor<double>> grads{make({2}, {0.5, -0.5})};
  auto state = AdamState<double>::for_parameters(params, {});
  double prev0 = 0, prev1 = 0;
  for (int step = 0; step < 50; ++step) {
    adam_step<double>(params, grads, state);
    EXPECT_LT(params[0][0], prev0);
    EXPECT_GT(params[0][1], prev1);
    prev0 = params[0][0];
    prev1 = params[0][1];
  }
  EXPECT_EQ(state.step, 50);
  ASSERT_EQ(state.first_moment.size(), 1u);
  EXPECT_EQ(state.first_moment[0].size(), 2u);
}

TEST(Adam, ShapeMismatchIsRejected) {
  std::vector<Tensor<double>> params{make({2}, {0, 0})};
  std::vector<Tensor<double>> grads{make({3}, {1, 1, 1})};
  auto state = AdamState<double>::for_parameters(params, {});
  EXPECT_THROW(adam_step<double>(params, grads, state), DimensionError);
}

}  // namespace
}  // namespace panodepth
