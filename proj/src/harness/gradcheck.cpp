#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "panodepth/errors.hpp"
#include "panodepth/harness.hpp"

namespace panodepth {

namespace {

using Fn = std::function<Tensor<double>()>;

struct Probe {
  ParameterList<double> params;
  Fn loss;
};

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  t.set_requires_grad(true);
  return t;
}

// Moves every parameter off its initial value so biases and norm affines are
// checked at a generic point.
void jitter(const ParameterList<double>& params, Rng& rng) {
  for (const auto& p : params) {
    auto t = p.tensor;
    for (auto& v : t.data()) v += rng.uniform(-0.1, 0.1);
  }
}

// Scalar objective sum(out * R) with a fixed random R.
Fn weighted_sum(std::function<Tensor<double>()> forward, Rng& rng) {
  Tensor<double> probe = forward();
  Tensor<double> weights(probe.shape());
  for (auto& v : weights.data()) v = rng.uniform(-1.0, 1.0);
  return [forward, weights] { return sum(mul(forward(), weights)); };
}

// Ridders' extrapolation: central differences at steps h, h/2, h/4, ...
// refined by a Neville tableau. Each entry's error is the tableau
// disagreement plus a roundoff bound eps*|f|/step; the estimate with the
// smallest total is returned.
double ridders_derivative(const std::function<double(double)>& f, double h) {
  constexpr int kTable = 16;
  constexpr double kShrink = 2.0, kShrink2 = kShrink * kShrink;
  constexpr double kRoundoff = 100 * std::numeric_limits<double>::epsilon();
  double a[kTable][kTable];
  double scale = 0;
  auto central = [&](double step) {
    const double plus = f(step), minus = f(-step);
    scale = std::max({scale, std::abs(plus), std::abs(minus)});
    return (plus - minus) / (2 * step);
  };
  a[0][0] = central(h);
  double best = a[0][0], best_error = std::numeric_limits<double>::infinity();
  for (int i = 1; i < kTable; ++i) {
    h /= kShrink;
    a[0][i] = central(h);
    const double noise = kRoundoff * scale / h;
    double factor = kShrink2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * factor - a[j - 1][i - 1]) / (factor - 1);
      factor *= kShrink2;
      const double error =
          std::max(std::abs(a[j][i] - a[j - 1][i]), std::abs(a[j][i] - a[j - 1][i - 1])) + noise;
      if (error <= best_error) {
        best_error = error;
        best = a[j][i];
      }
    }
  }
  return best;
}

Probe make_probe(const std::string& block, Rng& rng) {
  Probe probe;
  if (block == "hnet") {
    auto net = std::make_shared<HNetBlock<double>>(4, 6, 3, 8, rng);
    auto x = random_tensor({1, 4, 6, 6}, rng);
    probe.params = net->parameters();
    jitter(probe.params, rng);
    probe.params.push_back({"input", x});
    probe.loss = weighted_sum([net, x] { return (*net)(x); }, rng);
  } else if (block == "encoder" || block == "decoder") {
    TransformerConfig tc;
    tc.d_model = 8;
    tc.d_k = 6;
    if (block == "encoder") {
      auto enc = std::make_shared<EncoderBlock<double>>(8, tc, rng);
      auto x = random_tensor({1, 2, 8}, rng);
      auto pos = positional_encoding<double>(2, 8);
      probe.params = enc->parameters();
      jitter(probe.params, rng);
      probe.params.push_back({"input", x});
      probe.loss = weighted_sum([enc, x, pos] { return (*enc)(x, pos); }, rng);
    } else {
      // Two frames so the temporal stage of STP is exercised too.
      auto dec = std::make_shared<DecoderBlock<double>>(8, tc, rng);
      auto x = random_tensor({1, 2, 2, 8}, rng);
      auto pos = positional_encoding<double>(2, 8);
      probe.params = dec->parameters();
      jitter(probe.params, rng);
      probe.params.push_back({"input", x});
      probe.loss = weighted_sum([dec, x, pos] { return (*dec)(x, pos, TokenGrid{1, 2}); }, rng);
    }
  } else if (block == "srb") {
    auto srb = std::make_shared<SpatialResidualBlock<double>>(4, 2, rng);
    auto x = random_tensor({1, 16, 4}, rng);
    probe.params = srb->parameters();
    jitter(probe.params, rng);
    probe.params.push_back({"input", x});
    probe.loss = weighted_sum([srb, x] { return (*srb)(x, TokenGrid{4, 4}); }, rng);
  } else if (block == "cal") {
    HeadConfig head;
    head.pyramid_channels = 2;
    head.cal_channels = 3;
    auto cal = std::make_shared<ContextAdjustment<double>>(std::array<std::size_t, 4>{3, 3, 3, 3}, head, rng);
    FeaturePyramid<double> pyramid;
    const std::size_t sizes[4] = {8, 4, 2, 2};
    for (std::size_t k = 0; k < 4; ++k) pyramid.levels[k] = random_tensor({1, 3, sizes[k], sizes[k]}, rng);
    auto raw = random_tensor({1, 1, 8, 8}, rng, 0.5, 5.0);
    probe.params = cal->parameters();
    jitter(probe.params, rng);
    for (std::size_t k = 0; k < 4; ++k) probe.params.push_back({"fm" + std::to_string(k + 1), pyramid.levels[k]});
    probe.params.push_back({"raw_depth", raw});
    probe.loss = weighted_sum([cal, pyramid, raw] { return (*cal)(pyramid, raw); }, rng);
  } else if (block == "end2end-tiny") {
    auto model = std::make_shared<DepthModel<double>>(ModelConfig::tiny(), rng.next());
    auto x = random_tensor({1, 3, 8, 16}, rng, 0.0, 1.0);
    probe.params = model->parameters();
    jitter(probe.params, rng);
    probe.params.push_back({"input", x});
    probe.loss = weighted_sum([model, x] { return (*model)(x); }, rng);
  } else {
    throw ConfigError("gradcheck: unknown block '" + block + "'");
  }
  return probe;
}

}  // namespace

const std::vector<std::string>& gradcheck_blocks() {
  static const std::vector<std::string> blocks{"hnet", "encoder", "decoder", "srb", "cal", "end2end-tiny"};
  return blocks;
}

GradcheckReport gradcheck(const std::string& block, const GradcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(options.seed);
  Probe probe = make_probe(block, rng);

  for (auto& p : probe.params) p.tensor.zero_grad();
  backward(probe.loss());

  auto evaluate = [&] {
    NoGradGuard no_grad;
    const double v = probe.loss().item();
    if (!std::isfinite(v)) throw NumericError("gradcheck: non-finite objective in block " + block);
    return v;
  };
  auto numeric = [&](Tensor<double>& t, std::size_t i) {
    auto data = t.data();
    const double saved = data[i];
    const double d = ridders_derivative(
        [&](double offset) {
          data[i] = saved + offset;
          return evaluate();
        },
        options.step);
    data[i] = saved;
    return d;
  };

  GradcheckReport report;
  report.block = block;
  report.tolerance = options.tolerance;
  for (auto& p : probe.params) {
    const auto analytic = p.tensor.grad();
    GradcheckEntry entry;
    entry.parameter = p.name;
    std::vector<std::size_t> indices(p.tensor.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    if (indices.size() > options.samples_per_tensor) {
      for (std::size_t i = 0; i < options.samples_per_tensor; ++i) {
        std::swap(indices[i], indices[i + rng.below(indices.size() - i)]);
      }
      indices.resize(options.samples_per_tensor);
    }
    const double corruption = p.name == options.corrupt_parameter ? 1.5 : 1.0;
    for (auto i : indices) {
      const double a = analytic[i] * corruption;
      const double n = numeric(p.tensor, i);
      const double denom = std::max({std::abs(a), std::abs(n), kGradcheckFloor});
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(a - n) / denom);
      ++entry.checked;
    }
    if (entry.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_parameter = entry.parameter;
    }
    report.entries.push_back(entry);
  }
  report.passed = report.max_rel_error < options.tolerance;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace panodepth
