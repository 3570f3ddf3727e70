#include "panodepth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "panodepth/errors.hpp"

namespace panodepth {

namespace {

template <typename T>
void check_sizes(std::span<const T> pred, std::span<const T> gt, const ValidMask& mask, const char* who) {
  if (pred.size() != gt.size() || gt.size() != mask.size()) {
    throw DimensionError(std::string(who) + ": pred " + std::to_string(pred.size()) + ", gt " +
                         std::to_string(gt.size()) + ", mask " + std::to_string(mask.size()) + " elements");
  }
}

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  return m;
}

}  // namespace

template <typename T>
double median_scale(std::span<const T> pred, std::span<const T> gt, const ValidMask& mask) {
  check_sizes(pred, gt, mask, "align_depth");
  std::vector<double> p, g;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    p.push_back(pred[i]);
    g.push_back(gt[i]);
  }
  if (p.empty()) throw AlignmentError("align_depth: no valid pixels");
  const double mp = median_of(std::move(p));
  const double mg = median_of(std::move(g));
  if (mp == 0.0 || !std::isfinite(mp)) throw AlignmentError("align_depth: median of prediction is zero");
  if (mg <= 0.0) throw AlignmentError("align_depth: median of ground truth is not positive");
  return mg / mp;
}

template <typename T>
std::vector<T> align_depth(std::span<const T> pred, std::span<const T> gt, const ValidMask& mask) {
  const double s = median_scale(pred, gt, mask);
  std::vector<T> out(pred.size());
  std::transform(pred.begin(), pred.end(), out.begin(), [s](T v) { return static_cast<T>(v * s); });
  return out;
}

template <typename T>
DepthMetrics depth_metrics(std::span<const T> pred, std::span<const T> gt, const ValidMask& mask) {
  check_sizes(pred, gt, mask, "depth_metrics");
  std::vector<double> p, g;
  p.reserve(mask.size());
  g.reserve(mask.size());
  std::size_t bad = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    if (!(gt[i] > 0) || !(pred[i] > 0)) ++bad;
    p.push_back(pred[i]);
    g.push_back(gt[i]);
  }
  if (p.empty()) throw MetricError("depth_metrics: no valid pixels");
  if (bad > 0) {
    throw MetricError("depth_metrics: " + std::to_string(bad) + " valid pixel(s) have nonpositive depth");
  }
  const double n = static_cast<double>(p.size());
  std::vector<double> diff(p.size()), log_diff(p.size()), ratio(p.size());
  std::transform(p.begin(), p.end(), g.begin(), diff.begin(), std::minus<>());
  std::transform(p.begin(), p.end(), g.begin(), log_diff.begin(),
                 [](double a, double b) { return std::log(a) - std::log(b); });
  std::transform(p.begin(), p.end(), g.begin(), ratio.begin(), [](double a, double b) { return std::max(a / b, b / a); });

  DepthMetrics m;
  m.abs_rel = std::transform_reduce(diff.begin(), diff.end(), g.begin(), 0.0, std::plus<>(),
                                    [](double d, double b) { return std::abs(d) / b; }) / n;
  m.sq_rel = std::transform_reduce(diff.begin(), diff.end(), g.begin(), 0.0, std::plus<>(),
                                   [](double d, double b) { return d * d / b; }) / n;
  m.rmse = std::sqrt(std::inner_product(diff.begin(), diff.end(), diff.begin(), 0.0) / n);
  m.rmse_log = std::sqrt(std::inner_product(log_diff.begin(), log_diff.end(), log_diff.begin(), 0.0) / n);
  const double t1 = 1.25, t2 = t1 * t1, t3 = t2 * t1;
  auto frac_below = [&](double t) {
    return static_cast<double>(std::count_if(ratio.begin(), ratio.end(), [t](double r) { return r < t; })) / n;
  };
  m.delta1 = frac_below(t1);
  m.delta2 = frac_below(t2);
  m.delta3 = frac_below(t3);
  return m;
}

template <typename T>
std::vector<double> sobel_magnitude(std::span<const T> depth, std::size_t height, std::size_t width) {
  if (depth.size() != height * width) throw DimensionError("sobel_magnitude: size does not match extent");
  auto at = [&](long y, long x) {
    y = std::clamp<long>(y, 0, static_cast<long>(height) - 1);
    x = std::clamp<long>(x, 0, static_cast<long>(width) - 1);
    return static_cast<double>(depth[y * width + x]);
  };
  std::vector<double> out(depth.size());
  for (long y = 0; y < static_cast<long>(height); ++y) {
    for (long x = 0; x < static_cast<long>(width); ++x) {
      const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
      const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
      out[y * width + x] = 0.25 * std::hypot(gx, gy);
    }
  }
  return out;
}

template <typename T>
std::vector<EdgeScore> edge_metrics(std::span<const T> pred, std::span<const T> gt, const ValidMask& mask,
                                    std::size_t height, std::size_t width, const std::vector<double>& thresholds) {
  check_sizes(pred, gt, mask, "edge_metrics");
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
    throw MetricError("edge_metrics: no valid pixels");
  }
  const auto pg = sobel_magnitude(pred, height, width);
  const auto gg = sobel_magnitude(gt, height, width);
  std::vector<EdgeScore> scores;
  for (double t : thresholds) {
    std::size_t np = 0, ng = 0, both = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const bool pe = pg[i] > t, ge = gg[i] > t;
      np += pe;
      ng += ge;
      both += pe && ge;
    }
    EdgeScore s;
    s.threshold = t;
    s.pred_empty = np == 0;
    s.gt_empty = ng == 0;
    s.precision = np ? static_cast<double>(both) / np : 0.0;
    s.recall = ng ? static_cast<double>(both) / ng : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    scores.push_back(s);
  }
  return scores;
}

DepthMetrics mean_metrics(const std::vector<DepthMetrics>& rows) {
  DepthMetrics m;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.abs_rel += r.abs_rel;
    m.sq_rel += r.sq_rel;
    m.rmse += r.rmse;
    m.rmse_log += r.rmse_log;
    m.delta1 += r.delta1;
    m.delta2 += r.delta2;
    m.delta3 += r.delta3;
  }
  const double n = static_cast<double>(rows.size());
  m.abs_rel /= n;
  m.sq_rel /= n;
  m.rmse /= n;
  m.rmse_log /= n;
  m.delta1 /= n;
  m.delta2 /= n;
  m.delta3 /= n;
  return m;
}

#define INSTANTIATE(T)                                                                                         \
  template double median_scale(std::span<const T>, std::span<const T>, const ValidMask&);                      \
  template std::vector<T> align_depth(std::span<const T>, std::span<const T>, const ValidMask&);               \
  template DepthMetrics depth_metrics(std::span<const T>, std::span<const T>, const ValidMask&);               \
  template std::vector<double> sobel_magnitude(std::span<const T>, std::size_t, std::size_t);                  \
  template std::vector<EdgeScore> edge_metrics(std::span<const T>, std::span<const T>, const ValidMask&,       \
                                               std::size_t, std::size_t, const std::vector<double>&);
INSTANTIATE(float)
INSTANTIATE(double)

}  // namespace panodepth
