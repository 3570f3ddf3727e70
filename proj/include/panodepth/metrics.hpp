#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace panodepth {

// One byte per pixel; nonzero = pixel participates.
using ValidMask = std::vector<std::uint8_t>;

struct DepthMetrics {
  double abs_rel = 0;
  double sq_rel = 0;
  double rmse = 0;
  double rmse_log = 0;
  double delta1 = 0;
  double delta2 = 0;
  double delta3 = 0;
};

struct EdgeScore {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  bool pred_empty = false;  // precision defined as 0
  bool gt_empty = false;    // recall defined as 0
};

inline const std::vector<double>& default_edge_thresholds() {
  static const std::vector<double> t{0.25, 0.5, 1.0};
  return t;
}

// median(gt over mask) / median(pred over mask).
template <typename T>
double median_scale(std::span<const T> pred, std::span<const T> gt, const ValidMask& mask);

// pred scaled by median_scale.
template <typename T>
std::vector<T> align_depth(std::span<const T> pred, std::span<const T> gt, const ValidMask& mask);

template <typename T>
DepthMetrics depth_metrics(std::span<const T> pred, std::span<const T> gt, const ValidMask& mask);

// 3x3 Sobel gradient magnitude, kernels scaled by 1/4 so a step of height s
// gives a response of s beside the step; borders replicate.
template <typename T>
std::vector<double> sobel_magnitude(std::span<const T> depth, std::size_t height, std::size_t width);

template <typename T>
std::vector<EdgeScore> edge_metrics(std::span<const T> pred, std::span<const T> gt, const ValidMask& mask,
                                    std::size_t height, std::size_t width,
                                    const std::vector<double>& thresholds = default_edge_thresholds());

DepthMetrics mean_metrics(const std::vector<DepthMetrics>& rows);

void to_json(nlohmann::json& j, const DepthMetrics& m);
void from_json(const nlohmann::json& j, DepthMetrics& m);
void to_json(nlohmann::json& j, const EdgeScore& e);

struct ImageReport {
  std::string id;
  DepthMetrics depth;
  std::vector<EdgeScore> edges;
};

// Per-image rows plus the mean aggregate.
struct MetricReport {
  std::vector<ImageReport> images;
  ImageReport aggregate() const;

  std::string csv() const;
  nlohmann::json json() const;
  void write(const std::string& csv_path, const std::string& json_path) const;
};

}  // namespace panodepth
