#include <fstream>
#include <iomanip>
#include <sstream>

#include "panodepth/errors.hpp"
#include "panodepth/metrics.hpp"

namespace panodepth {

void to_json(nlohmann::json& j, const DepthMetrics& m) {
  j = nlohmann::json{{"abs_rel", m.abs_rel}, {"sq_rel", m.sq_rel}, {"rmse", m.rmse},    {"rmse_log", m.rmse_log},
                     {"delta1", m.delta1},   {"delta2", m.delta2}, {"delta3", m.delta3}};
}

void from_json(const nlohmann::json& j, DepthMetrics& m) {
  j.at("abs_rel").get_to(m.abs_rel);
  j.at("sq_rel").get_to(m.sq_rel);
  j.at("rmse").get_to(m.rmse);
  j.at("rmse_log").get_to(m.rmse_log);
  j.at("delta1").get_to(m.delta1);
  j.at("delta2").get_to(m.delta2);
  j.at("delta3").get_to(m.delta3);
}

void to_json(nlohmann::json& j, const EdgeScore& e) {
  j = nlohmann::json{{"threshold", e.threshold}, {"precision", e.precision},   {"recall", e.recall},
                     {"f1", e.f1},               {"pred_empty", e.pred_empty}, {"gt_empty", e.gt_empty}};
}

ImageReport MetricReport::aggregate() const {
  ImageReport agg;
  agg.id = "mean";
  std::vector<DepthMetrics> rows;
  for (const auto& r : images) rows.push_back(r.depth);
  agg.depth = mean_metrics(rows);
  if (!images.empty()) {
    agg.edges = images.front().edges;
    for (auto& e : agg.edges) {
      e.precision = e.recall = e.f1 = 0;
      e.pred_empty = e.gt_empty = false;
    }
    for (const auto& r : images) {
      for (std::size_t k = 0; k < agg.edges.size() && k < r.edges.size(); ++k) {
        agg.edges[k].precision += r.edges[k].precision / images.size();
        agg.edges[k].recall += r.edges[k].recall / images.size();
        agg.edges[k].f1 += r.edges[k].f1 / images.size();
      }
    }
  }
  return agg;
}

std::string MetricReport::csv() const {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "id,abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3";
  const auto& thresholds = images.empty() ? std::vector<EdgeScore>{} : images.front().edges;
  for (const auto& e : thresholds) {
    out << ",edge_precision@" << e.threshold << ",edge_recall@" << e.threshold << ",edge_f1@" << e.threshold;
  }
  out << '\n';
  auto row = [&](const ImageReport& r) {
    const auto& m = r.depth;
    out << r.id << ',' << m.abs_rel << ',' << m.sq_rel << ',' << m.rmse << ',' << m.rmse_log << ',' << m.delta1
        << ',' << m.delta2 << ',' << m.delta3;
    for (const auto& e : r.edges) out << ',' << e.precision << ',' << e.recall << ',' << e.f1;
    out << '\n';
  };
  for (const auto& r : images) row(r);
  row(aggregate());
  return out.str();
}

nlohmann::json MetricReport::json() const {
  nlohmann::json per_image = nlohmann::json::array();
  for (const auto& r : images) per_image.push_back({{"id", r.id}, {"metrics", r.depth}, {"edges", r.edges}});
  const auto agg = aggregate();
  return {{"count", images.size()}, {"aggregate", agg.depth}, {"aggregate_edges", agg.edges}, {"images", per_image}};
}

void MetricReport::write(const std::string& csv_path, const std::string& json_path) const {
  std::ofstream c(csv_path);
  if (!c) throw IoError("cannot write " + csv_path);
  c << csv();
  std::ofstream j(json_path);
  if (!j) throw IoError("cannot write " + json_path);
  j << json().dump(2) << '\n';
}

}  // namespace panodepth
