#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "panodepth/config.hpp"
#include "panodepth/data.hpp"
#include "panodepth/metrics.hpp"
#include "panodepth/model.hpp"
#include "panodepth/optim.hpp"

namespace panodepth {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Self-describing binary: magic, version, RunConfig JSON, named parameters,
// Adam moments.
void save_checkpoint(const std::string& path, const RunConfig& cfg, const DepthModel<float>& model,
                     const AdamState<float>& adam);

struct LoadedCheckpoint {
  RunConfig config;
  std::unique_ptr<DepthModel<float>> model;
  AdamState<float> adam;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// [B,3,H,W] images, [B,1,H,W] depths and the flattened validity mask.
struct Batch {
  Tensor<float> images;
  Tensor<float> depths;
  ValidMask mask;
  std::vector<std::string> ids;
};
Batch make_batch(const std::vector<const ImageSample*>& samples);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0;
  // Metrics of the predictions made while training this epoch.
  DepthMetrics train_metrics;
};

struct TrainResult {
  std::unique_ptr<DepthModel<float>> model;
  AdamState<float> adam;
  std::vector<double> step_losses;
  std::vector<EpochLog> epochs;
};

struct TrainOptions {
  bool write_outputs = true;  // checkpoint.bin and train_log.jsonl in output_dir
  bool quiet = false;
};

TrainResult train(const RunConfig& cfg, const TrainOptions& options = {});
// Same as train() but over already-loaded samples.
TrainResult train_on(const RunConfig& cfg, const std::vector<ImageSample>& samples, const TrainOptions& options = {});

std::vector<ImageSample> load_split(const DatasetManifest& manifest, const std::string& split, std::size_t height,
                                    std::size_t width);

using DepthPredictor = std::function<std::vector<float>(const ImageSample&)>;

// Per-image (optionally aligned) depth + edge metrics and their mean.
MetricReport evaluate_predictions(const std::vector<ImageSample>& samples, const DepthPredictor& predict, bool align);
MetricReport evaluate_model(const DepthModel<float>& model, const std::vector<ImageSample>& samples, bool align);
std::vector<float> predict_depth(const DepthModel<float>& model, const Tensor<float>& rgb);

struct PredictOutputs {
  std::string pfm;
  std::string png16;
  std::string sidecar;
  std::string color;
  double png_scale = 0;  // meters per PNG unit
};
PredictOutputs predict_to_files(const DepthModel<float>& model, const std::string& image_path,
                                const std::string& out_dir);

struct AblationRow {
  std::string name;
  bool use_srb = true;
  bool use_sca = true;
  bool use_stp = true;
  std::size_t parameters = 0;
  DepthMetrics metrics;
  double seconds = 0;
  std::string failure;  // empty on success
};

struct AblationReport {
  std::vector<AblationRow> rows;
  // Ordering checks; each entry names a violated expectation.
  std::vector<std::string> ordering_violations;
  nlohmann::json json() const;
  std::string csv() const;
};

// The six toggle combinations of the module ablation table.
std::vector<AblationRow> ablation_configurations();
// Parameter counts only (no training), for every configuration.
AblationReport ablation_parameter_counts(const ModelConfig& base);
AblationReport ablate(const RunConfig& base, const std::string& eval_split, bool train_rows);

// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor), so
// gradients that are exactly zero are compared in absolute terms.
inline constexpr double kGradcheckFloor = 1e-3;

struct GradcheckOptions {
  double tolerance = 1e-5;
  double step = 1e-3;  // initial step of the extrapolation tableau
  std::size_t samples_per_tensor = 4;
  std::uint64_t seed = 7;
  // Scales this parameter's analytic gradient by 1.5 (fault injection).
  std::string corrupt_parameter;
};

struct GradcheckEntry {
  std::string parameter;
  std::size_t checked = 0;
  double max_rel_error = 0;
};

struct GradcheckReport {
  std::string block;
  double max_rel_error = 0;
  std::string worst_parameter;
  bool passed = false;
  double seconds = 0;
  double tolerance = 0;
  std::vector<GradcheckEntry> entries;
};

const std::vector<std::string>& gradcheck_blocks();
GradcheckReport gradcheck(const std::string& block, const GradcheckOptions& options = {});

}  // namespace panodepth
