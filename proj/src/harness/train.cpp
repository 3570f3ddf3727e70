#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "panodepth/errors.hpp"
#include "panodepth/harness.hpp"

namespace panodepth {

namespace {

// Keeps metric logs defined when a prediction underflows to zero.
constexpr float kMinMetricDepth = 1e-6f;

DepthMetrics image_metrics(std::span<const float> pred, const ImageSample& s, bool align) {
  std::vector<float> p(pred.begin(), pred.end());
  for (auto& v : p) v = std::max(v, kMinMetricDepth);
  std::span<const float> gt(s.depth.values);
  if (align) p = align_depth<float>(p, gt, s.mask);
  return depth_metrics<float>(p, gt, s.mask);
}

}  // namespace

Batch make_batch(const std::vector<const ImageSample*>& samples) {
  if (samples.empty()) throw ContractError("make_batch: no samples");
  const std::size_t h = samples[0]->depth.height, w = samples[0]->depth.width, plane = h * w;
  Batch b;
  b.images = Tensor<float>({samples.size(), 3, h, w});
  b.depths = Tensor<float>({samples.size(), 1, h, w});
  b.mask.reserve(samples.size() * plane);
  auto img = b.images.data();
  auto dep = b.depths.data();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = *samples[i];
    if (s.depth.height != h || s.depth.width != w || s.rgb.size() != 3 * plane) {
      throw DimensionError("make_batch: sample " + s.id + " has a different resolution");
    }
    std::copy(s.rgb.data().begin(), s.rgb.data().end(), img.begin() + i * 3 * plane);
    std::copy(s.depth.values.begin(), s.depth.values.end(), dep.begin() + i * plane);
    b.mask.insert(b.mask.end(), s.mask.begin(), s.mask.end());
    b.ids.push_back(s.id);
  }
  return b;
}

std::vector<ImageSample> load_split(const DatasetManifest& manifest, const std::string& split, std::size_t height,
                                    std::size_t width) {
  std::vector<ImageSample> out;
  for (auto i : manifest.split_indices(split)) out.push_back(load_sample(manifest, i, height, width));
  return out;
}

TrainResult train(const RunConfig& cfg, const TrainOptions& options) {
  const auto manifest = read_manifest(cfg.manifest);
  auto samples = load_split(manifest, "train", cfg.model.height, cfg.model.width);
  if (samples.empty()) throw ManifestError(cfg.manifest + ": no train records");
  return train_on(cfg, samples, options);
}

TrainResult train_on(const RunConfig& cfg, const std::vector<ImageSample>& samples, const TrainOptions& options) {
  if (samples.empty()) throw ContractError("train: no samples");
  TrainResult result;
  result.model = std::make_unique<DepthModel<float>>(cfg.model, cfg.optim.seed);
  const auto named = result.model->parameters();
  std::vector<Tensor<float>> params;
  for (const auto& p : named) params.push_back(p.tensor);
  AdamOptions adam_options;
  adam_options.learning_rate = cfg.optim.learning_rate;
  result.adam = AdamState<float>::for_parameters(params, adam_options);

  const bool align = cfg.align == "median";
  const std::size_t max_steps = cfg.optim.max_steps;
  std::vector<std::size_t> items(samples.size());
  for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;

  std::ofstream log;
  if (options.write_outputs) {
    std::filesystem::create_directories(cfg.output_dir);
    log.open((std::filesystem::path(cfg.output_dir) / "train_log.jsonl").string());
    if (!log) throw IoError("cannot write training log in " + cfg.output_dir);
  }

  std::size_t step = 0;
  for (std::size_t epoch = 0; max_steps > 0 ? step < max_steps : epoch < cfg.optim.epochs; ++epoch) {
    double loss_total = 0;
    std::size_t loss_count = 0;
    std::vector<DepthMetrics> metrics;
    for (const auto& batch_idx : shuffled_batches(items, cfg.optim.batch_size, cfg.optim.seed, epoch)) {
      if (max_steps > 0 && step >= max_steps) break;
      std::vector<const ImageSample*> members;
      for (auto i : batch_idx) members.push_back(&samples[i]);
      const Batch batch = make_batch(members);

      for (auto& p : params) p.zero_grad();
      const auto depth = (*result.model)(batch.images);
      const auto loss = cfg.optim.loss == "l1" ? l1_loss(depth, batch.depths, batch.mask)
                                               : berhu_loss(depth, batch.depths, batch.mask);
      const double value = loss.item();
      if (!std::isfinite(value)) throw NumericError("non-finite loss at step " + std::to_string(step));
      backward(loss);
      std::vector<Tensor<float>> grads;
      for (const auto& p : params) grads.push_back(p.grad());
      {
        NoGradGuard no_grad;
        adam_step<float>(params, grads, result.adam);
      }
      result.step_losses.push_back(value);
      loss_total += value;
      ++loss_count;
      ++step;

      const std::size_t plane = batch.mask.size() / members.size();
      for (std::size_t i = 0; i < members.size(); ++i) {
        metrics.push_back(image_metrics(depth.data().subspan(i * plane, plane), *members[i], align));
      }
    }
    if (loss_count == 0) break;
    EpochLog entry{epoch, loss_total / static_cast<double>(loss_count), mean_metrics(metrics)};
    result.epochs.push_back(entry);
    if (log) {
      log << nlohmann::json{{"epoch", entry.epoch}, {"step", step}, {"mean_loss", entry.mean_loss},
                            {"train_metrics", entry.train_metrics}}
                 .dump()
          << '\n';
    }
    if (!options.quiet) {
      std::cerr << "epoch " << entry.epoch << " step " << step << " loss " << entry.mean_loss << " delta1 "
                << entry.train_metrics.delta1 << '\n';
    }
  }
  if (options.write_outputs) {
    save_checkpoint((std::filesystem::path(cfg.output_dir) / "checkpoint.bin").string(), cfg, *result.model,
                    result.adam);
  }
  return result;
}

std::vector<float> predict_depth(const DepthModel<float>& model, const Tensor<float>& rgb) {
  NoGradGuard no_grad;
  const auto input = reshape(rgb, {1, rgb.dim(0), rgb.dim(1), rgb.dim(2)});
  const auto depth = model(input);
  return {depth.data().begin(), depth.data().end()};
}

MetricReport evaluate_predictions(const std::vector<ImageSample>& samples, const DepthPredictor& predict,
                                  bool align) {
  if (samples.empty()) throw ManifestError("evaluate: split is empty");
  MetricReport report;
  for (const auto& s : samples) {
    auto pred = predict(s);
    if (pred.size() != s.depth.values.size()) throw DimensionError("evaluate: prediction size mismatch for " + s.id);
    for (auto& v : pred) v = std::max(v, kMinMetricDepth);
    std::span<const float> gt(s.depth.values);
    if (align) pred = align_depth<float>(pred, gt, s.mask);
    report.images.push_back({s.id, depth_metrics<float>(pred, gt, s.mask),
                             edge_metrics<float>(pred, gt, s.mask, s.depth.height, s.depth.width)});
  }
  return report;
}

MetricReport evaluate_model(const DepthModel<float>& model, const std::vector<ImageSample>& samples, bool align) {
  return evaluate_predictions(
      samples, [&](const ImageSample& s) { return predict_depth(model, s.rgb); }, align);
}

}  // namespace panodepth
