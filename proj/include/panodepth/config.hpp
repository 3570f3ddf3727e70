#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "json.hpp"

namespace panodepth {

struct BackboneConfig {
  std::array<std::size_t, 4> channels{32, 64, 128, 256};
  std::array<std::size_t, 4> strides{1, 2, 2, 2};
  std::size_t growth = 16;
  std::size_t hnet_layers = 8;

  std::size_t stride_product() const { return strides[0] * strides[1] * strides[2] * strides[3]; }
  void validate() const;
};

enum class EmbeddingMode { Add, ConcatProject };

struct TransformerConfig {
  std::size_t d_model = 256;
  std::size_t d_k = 192;
  std::size_t heads = 1;
  // FFN hidden width = ffn_ratio * (width of the stage the FFN sits in).
  std::size_t ffn_ratio = 2;
  std::size_t encoder_blocks = 1;
  std::size_t decoder_blocks = 1;
  bool use_sca = true;
  bool use_stp = true;
  std::size_t stp_window = 3;
  EmbeddingMode embedding = EmbeddingMode::Add;

  void validate() const;
};

struct SrbConfig {
  bool enabled = true;
  std::size_t conv_filters = 32;
};

struct HeadConfig {
  std::size_t raw_patch = 8;
  std::size_t pyramid_channels = 8;
  std::size_t cal_channels = 16;
  double d_max = 10.0;
  bool use_cal = true;
};

struct ModelConfig {
  std::size_t height = 256;
  std::size_t width = 512;
  std::size_t patch = 8;
  BackboneConfig backbone;
  TransformerConfig transformer;
  SrbConfig srb;
  HeadConfig head;

  // Divisor both image extents must satisfy for the whole pipeline to tile.
  std::size_t resolution_divisor() const;
  void validate() const;

  // Paper-scale defaults at 256x512.
  static ModelConfig defaults() { return {}; }
  // Desk-scale configuration used by the toy training experiments (128x256).
  static ModelConfig desk();
  // Miniature instance for finite-difference checks (8x16, D=16, D_k=12).
  static ModelConfig tiny();
};

struct OptimConfig {
  double learning_rate = 3e-4;
  std::size_t batch_size = 4;
  std::size_t epochs = 55;
  // When nonzero, training stops after this many optimizer steps.
  std::size_t max_steps = 0;
  std::uint64_t seed = 0;
  std::string loss = "berhu";
};

struct RunConfig {
  ModelConfig model;
  OptimConfig optim;
  std::string manifest;
  std::string output_dir = "runs/default";
  std::string align = "median";
};

void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);
void to_json(nlohmann::json& j, const TransformerConfig& c);
void from_json(const nlohmann::json& j, TransformerConfig& c);
void to_json(nlohmann::json& j, const SrbConfig& c);
void from_json(const nlohmann::json& j, SrbConfig& c);
void to_json(nlohmann::json& j, const HeadConfig& c);
void from_json(const nlohmann::json& j, HeadConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const OptimConfig& c);
void from_json(const nlohmann::json& j, OptimConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// Applies "a.b.c" = value overrides onto a JSON document; the value text is
// parsed as JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& value);

}  // namespace panodepth
