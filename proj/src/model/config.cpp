#include "panodepth/config.hpp"

#include "panodepth/errors.hpp"

namespace panodepth {

using nlohmann::json;

void BackboneConfig::validate() const {
  for (std::size_t k = 0; k < 4; ++k) {
    if (strides[k] != 1 && strides[k] != 2) {
      throw ConfigError("backbone stride " + std::to_string(k + 1) + " must be 1 or 2, got " +
                        std::to_string(strides[k]));
    }
    if (channels[k] == 0) throw ConfigError("backbone channel width must be positive");
  }
  if (growth == 0 || hnet_layers == 0) throw ConfigError("HNet growth rate and layer count must be positive");
}

void TransformerConfig::validate() const {
  if (d_model == 0 || d_model % 2 != 0) {
    throw ConfigError("d_model must be positive and even (sinusoidal encoding), got " + std::to_string(d_model));
  }
  if (d_k == 0) throw ConfigError("d_k must be positive");
  if (ffn_ratio == 0) throw ConfigError("ffn_ratio must be positive");
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("heads (" + std::to_string(heads) + ") must divide d_model (" + std::to_string(d_model) + ")");
  }
  if (encoder_blocks == 0 || decoder_blocks == 0) throw ConfigError("block counts must be positive");
  if (stp_window == 0 || stp_window % 2 == 0) throw ConfigError("stp_window must be odd");
}

std::size_t ModelConfig::resolution_divisor() const {
  return backbone.stride_product() * patch * (srb.enabled ? 4 : 1);
}

void ModelConfig::validate() const {
  backbone.validate();
  transformer.validate();
  if (patch == 0) throw ConfigError("patch size must be positive");
  if (head.raw_patch == 0) throw ConfigError("raw_patch must be positive");
  if (head.d_max <= 0.0) throw ConfigError("d_max must be positive");
  if (srb.enabled && (srb.conv_filters == 0 || srb.conv_filters % 2 != 0)) {
    throw ConfigError("srb.conv_filters must be positive and even");
  }
  const std::size_t div = resolution_divisor();
  if (height == 0 || width == 0 || height % div != 0 || width % div != 0) {
    throw ConfigError("resolution " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by " + std::to_string(div) +
                      " (stride product x patch x SRB halvings)");
  }
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.height = 128;
  c.width = 256;
  c.patch = 2;
  c.backbone.channels = {8, 16, 24, 32};
  c.backbone.strides = {2, 2, 2, 2};
  c.backbone.growth = 8;
  c.transformer.d_model = 32;
  c.transformer.d_k = 24;
  c.srb.conv_filters = 8;
  c.head.raw_patch = 8;
  c.head.cal_channels = 8;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.height = 8;
  c.width = 16;
  c.patch = 1;
  c.backbone.channels = {4, 4, 6, 8};
  c.backbone.strides = {1, 1, 1, 2};
  c.backbone.growth = 4;
  c.backbone.hnet_layers = 2;
  c.transformer.d_model = 16;
  c.transformer.d_k = 12;
  c.srb.conv_filters = 4;
  c.head.raw_patch = 2;
  c.head.pyramid_channels = 2;
  c.head.cal_channels = 4;
  return c;
}

namespace {

std::string embedding_name(EmbeddingMode m) { return m == EmbeddingMode::Add ? "add" : "concat_project"; }

EmbeddingMode embedding_from(const std::string& s) {
  if (s == "add") return EmbeddingMode::Add;
  if (s == "concat_project") return EmbeddingMode::ConcatProject;
  throw ConfigError("unknown embedding mode '" + s + "' (expected add or concat_project)");
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void to_json(json& j, const BackboneConfig& c) {
  j = json{{"channels", c.channels}, {"strides", c.strides}, {"growth", c.growth}, {"hnet_layers", c.hnet_layers}};
}
void from_json(const json& j, BackboneConfig& c) {
  read(j, "channels", c.channels);
  read(j, "strides", c.strides);
  read(j, "growth", c.growth);
  read(j, "hnet_layers", c.hnet_layers);
}

void to_json(json& j, const TransformerConfig& c) {
  j = json{{"d_model", c.d_model},
           {"d_k", c.d_k},
           {"heads", c.heads},
           {"ffn_ratio", c.ffn_ratio},
           {"encoder_blocks", c.encoder_blocks},
           {"decoder_blocks", c.decoder_blocks},
           {"use_sca", c.use_sca},
           {"use_stp", c.use_stp},
           {"stp_window", c.stp_window},
           {"embedding", embedding_name(c.embedding)}};
}
void from_json(const json& j, TransformerConfig& c) {
  read(j, "d_model", c.d_model);
  read(j, "d_k", c.d_k);
  read(j, "heads", c.heads);
  read(j, "ffn_ratio", c.ffn_ratio);
  read(j, "encoder_blocks", c.encoder_blocks);
  read(j, "decoder_blocks", c.decoder_blocks);
  read(j, "use_sca", c.use_sca);
  read(j, "use_stp", c.use_stp);
  read(j, "stp_window", c.stp_window);
  if (j.contains("embedding")) c.embedding = embedding_from(j.at("embedding").get<std::string>());
}

void to_json(json& j, const SrbConfig& c) { j = json{{"enabled", c.enabled}, {"conv_filters", c.conv_filters}}; }
void from_json(const json& j, SrbConfig& c) {
  read(j, "enabled", c.enabled);
  read(j, "conv_filters", c.conv_filters);
}

void to_json(json& j, const HeadConfig& c) {
  j = json{{"raw_patch", c.raw_patch},
           {"pyramid_channels", c.pyramid_channels},
           {"cal_channels", c.cal_channels},
           {"d_max", c.d_max},
           {"use_cal", c.use_cal}};
}
void from_json(const json& j, HeadConfig& c) {
  read(j, "raw_patch", c.raw_patch);
  read(j, "pyramid_channels", c.pyramid_channels);
  read(j, "cal_channels", c.cal_channels);
  read(j, "d_max", c.d_max);
  read(j, "use_cal", c.use_cal);
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"height", c.height}, {"width", c.width},         {"patch", c.patch}, {"backbone", c.backbone},
           {"transformer", c.transformer}, {"srb", c.srb}, {"head", c.head}};
}
void from_json(const json& j, ModelConfig& c) {
  read(j, "height", c.height);
  read(j, "width", c.width);
  read(j, "patch", c.patch);
  read(j, "backbone", c.backbone);
  read(j, "transformer", c.transformer);
  read(j, "srb", c.srb);
  read(j, "head", c.head);
}

void to_json(json& j, const OptimConfig& c) {
  j = json{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"epochs", c.epochs},
           {"max_steps", c.max_steps},         {"seed", c.seed},             {"loss", c.loss}};
}
void from_json(const json& j, OptimConfig& c) {
  read(j, "learning_rate", c.learning_rate);
  read(j, "batch_size", c.batch_size);
  read(j, "epochs", c.epochs);
  read(j, "max_steps", c.max_steps);
  read(j, "seed", c.seed);
  read(j, "loss", c.loss);
  if (c.loss != "berhu" && c.loss != "l1") throw ConfigError("loss must be berhu or l1, got '" + c.loss + "'");
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"model", c.model},
           {"optim", c.optim},
           {"manifest", c.manifest},
           {"output_dir", c.output_dir},
           {"align", c.align}};
}
void from_json(const json& j, RunConfig& c) {
  read(j, "model", c.model);
  read(j, "optim", c.optim);
  read(j, "manifest", c.manifest);
  read(j, "output_dir", c.output_dir);
  read(j, "align", c.align);
  if (c.align != "median" && c.align != "none") throw ConfigError("align must be median or none");
}

void apply_override(json& doc, const std::string& dotted_key, const std::string& value) {
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + dotted_key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;
  if (node->is_string() && !parsed.is_string()) parsed = value;
  *node = std::move(parsed);
}

}  // namespace panodepth
