#pragma once

#include <map>
#include <optional>
#include <string>

#include "panodepth/backbone.hpp"
#include "panodepth/config.hpp"
#include "panodepth/depth_head.hpp"
#include "panodepth/srb.hpp"
#include "panodepth/tokenizer.hpp"
#include "panodepth/transformer.hpp"

namespace panodepth {

template <typename T>
struct ForwardResult {
  Tensor<T> depth;      // [B,1,H,W]; equals raw_depth when the CAL is disabled
  Tensor<T> raw_depth;  // [B,1,H,W]
  FeaturePyramid<T> pyramid;
  Tensor<T> tokens;  // decoder-side tokens fed to the raw head
  TokenGrid grid;
};

// Trace of token-sequence shapes through the transformer stages.
struct SequenceShape {
  std::string stage;
  std::size_t length = 0;
  std::size_t width = 0;
};

template <typename T>
class DepthModel : public Module<T> {
 public:
  DepthModel(const ModelConfig& cfg, std::uint64_t seed);

  // image [B,3,H,W] with H,W the configured resolution.
  ForwardResult<T> forward(const Tensor<T>& image, AttentionTrace<T>* trace = nullptr,
                           std::vector<SequenceShape>* shapes = nullptr) const;
  Tensor<T> operator()(const Tensor<T>& image) const { return forward(image).depth; }

  void collect(const std::string& prefix, ParameterList<T>& out) const override;
  // Parameter counts keyed by top-level group (backbone, tokenizer, encoder, ...).
  std::map<std::string, std::size_t> parameter_groups() const;

  const ModelConfig& config() const { return cfg_; }

  Backbone<T> backbone;
  Tokenizer<T> tokenizer;
  std::vector<EncoderBlock<T>> encoder;
  std::optional<SpatialResidualBlock<T>> srb_encoder;
  std::vector<DecoderBlock<T>> decoder;
  std::optional<SpatialResidualBlock<T>> srb_decoder;
  RawDepthHead<T> raw_head;
  std::optional<ContextAdjustment<T>> cal;

 private:
  ModelConfig cfg_;
};

// Group name of a dotted parameter path ("encoder.0.ffn..." -> "encoder").
std::string parameter_group(const std::string& name);

}  // namespace panodepth
