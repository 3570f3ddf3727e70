#include "panodepth/model.hpp"

#include "numeric/op_util.hpp"

namespace panodepth {

std::string parameter_group(const std::string& name) { return name.substr(0, name.find('.')); }

template <typename T>
DepthModel<T>::DepthModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const auto& tc = cfg.transformer;
  backbone = Backbone<T>(cfg.backbone, rng);
  tokenizer = Tokenizer<T>(cfg.backbone.channels[3], cfg.patch, tc.d_model, tc.embedding, rng);
  std::size_t width = tc.d_model;
  for (std::size_t i = 0; i < tc.encoder_blocks; ++i) encoder.emplace_back(width, tc, rng);
  if (cfg.srb.enabled) {
    srb_encoder.emplace(width, cfg.srb.conv_filters, rng);
    width *= 2;
  }
  for (std::size_t i = 0; i < tc.decoder_blocks; ++i) decoder.emplace_back(width, tc, rng);
  if (cfg.srb.enabled) {
    srb_decoder.emplace(width, cfg.srb.conv_filters, rng);
    width *= 2;
  }
  raw_head = RawDepthHead<T>(width, cfg.head.raw_patch, rng);
  if (cfg.head.use_cal) cal.emplace(cfg.backbone.channels, cfg.head, rng);
}

template <typename T>
ForwardResult<T> DepthModel<T>::forward(const Tensor<T>& image, AttentionTrace<T>* trace,
                                        std::vector<SequenceShape>* shapes) const {
  if (image.rank() != 4 || image.dim(1) != 3 || image.dim(2) != cfg_.height || image.dim(3) != cfg_.width) {
    throw DimensionError("model: expected [B,3," + std::to_string(cfg_.height) + "," + std::to_string(cfg_.width) +
                         "] input, got " + shape_str(image.shape()));
  }
  auto note = [&](const char* stage, const Tensor<T>& x) {
    if (shapes) shapes->push_back({stage, x.dim(1), x.dim(2)});
  };
  ForwardResult<T> result;
  result.pyramid = backbone(image);
  const auto& final_map = result.pyramid.final_feature();
  TokenGrid grid = tokenizer.grid_for(final_map.dim(2), final_map.dim(3));
  auto x = tokenizer(final_map);
  note("tokens", x);
  auto pos = positional_encoding<T>(x.dim(1), x.dim(2));
  for (const auto& block : encoder) x = block(x, pos, trace);
  note("encoder", x);
  if (srb_encoder) {
    x = (*srb_encoder)(x, grid);
    grid = SpatialResidualBlock<T>::output_grid(grid);
    pos = positional_encoding<T>(x.dim(1), x.dim(2));
    note("srb_encoder", x);
  }
  for (const auto& block : decoder) x = block(x, pos, grid, trace);
  note("decoder", x);
  if (srb_decoder) {
    x = (*srb_decoder)(x, grid);
    grid = SpatialResidualBlock<T>::output_grid(grid);
    note("srb_decoder", x);
  }
  result.tokens = x;
  result.grid = grid;
  result.raw_depth = raw_head(x, grid, cfg_.height, cfg_.width);
  result.depth = cal ? (*cal)(result.pyramid, result.raw_depth) : result.raw_depth;
  return result;
}

template <typename T>
void DepthModel<T>::collect(const std::string& prefix, ParameterList<T>& out) const {
  backbone.collect(join_name(prefix, "backbone"), out);
  tokenizer.collect(join_name(prefix, "tokenizer"), out);
  for (std::size_t i = 0; i < encoder.size(); ++i) encoder[i].collect(join_name(prefix, "encoder." + std::to_string(i)), out);
  if (srb_encoder) srb_encoder->collect(join_name(prefix, "srb_encoder"), out);
  for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].collect(join_name(prefix, "decoder." + std::to_string(i)), out);
  if (srb_decoder) srb_decoder->collect(join_name(prefix, "srb_decoder"), out);
  raw_head.collect(join_name(prefix, "head.raw"), out);
  if (cal) cal->collect(join_name(prefix, "head.cal"), out);
}

template <typename T>
std::map<std::string, std::size_t> DepthModel<T>::parameter_groups() const {
  std::map<std::string, std::size_t> groups;
  for (const auto& p : this->parameters()) groups[parameter_group(p.name)] += p.tensor.size();
  return groups;
}

template class DepthModel<float>;
template class DepthModel<double>;

}  // namespace panodepth
