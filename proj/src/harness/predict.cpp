#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "panodepth/errors.hpp"
#include "panodepth/harness.hpp"

namespace panodepth {

PredictOutputs predict_to_files(const DepthModel<float>& model, const std::string& image_path,
                                const std::string& out_dir) {
  namespace fs = std::filesystem;
  const auto& cfg = model.config();
  const RawImage original = read_png(image_path);
  const auto rgb = load_image(image_path, cfg.height, cfg.width);
  auto depth = predict_depth(model, rgb);

  // Back to the input's own extent.
  DepthImage out{original.height, original.width, {}};
  {
    NoGradGuard no_grad;
    Tensor<float> map({1, 1, cfg.height, cfg.width}, std::move(depth));
    const auto resized = resize_bilinear(map, original.height, original.width);
    out.values.assign(resized.data().begin(), resized.data().end());
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  PredictOutputs files;
  files.pfm = (fs::path(out_dir) / "depth.pfm").string();
  files.png16 = (fs::path(out_dir) / "depth16.png").string();
  files.sidecar = (fs::path(out_dir) / "depth16.json").string();
  files.color = (fs::path(out_dir) / "depth_color.png").string();
  const double d_max = cfg.head.d_max;
  files.png_scale = d_max / 65535.0;

  write_pfm(files.pfm, out);
  std::vector<std::uint16_t> units(out.values.size());
  std::vector<std::uint8_t> color(out.values.size() * 3);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double d = std::clamp(static_cast<double>(out.values[i]), 0.0, d_max);
    units[i] = static_cast<std::uint16_t>(std::lround(d / files.png_scale));
    const auto c = depth_color(d / d_max);
    std::copy(c.begin(), c.end(), color.begin() + 3 * i);
  }
  write_png16(files.png16, out.height, out.width, units);
  write_png8(files.color, out.height, out.width, 3, color);
  std::ofstream side(files.sidecar);
  if (!side) throw IoError("cannot write " + files.sidecar);
  side << nlohmann::json{{"depth_scale", files.png_scale}, {"units", "meters per PNG unit"}, {"d_max", d_max}}.dump(2)
       << '\n';
  return files;
}

}  // namespace panodepth
