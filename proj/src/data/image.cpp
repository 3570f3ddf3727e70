#include <algorithm>
#include <cmath>
#include <fstream>

#include "panodepth/data.hpp"
#include "panodepth/errors.hpp"
#include "panodepth/ops.hpp"

namespace panodepth {

Tensor<float> load_image(const std::string& path, std::size_t height, std::size_t width) {
  const RawImage raw = read_png(path);
  if (raw.channels == 0 || raw.channels > 4) throw FormatError(path + ": unsupported channel count");
  const float max_value = raw.bit_depth == 16 ? 65535.0f : 255.0f;
  Tensor<float> rgb({1, 3, raw.height, raw.width});
  auto data = rgb.data();
  const std::size_t plane = raw.height * raw.width;
  const bool gray = raw.channels < 3;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t src = i * raw.channels + (gray ? 0 : c);
      data[c * plane + i] = static_cast<float>(raw.samples[src]) / max_value;
    }
  }
  NoGradGuard no_grad;
  auto resized = resize_bilinear(rgb, height, width);
  return reshape(resized, {3, height, width}).detach();
}

ValidMask valid_mask(const DepthImage& depth) {
  ValidMask mask(depth.values.size());
  std::transform(depth.values.begin(), depth.values.end(), mask.begin(),
                 [](float v) { return static_cast<std::uint8_t>(std::isfinite(v) && v > 0.0f); });
  return mask;
}

LoadedDepth load_depth(const std::string& path, std::optional<double> png_scale) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open " + path);
  char magic[8] = {};
  probe.read(magic, 8);
  probe.close();
  LoadedDepth out;
  if (magic[0] == 'P' && (magic[1] == 'f' || magic[1] == 'F')) {
    out.depth = read_pfm(path);
  } else if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G') {
    if (!png_scale) throw ConfigError(path + ": 16-bit PNG depth needs a meters-per-unit scale");
    const RawImage raw = read_png(path);
    if (raw.bit_depth != 16 || raw.channels != 1) {
      throw FormatError(path + ": depth PNG must be 16-bit grayscale");
    }
    out.depth.height = raw.height;
    out.depth.width = raw.width;
    out.depth.values.resize(raw.samples.size());
    for (std::size_t i = 0; i < raw.samples.size(); ++i) {
      out.depth.values[i] = static_cast<float>(raw.samples[i] * *png_scale);
    }
  } else {
    throw FormatError(path + ": unknown depth format (expected PFM or 16-bit PNG)");
  }
  out.mask = valid_mask(out.depth);
  return out;
}

DepthImage resize_nearest(const DepthImage& depth, std::size_t height, std::size_t width) {
  if (depth.height == height && depth.width == width) return depth;
  DepthImage out{height, width, std::vector<float>(height * width)};
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min(depth.height - 1, (2 * y + 1) * depth.height / (2 * height));
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = std::min(depth.width - 1, (2 * x + 1) * depth.width / (2 * width));
      out.values[y * width + x] = depth.values[sy * depth.width + sx];
    }
  }
  return out;
}

std::array<std::uint8_t, 3> depth_color(double t) {
  // Turbo polynomial fit, reversed so that t = 0 (near) is red.
  const double x = std::clamp(1.0 - t, 0.0, 1.0);
  const double r = 0.13572138 + x * (4.61539260 + x * (-42.66032258 + x * (132.13108234 + x * (-152.94239396 + x * 59.28637943))));
  const double g = 0.09140261 + x * (2.19418839 + x * (4.84296658 + x * (-14.18503333 + x * (4.27729857 + x * 2.82956604))));
  const double b = 0.10667330 + x * (12.64194608 + x * (-60.58204836 + x * (110.36276771 + x * (-89.90310912 + x * 27.34824973))));
  auto to_byte = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); };
  return {to_byte(r), to_byte(g), to_byte(b)};
}

}  // namespace panodepth
