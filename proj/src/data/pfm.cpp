#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "panodepth/data.hpp"
#include "panodepth/errors.hpp"

namespace panodepth {

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

}  // namespace

void write_pfm(const std::string& path, const DepthImage& depth) {
  if (depth.values.size() != depth.height * depth.width) throw DimensionError("write_pfm: size mismatch for " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "Pf\n" << depth.width << ' ' << depth.height << "\n-1.0\n";
  for (float v : depth.values) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw IoError("failed writing " + path);
}

DepthImage read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  long width = 0, height = 0;
  double scale = 0;
  in >> magic;
  if (magic == "PF") throw FormatError(path + ": three-channel PFM is not a depth map");
  if (magic != "Pf") throw FormatError(path + ": not a PFM file");
  if (!(in >> width >> height >> scale) || width <= 0 || height <= 0 || scale == 0.0) {
    throw FormatError(path + ": malformed PFM header");
  }
  in.get();  // single whitespace byte after the scale
  const bool little = scale < 0;
  DepthImage depth;
  depth.width = static_cast<std::size_t>(width);
  depth.height = static_cast<std::size_t>(height);
  depth.values.resize(depth.width * depth.height);
  for (auto& v : depth.values) {
    std::uint32_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw FormatError(path + ": truncated PFM data");
    if (little != (std::endian::native == std::endian::little)) bits = byteswap32(bits);
    v = std::bit_cast<float>(bits);
  }
  return depth;
}

}  // namespace panodepth
