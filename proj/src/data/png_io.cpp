#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

#include "panodepth/data.hpp"
#include "panodepth/errors.hpp"

namespace panodepth {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png(const std::string& path, std::size_t height, std::size_t width, int color_type, int bit_depth,
               const std::vector<png_bytep>& rows) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RawImage read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed for " + path);
  }
  RawImage image;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": corrupt PNG data");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);  // native little-endian 16-bit samples
  png_read_update_info(png, info);
  image.width = png_get_image_width(png, info);
  image.height = png_get_image_height(png, info);
  image.channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);
  image.bit_depth = depth;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * image.height);
  std::vector<png_bytep> rows(image.height);
  for (std::size_t y = 0; y < image.height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = image.height * image.width * image.channels;
  image.samples.resize(count);
  for (std::size_t y = 0; y < image.height; ++y) {
    const png_byte* row = rows[y];
    const std::size_t per_row = image.width * image.channels;
    for (std::size_t i = 0; i < per_row; ++i) {
      image.samples[y * per_row + i] =
          depth == 16 ? static_cast<std::uint16_t>(row[2 * i] | (row[2 * i + 1] << 8)) : row[i];
    }
  }
  return image;
}

void write_png8(const std::string& path, std::size_t height, std::size_t width, std::size_t channels,
                const std::vector<std::uint8_t>& samples) {
  if (samples.size() != height * width * channels || (channels != 1 && channels != 3)) {
    throw DimensionError("write_png8: bad sample buffer for " + path);
  }
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(samples.data() + y * width * channels);
  write_png(path, height, width, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, 8, rows);
}

void write_png16(const std::string& path, std::size_t height, std::size_t width,
                 const std::vector<std::uint16_t>& samples) {
  if (samples.size() != height * width) throw DimensionError("write_png16: bad sample buffer for " + path);
  std::vector<png_byte> big_endian(samples.size() * 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    big_endian[2 * i] = static_cast<png_byte>(samples[i] >> 8);
    big_endian[2 * i + 1] = static_cast<png_byte>(samples[i] & 0xff);
  }
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = big_endian.data() + y * width * 2;
  write_png(path, height, width, PNG_COLOR_TYPE_GRAY, 16, rows);
}

}  // namespace panodepth
