#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "panodepth/metrics.hpp"
#include "panodepth/tensor.hpp"

namespace panodepth {

// Row-major single-channel float map.
struct DepthImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;
};

// Decoded PNG samples; 8-bit files keep their 0..255 range.
struct RawImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

void write_pfm(const std::string& path, const DepthImage& depth);
DepthImage read_pfm(const std::string& path);

RawImage read_png(const std::string& path);
void write_png8(const std::string& path, std::size_t height, std::size_t width, std::size_t channels,
                const std::vector<std::uint8_t>& samples);
void write_png16(const std::string& path, std::size_t height, std::size_t width,
                 const std::vector<std::uint16_t>& samples);

// Decodes an 8/16-bit PNG into [3,H,W] floats in [0,1] and bilinearly resizes
// it to height x width.
Tensor<float> load_image(const std::string& path, std::size_t height, std::size_t width);

struct LoadedDepth {
  DepthImage depth;
  ValidMask mask;  // false where depth <= 0 or non-finite
};

// PFM, or 16-bit grayscale PNG scaled by `png_scale` meters per unit.
LoadedDepth load_depth(const std::string& path, std::optional<double> png_scale = std::nullopt);
ValidMask valid_mask(const DepthImage& depth);

// Nearest-neighbour resample (keeps holes as holes).
DepthImage resize_nearest(const DepthImage& depth, std::size_t height, std::size_t width);

struct ImageSample {
  std::string id;
  Tensor<float> rgb;  // [3,H,W]
  DepthImage depth;
  ValidMask mask;
};

// Pixel (u, v) of a height x width equirectangular image -> (azimuth, elevation).
struct SphericalDirection {
  double azimuth;
  double elevation;
};
SphericalDirection pixel_direction(double u, double v, std::size_t height, std::size_t width);

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

// Axis-aligned room [0,Lx] x [0,Ly] x [0,Lz].
struct Room {
  Vec3 extent{2, 2, 2};
};

// Distance from `camera` along the ray (azimuth, elevation) to the nearest wall.
double room_ray_depth(const Room& room, const Vec3& camera, SphericalDirection dir);

struct SynthRoomOptions {
  std::uint64_t seed = 0;
  Room room;
  Vec3 camera{1, 1, 1};
  std::size_t height = 128;
  std::size_t width = 256;
  double hole_fraction = 0.0;  // fraction of pixels punched out of the mask
};

ImageSample synth_room(const SynthRoomOptions& options);

// Randomized room/camera for sample `index` of a synthetic set.
SynthRoomOptions random_room(std::uint64_t seed, std::size_t index, std::size_t height, std::size_t width);

struct ManifestRecord {
  std::string id;
  std::string rgb;
  std::string depth;
  std::string split;
  std::optional<double> depth_scale;
};

struct DatasetManifest {
  std::string base_dir;  // relative paths resolve against this
  std::vector<ManifestRecord> records;

  std::vector<std::size_t> split_indices(const std::string& split) const;
  std::string resolve(const std::string& path) const;
};

DatasetManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

// Record indices of `split` in a seeded per-epoch shuffled order, grouped into
// batches; the final partial batch is kept.
std::vector<std::vector<std::size_t>> iterate_split(const DatasetManifest& manifest, const std::string& split,
                                                    std::size_t batch, std::uint64_t seed, std::size_t epoch = 0);

// Seeded per-epoch shuffle of `items`, grouped into batches (last one partial).
std::vector<std::vector<std::size_t>> shuffled_batches(std::vector<std::size_t> items, std::size_t batch,
                                                       std::uint64_t seed, std::size_t epoch);

ImageSample load_sample(const DatasetManifest& manifest, std::size_t index, std::size_t height, std::size_t width);

struct SynthDatasetOptions {
  std::string out_dir;
  std::size_t count = 16;
  std::uint64_t seed = 0;
  std::size_t height = 128;
  std::size_t width = 256;
  // Fractions of records assigned to train and val; the rest is test.
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double hole_fraction = 0.0;
};

// Writes <id>_rgb.png, <id>_depth.pfm and manifest.jsonl into out_dir;
// returns the manifest path.
std::string write_synthetic_dataset(const SynthDatasetOptions& options);

// Warm (near) to cool (far) RGB colour for t in [0,1].
std::array<std::uint8_t, 3> depth_color(double t);

}  // namespace panodepth
