#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numbers>

#include "panodepth/data.hpp"
#include "panodepth/errors.hpp"
#include "panodepth/random.hpp"

namespace panodepth {

SphericalDirection pixel_direction(double u, double v, std::size_t height, std::size_t width) {
  constexpr double pi = std::numbers::pi;
  return {2.0 * pi * u / static_cast<double>(width) - pi, pi / 2.0 - pi * v / static_cast<double>(height)};
}

namespace {

Vec3 unit_vector(SphericalDirection d) {
  const double c = std::cos(d.elevation);
  return {c * std::cos(d.azimuth), c * std::sin(d.azimuth), std::sin(d.elevation)};
}

struct Hit {
  double distance = std::numeric_limits<double>::infinity();
  int surface = -1;  // 0/1: x walls, 2/3: y walls, 4: floor, 5: ceiling
};

Hit cast(const Room& room, const Vec3& c, const Vec3& dir) {
  const double origin[3] = {c.x, c.y, c.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double extent[3] = {room.extent.x, room.extent.y, room.extent.z};
  Hit hit;
  for (int axis = 0; axis < 3; ++axis) {
    if (d[axis] == 0.0) continue;
    const bool positive = d[axis] > 0;
    const double wall = positive ? extent[axis] : 0.0;
    const double t = (wall - origin[axis]) / d[axis];
    if (t > 0 && t < hit.distance) {
      hit.distance = t;
      hit.surface = axis * 2 + (positive ? 1 : 0);
    }
  }
  return hit;
}

void require_inside(const Room& room, const Vec3& c) {
  const bool inside = c.x > 0 && c.x < room.extent.x && c.y > 0 && c.y < room.extent.y && c.z > 0 &&
                      c.z < room.extent.z;
  if (!inside) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "camera (%g, %g, %g) is not strictly inside the %g x %g x %g room", c.x, c.y, c.z,
                  room.extent.x, room.extent.y, room.extent.z);
    throw DomainError(buf);
  }
}

}  // namespace

double room_ray_depth(const Room& room, const Vec3& camera, SphericalDirection dir) {
  require_inside(room, camera);
  return cast(room, camera, unit_vector(dir)).distance;
}

ImageSample synth_room(const SynthRoomOptions& o) {
  require_inside(o.room, o.camera);
  if (o.height == 0 || o.width == 0) throw DomainError("synth_room: resolution must be positive");
  Rng rng(o.seed);
  // Base palette per surface, jittered per sample.
  static constexpr double palette[6][3] = {{0.80, 0.35, 0.30}, {0.30, 0.65, 0.35}, {0.30, 0.40, 0.85},
                                           {0.85, 0.75, 0.30}, {0.45, 0.30, 0.20}, {0.92, 0.92, 0.90}};
  double colors[6][3];
  for (int s = 0; s < 6; ++s) {
    for (int c = 0; c < 3; ++c) colors[s][c] = std::clamp(palette[s][c] + rng.uniform(-0.04, 0.04), 0.0, 1.0);
  }
  ImageSample sample;
  sample.depth = {o.height, o.width, std::vector<float>(o.height * o.width)};
  sample.rgb = Tensor<float>({3, o.height, o.width});
  auto rgb = sample.rgb.data();
  const std::size_t plane = o.height * o.width;
  for (std::size_t v = 0; v < o.height; ++v) {
    for (std::size_t u = 0; u < o.width; ++u) {
      const Vec3 dir = unit_vector(pixel_direction(static_cast<double>(u), static_cast<double>(v), o.height, o.width));
      const Hit hit = cast(o.room, o.camera, dir);
      const std::size_t i = v * o.width + u;
      sample.depth.values[i] = static_cast<float>(hit.distance);
      const double shade = 1.0 / (1.0 + 0.5 * hit.distance);
      for (std::size_t c = 0; c < 3; ++c) {
        const double value = colors[hit.surface][c] * shade + rng.uniform(-0.01, 0.01);
        rgb[c * plane + i] = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }
  if (o.hole_fraction > 0) {
    for (auto& d : sample.depth.values) {
      if (rng.uniform() < o.hole_fraction) d = 0.0f;
    }
  }
  sample.mask = valid_mask(sample.depth);
  return sample;
}

SynthRoomOptions random_room(std::uint64_t seed, std::size_t index, std::size_t height, std::size_t width) {
  Rng rng(seed * 0x9E3779B97F4A7C15ull + index + 1);
  SynthRoomOptions o;
  o.seed = rng.next();
  o.height = height;
  o.width = width;
  o.room.extent = {rng.uniform(3.0, 7.0), rng.uniform(3.0, 7.0), rng.uniform(2.5, 3.2)};
  o.camera = {o.room.extent.x * rng.uniform(0.3, 0.7), o.room.extent.y * rng.uniform(0.3, 0.7), rng.uniform(1.2, 1.7)};
  return o;
}

std::string write_synthetic_dataset(const SynthDatasetOptions& o) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw IoError("cannot create " + o.out_dir + ": " + ec.message());
  const std::size_t n_train = static_cast<std::size_t>(std::llround(o.train_fraction * o.count));
  const std::size_t n_val = std::min(o.count - std::min(n_train, o.count),
                                     static_cast<std::size_t>(std::llround(o.val_fraction * o.count)));
  std::vector<ManifestRecord> records;
  for (std::size_t k = 0; k < o.count; ++k) {
    auto room = random_room(o.seed, k, o.height, o.width);
    room.hole_fraction = o.hole_fraction;
    const auto sample = synth_room(room);
    char id[32];
    std::snprintf(id, sizeof id, "room_%04zu", k);
    const std::string rgb_name = std::string(id) + "_rgb.png";
    const std::string depth_name = std::string(id) + "_depth.pfm";
    std::vector<std::uint8_t> bytes(3 * o.height * o.width);
    const std::size_t plane = o.height * o.width;
    const auto rgb = sample.rgb.data();
    for (std::size_t i = 0; i < plane; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        bytes[i * 3 + c] = static_cast<std::uint8_t>(std::lround(255.0f * rgb[c * plane + i]));
      }
    }
    write_png8((fs::path(o.out_dir) / rgb_name).string(), o.height, o.width, 3, bytes);
    write_pfm((fs::path(o.out_dir) / depth_name).string(), sample.depth);
    const std::string split = k < n_train ? "train" : (k < n_train + n_val ? "val" : "test");
    records.push_back({id, rgb_name, depth_name, split, std::nullopt});
  }
  const std::string manifest = (fs::path(o.out_dir) / "manifest.jsonl").string();
  write_manifest(manifest, records);
  return manifest;
}

}  // namespace panodepth
