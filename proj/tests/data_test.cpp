#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <unistd.h>

#include "panodepth/data.hpp"
#include "panodepth/errors.hpp"
#include "panodepth/random.hpp"
#include "room_oracle.hpp"

namespace panodepth {
namespace {

namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / ("panodepth_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

SynthRoomOptions unit_room(std::size_t h = 64, std::size_t w = 128) {
  SynthRoomOptions o;
  o.room.extent = {2, 2, 2};
  o.camera = {1, 1, 1};
  o.height = h;
  o.width = w;
  return o;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& l : lines) out << l << '\n';
}

std::string record(const std::string& id, const std::string& split) {
  return R"({"id":")" + id + R"(","rgb":")" + id + R"(.png","depth":")" + id + R"(.pfm","split":")" + split + "\"}";
}

TEST(SynthRoom, WorkedExamples) {
  const auto o = unit_room();
  EXPECT_NEAR(room_ray_depth(o.room, o.camera, {0.0, 0.0}), 1.0, 1e-12);
  EXPECT_NEAR(room_ray_depth(o.room, o.camera, {kPi / 4, 0.0}), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(room_ray_depth(o.room, o.camera, {0.3, kPi / 2}), 1.0, 1e-12);

  const auto sample = synth_room(o);
  auto at = [&](std::size_t v, std::size_t u) { return sample.depth.values[v * o.width + u]; };
  EXPECT_NEAR(at(o.height / 2, o.width / 2), 1.0, 1e-6);               // azimuth 0, equator
  EXPECT_NEAR(at(o.height / 2, o.width / 2 + o.width / 8), std::sqrt(2.0), 1e-6);  // azimuth 45 deg
  EXPECT_NEAR(at(0, 5), 1.0, 1e-6);                                     // zenith row
}

TEST(SynthRoom, PixelDirectionConvention) {
  const auto d0 = pixel_direction(0, 0, 64, 128);
  EXPECT_DOUBLE_EQ(d0.azimuth, -kPi);
  EXPECT_DOUBLE_EQ(d0.elevation, kPi / 2);
  const auto mid = pixel_direction(64, 32, 64, 128);
  EXPECT_DOUBLE_EQ(mid.azimuth, 0.0);
  EXPECT_DOUBLE_EQ(mid.elevation, 0.0);
}

TEST(SynthRoom, MatchesRayIntersectionOracle) {
  Rng rng(1);
  for (int room_index = 0; room_index < 4; ++room_index) {
    auto o = random_room(7, room_index, 48, 96);
    const auto sample = synth_room(o);
    for (int k = 0; k < 250; ++k) {
      const std::size_t v = rng.below(o.height), u = rng.below(o.width);
      const auto dir = pixel_direction(u, v, o.height, o.width);
      const double expect = testing::box_surface_distance(o.room, o.camera, dir.azimuth, dir.elevation);
      EXPECT_NEAR(room_ray_depth(o.room, o.camera, dir), expect, 1e-9);
      EXPECT_NEAR(sample.depth.values[v * o.width + u], expect, 1e-6);
    }
  }
}

TEST(SynthRoom, ImageContract) {
  auto o = unit_room(16, 32);
  const auto a = synth_room(o);
  EXPECT_EQ(a.rgb.shape(), (Shape{3, 16, 32}));
  for (float v : a.rgb.data()) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
  for (auto m : a.mask) EXPECT_EQ(m, 1);
  const auto b = synth_room(o);
  for (std::size_t i = 0; i < a.rgb.size(); ++i) ASSERT_EQ(a.rgb[i], b.rgb[i]);
}

TEST(SynthRoom, HolesPartitionThePixels) {
  auto o = unit_room(32, 64);
  o.hole_fraction = 0.2;
  const auto s = synth_room(o);
  std::size_t valid = 0, holes = 0;
  for (std::size_t i = 0; i < s.mask.size(); ++i) {
    if (s.mask[i]) {
      ++valid;
      EXPECT_GT(s.depth.values[i], 0.0f);
    } else {
      ++holes;
      EXPECT_EQ(s.depth.values[i], 0.0f);
    }
  }
  EXPECT_EQ(valid + holes, o.height * o.width);
  EXPECT_GT(holes, 0u);
}

TEST(SynthRoom, CameraOutsideIsDomainError) {
  auto o = unit_room();
  o.camera = {2.5, 1, 1};
  EXPECT_THROW(synth_room(o), DomainError);
  o.camera = {1, 1, 0};
  EXPECT_THROW(room_ray_depth(o.room, o.camera, {0, 0}), DomainError);
}

TEST(Pfm, RoundTripIsExact) {
  TempDir dir;
  Rng rng(2);
  DepthImage d{5, 7, std::vector<float>(35)};
  for (auto& v : d.values) v = static_cast<float>(rng.uniform(-100, 100));
  d.values[3] = 0.0f;
  d.values[4] = 1e-30f;
  write_pfm(dir.file("a.pfm"), d);
  const auto back = read_pfm(dir.file("a.pfm"));
  EXPECT_EQ(back.height, 5u);
  EXPECT_EQ(back.width, 7u);
  for (std::size_t i = 0; i < d.values.size(); ++i) ASSERT_EQ(back.values[i], d.values[i]);
}

TEST(Pfm, HeaderIsLittleEndianGrayscale) {
  TempDir dir;
  write_pfm(dir.file("h.pfm"), DepthImage{1, 2, {1.0f, 2.0f}});
  std::ifstream in(dir.file("h.pfm"), std::ios::binary);
  std::string magic, size, scale;
  std::getline(in, magic);
  std::getline(in, size);
  std::getline(in, scale);
  EXPECT_EQ(magic, "Pf");
  EXPECT_EQ(size, "2 1");
  EXPECT_LT(std::stod(scale), 0.0);
}

TEST(LoadDepth, PfmConstantMap) {
  TempDir dir;
  write_pfm(dir.file("c.pfm"), DepthImage{3, 4, std::vector<float>(12, 2.5f)});
  const auto loaded = load_depth(dir.file("c.pfm"));
  for (float v : loaded.depth.values) EXPECT_EQ(v, 2.5f);
  for (auto m : loaded.mask) EXPECT_EQ(m, 1);
}

TEST(LoadDepth, Png16WithScale) {
  TempDir dir;
  write_png16(dir.file("d.png"), 2, 2, {1000, 0, 2000, 65535});
  const auto loaded = load_depth(dir.file("d.png"), 0.001);
  EXPECT_FLOAT_EQ(loaded.depth.values[0], 1.0f);
  EXPECT_FLOAT_EQ(loaded.depth.values[2], 2.0f);
  EXPECT_EQ(loaded.mask, (ValidMask{1, 0, 1, 1}));
  EXPECT_THROW(load_depth(dir.file("d.png")), ConfigError);
}

TEST(LoadDepth, Errors) {
  TempDir dir;
  write_lines(dir.file("x.txt"), {"hello"});
  EXPECT_THROW(load_depth(dir.file("x.txt")), FormatError);
  EXPECT_THROW(load_depth(dir.file("missing.pfm")), IoError);
  write_png8(dir.file("rgb.png"), 1, 1, 3, {1, 2, 3});
  EXPECT_THROW(load_depth(dir.file("rgb.png"), 0.001), FormatError);
  try {
    load_depth(dir.file("missing.pfm"));
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.pfm"), std::string::npos);
  }
}

TEST(LoadImage, SameSizeIsIdentity) {
  TempDir dir;
  Rng rng(3);
  std::vector<std::uint8_t> px(3 * 6 * 10);
  for (auto& v : px) v = static_cast<std::uint8_t>(rng.below(256));
  write_png8(dir.file("i.png"), 6, 10, 3, px);
  const auto img = load_image(dir.file("i.png"), 6, 10);
  ASSERT_EQ(img.shape(), (Shape{3, 6, 10}));
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(img[c * 60 + i], px[i * 3 + c] / 255.0f, 1e-6);
  }
}

TEST(LoadImage, SolidColourSurvivesResize) {
  TempDir dir;
  std::vector<std::uint8_t> px;
  for (int i = 0; i < 9 * 13; ++i) px.insert(px.end(), {200, 40, 90});
  write_png8(dir.file("s.png"), 9, 13, 3, px);
  const auto img = load_image(dir.file("s.png"), 16, 32);
  const float expect[3] = {200 / 255.0f, 40 / 255.0f, 90 / 255.0f};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < 16 * 32; ++i) ASSERT_NEAR(img[c * 512 + i], expect[c], 1e-6);
  }
}

TEST(LoadImage, CheckerboardDownsamplesToMidGray) {
  TempDir dir;
  std::vector<std::uint8_t> px(16 * 16);
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 0; x < 16; ++x) px[y * 16 + x] = (x + y) % 2 ? 255 : 0;
  }
  write_png8(dir.file("c.png"), 16, 16, 1, px);
  const auto img = load_image(dir.file("c.png"), 8, 8);
  for (std::size_t y = 1; y < 7; ++y) {
    for (std::size_t x = 1; x < 7; ++x) EXPECT_NEAR(img.at({0, y, x}), 0.5f, 1e-6);
  }
}

TEST(LoadImage, MissingOrCorruptFile) {
  TempDir dir;
  EXPECT_THROW(load_image(dir.file("none.png"), 4, 4), IoError);
  write_lines(dir.file("bad.png"), {"not a png"});
  EXPECT_THROW(load_image(dir.file("bad.png"), 4, 4), FormatError);
}

TEST(Manifest, BatchesKeepFinalPartial) {
  TempDir dir;
  std::vector<std::string> lines;
  for (int i = 0; i < 9; ++i) lines.push_back(record("r" + std::to_string(i), "train"));
  write_lines(dir.file("m.jsonl"), lines);
  const auto m = read_manifest(dir.file("m.jsonl"));
  const auto batches = iterate_split(m, "train", 4, 1);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 4u);
  EXPECT_EQ(batches[1].size(), 4u);
  EXPECT_EQ(batches[2].size(), 1u);
  EXPECT_EQ(iterate_split(m, "train", 4, 1), batches);
  EXPECT_TRUE(iterate_split(m, "val", 4, 1).empty());
  EXPECT_EQ(m.resolve("r0.png"), dir.file("r0.png"));
}

TEST(Manifest, SeedsAndEpochsChangeOrder) {
  std::vector<std::size_t> items(100);
  std::iota(items.begin(), items.end(), 0);
  EXPECT_NE(shuffled_batches(items, 4, 1, 0), shuffled_batches(items, 4, 2, 0));
  EXPECT_NE(shuffled_batches(items, 4, 1, 0), shuffled_batches(items, 4, 1, 1));
  EXPECT_EQ(shuffled_batches(items, 4, 1, 3), shuffled_batches(items, 4, 1, 3));
}

TEST(Manifest, DuplicateIdReportsLineNumber) {
  TempDir dir;
  write_lines(dir.file("m.jsonl"), {record("a", "train"), "", record("b", "val"), record("a", "test")});
  try {
    read_manifest(dir.file("m.jsonl"));
    FAIL() << "expected ManifestError";
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("m.jsonl:4"), std::string::npos) << e.what();
  }
}

TEST(Manifest, BadSplitAndMalformedLines) {
  TempDir dir;
  write_lines(dir.file("split.jsonl"), {record("a", "holdout")});
  EXPECT_THROW(read_manifest(dir.file("split.jsonl")), ManifestError);
  write_lines(dir.file("junk.jsonl"), {"{not json"});
  EXPECT_THROW(read_manifest(dir.file("junk.jsonl")), ManifestError);
  write_lines(dir.file("field.jsonl"), {R"({"id":"a","rgb":"a.png","split":"train"})"});
  EXPECT_THROW(read_manifest(dir.file("field.jsonl")), ManifestError);
  EXPECT_THROW(read_manifest(dir.file("absent.jsonl")), IoError);
}

TEST(SyntheticDataset, WritesLoadableSplits) {
  TempDir dir;
  SynthDatasetOptions o;
  o.out_dir = dir.file("set");
  o.count = 10;
  o.seed = 3;
  o.height = 16;
  o.width = 32;
  const auto manifest_path = write_synthetic_dataset(o);
  const auto m = read_manifest(manifest_path);
  ASSERT_EQ(m.records.size(), 10u);
  EXPECT_EQ(m.split_indices("train").size(), 8u);
  EXPECT_EQ(m.split_indices("val").size(), 1u);
  EXPECT_EQ(m.split_indices("test").size(), 1u);
  const auto s = load_sample(m, 0, 16, 32);
  const auto direct = synth_room(random_room(3, 0, 16, 32));
  for (std::size_t i = 0; i < direct.depth.values.size(); ++i) ASSERT_EQ(s.depth.values[i], direct.depth.values[i]);
  for (std::size_t i = 0; i < direct.rgb.size(); ++i) ASSERT_NEAR(s.rgb[i], direct.rgb[i], 0.5 / 255 + 1e-6);
}

TEST(ResizeNearest, KeepsHolesAsHoles) {
  DepthImage d{2, 2, {1, 0, 3, 4}};
  const auto up = resize_nearest(d, 4, 4);
  EXPECT_EQ(up.values[0], 1.0f);
  EXPECT_EQ(up.values[3], 0.0f);
  EXPECT_EQ(up.values[15], 4.0f);
}

}  // namespace
}  // namespace panodepth
