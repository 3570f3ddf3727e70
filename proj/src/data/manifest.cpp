#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "panodepth/data.hpp"
#include "panodepth/errors.hpp"
#include "panodepth/random.hpp"

namespace panodepth {

std::vector<std::size_t> DatasetManifest::split_indices(const std::string& split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) out.push_back(i);
  }
  return out;
}

std::string DatasetManifest::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p.string() : (std::filesystem::path(base_dir) / p).string();
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  DatasetManifest manifest;
  manifest.base_dir = std::filesystem::path(path).parent_path().string();
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path + ":" + std::to_string(line_no);
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ManifestError(where + ": not a JSON object");
    ManifestRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.rgb = j.at("rgb").get<std::string>();
      r.depth = j.at("depth").get<std::string>();
      r.split = j.at("split").get<std::string>();
      if (j.contains("depth_scale")) r.depth_scale = j.at("depth_scale").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(where + ": " + e.what());
    }
    if (r.split != "train" && r.split != "val" && r.split != "test") {
      throw ManifestError(where + ": bad split '" + r.split + "' (expected train, val or test)");
    }
    if (!ids.insert(r.id).second) throw ManifestError(where + ": duplicate id '" + r.id + "'");
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  for (const auto& r : records) {
    nlohmann::json j{{"id", r.id}, {"rgb", r.rgb}, {"depth", r.depth}, {"split", r.split}};
    if (r.depth_scale) j["depth_scale"] = *r.depth_scale;
    out << j.dump() << '\n';
  }
}

std::vector<std::vector<std::size_t>> iterate_split(const DatasetManifest& manifest, const std::string& split,
                                                    std::size_t batch, std::uint64_t seed, std::size_t epoch) {
  return shuffled_batches(manifest.split_indices(split), batch, seed, epoch);
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::vector<std::size_t> order, std::size_t batch,
                                                       std::uint64_t seed, std::size_t epoch) {
  if (batch == 0) throw ConfigError("batch size must be positive");
  Rng rng(seed ^ (0xD1B54A32D192ED03ull * (epoch + 1)));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch) {
    batches.emplace_back(order.begin() + i, order.begin() + std::min(order.size(), i + batch));
  }
  return batches;
}

ImageSample load_sample(const DatasetManifest& manifest, std::size_t index, std::size_t height, std::size_t width) {
  const auto& r = manifest.records.at(index);
  ImageSample s;
  s.id = r.id;
  s.rgb = load_image(manifest.resolve(r.rgb), height, width);
  auto depth = load_depth(manifest.resolve(r.depth), r.depth_scale);
  s.depth = resize_nearest(depth.depth, height, width);
  s.mask = valid_mask(s.depth);
  return s;
}

}  // namespace panodepth
