#include <cstring>
#include <fstream>

#include "panodepth/errors.hpp"
#include "panodepth/harness.hpp"

namespace panodepth {

namespace {

constexpr char kMagic[8] = {'P', 'D', 'C', 'K', 'P', 'T', '\0', '\n'};

template <typename V>
void put(std::ostream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_floats(std::ostream& out, std::span<const float> values) {
  put<std::uint64_t>(out, values.size());
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename V>
  V get() {
    V v{};
    read(&v, sizeof v);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    if (n > (1ull << 32)) fail("implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  std::vector<float> get_floats() {
    const auto n = get<std::uint64_t>();
    if (n > (1ull << 34)) fail("implausible tensor length");
    std::vector<float> v(n);
    read(v.data(), n * sizeof(float));
    return v;
  }
  [[noreturn]] void fail(const std::string& what) const { throw FormatError(path_ + ": " + what); }

 private:
  void read(void* dst, std::size_t bytes) {
    if (!in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes))) fail("truncated checkpoint");
  }
  std::istream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg, const DepthModel<float>& model,
                     const AdamState<float>& adam) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, nlohmann::json(cfg).dump());
  const auto params = model.parameters();
  put<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    put_string(out, p.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto d : p.tensor.shape()) put<std::uint64_t>(out, d);
    put_floats(out, p.tensor.data());
  }
  put<std::int64_t>(out, adam.step);
  const auto& o = adam.options;
  put(out, o.learning_rate);
  put(out, o.beta1);
  put(out, o.beta2);
  put(out, o.eps);
  put<std::uint64_t>(out, adam.first_moment.size());
  for (std::size_t i = 0; i < adam.first_moment.size(); ++i) {
    put_floats(out, adam.first_moment[i]);
    put_floats(out, adam.second_moment[i]);
  }
  if (!out) throw IoError("failed writing checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  Reader r(in, path);
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError(path + ": checkpoint version " + std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  }
  LoadedCheckpoint ck;
  const auto cfg_text = r.get_string();
  const auto cfg_json = nlohmann::json::parse(cfg_text, nullptr, false);
  if (cfg_json.is_discarded()) r.fail("corrupt configuration block");
  ck.config = cfg_json.get<RunConfig>();
  ck.model = std::make_unique<DepthModel<float>>(ck.config.model, 0);
  auto params = ck.model->parameters();
  const auto count = r.get<std::uint64_t>();
  if (count != params.size()) {
    throw VersionError(path + ": " + std::to_string(count) + " stored tensors, architecture expects " +
                       std::to_string(params.size()));
  }
  for (auto& p : params) {
    const auto name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    if (name != p.name || shape != p.tensor.shape()) {
      throw VersionError(path + ": stored tensor " + name + " " + shape_str(shape) + " does not match " + p.name +
                         " " + shape_str(p.tensor.shape()));
    }
    const auto values = r.get_floats();
    if (values.size() != p.tensor.size()) r.fail("tensor " + name + " has the wrong element count");
    std::copy(values.begin(), values.end(), p.tensor.data().begin());
  }
  ck.adam.step = r.get<std::int64_t>();
  ck.adam.options.learning_rate = r.get<double>();
  ck.adam.options.beta1 = r.get<double>();
  ck.adam.options.beta2 = r.get<double>();
  ck.adam.options.eps = r.get<double>();
  const auto moments = r.get<std::uint64_t>();
  if (moments != 0 && moments != params.size()) r.fail("moment buffer count mismatch");
  for (std::uint64_t i = 0; i < moments; ++i) {
    ck.adam.first_moment.push_back(r.get_floats());
    ck.adam.second_moment.push_back(r.get_floats());
    if (ck.adam.first_moment.back().size() != params[i].tensor.size() ||
        ck.adam.second_moment.back().size() != params[i].tensor.size()) {
      r.fail("moment buffer shape mismatch for " + params[i].name);
    }
  }
  return ck;
}

}  // namespace panodepth
