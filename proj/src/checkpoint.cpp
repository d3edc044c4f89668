#include "trisplat/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace trisplat {

namespace {

constexpr char kMagic[4] = {'F', 'L', 'X', 'R'};
constexpr uint32_t kVersion = 1;

void write_f32_le(std::ostream& out, double v) {
  const float f = static_cast<float>(v);
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  const uint8_t bytes[4] = {static_cast<uint8_t>(bits), static_cast<uint8_t>(bits >> 8),
                            static_cast<uint8_t>(bits >> 16), static_cast<uint8_t>(bits >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

double read_f32_le(std::istream& in) {
  uint8_t bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  const uint32_t bits = static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
                        (static_cast<uint32_t>(bytes[2]) << 16) |
                        (static_cast<uint32_t>(bytes[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return static_cast<double>(f);
}

template <typename T>
void write_pod_le(std::ostream& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i)
    out.put(static_cast<char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename T>
T read_pod_le(std::istream& in) {
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    TS_CHECK(c != EOF, "checkpoint: truncated file");
    v |= static_cast<uint64_t>(static_cast<uint8_t>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

void save_checkpoint(const std::string& path, const ad::ParamStore& params, const GradMap& opt_m,
                     const GradMap& opt_v, const CheckpointMeta& meta) {
  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["meta"] = {{"step", meta.step},
                      {"opt_t", meta.opt_t},
                      {"phase", meta.phase},
                      {"rng_state", meta.rng_state},
                      {"extra", meta.extra}};
  nlohmann::json tensors = nlohmann::json::array();
  uint64_t offset = 0;

  struct Blob {
    std::string name;
    const Eigen::ArrayXd* data;
  };
  std::vector<Blob> blobs;
  auto describe = [&](const std::string& name, const std::string& kind, int rows, int cols,
                      bool decay, const Eigen::ArrayXd& data) {
    tensors.push_back({{"name", name},
                       {"kind", kind},
                       {"rows", rows},
                       {"cols", cols},
                       {"dtype", "f32"},
                       {"decay", decay},
                       {"offset", offset}});
    blobs.push_back({name, &data});
    offset += static_cast<uint64_t>(data.size()) * 4;
  };
  for (const auto& [name, e] : params.entries) describe(name, "param", e.rows, e.cols, e.decay, e.value);
  for (const auto& [name, g] : opt_m) describe(name, "opt_m", static_cast<int>(g.size()), 1, false, g);
  for (const auto& [name, g] : opt_v) describe(name, "opt_v", static_cast<int>(g.size()), 1, false, g);
  manifest["tensors"] = tensors;

  const std::string manifest_str = manifest.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    TS_CHECK(out.good(), "save_checkpoint: cannot open " + tmp);
    out.write(kMagic, 4);
    write_pod_le<uint32_t>(out, kVersion);
    write_pod_le<uint64_t>(out, manifest_str.size());
    out.write(manifest_str.data(), static_cast<std::streamsize>(manifest_str.size()));
    for (const Blob& b : blobs)
      for (Eigen::Index i = 0; i < b.data->size(); ++i) write_f32_le(out, (*b.data)[i]);
    TS_CHECK(out.good(), "save_checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  TS_CHECK(in.good(), "load_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  TS_CHECK(in.good() && std::memcmp(magic, kMagic, 4) == 0, "load_checkpoint: bad magic");
  const uint32_t version = read_pod_le<uint32_t>(in);
  TS_CHECK(version == kVersion, "load_checkpoint: unsupported version");
  const uint64_t manifest_len = read_pod_le<uint64_t>(in);
  std::string manifest_str(manifest_len, '\0');
  in.read(manifest_str.data(), static_cast<std::streamsize>(manifest_len));
  TS_CHECK(in.good(), "load_checkpoint: truncated manifest");
  nlohmann::json manifest = nlohmann::json::parse(manifest_str);

  Checkpoint ck;
  const auto& meta = manifest.at("meta");
  ck.meta.step = meta.at("step").get<long>();
  ck.meta.opt_t = meta.at("opt_t").get<long>();
  ck.meta.phase = meta.at("phase").get<std::string>();
  ck.meta.rng_state = meta.at("rng_state").get<std::string>();
  if (meta.contains("extra"))
    ck.meta.extra = meta.at("extra").get<std::map<std::string, std::string>>();

  for (const auto& t : manifest.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    const std::string kind = t.at("kind").get<std::string>();
    const int rows = t.at("rows").get<int>();
    const int cols = t.at("cols").get<int>();
    TS_CHECK(t.at("dtype").get<std::string>() == "f32", "load_checkpoint: unsupported dtype");
    Eigen::ArrayXd data(static_cast<Eigen::Index>(rows) * cols);
    for (Eigen::Index i = 0; i < data.size(); ++i) data[i] = read_f32_le(in);
    TS_CHECK(in.good(), "load_checkpoint: truncated payload at " + name);
    if (kind == "param")
      ck.params.add(name, rows, cols, std::move(data), t.at("decay").get<bool>());
    else if (kind == "opt_m")
      ck.opt_m.emplace(name, std::move(data));
    else if (kind == "opt_v")
      ck.opt_v.emplace(name, std::move(data));
    else
      fail("load_checkpoint: unknown tensor kind " + kind);
  }
  return ck;
}

}  // namespace trisplat
