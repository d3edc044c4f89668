#include "trisplat/ply.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace trisplat {

namespace {

const char* kProperties[] = {"x",       "y",       "z",       "f_dc_0",  "f_dc_1",
                             "f_dc_2",  "opacity", "scale_0", "scale_1", "scale_2",
                             "rot_0",   "rot_1",   "rot_2",   "rot_3"};
constexpr int kPropertyCount = 14;

void write_f32_le(std::ostream& out, double v) {
  const float f = static_cast<float>(v);
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  const uint8_t bytes[4] = {static_cast<uint8_t>(bits), static_cast<uint8_t>(bits >> 8),
                            static_cast<uint8_t>(bits >> 16), static_cast<uint8_t>(bits >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

float read_f32_le(std::istream& in) {
  uint8_t bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  const uint32_t bits = static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
                        (static_cast<uint32_t>(bytes[2]) << 16) |
                        (static_cast<uint32_t>(bytes[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void export_ply(const GaussianCloud& cloud, const std::string& path) {
  const std::string tmp = path + ".tmp";
  std::ofstream out(tmp, std::ios::binary);
  TS_CHECK(out.good(), "export_ply: cannot open " + tmp);
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << cloud.count() << "\n";
  for (const char* p : kProperties) out << "property float " << p << "\n";
  out << "end_header\n";
  for (const Gaussian& g : cloud.gaussians) {
    for (int k = 0; k < 3; ++k) write_f32_le(out, g.position[k]);
    for (int k = 0; k < 3; ++k) write_f32_le(out, g.color[k]);
    write_f32_le(out, g.opacity);
    for (int k = 0; k < 3; ++k) write_f32_le(out, g.scale[k]);
    for (int k = 0; k < 4; ++k) write_f32_le(out, g.rotation[k]);
  }
  TS_CHECK(out.good(), "export_ply: write failed for " + tmp);
  out.close();
  std::filesystem::rename(tmp, path);
}

GaussianCloud import_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  TS_CHECK(in.good(), "import_ply: cannot open " + path);
  std::string line;
  std::getline(in, line);
  TS_CHECK(line == "ply", "import_ply: not a PLY file");
  std::getline(in, line);
  TS_CHECK(line == "format binary_little_endian 1.0", "import_ply: unsupported format");
  size_t count = 0;
  int prop = 0;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment") continue;
    if (word == "element") {
      std::string kind;
      ls >> kind >> count;
      TS_CHECK(kind == "vertex", "import_ply: only vertex elements supported");
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      TS_CHECK(type == "float", "import_ply: only float properties supported");
      TS_CHECK(prop < kPropertyCount && name == kProperties[prop],
               "import_ply: unexpected property " + name);
      ++prop;
    }
  }
  TS_CHECK(prop == kPropertyCount, "import_ply: missing splat properties");

  GaussianCloud cloud;
  cloud.gaussians.resize(count);
  for (size_t i = 0; i < count; ++i) {
    Gaussian& g = cloud.gaussians[i];
    for (int k = 0; k < 3; ++k) g.position[k] = read_f32_le(in);
    for (int k = 0; k < 3; ++k) g.color[k] = read_f32_le(in);
    g.opacity = read_f32_le(in);
    for (int k = 0; k < 3; ++k) g.scale[k] = read_f32_le(in);
    for (int k = 0; k < 4; ++k) g.rotation[k] = read_f32_le(in);
  }
  TS_CHECK(in.good(), "import_ply: truncated payload");
  return cloud;
}

}  // namespace trisplat
