#include "trisplat/dataset.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace trisplat {

namespace {

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

uint8_t quantize8(double v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_png_rgba8(const std::string& path, const Image& img) {
  TS_CHECK(img.channels == 4, "write_png_rgba8: image must be RGBA");
  const std::string tmp = path + ".tmp";
  PngWriteCloser s;
  s.fp = std::fopen(tmp.c_str(), "wb");
  TS_CHECK(s.fp != nullptr, "write_png_rgba8: cannot open " + tmp);
  s.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  TS_CHECK(s.png != nullptr, "write_png_rgba8: png_create_write_struct failed");
  s.info = png_create_info_struct(s.png);
  TS_CHECK(s.info != nullptr, "write_png_rgba8: png_create_info_struct failed");
  if (setjmp(png_jmpbuf(s.png))) fail("write_png_rgba8: libpng error for " + path);
  png_init_io(s.png, s.fp);
  png_set_IHDR(s.png, s.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGBA,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(s.png, s.info);
  std::vector<uint8_t> row(static_cast<size_t>(img.width) * 4);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 4; ++c) row[x * 4 + c] = quantize8(img.at(x, y, c));
    png_write_row(s.png, row.data());
  }
  png_write_end(s.png, nullptr);
  std::fclose(s.fp);
  s.fp = nullptr;
  std::filesystem::rename(tmp, path);
}

Image read_png_rgba8(const std::string& path) {
  PngReadCloser s;
  s.fp = std::fopen(path.c_str(), "rb");
  TS_CHECK(s.fp != nullptr, "read_png_rgba8: cannot open " + path);
  s.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  TS_CHECK(s.png != nullptr, "read_png_rgba8: png_create_read_struct failed");
  s.info = png_create_info_struct(s.png);
  TS_CHECK(s.info != nullptr, "read_png_rgba8: png_create_info_struct failed");
  if (setjmp(png_jmpbuf(s.png))) fail("read_png_rgba8: libpng error for " + path);
  png_init_io(s.png, s.fp);
  png_read_info(s.png, s.info);
  const int w = png_get_image_width(s.png, s.info);
  const int h = png_get_image_height(s.png, s.info);
  TS_CHECK(png_get_bit_depth(s.png, s.info) == 8, "read_png_rgba8: expected 8-bit");
  TS_CHECK(png_get_color_type(s.png, s.info) == PNG_COLOR_TYPE_RGBA,
           "read_png_rgba8: expected RGBA");
  Image img(w, h, 4);
  std::vector<uint8_t> row(static_cast<size_t>(w) * 4);
  for (int y = 0; y < h; ++y) {
    png_read_row(s.png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 4; ++c) img.at(x, y, c) = row[x * 4 + c] / 255.0;
  }
  return img;
}

void save_views(const std::string& dir, const std::vector<PosedView>& views) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json j;
  j["views"] = nlohmann::json::array();
  for (size_t i = 0; i < views.size(); ++i) {
    const PosedView& v = views[i];
    write_png_rgba8(dir + "/view_" + std::to_string(i) + ".png", v.image);
    nlohmann::json e;
    e["index"] = i;
    std::vector<double> ext(16);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) ext[r * 4 + c] = v.camera.extrinsic(r, c);
    e["extrinsic"] = ext;
    e["fx"] = v.camera.fx;
    e["fy"] = v.camera.fy;
    e["cx"] = v.camera.cx;
    e["cy"] = v.camera.cy;
    e["width"] = v.camera.width;
    e["height"] = v.camera.height;
    const Eigen::Vector3d p = v.camera.position();
    e["elevation_deg"] = v.camera.elevation_deg();
    e["azimuth_deg"] = std::atan2(p.x(), p.z()) * 180.0 / EIGEN_PI;
    j["views"].push_back(e);
  }
  const std::string tmp = dir + "/cameras.json.tmp";
  {
    std::ofstream out(tmp);
    TS_CHECK(out.good(), "save_views: cannot write " + tmp);
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, dir + "/cameras.json");
}

std::vector<PosedView> load_views(const std::string& dir) {
  std::ifstream in(dir + "/cameras.json");
  TS_CHECK(in.good(), "load_views: missing cameras.json in " + dir);
  nlohmann::json j = nlohmann::json::parse(in);
  std::vector<PosedView> views;
  for (const auto& e : j.at("views")) {
    PosedView v;
    const auto& ext = e.at("extrinsic");
    TS_CHECK(ext.size() == 16, "load_views: extrinsic must have 16 entries");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) v.camera.extrinsic(r, c) = ext[r * 4 + c].get<double>();
    v.camera.fx = e.at("fx").get<double>();
    v.camera.fy = e.at("fy").get<double>();
    v.camera.cx = e.at("cx").get<double>();
    v.camera.cy = e.at("cy").get<double>();
    v.camera.width = e.at("width").get<int>();
    v.camera.height = e.at("height").get<int>();
    const size_t index = e.at("index").get<size_t>();
    TS_CHECK(index == views.size(), "load_views: view indices must be dense from 0");
    v.image = read_png_rgba8(dir + "/view_" + std::to_string(index) + ".png");
    TS_CHECK(v.image.width == v.camera.width && v.image.height == v.camera.height,
             "load_views: image size does not match camera");
    views.push_back(std::move(v));
  }
  return views;
}

}  // namespace trisplat
