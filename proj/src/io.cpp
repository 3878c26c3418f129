#include "wda/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wda/errors.hpp"

namespace fs = std::filesystem;

namespace wda::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_or_throw(const std::string& path, const char* mode) {
  std::FILE* f = std::fopen(path.c_str(), mode);
  if (!f) throw IoError("cannot open " + path);
  return FilePtr(f);
}

uint16_t quant16(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<uint16_t>(std::lround(c * 65535.0f));
}

uint8_t quant8(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<uint8_t>(std::lround(c * 255.0f));
}

void write_png_impl(const std::string& path, int h, int w, int bit_depth,
                    int color_type, const std::vector<png_bytep>& rows) {
  FilePtr f = open_or_throw(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png write init failed for " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png info init failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed for " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, w, h, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // little-endian buffers
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_gray8(const std::string& path, const GridF& img) {
  std::vector<uint8_t> buf(img.size());
  for (size_t i = 0; i < img.size(); ++i) buf[i] = quant8(img[i]);
  std::vector<png_bytep> rows(img.h());
  for (int y = 0; y < img.h(); ++y) rows[y] = buf.data() + size_t(y) * img.w();
  write_png_impl(path, img.h(), img.w(), 8, PNG_COLOR_TYPE_GRAY, rows);
}

void write_png_gray16(const std::string& path, const GridF& img) {
  std::vector<uint16_t> buf(img.size());
  for (size_t i = 0; i < img.size(); ++i) buf[i] = quant16(img[i]);
  std::vector<png_bytep> rows(img.h());
  for (int y = 0; y < img.h(); ++y)
    rows[y] = reinterpret_cast<png_bytep>(buf.data() + size_t(y) * img.w());
  write_png_impl(path, img.h(), img.w(), 16, PNG_COLOR_TYPE_GRAY, rows);
}

void write_png_gray16_raw(const std::string& path, const Grid<uint16_t>& img) {
  std::vector<png_bytep> rows(img.h());
  std::vector<uint16_t> buf(img.data(), img.data() + img.size());
  for (int y = 0; y < img.h(); ++y)
    rows[y] = reinterpret_cast<png_bytep>(buf.data() + size_t(y) * img.w());
  write_png_impl(path, img.h(), img.w(), 16, PNG_COLOR_TYPE_GRAY, rows);
}

void write_png_rgb8(const std::string& path,
                    const Grid<std::array<uint8_t, 3>>& img) {
  std::vector<uint8_t> buf(img.size() * 3);
  for (size_t i = 0; i < img.size(); ++i) {
    buf[3 * i] = img[i][0];
    buf[3 * i + 1] = img[i][1];
    buf[3 * i + 2] = img[i][2];
  }
  std::vector<png_bytep> rows(img.h());
  for (int y = 0; y < img.h(); ++y)
    rows[y] = buf.data() + size_t(y) * img.w() * 3;
  write_png_impl(path, img.h(), img.w(), 8, PNG_COLOR_TYPE_RGB, rows);
}

namespace {

struct PngRead {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngRead() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

Grid<uint16_t> read_png_impl(const std::string& path, int* bit_depth_out) {
  if (!fs::exists(path)) throw IoError("no such file: " + path);
  FilePtr f = open_or_throw(path, "rb");
  PngRead r;
  r.png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw IoError("png read init failed for " + path);
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw IoError("png info init failed for " + path);
  if (setjmp(png_jmpbuf(r.png))) throw IoError("corrupt png: " + path);
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);

  png_uint_32 w = 0, h = 0;
  int depth = 0, color = 0;
  png_get_IHDR(r.png, r.info, &w, &h, &depth, &color, nullptr, nullptr,
               nullptr);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(r.png);
  if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(r.png, 1, -1, -1);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  if (depth == 16) png_set_swap(r.png);
  png_read_update_info(r.png, r.info);
  depth = png_get_bit_depth(r.png, r.info);

  Grid<uint16_t> out(static_cast<int>(h), static_cast<int>(w));
  if (depth == 16) {
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
      rows[y] = reinterpret_cast<png_bytep>(out.data() + size_t(y) * w);
    png_read_image(r.png, rows.data());
  } else {
    std::vector<uint8_t> buf(size_t(h) * w);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + size_t(y) * w;
    png_read_image(r.png, rows.data());
    for (size_t i = 0; i < buf.size(); ++i) out[i] = buf[i];
  }
  png_read_end(r.png, nullptr);
  if (bit_depth_out) *bit_depth_out = depth;
  return out;
}

}  // namespace

GridF read_png_gray(const std::string& path) {
  int depth = 0;
  Grid<uint16_t> raw = read_png_impl(path, &depth);
  const float scale = depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
  GridF out(raw.h(), raw.w());
  for (size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] * scale;
  return out;
}

Grid<uint16_t> read_png_gray16_raw(const std::string& path) {
  return read_png_impl(path, nullptr);
}

// ---- npy --------------------------------------------------------------------

namespace {

void write_npy_impl(const std::string& path, const char* dtype,
                    const std::vector<size_t>& shape, const void* data,
                    size_t bytes) {
  std::ostringstream hdr;
  hdr << "{'descr': '" << dtype << "', 'fortran_order': False, 'shape': (";
  for (size_t i = 0; i < shape.size(); ++i) {
    hdr << shape[i];
    if (shape.size() == 1 || i + 1 < shape.size()) hdr << ",";
    if (i + 1 < shape.size()) hdr << " ";
  }
  hdr << "), }";
  std::string h = hdr.str();
  const size_t base = 10;
  const size_t total = (base + h.size() + 1 + 63) / 64 * 64;
  h.resize(total - base - 1, ' ');
  h.push_back('\n');

  FilePtr f = open_or_throw(path, "wb");
  const uint8_t magic[8] = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
  uint16_t hlen = static_cast<uint16_t>(h.size());
  std::fwrite(magic, 1, 8, f.get());
  std::fwrite(&hlen, 2, 1, f.get());
  std::fwrite(h.data(), 1, h.size(), f.get());
  if (std::fwrite(data, 1, bytes, f.get()) != bytes)
    throw IoError("short write: " + path);
}

struct NpyHeader {
  std::string descr;
  std::vector<size_t> shape;
  size_t data_offset;
};

NpyHeader read_npy_header(const std::string& path, std::ifstream& in) {
  uint8_t magic[8];
  in.read(reinterpret_cast<char*>(magic), 8);
  if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0)
    throw IoError("not an npy file: " + path);
  uint16_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 2);
  std::string h(hlen, '\0');
  in.read(h.data(), hlen);
  if (!in) throw IoError("truncated npy header: " + path);

  NpyHeader out;
  out.data_offset = 10 + hlen;
  auto dpos = h.find("'descr':");
  auto q0 = h.find('\'', dpos + 8);
  auto q1 = h.find('\'', q0 + 1);
  out.descr = h.substr(q0 + 1, q1 - q0 - 1);
  auto spos = h.find("'shape':");
  auto p0 = h.find('(', spos);
  auto p1 = h.find(')', p0);
  std::string dims = h.substr(p0 + 1, p1 - p0 - 1);
  std::stringstream ss(dims);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
    if (!tok.empty()) out.shape.push_back(std::stoul(tok));
  }
  if (h.find("'fortran_order': False") == std::string::npos)
    throw IoError("fortran-order npy unsupported: " + path);
  return out;
}

template <typename T>
std::vector<T> read_npy_data(const std::string& path, const char* want_descr,
                             std::vector<size_t>* shape) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  NpyHeader h = read_npy_header(path, in);
  if (h.descr != want_descr)
    throw IoError("npy dtype " + h.descr + " != expected " + want_descr +
                  " in " + path);
  size_t n = 1;
  for (size_t d : h.shape) n *= d;
  std::vector<T> out(n);
  in.read(reinterpret_cast<char*>(out.data()), n * sizeof(T));
  if (!in) throw IoError("truncated npy data: " + path);
  *shape = h.shape;
  return out;
}

}  // namespace

void write_npy(const std::string& path, const GridF& g) {
  write_npy_impl(path, "<f4", {size_t(g.h()), size_t(g.w())}, g.data(),
                 g.size() * 4);
}

void write_npy(const std::string& path, const GridI& g) {
  write_npy_impl(path, "<i4", {size_t(g.h()), size_t(g.w())}, g.data(),
                 g.size() * 4);
}

GridF read_npy_f32(const std::string& path) {
  std::vector<size_t> shape;
  auto v = read_npy_data<float>(path, "<f4", &shape);
  if (shape.size() != 2) throw IoError("expected 2D npy: " + path);
  GridF g(static_cast<int>(shape[0]), static_cast<int>(shape[1]));
  std::copy(v.begin(), v.end(), g.data());
  return g;
}

GridI read_npy_i32(const std::string& path) {
  std::vector<size_t> shape;
  auto v = read_npy_data<int32_t>(path, "<i4", &shape);
  if (shape.size() != 2) throw IoError("expected 2D npy: " + path);
  GridI g(static_cast<int>(shape[0]), static_cast<int>(shape[1]));
  std::copy(v.begin(), v.end(), g.data());
  return g;
}

std::vector<GridF> read_npy_volume(const std::string& path) {
  std::vector<size_t> shape;
  auto v = read_npy_data<float>(path, "<f4", &shape);
  if (shape.size() != 3) throw IoError("expected 3D npy: " + path);
  std::vector<GridF> out;
  const size_t plane = shape[1] * shape[2];
  for (size_t z = 0; z < shape[0]; ++z) {
    GridF g(static_cast<int>(shape[1]), static_cast<int>(shape[2]));
    std::copy(v.begin() + z * plane, v.begin() + (z + 1) * plane, g.data());
    out.push_back(std::move(g));
  }
  return out;
}

// ---- misc -------------------------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("short write: " + path);
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void make_dirs(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

std::vector<std::string> list_files(const std::string& dir,
                                    const std::string& ext) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string name = e.path().filename().string();
    if (!ext.empty() && e.path().extension() != ext) continue;
    names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  return names;
}

uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<uint8_t>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

}  // namespace wda::io
