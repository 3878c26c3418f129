#ifndef WDA_CHECKPOINT_HPP_
#define WDA_CHECKPOINT_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "wda/errors.hpp"
#include "wda/layers.hpp"

namespace wda::nn {

// Binary parameter archive: magic, count, then (name, dtype, shape, raw
// little-endian data) per tensor. Load requires an exact name/shape match so
// mixing checkpoints across configurations fails loudly.

namespace detail {

constexpr char kMagic[4] = {'W', 'D', 'A', 'T'};

template <typename T>
constexpr uint8_t dtype_code() {
  return sizeof(T) == 4 ? 0 : 1;
}

}  // namespace detail

template <typename T>
void save_params(const std::vector<Param<T>*>& params,
                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(detail::kMagic, 4);
  const uint32_t n = uint32_t(params.size());
  out.write(reinterpret_cast<const char*>(&n), 4);
  for (const Param<T>* p : params) {
    const uint16_t len = uint16_t(p->name.size());
    out.write(reinterpret_cast<const char*>(&len), 2);
    out.write(p->name.data(), len);
    const uint8_t dt = detail::dtype_code<T>();
    out.write(reinterpret_cast<const char*>(&dt), 1);
    const uint8_t nd = uint8_t(p->shape.size());
    out.write(reinterpret_cast<const char*>(&nd), 1);
    for (int d : p->shape) {
      const uint32_t v = uint32_t(d);
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
    out.write(reinterpret_cast<const char*>(p->w.data()),
              std::streamsize(p->w.size() * sizeof(T)));
  }
  if (!out) throw IoError("short write: " + path);
}

template <typename T>
void load_params(const std::vector<Param<T>*>& params,
                 const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, detail::kMagic, 4) != 0)
    throw ValidationError("not a parameter archive: " + path);
  uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), 4);
  if (n != params.size())
    throw ValidationError("parameter count mismatch in " + path);
  for (Param<T>* p : params) {
    uint16_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 2);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (name != p->name)
      throw ValidationError("parameter order mismatch: expected " + p->name +
                            ", archive has " + name);
    uint8_t dt = 0, nd = 0;
    in.read(reinterpret_cast<char*>(&dt), 1);
    in.read(reinterpret_cast<char*>(&nd), 1);
    if (dt != detail::dtype_code<T>())
      throw ValidationError("dtype mismatch for " + name + " in " + path);
    std::vector<int> shape(nd);
    for (int i = 0; i < nd; ++i) {
      uint32_t v = 0;
      in.read(reinterpret_cast<char*>(&v), 4);
      shape[i] = int(v);
    }
    if (shape != p->shape)
      throw ValidationError("shape mismatch for " + name + " in " + path);
    in.read(reinterpret_cast<char*>(p->w.data()),
            std::streamsize(p->w.size() * sizeof(T)));
    if (!in) throw ValidationError("truncated archive: " + path);
  }
}

}  // namespace wda::nn

#endif  // WDA_CHECKPOINT_HPP_
