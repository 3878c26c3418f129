#ifndef WDA_GRID_HPP_
#define WDA_GRID_HPP_

#include <cstdint>
#include <vector>

#include "wda/errors.hpp"

namespace wda {

// Dense 2D plane, row-major. The workhorse type for images, masks,
// heatmaps and instance maps.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int h, int w, T fill = T{}) : h_(h), w_(w), v_(size_t(h) * w, fill) {
    if (h < 0 || w < 0) throw ArgumentError("Grid: negative dimensions");
  }

  int h() const { return h_; }
  int w() const { return w_; }
  size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  T& at(int y, int x) { return v_[size_t(y) * w_ + x]; }
  const T& at(int y, int x) const { return v_[size_t(y) * w_ + x]; }
  T& operator[](size_t i) { return v_[i]; }
  const T& operator[](size_t i) const { return v_[i]; }

  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }

  bool in_bounds(int y, int x) const {
    return y >= 0 && y < h_ && x >= 0 && x < w_;
  }

  void fill(T v) { std::fill(v_.begin(), v_.end(), v); }

  bool same_shape(const Grid& o) const { return h_ == o.h_ && w_ == o.w_; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.h_ == b.h_ && a.w_ == b.w_ && a.v_ == b.v_;
  }

 private:
  int h_ = 0, w_ = 0;
  std::vector<T> v_;
};

using GridF = Grid<float>;
using GridD = Grid<double>;
using GridU8 = Grid<uint8_t>;
using GridI = Grid<int32_t>;

// Per-pixel activation in [0, 1] peaking at object centers.
using Heatmap = GridF;

// 0 = background, k > 0 = instance id; ids contiguous 1..N, 4-connected.
using InstanceMap = GridI;

// Binary mask convention: 0 = background, nonzero = foreground.
using Mask = GridU8;

}  // namespace wda

#endif  // WDA_GRID_HPP_
