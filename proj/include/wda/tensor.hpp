#ifndef WDA_TENSOR_HPP_
#define WDA_TENSOR_HPP_

#include <cstddef>
#include <vector>

#include "wda/errors.hpp"
#include "wda/grid.hpp"

namespace wda {

// Dense CHW tensor. Networks run one sample at a time (batch size 1 is the
// training default); batching is a loop at the trainer level.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int c, int h, int w) : c_(c), h_(h), w_(w), v_(size_t(c) * h * w) {
    if (c < 0 || h < 0 || w < 0) throw ArgumentError("Tensor: negative dims");
  }

  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  size_t size() const { return v_.size(); }
  size_t plane() const { return size_t(h_) * w_; }

  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }
  T* channel(int ci) { return v_.data() + size_t(ci) * plane(); }
  const T* channel(int ci) const { return v_.data() + size_t(ci) * plane(); }

  T& at(int ci, int y, int x) { return v_[(size_t(ci) * h_ + y) * w_ + x]; }
  const T& at(int ci, int y, int x) const {
    return v_[(size_t(ci) * h_ + y) * w_ + x];
  }
  T& operator[](size_t i) { return v_[i]; }
  const T& operator[](size_t i) const { return v_[i]; }

  void zero() { std::fill(v_.begin(), v_.end(), T(0)); }
  void fill(T v) { std::fill(v_.begin(), v_.end(), v); }

  bool same_shape(const Tensor& o) const {
    return c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  // Reallocate only when the shape actually changes; layers reuse their
  // activation buffers across iterations this way.
  void resize(int c, int h, int w) {
    if (c == c_ && h == h_ && w == w_) return;
    c_ = c;
    h_ = h;
    w_ = w;
    v_.assign(size_t(c) * h * w, T(0));
  }

  Grid<T> to_grid(int ci = 0) const {
    Grid<T> g(h_, w_);
    const T* src = channel(ci);
    std::copy(src, src + plane(), g.data());
    return g;
  }

  static Tensor from_grid(const Grid<T>& g) {
    Tensor t(1, g.h(), g.w());
    std::copy(g.data(), g.data() + g.size(), t.data());
    return t;
  }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> v_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace wda

#endif  // WDA_TENSOR_HPP_
