#ifndef WDA_LAYERS_HPP_
#define WDA_LAYERS_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "wda/errors.hpp"
#include "wda/kernels.hpp"
#include "wda/rng.hpp"
#include "wda/tensor.hpp"

namespace wda::nn {

using kernels::Backend;
using kernels::ConvShape;

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> w;  // values
  std::vector<T> g;  // gradient accumulator

  size_t size() const { return w.size(); }
  void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }
};

// Caller keeps the input tensor alive between forward() and backward(); the
// network classes own all activations as members, so that holds by design.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_c, int out_c, int kh, int kw, int stride,
         int pad_h, int pad_w, Rng& rng)
      : in_c_(in_c), out_c_(out_c), kh_(kh), kw_(kw), stride_(stride),
        pad_h_(pad_h), pad_w_(pad_w) {
    w_.name = name + ".w";
    w_.shape = {out_c, in_c, kh, kw};
    w_.w.resize(size_t(out_c) * in_c * kh * kw);
    w_.g.assign(w_.w.size(), T(0));
    b_.name = name + ".b";
    b_.shape = {out_c};
    b_.w.resize(out_c);
    b_.g.assign(out_c, T(0));
    const double std = std::sqrt(2.0 / (double(in_c) * kh * kw));
    for (auto& v : w_.w) v = T(rng.normal(0.0, std));
    // Small nonzero bias keeps pre-activations off the exact ReLU kink even
    // on pixels where every hidden unit is inactive.
    for (auto& v : b_.w) v = T(rng.uniform(-0.05, 0.05));
  }

  const Tensor<T>& forward(const Tensor<T>& x, Backend be) {
    x_ = &x;
    shape_ = ConvShape{x.c(), x.h(), x.w(), out_c_, kh_, kw_,
                       stride_, pad_h_, pad_w_};
    if (x.c() != in_c_) throw ValidationError(w_.name + ": channel mismatch");
    y_.resize(out_c_, shape_.out_h(), shape_.out_w());
    kernels::conv2d_forward(shape_, x.data(), w_.w.data(), b_.w.data(),
                            y_.data(), be);
    return y_;
  }

  // Accumulates parameter gradients; writes input gradients when dx != null.
  void backward(const Tensor<T>& dy, Tensor<T>* dx, Backend be) {
    kernels::conv2d_backward_params(shape_, x_->data(), dy.data(), w_.g.data(),
                                    b_.g.data(), be);
    if (dx) {
      dx->resize(shape_.in_c, shape_.in_h, shape_.in_w);
      kernels::conv2d_backward_input(shape_, w_.w.data(), dy.data(), dx->data(),
                                     be);
    }
  }

  const Tensor<T>& output() const { return y_; }
  void scale_weights(T factor) {
    for (T& v : w_.w) v *= factor;
    for (T& v : b_.w) v *= factor;
  }
  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }
  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&w_);
    out.push_back(&b_);
  }
  int out_c() const { return out_c_; }

 private:
  int in_c_ = 0, out_c_ = 0, kh_ = 0, kw_ = 0, stride_ = 1;
  int pad_h_ = 0, pad_w_ = 0;
  ConvShape shape_{};
  const Tensor<T>* x_ = nullptr;
  Tensor<T> y_;
  Param<T> w_, b_;
};

// ---- activations -----------------------------------------------------------

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
  y.resize(x.c(), x.h(), x.w());
  const T* xi = x.data();
  T* yo = y.data();
#pragma omp simd
  for (size_t i = 0; i < x.size(); ++i) yo[i] = xi[i] > T(0) ? xi[i] : T(0);
}

template <typename T>
void relu_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
  dx.resize(y.c(), y.h(), y.w());
  const T* yi = y.data();
  const T* gi = dy.data();
  T* go = dx.data();
#pragma omp simd
  for (size_t i = 0; i < y.size(); ++i) go[i] = yi[i] > T(0) ? gi[i] : T(0);
}

template <typename T>
void leaky_relu_forward(const Tensor<T>& x, T slope, Tensor<T>& y) {
  y.resize(x.c(), x.h(), x.w());
  const T* xi = x.data();
  T* yo = y.data();
#pragma omp simd
  for (size_t i = 0; i < x.size(); ++i)
    yo[i] = xi[i] > T(0) ? xi[i] : slope * xi[i];
}

template <typename T>
void leaky_relu_backward(const Tensor<T>& y, T slope, const Tensor<T>& dy,
                         Tensor<T>& dx) {
  dx.resize(y.c(), y.h(), y.w());
  const T* yi = y.data();
  const T* gi = dy.data();
  T* go = dx.data();
#pragma omp simd
  for (size_t i = 0; i < y.size(); ++i)
    go[i] = yi[i] > T(0) ? gi[i] : slope * gi[i];
}

// softplus(x) = log(1 + e^x), computed stably; derivative recovered from the
// output as sigmoid(x) = 1 - e^{-y}.
template <typename T>
void softplus_forward(const Tensor<T>& x, Tensor<T>& y) {
  y.resize(x.c(), x.h(), x.w());
  const T* xi = x.data();
  T* yo = y.data();
  for (size_t i = 0; i < x.size(); ++i) {
    const T v = xi[i];
    yo[i] = v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
}

template <typename T>
void softplus_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
  dx.resize(y.c(), y.h(), y.w());
  const T* yi = y.data();
  const T* gi = dy.data();
  T* go = dx.data();
  for (size_t i = 0; i < y.size(); ++i)
    go[i] = gi[i] * (T(1) - std::exp(-yi[i]));
}

// ---- channel softmax --------------------------------------------------------

template <typename T>
void softmax_forward(const Tensor<T>& z, Tensor<T>& p) {
  p.resize(z.c(), z.h(), z.w());
  const int c = z.c();
  const size_t n = z.plane();
  for (size_t i = 0; i < n; ++i) {
    T mx = z[i];
    for (int l = 1; l < c; ++l) mx = std::max(mx, z[l * n + i]);
    T sum = T(0);
    for (int l = 0; l < c; ++l) {
      const T e = std::exp(z[l * n + i] - mx);
      p[l * n + i] = e;
      sum += e;
    }
    for (int l = 0; l < c; ++l) p[l * n + i] /= sum;
  }
}

// dz_l = p_l * (dp_l - sum_k dp_k p_k); accumulates into dz.
template <typename T>
void softmax_backward_accum(const Tensor<T>& p, const Tensor<T>& dp,
                            Tensor<T>& dz) {
  const int c = p.c();
  const size_t n = p.plane();
  for (size_t i = 0; i < n; ++i) {
    T dot = T(0);
    for (int l = 0; l < c; ++l) dot += dp[l * n + i] * p[l * n + i];
    for (int l = 0; l < c; ++l)
      dz[l * n + i] += p[l * n + i] * (dp[l * n + i] - dot);
  }
}

// ---- pooling / upsampling ---------------------------------------------------

template <typename T>
class MaxPool2 {
 public:
  const Tensor<T>& forward(const Tensor<T>& x, Backend be) {
    if (x.h() % 2 || x.w() % 2)
      throw ValidationError("maxpool: odd input size");
    c_ = x.c();
    h_ = x.h();
    w_ = x.w();
    y_.resize(c_, h_ / 2, w_ / 2);
    argmax_.resize(y_.size());
    kernels::maxpool2_forward(c_, h_, w_, x.data(), y_.data(), argmax_.data(),
                              be);
    return y_;
  }
  void backward(const Tensor<T>& dy, Tensor<T>& dx, Backend be) {
    dx.resize(c_, h_, w_);
    kernels::maxpool2_backward(c_, h_, w_, argmax_.data(), dy.data(), dx.data(),
                               be);
  }
  const Tensor<T>& output() const { return y_; }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
  Tensor<T> y_;
  std::vector<int32_t> argmax_;
};

template <typename T>
class AvgPool2 {
 public:
  const Tensor<T>& forward(const Tensor<T>& x, Backend be) {
    if (x.h() % 2 || x.w() % 2)
      throw ValidationError("avgpool: odd input size");
    c_ = x.c();
    h_ = x.h();
    w_ = x.w();
    y_.resize(c_, h_ / 2, w_ / 2);
    kernels::avgpool2_forward(c_, h_, w_, x.data(), y_.data(), be);
    return y_;
  }
  void backward(const Tensor<T>& dy, Tensor<T>& dx, Backend be) {
    dx.resize(c_, h_, w_);
    kernels::avgpool2_backward(c_, h_, w_, dy.data(), dx.data(), be);
  }
  const Tensor<T>& output() const { return y_; }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
  Tensor<T> y_;
};

template <typename T>
class Upsample2 {
 public:
  const Tensor<T>& forward(const Tensor<T>& x, Backend be) {
    c_ = x.c();
    h_ = x.h();
    w_ = x.w();
    y_.resize(c_, 2 * h_, 2 * w_);
    kernels::upsample2_forward(c_, h_, w_, x.data(), y_.data(), be);
    return y_;
  }
  void backward(const Tensor<T>& dy, Tensor<T>& dx, Backend be) {
    dx.resize(c_, h_, w_);
    kernels::upsample2_backward(c_, h_, w_, dy.data(), dx.data(), be);
  }
  const Tensor<T>& output() const { return y_; }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
  Tensor<T> y_;
};

// ---- elementwise helpers ----------------------------------------------------

template <typename T>
void add_into(Tensor<T>& acc, const Tensor<T>& x) {
  const T* xi = x.data();
  T* a = acc.data();
#pragma omp simd
  for (size_t i = 0; i < acc.size(); ++i) a[i] += xi[i];
}

}  // namespace wda::nn

#endif  // WDA_LAYERS_HPP_
