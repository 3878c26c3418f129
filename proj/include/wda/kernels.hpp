#ifndef WDA_KERNELS_HPP_
#define WDA_KERNELS_HPP_

#include <cstdint>
#include <cstddef>

namespace wda::kernels {

// Every kernel comes in two flavors:
//   kSerial   - straightforward loops, kept as the reference implementation
//               for correctness tests and the kernel benchmark.
//   kParallel - OpenMP + cache-blocked (convolutions go through im2col and a
//               register-tiled GEMM). Each output element is accumulated in a
//               fixed k-order by exactly one thread, so results do not depend
//               on the thread count.
enum class Backend { kSerial, kParallel };

// Process-wide default used by the layer classes.
Backend& default_backend();

struct ConvShape {
  int in_c, in_h, in_w;
  int out_c;
  int kh, kw;
  int stride = 1;
  int pad_h = 0;
  int pad_w = 0;

  int out_h() const { return (in_h + 2 * pad_h - kh) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad_w - kw) / stride + 1; }
  int k() const { return in_c * kh * kw; }            // GEMM inner dim
  size_t out_n() const { return size_t(out_h()) * out_w(); }
};

// y = w (*) x + bias. w layout: [out_c][in_c][kh][kw]; bias may be null.
template <typename T>
void conv2d_forward(const ConvShape& s, const T* x, const T* w, const T* bias,
                    T* y, Backend backend);

// dx = w^T (*) dy (full correlation transpose). Overwrites dx.
template <typename T>
void conv2d_backward_input(const ConvShape& s, const T* w, const T* dy, T* dx,
                           Backend backend);

// dw += dy * col(x)^T, dbias += sum(dy). Accumulates into dw/dbias.
template <typename T>
void conv2d_backward_params(const ConvShape& s, const T* x, const T* dy, T* dw,
                            T* dbias, Backend backend);

// 2x2 stride-2 max pooling; h and w must be even. argmax stores the winning
// flat index within each input channel plane.
template <typename T>
void maxpool2_forward(int c, int h, int w, const T* x, T* y, int32_t* argmax,
                      Backend backend);
template <typename T>
void maxpool2_backward(int c, int h, int w, const int32_t* argmax, const T* dy,
                       T* dx, Backend backend);

// 2x2 stride-2 average pooling; h and w must be even.
template <typename T>
void avgpool2_forward(int c, int h, int w, const T* x, T* y, Backend backend);
template <typename T>
void avgpool2_backward(int c, int h, int w, const T* dy, T* dx,
                       Backend backend);

// Nearest-neighbour 2x upsampling.
template <typename T>
void upsample2_forward(int c, int h, int w, const T* x, T* y, Backend backend);
template <typename T>
void upsample2_backward(int c, int h, int w, const T* dy, T* dx,
                        Backend backend);

// C[M x N] (+)= A * B with A either M x K row-major (trans_a = false) or
// K x M row-major interpreted as A^T (trans_a = true).
template <typename T>
void gemm(int M, int N, int K, const T* A, bool trans_a, const T* B, T* C,
          bool accumulate, Backend backend);

// C[M x J] += A[M x N] * B[J x N]^T (both operands row-major, dotted over N).
template <typename T>
void gemm_nt(int M, int J, int N, const T* A, const T* B, T* C,
             Backend backend);

// col[k()][out_n()] scratch form of x; col2im scatters gradients back.
template <typename T>
void im2col(const ConvShape& s, const T* x, T* col, Backend backend);
template <typename T>
void col2im(const ConvShape& s, const T* col, T* x, Backend backend);

}  // namespace wda::kernels

#endif  // WDA_KERNELS_HPP_
