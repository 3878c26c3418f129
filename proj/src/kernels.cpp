#include "wda/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wda::kernels {

Backend& default_backend() {
  static Backend b = Backend::kParallel;
  return b;
}

namespace {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// One conv runs at a time (parallelism lives inside the kernel), so a single
// scratch buffer per scalar type is enough for the im2col form.
template <typename T>
T* scratch(size_t n) {
  static std::vector<T> buf;
  if (buf.size() < n) buf.resize(n);
  return buf.data();
}

// ---------------------------------------------------------------------------
// Serial reference implementations. Plain loops, no blocking; these define
// the semantics the parallel path is tested against.
// ---------------------------------------------------------------------------

template <typename T>
void conv2d_forward_serial(const ConvShape& s, const T* x, const T* w,
                           const T* bias, T* y) {
  const int oh = s.out_h(), ow = s.out_w();
  for (int co = 0; co < s.out_c; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T acc = bias ? bias[co] : T(0);
        for (int ci = 0; ci < s.in_c; ++ci) {
          for (int ky = 0; ky < s.kh; ++ky) {
            const int iy = oy * s.stride - s.pad_h + ky;
            if (iy < 0 || iy >= s.in_h) continue;
            for (int kx = 0; kx < s.kw; ++kx) {
              const int ix = ox * s.stride - s.pad_w + kx;
              if (ix < 0 || ix >= s.in_w) continue;
              acc += w[((size_t(co) * s.in_c + ci) * s.kh + ky) * s.kw + kx] *
                     x[(size_t(ci) * s.in_h + iy) * s.in_w + ix];
            }
          }
        }
        y[(size_t(co) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

template <typename T>
void conv2d_backward_input_serial(const ConvShape& s, const T* w, const T* dy,
                                  T* dx) {
  const int oh = s.out_h(), ow = s.out_w();
  std::fill(dx, dx + size_t(s.in_c) * s.in_h * s.in_w, T(0));
  for (int co = 0; co < s.out_c; ++co) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T g = dy[(size_t(co) * oh + oy) * ow + ox];
        for (int ci = 0; ci < s.in_c; ++ci) {
          for (int ky = 0; ky < s.kh; ++ky) {
            const int iy = oy * s.stride - s.pad_h + ky;
            if (iy < 0 || iy >= s.in_h) continue;
            for (int kx = 0; kx < s.kw; ++kx) {
              const int ix = ox * s.stride - s.pad_w + kx;
              if (ix < 0 || ix >= s.in_w) continue;
              dx[(size_t(ci) * s.in_h + iy) * s.in_w + ix] +=
                  g * w[((size_t(co) * s.in_c + ci) * s.kh + ky) * s.kw + kx];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_params_serial(const ConvShape& s, const T* x, const T* dy,
                                   T* dw, T* dbias) {
  const int oh = s.out_h(), ow = s.out_w();
  for (int co = 0; co < s.out_c; ++co) {
    T bsum = T(0);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T g = dy[(size_t(co) * oh + oy) * ow + ox];
        bsum += g;
        for (int ci = 0; ci < s.in_c; ++ci) {
          for (int ky = 0; ky < s.kh; ++ky) {
            const int iy = oy * s.stride - s.pad_h + ky;
            if (iy < 0 || iy >= s.in_h) continue;
            for (int kx = 0; kx < s.kw; ++kx) {
              const int ix = ox * s.stride - s.pad_w + kx;
              if (ix < 0 || ix >= s.in_w) continue;
              dw[((size_t(co) * s.in_c + ci) * s.kh + ky) * s.kw + kx] +=
                  g * x[(size_t(ci) * s.in_h + iy) * s.in_w + ix];
            }
          }
        }
      }
    }
    if (dbias) dbias[co] += bsum;
  }
}

// ---------------------------------------------------------------------------
// Blocked GEMM. Register tile MR x NR, k innermost and strictly sequential
// per output element so float results match the serial path bit-for-bit.
// ---------------------------------------------------------------------------

constexpr int kMR = 4;
constexpr int kNR = 32;

template <typename T>
void gemm_block([[maybe_unused]] int M, int N, int K, const T* __restrict a, long as_m,
                long as_k, const T* __restrict b, T* __restrict c, bool accum,
                int m0, int m1, int n0, int n1) {
  T acc[kMR][kNR];
  for (int mb = m0; mb < m1; mb += kMR) {
    const int mm = std::min(kMR, m1 - mb);
    for (int nb = n0; nb < n1; nb += kNR) {
      const int nn = std::min(kNR, n1 - nb);
      if (mm == kMR && nn == kNR) {
        for (int i = 0; i < kMR; ++i)
          for (int j = 0; j < kNR; ++j)
            acc[i][j] = accum ? c[size_t(mb + i) * N + nb + j] : T(0);
        for (int k = 0; k < K; ++k) {
          const T* __restrict brow = b + size_t(k) * N + nb;
          for (int i = 0; i < kMR; ++i) {
            const T av = a[(mb + i) * as_m + k * as_k];
#pragma omp simd
            for (int j = 0; j < kNR; ++j) acc[i][j] += av * brow[j];
          }
        }
        for (int i = 0; i < kMR; ++i)
          for (int j = 0; j < kNR; ++j)
            c[size_t(mb + i) * N + nb + j] = acc[i][j];
      } else {
        for (int i = 0; i < mm; ++i) {
          for (int j = 0; j < nn; ++j) {
            T v = accum ? c[size_t(mb + i) * N + nb + j] : T(0);
            for (int k = 0; k < K; ++k)
              v += a[(mb + i) * as_m + k * as_k] * b[size_t(k) * N + nb + j];
            c[size_t(mb + i) * N + nb + j] = v;
          }
        }
      }
    }
  }
}

template <typename T>
void gemm_impl(int M, int N, int K, const T* a, bool trans_a, const T* b, T* c,
               bool accum, Backend backend) {
  const long as_m = trans_a ? 1 : K;
  const long as_k = trans_a ? M : 1;
  if (backend == Backend::kSerial) {
    for (int m = 0; m < M; ++m) {
      for (int n = 0; n < N; ++n) {
        T v = accum ? c[size_t(m) * N + n] : T(0);
        for (int k = 0; k < K; ++k)
          v += a[m * as_m + k * as_k] * b[size_t(k) * N + n];
        c[size_t(m) * N + n] = v;
      }
    }
    return;
  }
  const int nt = max_threads();
  if (N >= 2 * kNR * nt) {
    // Wide output: split columns, every thread owns a contiguous slab.
    const int chunk = ((N + nt - 1) / nt + kNR - 1) / kNR * kNR;
#pragma omp parallel for schedule(static)
    for (int t = 0; t < nt; ++t) {
      const int n0 = t * chunk;
      const int n1 = std::min(N, n0 + chunk);
      if (n0 < n1) gemm_block(M, N, K, a, as_m, as_k, b, c, accum, 0, M, n0, n1);
    }
  } else {
    // Narrow output (deep discriminator layers): split rows instead.
#pragma omp parallel for schedule(static)
    for (int mb = 0; mb < M; mb += kMR) {
      gemm_block(M, N, K, a, as_m, as_k, b, c, accum, mb,
                 std::min(M, mb + kMR), 0, N);
    }
  }
}

// C[M x J] += A[M x N] . B[J x N]^T; dot products over the long dim N.
// Each (m, j-tile) keeps vector-wide accumulator lanes so every load is
// contiguous; lanes reduce once at the end.
template <typename T>
void gemm_nt_impl(int M, int J, int N, const T* a, const T* b, T* c,
                  Backend backend) {
  constexpr int JT = 4;
  constexpr int VW = 16;
  const bool par = backend == Backend::kParallel;
#pragma omp parallel for schedule(static) if (par)
  for (int m = 0; m < M; ++m) {
    const T* __restrict arow = a + size_t(m) * N;
    for (int j0 = 0; j0 < J; j0 += JT) {
      const int jn = std::min(JT, J - j0);
      T acc[JT][VW] = {};
      const int nv = N / VW * VW;
      for (int n = 0; n < nv; n += VW) {
        const T* __restrict ap = arow + n;
        for (int j = 0; j < jn; ++j) {
          const T* __restrict bp = b + size_t(j0 + j) * N + n;
#pragma omp simd
          for (int v = 0; v < VW; ++v) acc[j][v] += ap[v] * bp[v];
        }
      }
      for (int j = 0; j < jn; ++j) {
        T dot = T(0);
        for (int v = 0; v < VW; ++v) dot += acc[j][v];
        const T* __restrict brow = b + size_t(j0 + j) * N;
        for (int n = nv; n < N; ++n) dot += arow[n] * brow[n];
        c[size_t(m) * J + j0 + j] += dot;
      }
    }
  }
}

template <typename T>
void im2col_impl(const ConvShape& s, const T* x, T* col, Backend backend) {
  const int oh = s.out_h(), ow = s.out_w();
  const size_t on = s.out_n();
  const int K = s.k();
  const bool par = backend == Backend::kParallel;
#pragma omp parallel for schedule(static) if (par)
  for (int k = 0; k < K; ++k) {
    const int ci = k / (s.kh * s.kw);
    const int ky = (k / s.kw) % s.kh;
    const int kx = k % s.kw;
    const T* xp = x + size_t(ci) * s.in_h * s.in_w;
    T* crow = col + size_t(k) * on;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * s.stride - s.pad_h + ky;
      T* dst = crow + size_t(oy) * ow;
      if (iy < 0 || iy >= s.in_h) {
        std::fill(dst, dst + ow, T(0));
        continue;
      }
      const T* srow = xp + size_t(iy) * s.in_w;
      if (s.stride == 1) {
        // Contiguous run of valid columns; pad edges with zero.
        const int x_lo = std::max(0, s.pad_w - kx);
        const int x_hi = std::min(ow, s.in_w + s.pad_w - kx);
        for (int ox = 0; ox < x_lo; ++ox) dst[ox] = T(0);
        if (x_hi > x_lo)
          std::memcpy(dst + x_lo, srow + x_lo - s.pad_w + kx,
                      size_t(x_hi - x_lo) * sizeof(T));
        for (int ox = std::max(x_lo, x_hi); ox < ow; ++ox) dst[ox] = T(0);
      } else {
        for (int ox = 0; ox < ow; ++ox) {
          const int ix = ox * s.stride - s.pad_w + kx;
          dst[ox] = (ix >= 0 && ix < s.in_w) ? srow[ix] : T(0);
        }
      }
    }
  }
}

template <typename T>
void col2im_impl(const ConvShape& s, const T* col, T* x, Backend backend) {
  const int oh = s.out_h(), ow = s.out_w();
  const size_t on = s.out_n();
  const int taps = s.kh * s.kw;
  const bool par = backend == Backend::kParallel;
  std::fill(x, x + size_t(s.in_c) * s.in_h * s.in_w, T(0));
  // Parallel over input channels: each plane is written by one thread only.
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < s.in_c; ++ci) {
    T* xp = x + size_t(ci) * s.in_h * s.in_w;
    for (int t = 0; t < taps; ++t) {
      const int ky = t / s.kw, kx = t % s.kw;
      const T* crow = col + (size_t(ci) * taps + t) * on;
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy * s.stride - s.pad_h + ky;
        if (iy < 0 || iy >= s.in_h) continue;
        T* drow = xp + size_t(iy) * s.in_w;
        const T* srow = crow + size_t(oy) * ow;
        if (s.stride == 1) {
          const int x_lo = std::max(0, s.pad_w - kx);
          const int x_hi = std::min(ow, s.in_w + s.pad_w - kx);
          const T* sp = srow + x_lo;
          T* dp = drow + x_lo - s.pad_w + kx;
#pragma omp simd
          for (int i = 0; i < x_hi - x_lo; ++i) dp[i] += sp[i];
        } else {
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s.stride - s.pad_w + kx;
            if (ix >= 0 && ix < s.in_w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void add_bias_rows(int c, size_t n, const T* bias, T* y) {
  if (!bias) return;
#pragma omp parallel for schedule(static)
  for (int co = 0; co < c; ++co) {
    T* row = y + size_t(co) * n;
    const T b = bias[co];
#pragma omp simd
    for (size_t i = 0; i < n; ++i) row[i] += b;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

template <typename T>
void conv2d_forward(const ConvShape& s, const T* x, const T* w, const T* bias,
                    T* y, Backend backend) {
  if (backend == Backend::kSerial) {
    conv2d_forward_serial(s, x, w, bias, y);
    return;
  }
  const size_t on = s.out_n();
  const bool unit = s.kh == 1 && s.kw == 1 && s.stride == 1 && s.pad_h == 0 && s.pad_w == 0;
  const T* col = x;
  if (!unit) {
    T* buf = scratch<T>(size_t(s.k()) * on);
    im2col_impl(s, x, buf, backend);
    col = buf;
  }
  gemm_impl(s.out_c, int(on), s.k(), w, false, col, y, false, backend);
  add_bias_rows(s.out_c, on, bias, y);
}

template <typename T>
void conv2d_backward_input(const ConvShape& s, const T* w, const T* dy, T* dx,
                           Backend backend) {
  if (backend == Backend::kSerial) {
    conv2d_backward_input_serial(s, w, dy, dx);
    return;
  }
  const size_t on = s.out_n();
  const bool unit = s.kh == 1 && s.kw == 1 && s.stride == 1 && s.pad_h == 0 && s.pad_w == 0;
  if (unit) {
    gemm_impl(s.k(), int(on), s.out_c, w, true, dy, dx, false, backend);
    return;
  }
  T* buf = scratch<T>(size_t(s.k()) * on);
  gemm_impl(s.k(), int(on), s.out_c, w, true, dy, buf, false, backend);
  col2im_impl(s, buf, dx, backend);
}

template <typename T>
void conv2d_backward_params(const ConvShape& s, const T* x, const T* dy, T* dw,
                            T* dbias, Backend backend) {
  if (backend == Backend::kSerial) {
    conv2d_backward_params_serial(s, x, dy, dw, dbias);
    return;
  }
  const size_t on = s.out_n();
  const bool unit = s.kh == 1 && s.kw == 1 && s.stride == 1 && s.pad_h == 0 && s.pad_w == 0;
  const T* col = x;
  if (!unit) {
    T* buf = scratch<T>(size_t(s.k()) * on);
    im2col_impl(s, x, buf, backend);
    col = buf;
  }
  gemm_nt_impl(s.out_c, s.k(), int(on), dy, col, dw, backend);
  if (dbias) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < s.out_c; ++co) {
      const T* row = dy + size_t(co) * on;
      T v = T(0);
#pragma omp simd reduction(+ : v)
      for (size_t i = 0; i < on; ++i) v += row[i];
      dbias[co] += v;
    }
  }
}

template <typename T>
void maxpool2_forward(int c, int h, int w, const T* x, T* y, int32_t* argmax,
                      Backend backend) {
  const int oh = h / 2, ow = w / 2;
  const bool par = backend == Backend::kParallel;
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    const T* xp = x + size_t(ci) * h * w;
    T* yp = y + size_t(ci) * oh * ow;
    int32_t* ap = argmax + size_t(ci) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int i00 = (2 * oy) * w + 2 * ox;
        int32_t best = i00;
        T bv = xp[i00];
        const int cand[3] = {i00 + 1, i00 + w, i00 + w + 1};
        for (int k = 0; k < 3; ++k)
          if (xp[cand[k]] > bv) bv = xp[cand[k]], best = cand[k];
        yp[size_t(oy) * ow + ox] = bv;
        ap[size_t(oy) * ow + ox] = best;
      }
    }
  }
}

template <typename T>
void maxpool2_backward(int c, int h, int w, const int32_t* argmax, const T* dy,
                       T* dx, Backend backend) {
  const int oh = h / 2, ow = w / 2;
  const bool par = backend == Backend::kParallel;
  std::fill(dx, dx + size_t(c) * h * w, T(0));
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    const T* gp = dy + size_t(ci) * oh * ow;
    const int32_t* ap = argmax + size_t(ci) * oh * ow;
    T* dp = dx + size_t(ci) * h * w;
    for (size_t i = 0; i < size_t(oh) * ow; ++i) dp[ap[i]] += gp[i];
  }
}

template <typename T>
void avgpool2_forward(int c, int h, int w, const T* x, T* y, Backend backend) {
  const int oh = h / 2, ow = w / 2;
  const bool par = backend == Backend::kParallel;
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    const T* xp = x + size_t(ci) * h * w;
    T* yp = y + size_t(ci) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const T* r0 = xp + size_t(2 * oy) * w;
      const T* r1 = r0 + w;
      T* out = yp + size_t(oy) * ow;
      for (int ox = 0; ox < ow; ++ox)
        out[ox] = (r0[2 * ox] + r0[2 * ox + 1] + r1[2 * ox] + r1[2 * ox + 1]) *
                  T(0.25);
    }
  }
}

template <typename T>
void avgpool2_backward(int c, int h, int w, const T* dy, T* dx,
                       Backend backend) {
  const int oh = h / 2, ow = w / 2;
  const bool par = backend == Backend::kParallel;
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    const T* gp = dy + size_t(ci) * oh * ow;
    T* dp = dx + size_t(ci) * h * w;
    for (int oy = 0; oy < oh; ++oy) {
      const T* g = gp + size_t(oy) * ow;
      T* r0 = dp + size_t(2 * oy) * w;
      T* r1 = r0 + w;
      for (int ox = 0; ox < ow; ++ox) {
        const T v = g[ox] * T(0.25);
        r0[2 * ox] = v;
        r0[2 * ox + 1] = v;
        r1[2 * ox] = v;
        r1[2 * ox + 1] = v;
      }
    }
  }
}

template <typename T>
void upsample2_forward(int c, int h, int w, const T* x, T* y, Backend backend) {
  const int oh = 2 * h, ow = 2 * w;
  const bool par = backend == Backend::kParallel;
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    const T* xp = x + size_t(ci) * h * w;
    T* yp = y + size_t(ci) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const T* srow = xp + size_t(oy / 2) * w;
      T* drow = yp + size_t(oy) * ow;
      for (int ox = 0; ox < ow; ++ox) drow[ox] = srow[ox / 2];
    }
  }
}

template <typename T>
void upsample2_backward(int c, int h, int w, const T* dy, T* dx,
                        Backend backend) {
  // h, w are the *input* (coarse) dims; dy is 2h x 2w.
  const int oh = 2 * h, ow = 2 * w;
  const bool par = backend == Backend::kParallel;
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    const T* gp = dy + size_t(ci) * oh * ow;
    T* dp = dx + size_t(ci) * h * w;
    for (int y = 0; y < h; ++y) {
      const T* g0 = gp + size_t(2 * y) * ow;
      const T* g1 = g0 + ow;
      T* drow = dp + size_t(y) * w;
      for (int x = 0; x < w; ++x)
        drow[x] = g0[2 * x] + g0[2 * x + 1] + g1[2 * x] + g1[2 * x + 1];
    }
  }
}

template <typename T>
void gemm(int M, int N, int K, const T* A, bool trans_a, const T* B, T* C,
          bool accumulate, Backend backend) {
  gemm_impl(M, N, K, A, trans_a, B, C, accumulate, backend);
}

template <typename T>
void gemm_nt(int M, int J, int N, const T* A, const T* B, T* C,
             Backend backend) {
  gemm_nt_impl(M, J, N, A, B, C, backend);
}

template <typename T>
void im2col(const ConvShape& s, const T* x, T* col, Backend backend) {
  im2col_impl(s, x, col, backend);
}

template <typename T>
void col2im(const ConvShape& s, const T* col, T* x, Backend backend) {
  col2im_impl(s, col, x, backend);
}

#define WDA_INSTANTIATE(T)                                                     \
  template void conv2d_forward<T>(const ConvShape&, const T*, const T*,        \
                                  const T*, T*, Backend);                      \
  template void conv2d_backward_input<T>(const ConvShape&, const T*, const T*, \
                                         T*, Backend);                         \
  template void conv2d_backward_params<T>(const ConvShape&, const T*,          \
                                          const T*, T*, T*, Backend);          \
  template void maxpool2_forward<T>(int, int, int, const T*, T*, int32_t*,     \
                                    Backend);                                  \
  template void maxpool2_backward<T>(int, int, int, const int32_t*, const T*,  \
                                     T*, Backend);                             \
  template void avgpool2_forward<T>(int, int, int, const T*, T*, Backend);     \
  template void avgpool2_backward<T>(int, int, int, const T*, T*, Backend);     \
  template void upsample2_forward<T>(int, int, int, const T*, T*, Backend);    \
  template void upsample2_backward<T>(int, int, int, const T*, T*, Backend);   \
  template void gemm<T>(int, int, int, const T*, bool, const T*, T*, bool,     \
                        Backend);                                              \
  template void gemm_nt<T>(int, int, int, const T*, const T*, T*, Backend);    \
  template void im2col<T>(const ConvShape&, const T*, T*, Backend);            \
  template void col2im<T>(const ConvShape&, const T*, T*, Backend);

WDA_INSTANTIATE(float)
WDA_INSTANTIATE(double)

#undef WDA_INSTANTIATE

}  // namespace wda::kernels
