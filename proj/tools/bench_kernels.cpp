// Times the serial reference kernels against the OpenMP path on the layer
// shapes the networks actually run, and reports effective GFLOP/s.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "wda/kernels.hpp"
#include "wda/rng.hpp"

using namespace wda;
using kernels::Backend;
using kernels::ConvShape;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

template <typename F>
double best_of(int reps, F&& fn) {
  double best = 1e30;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_ms();
    fn();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

struct Case {
  const char* name;
  ConvShape s;
};

void bench_conv(const Case& c) {
  Rng rng(1);
  std::vector<float> x(size_t(c.s.in_c) * c.s.in_h * c.s.in_w);
  std::vector<float> w(size_t(c.s.out_c) * c.s.k());
  std::vector<float> b(c.s.out_c);
  std::vector<float> y(size_t(c.s.out_c) * c.s.out_n());
  std::vector<float> dy(y.size()), dx(x.size()), dw(w.size()), db(b.size());
  for (auto& v : x) v = float(rng.normal());
  for (auto& v : w) v = float(rng.normal());
  for (auto& v : dy) v = float(rng.normal());

  const double flops_fwd = 2.0 * double(c.s.out_c) * double(c.s.k()) *
                           double(c.s.out_n());

  const double ser = best_of(3, [&] {
    kernels::conv2d_forward(c.s, x.data(), w.data(), b.data(), y.data(),
                            Backend::kSerial);
  });
  const double par = best_of(5, [&] {
    kernels::conv2d_forward(c.s, x.data(), w.data(), b.data(), y.data(),
                            Backend::kParallel);
  });
  const double par_bi = best_of(5, [&] {
    kernels::conv2d_backward_input(c.s, w.data(), dy.data(), dx.data(),
                                   Backend::kParallel);
  });
  const double par_bw = best_of(5, [&] {
    kernels::conv2d_backward_params(c.s, x.data(), dy.data(), dw.data(),
                                    db.data(), Backend::kParallel);
  });
  std::printf(
      "%-28s fwd  serial %8.2f ms | omp %7.2f ms | x%5.1f | %6.1f GF/s\n",
      c.name, ser, par, ser / par, flops_fwd / (par * 1e6));
  std::printf("%-28s bwd_in  omp %7.2f ms (%5.1f GF/s)   bwd_w omp %7.2f ms "
              "(%5.1f GF/s)\n",
              "", par_bi, flops_fwd / (par_bi * 1e6), par_bw,
              flops_fwd / (par_bw * 1e6));
}

}  // namespace

int main() {
  const Case cases[] = {
      {"enc0 1x3 (1->16) 256^2", {1, 256, 256, 16, 1, 3, 1, 0, 1}},
      {"dec0 1x3 (16->16) 256^2", {16, 256, 256, 16, 1, 3, 1, 0, 1}},
      {"dec0 3x1 (16->16) 256^2", {16, 256, 256, 16, 3, 1, 1, 1, 0}},
      {"dec0 pw  (16->16) 256^2", {16, 256, 256, 16, 1, 1, 1, 0, 0}},
      {"dec1 1x3 (32->32) 128^2", {32, 128, 128, 32, 1, 3, 1, 0, 1}},
      {"enc3 1x3 (64->128) 32^2", {64, 32, 32, 128, 1, 3, 1, 0, 1}},
      {"proj0 pw (32->16) 256^2", {32, 256, 256, 16, 1, 1, 1, 0, 0}},
      {"std 3x3 (16->16) 256^2", {16, 256, 256, 16, 3, 3, 1, 1, 1}},
      {"disc 4x4s2 (32->64) 64^2", {32, 64, 64, 64, 4, 4, 2, 1, 1}},
  };
  std::printf("conv kernels, float, best-of runs\n");
  for (const auto& c : cases) bench_conv(c);

  // Full-iteration proxy: the sum over one G1 forward's conv shapes.
  return 0;
}
