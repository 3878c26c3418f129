#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "wda/checkpoint.hpp"
#include "wda/networks.hpp"
#include "wda/optim.hpp"

using namespace wda;
using namespace wda::nn;

namespace {

NetworkConfig tiny_cfg(BlockKind kind = BlockKind::kFactorized) {
  NetworkConfig cfg;
  cfg.base_channels = 8;
  cfg.depth = 2;
  cfg.block_kind = kind;
  return cfg;
}

template <typename T>
Tensor<T> random_input(int h, int w, uint64_t seed) {
  Rng rng(seed);
  Tensor<T> x(1, h, w);
  for (size_t i = 0; i < x.size(); ++i) x[i] = T(rng.uniform());
  return x;
}

template <typename T>
size_t param_count(std::vector<Param<T>*> ps) {
  size_t n = 0;
  for (auto* p : ps) n += p->size();
  return n;
}

}  // namespace

TEST_CASE("g1 forward contracts") {
  G1<float> g1(tiny_cfg(), 17);
  const Backend be = Backend::kParallel;

  SUBCASE("output shapes and the per-pixel simplex") {
    const auto x = random_input<float>(64, 64, 3);
    const auto out = g1.forward(x, be);
    REQUIRE(out.seg_probs != nullptr);
    CHECK(out.seg_probs->c() == 2);
    CHECK(out.seg_probs->h() == 64);
    CHECK(out.seg_probs->w() == 64);
    REQUIRE(out.det_heatmap != nullptr);
    CHECK(out.det_heatmap->c() == 1);
    CHECK(out.count_estimate >= 0.0f);
    const auto& p = *out.seg_probs;
    const size_t n = p.plane();
    for (size_t i = 0; i < n; ++i)
      CHECK(std::abs(p[i] + p[n + i] - 1.0f) < 1e-6f);
  }

  SUBCASE("constant-zero input stays finite") {
    Tensor<float> x(1, 32, 32);
    const auto out = g1.forward(x, be);
    for (size_t i = 0; i < out.seg_probs->size(); ++i)
      CHECK(std::isfinite((*out.seg_probs)[i]));
    for (size_t i = 0; i < out.det_heatmap->size(); ++i)
      CHECK(std::isfinite((*out.det_heatmap)[i]));
    CHECK(std::isfinite(out.count_estimate));
  }

  SUBCASE("deterministic forward") {
    const auto x = random_input<float>(32, 32, 4);
    const auto a = g1.forward(x, be);
    const float c1 = a.count_estimate;
    Tensor<float> p1 = *a.seg_probs;
    const auto b = g1.forward(x, be);
    CHECK(c1 == b.count_estimate);
    CHECK(p1.data()[100] == b.seg_probs->data()[100]);
  }

  SUBCASE("bad input size is rejected") {
    NetworkConfig deep = tiny_cfg();
    deep.depth = 4;
    G1<float> g(deep, 1);
    const auto x = random_input<float>(36, 36, 5);  // not divisible by 8
    CHECK_THROWS_AS(g.forward(x, be), ValidationError);
  }
}

TEST_CASE("factorized blocks undercut the standard variant's parameter count") {
  NetworkConfig cfg;
  cfg.base_channels = 16;
  cfg.depth = 4;
  cfg.block_kind = BlockKind::kFactorized;
  G1<float> fact(cfg, 1);
  cfg.block_kind = BlockKind::kStandard;
  G1<float> stan(cfg, 1);
  const size_t nf = param_count(fact.parameters());
  const size_t ns = param_count(stan.parameters());
  CHECK(nf < ns);
  MESSAGE("factorized params: ", nf, ", standard params: ", ns);
}

TEST_CASE("invalid configs are rejected") {
  NetworkConfig cfg;
  cfg.depth = 1;
  CHECK_THROWS_AS(G1<float>(cfg, 1), ValidationError);
  cfg.depth = 2;
  cfg.base_channels = 4;
  CHECK_THROWS_AS(G1<float>(cfg, 1), ValidationError);
}

TEST_CASE("g2") {
  const Backend be = Backend::kParallel;

  SUBCASE("scalar non-negative output at multiple scales") {
    G2<float> g2(tiny_cfg(), 5);
    for (int size : {64, 96, 128}) {
      const auto x = random_input<float>(size, size, size);
      CHECK(g2.forward(x, be) >= 0.0f);
    }
  }

  SUBCASE("accepts the full-scale multi-scale ladder") {
    G2<float> g2(tiny_cfg(), 5);
    for (int size : {512, 768, 1024}) {
      const auto x = random_input<float>(size, size, size);
      CHECK(std::isfinite(g2.forward(x, be)));
    }
  }

  SUBCASE("init from G1 copies the trunk and stays deterministic") {
    G1<float> g1(tiny_cfg(), 21);
    G2<float> g2(tiny_cfg(), 22);
    g2.init_from_g1(g1);
    const auto x = random_input<float>(64, 64, 9);
    const float a = g2.forward(x, be);
    const float b = g2.forward(x, be);
    CHECK(a == b);

    G2<float> wrong(NetworkConfig{.base_channels = 16, .depth = 2}, 1);
    CHECK_THROWS_AS(wrong.init_from_g1(g1), ValidationError);
  }
}

TEST_CASE("discriminator") {
  const Backend be = Backend::kParallel;
  Discriminator<float> d(3, /*ndf=*/8);

  SUBCASE("patch logit extent shrinks by the stride product") {
    Tensor<float> x(2, 64, 64);
    x.fill(0.5f);
    const auto& y = d.forward(x, be);
    CHECK(y.c() == 1);
    CHECK(y.h() == 2);  // 64 / 32
    CHECK(y.w() == 2);
  }

  SUBCASE("finite logits on extreme inputs, deterministic") {
    Tensor<float> zeros(2, 64, 64);
    Tensor<float> ones(2, 64, 64);
    ones.fill(1.0f);
    const auto& y0 = d.forward(zeros, be);
    for (size_t i = 0; i < y0.size(); ++i) CHECK(std::isfinite(y0[i]));
    const auto& y1 = d.forward(ones, be);
    for (size_t i = 0; i < y1.size(); ++i) CHECK(std::isfinite(y1[i]));
    const float v = d.forward(ones, be)[0];
    CHECK(v == d.forward(ones, be)[0]);
  }
}

TEST_CASE("checkpoint round trip is bit exact on parameters") {
  namespace fs = std::filesystem;
  const std::string path =
      (fs::temp_directory_path() / "wda_ckpt_test.wdat").string();
  G1<float> g1(tiny_cfg(), 33);
  std::vector<float> snapshot;
  for (auto* p : g1.parameters())
    snapshot.insert(snapshot.end(), p->w.begin(), p->w.end());
  save_params(g1.parameters(), path);

  G1<float> g2(tiny_cfg(), 99);  // different init
  load_params(g2.parameters(), path);
  size_t k = 0;
  for (auto* p : g2.parameters())
    for (float v : p->w) CHECK(v == snapshot[k++]);

  // Mismatched architecture must fail loudly.
  G1<float> other(NetworkConfig{.base_channels = 16, .depth = 2}, 1);
  CHECK_THROWS_AS(load_params(other.parameters(), path), ValidationError);
  fs::remove(path);
}

TEST_CASE("trunk gradients flow from every head on a generic batch") {
  // Analytic backward against central differences on a scalar probe loss
  // touching each head in turn; double precision throughout.
  G1<double> g1(tiny_cfg(), 55);
  const Backend be = Backend::kParallel;
  const auto x = random_input<double>(16, 16, 7);

  auto seg_probe = [&]() {
    const auto out = g1.forward(x, be);
    double s = 0.0;
    const auto& p = *out.seg_probs;
    for (size_t i = 0; i < p.size(); ++i)
      s += double(p[i]) * (0.3 + 0.01 * double(i % 7));
    return s / double(p.size());
  };
  auto det_probe = [&]() {
    const auto out = g1.forward(x, be);
    double s = 0.0;
    const auto& dmap = *out.det_heatmap;
    for (size_t i = 0; i < dmap.size(); ++i)
      s += double(dmap[i]) * (0.2 + 0.02 * double(i % 5));
    return s / double(dmap.size());
  };
  auto cnt_probe = [&]() { return double(g1.forward(x, be).count_estimate); };

  SUBCASE("segmentation head") {
    const double base = seg_probe();
    (void)base;
    g1.zero_grad();
    const auto out = g1.forward(x, be);
    Tensor<double> dp(2, 16, 16);
    for (size_t i = 0; i < dp.size(); ++i)
      dp[i] = (0.3 + 0.01 * double(i % 7)) / double(dp.size());
    g1.backward(nullptr, &dp, nullptr, 0.0, be);
    // Wiring check with a synthetic probe loss; the acceptance suite runs
    // the strict 1e-4 gate on the real loss terms.
    const auto res =
        gradcheck::check_params<double>(g1.trunk_parameters(), seg_probe,
                                        1e-5, 17);
    CHECK(res.max_rel_err < 2e-4);
    double gmax = 0.0;
    for (auto* p : g1.trunk_parameters())
      for (double g : p->g) gmax = std::max(gmax, std::abs(g));
    CHECK(gmax > 0.0);
  }

  SUBCASE("detection head") {
    g1.zero_grad();
    const auto out = g1.forward(x, be);
    Tensor<double> dd(1, 16, 16);
    for (size_t i = 0; i < dd.size(); ++i)
      dd[i] = (0.2 + 0.02 * double(i % 5)) / double(dd.size());
    g1.backward(nullptr, nullptr, &dd, 0.0, be);
    const auto res =
        gradcheck::check_params<double>(g1.trunk_parameters(), det_probe,
                                        1e-5, 17);
    CHECK(res.max_rel_err < 2e-4);
  }

  SUBCASE("counting readout") {
    g1.zero_grad();
    const auto out = g1.forward(x, be);
    g1.backward(nullptr, nullptr, nullptr, 1.0, be);
    const auto res =
        gradcheck::check_params<double>(g1.trunk_parameters(), cnt_probe,
                                        1e-5, 17);
    CHECK(res.max_rel_err < 2e-4);
  }
}

TEST_CASE("counting readout is roughly shift covariant" *
          doctest::may_fail()) {
  // Soft sanity property: whole-stride shifts of a blob image should move
  // the count estimate by only a few percent. Logged, not load-bearing.
  G1<float> g1(tiny_cfg(), 77);
  Tensor<float> x(1, 64, 64);
  Rng rng(8);
  for (int b = 0; b < 4; ++b) {
    const int cy = 12 + rng.uniform_int(16), cx = 12 + rng.uniform_int(16);
    for (int y = -4; y <= 4; ++y)
      for (int x0 = -4; x0 <= 4; ++x0)
        if (y * y + x0 * x0 <= 16) x.at(0, cy + y, cx + x0) = 0.8f;
  }
  Tensor<float> shifted(1, 64, 64);
  for (int y = 0; y < 64; ++y)
    for (int c = 0; c < 64; ++c)
      shifted.at(0, (y + 16) % 64, (c + 16) % 64) = x.at(0, y, c);
  const float a = g1.forward(x, Backend::kParallel).count_estimate;
  const float b = g1.forward(shifted, Backend::kParallel).count_estimate;
  MESSAGE("count estimates under shift: ", a, " vs ", b);
  if (a > 1e-3f) CHECK(std::abs(a - b) / a < 0.05f);
}

TEST_CASE("optimizers descend a toy objective") {
  // Single conv fit to a fixed linear target.
  Rng rng(31);
  Conv2d<float> conv("toy", 1, 1, 1, 1, 1, 0, 0, rng);
  Tensor<float> x(1, 4, 4);
  for (size_t i = 0; i < x.size(); ++i) x[i] = float(rng.uniform());
  const float target_w = 1.7f, target_b = -0.3f;

  std::vector<Param<float>*> params{&conv.weight(), &conv.bias()};
  Adam<float> opt(params);
  double last = 1e30;
  for (int it = 0; it < 800; ++it) {
    const auto& y = conv.forward(x, Backend::kSerial);
    Tensor<float> dy(1, 4, 4);
    double loss = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
      const float t = target_w * x[i] + target_b;
      const float e = y[i] - t;
      loss += 0.5 * e * e;
      dy[i] = e;
    }
    for (auto* p : params) p->zero_grad();
    conv.backward(dy, nullptr, Backend::kSerial);
    opt.step(params, 0.05);
    last = loss;
  }
  CHECK(last < 1e-4);
  CHECK(conv.weight().w[0] == doctest::Approx(target_w).epsilon(0.01));
}
