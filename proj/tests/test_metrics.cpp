#include <doctest.h>

#include <algorithm>
#include <map>

#include "oracles.hpp"
#include "testutil.hpp"
#include "wda/metrics.hpp"
#include "wda/rng.hpp"

using namespace wda;
using namespace wda::metrics;

namespace {

Mask rect_mask(int h, int w, int y0, int x0, int y1, int x1) {
  Mask m(h, w, 0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m.at(y, x) = 1;
  return m;
}

InstanceMap relabel_permuted(const InstanceMap& m, Rng& rng) {
  int n = 0;
  for (size_t i = 0; i < m.size(); ++i) n = std::max(n, m[i]);
  std::vector<int> perm(n + 1);
  for (int i = 0; i <= n; ++i) perm[i] = i;
  rng.shuffle(perm.begin() + 1, perm.end());
  InstanceMap out(m.h(), m.w(), 0);
  for (size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? perm[m[i]] : 0;
  return out;
}

}  // namespace

TEST_CASE("dsc") {
  const Mask a = rect_mask(8, 8, 0, 0, 2, 2);
  CHECK(dsc(a, a) == 1.0);

  const Mask b = rect_mask(8, 8, 4, 4, 6, 6);
  CHECK(dsc(a, b) == 0.0);

  // |a|=4, |b|=4, overlap 2 -> 2*2/8 = 0.5
  const Mask c = rect_mask(8, 8, 0, 1, 2, 3);
  CHECK(dsc(a, c) == 0.5);

  const Mask e1(8, 8, 0), e2(8, 8, 0);
  CHECK(dsc(e1, e2) == 1.0);
  CHECK_THROWS_AS(dsc(a, Mask(4, 4, 0)), ArgumentError);
}

TEST_CASE("aji hand examples") {
  SUBCASE("perfect prediction") {
    Rng rng(21);
    const InstanceMap m = testutil::random_instances(12, 12, 3, rng);
    CHECK(aji(m, m) == 1.0);
  }

  SUBCASE("single 4px instances overlapping by 2 -> 2/6") {
    InstanceMap gt(6, 6, 0), pred(6, 6, 0);
    for (int x = 0; x < 4; ++x) gt.at(1, x) = 1;
    for (int x = 2; x < 6; ++x) pred.at(1, x) = 1;
    CHECK(aji(gt, pred) == doctest::Approx(2.0 / 6.0));

    // An extra unmatched 3px prediction grows the denominator to 9.
    for (int x = 0; x < 3; ++x) pred.at(4, x) = 2;
    CHECK(aji(gt, pred) == doctest::Approx(2.0 / 9.0));
  }
}

TEST_CASE("pq hand examples") {
  SUBCASE("perfect prediction") {
    Rng rng(22);
    const InstanceMap m = testutil::random_instances(12, 12, 3, rng);
    const PqResult r = pq(m, m);
    CHECK(r.pq == 1.0);
    CHECK(r.sq == 1.0);
    CHECK(r.rq == 1.0);
  }

  SUBCASE("single pair with IoU 0.6") {
    // gt 10px row, pred shifted by 2: inter 8... use areas to hit 0.6:
    // inter 6, union 10 -> gt 8px, pred 8px, overlap 6.
    InstanceMap gt(4, 12, 0), pred(4, 12, 0);
    for (int x = 0; x < 8; ++x) gt.at(1, x) = 1;
    for (int x = 2; x < 10; ++x) pred.at(1, x) = 1;
    const PqResult r = pq(gt, pred);
    CHECK(r.tp == 1);
    CHECK(r.pq == doctest::Approx(0.6));
  }

  SUBCASE("IoU below threshold counts FP and FN") {
    InstanceMap gt(4, 12, 0), pred(4, 12, 0);
    for (int x = 0; x < 8; ++x) gt.at(1, x) = 1;   // area 8
    for (int x = 4; x < 12; ++x) pred.at(1, x) = 1;  // overlap 4, union 12
    const PqResult r = pq(gt, pred);
    CHECK(r.tp == 0);
    CHECK(r.fp == 1);
    CHECK(r.fn == 1);
    CHECK(r.pq == 0.0);
  }

  SUBCASE("both empty scores 1") {
    const InstanceMap e(6, 6, 0);
    CHECK(pq(e, e).pq == 1.0);
  }
}

TEST_CASE("aji and pq match brute-force enumeration on random maps") {
  Rng rng(20240209);
  for (int trial = 0; trial < 60; ++trial) {
    const int h = 4 + rng.uniform_int(13), w = 4 + rng.uniform_int(13);
    const InstanceMap gt = testutil::random_instances(h, w, 4, rng);
    const InstanceMap pred = testutil::random_instances(h, w, 4, rng);
    CHECK(aji(gt, pred) == oracles::brute_aji(gt, pred));
    const PqResult fast = pq(gt, pred);
    const oracles::BrutePq ref = oracles::brute_pq(gt, pred);
    CHECK(fast.pq == ref.pq);
    CHECK(fast.sq == ref.sq);
    CHECK(fast.rq == ref.rq);
    CHECK(fast.tp == ref.tp);
    CHECK(fast.fp == ref.fp);
    CHECK(fast.fn == ref.fn);
  }
}

TEST_CASE("instance id permutation changes nothing") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const InstanceMap gt = testutil::random_instances(14, 14, 4, rng);
    const InstanceMap pred = testutil::random_instances(14, 14, 4, rng);
    const InstanceMap perm = relabel_permuted(pred, rng);
    CHECK(aji(gt, pred) == doctest::Approx(aji(gt, perm)).epsilon(1e-12));
    CHECK(pq(gt, pred).pq == doctest::Approx(pq(gt, perm).pq).epsilon(1e-12));
  }
}

TEST_CASE("count_error rounds the prediction") {
  CHECK(count_error(4.4, 4) == 0.0);
  CHECK(count_error(5.6, 4) == 2.0);
  CHECK(count_error(3.5, 4) == 0.0);
}
