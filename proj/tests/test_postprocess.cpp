#include <doctest.h>

#include "testutil.hpp"
#include "wda/postprocess.hpp"
#include "wda/rng.hpp"

using namespace wda;
using namespace wda::postprocess;

TEST_CASE("filter_with_peaks") {
  SUBCASE("empty peaks clears everything") {
    Mask m(16, 16, 0);
    for (int y = 2; y < 6; ++y)
      for (int x = 2; x < 6; ++x) m.at(y, x) = 1;
    PointSet none;
    none.image_height = none.image_width = 16;
    const Mask out = filter_with_peaks(m, none);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0);
  }

  SUBCASE("keeps only the component containing a peak") {
    Mask m(20, 20, 0);
    for (int y = 2; y < 6; ++y)
      for (int x = 2; x < 6; ++x) m.at(y, x) = 1;
    for (int y = 12; y < 16; ++y)
      for (int x = 12; x < 16; ++x) m.at(y, x) = 1;
    PointSet peaks;
    peaks.image_height = peaks.image_width = 20;
    peaks.points = {{3, 3}};
    const Mask out = filter_with_peaks(m, peaks);
    CHECK(out.at(3, 3) == 1);
    CHECK(out.at(13, 13) == 0);
  }

  SUBCASE("identity when every component has a peak") {
    Mask m(20, 20, 0);
    for (int y = 2; y < 6; ++y)
      for (int x = 2; x < 6; ++x) m.at(y, x) = 1;
    for (int y = 12; y < 16; ++y)
      for (int x = 12; x < 16; ++x) m.at(y, x) = 1;
    PointSet peaks;
    peaks.image_height = peaks.image_width = 20;
    peaks.points = {{3, 3}, {14, 14}};
    CHECK(filter_with_peaks(m, peaks) == m);
  }

  SUBCASE("subset of input and idempotent on random masks") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
      const Mask m = testutil::random_mask(24, 24, 0.35, rng);
      PointSet peaks;
      peaks.image_height = peaks.image_width = 24;
      for (int k = 0; k < 5; ++k)
        peaks.points.push_back({rng.uniform_int(24), rng.uniform_int(24)});
      const Mask f1 = filter_with_peaks(m, peaks);
      for (size_t i = 0; i < m.size(); ++i)
        if (f1[i]) CHECK(m[i]);
      const Mask f2 = filter_with_peaks(f1, peaks);
      CHECK(f1 == f2);
    }
  }
}

TEST_CASE("open_close") {
  SUBCASE("isolated pixel removed at radius 1") {
    Mask m(11, 11, 0);
    m.at(5, 5) = 1;
    const Mask out = open_close(m, 1);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0);
  }

  SUBCASE("large solid square unchanged") {
    Mask m(16, 16, 0);
    for (int y = 4; y < 12; ++y)
      for (int x = 4; x < 12; ++x) m.at(y, x) = 1;
    CHECK(open_close(m, 1) == m);
  }

  SUBCASE("one-pixel hole in a large blob is filled") {
    Mask m(16, 16, 0);
    for (int y = 3; y < 13; ++y)
      for (int x = 3; x < 13; ++x) m.at(y, x) = 1;
    m.at(8, 8) = 0;
    const Mask out = open_close(m, 1);
    CHECK(out.at(8, 8) == 1);
  }

  SUBCASE("idempotent at fixed radius") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const Mask m = testutil::random_mask(24, 24, 0.45, rng);
      const Mask once = open_close(m, 1);
      CHECK(open_close(once, 1) == once);
    }
  }
}

TEST_CASE("label_components uses 4-connectivity, row-major discovery ids") {
  Mask m(6, 6, 0);
  // One component touching (0,0); a diagonal neighbor must be separate.
  m.at(0, 0) = 1;
  m.at(0, 1) = 1;
  m.at(1, 2) = 1;  // diagonal from (0,1): separate under 4-connectivity
  m.at(4, 4) = 1;
  const InstanceMap labels = label_components(m);
  CHECK(labels.at(0, 0) == 1);
  CHECK(labels.at(0, 1) == 1);
  CHECK(labels.at(1, 2) == 2);
  CHECK(labels.at(4, 4) == 3);
  CHECK(labels.at(3, 3) == 0);
}
