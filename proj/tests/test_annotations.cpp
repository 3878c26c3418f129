#include <doctest.h>

#include <cmath>
#include <set>

#include "wda/annotations.hpp"
#include "wda/errors.hpp"
#include "wda/rng.hpp"

using namespace wda;
using namespace wda::annotations;

TEST_CASE("instance_centers basic geometry") {
  SUBCASE("empty map") {
    InstanceMap m(10, 10, 0);
    CHECK(instance_centers(m).empty());
  }

  SUBCASE("3x3 square centered at (5,5)") {
    InstanceMap m(12, 12, 0);
    for (int y = 4; y <= 6; ++y)
      for (int x = 4; x <= 6; ++x) m.at(y, x) = 1;
    const PointSet ps = instance_centers(m);
    REQUIRE(ps.size() == 1);
    CHECK(ps.points[0] == Point{5, 5});
  }

  SUBCASE("L-shape rounds into the instance") {
    InstanceMap m(8, 8, 0);
    m.at(2, 2) = m.at(2, 3) = m.at(3, 2) = 1;
    const PointSet ps = instance_centers(m);
    REQUIRE(ps.size() == 1);
    CHECK(ps.points[0] == Point{2, 2});
  }

  SUBCASE("concave ring snaps to the nearest pixel, row-major ties") {
    // Hollow 5x5 ring: centroid lands on the empty middle.
    InstanceMap m(9, 9, 0);
    for (int y = 2; y <= 6; ++y)
      for (int x = 2; x <= 6; ++x)
        if (y == 2 || y == 6 || x == 2 || x == 6) m.at(y, x) = 1;
    const PointSet ps = instance_centers(m);
    REQUIRE(ps.size() == 1);
    // Centroid is (4,4); nearest ring pixels are at distance 2; the first in
    // row-major order is (2,4).
    CHECK(ps.points[0] == Point{2, 4});
  }
}

TEST_CASE("sample_sparse_points") {
  PointSet full;
  full.image_height = full.image_width = 100;
  Rng rng(5);
  std::set<Point> uniq;
  while (uniq.size() < 20)
    uniq.insert({rng.uniform_int(100), rng.uniform_int(100)});
  full.points.assign(uniq.begin(), uniq.end());

  SUBCASE("ratio 1 returns the identical set") {
    PointSet s = sample_sparse_points(full, 1.0, 9);
    CHECK(s.points == full.points);
  }

  SUBCASE("ratio 0.15 of 20 points keeps 3, all members") {
    const PointSet s = sample_sparse_points(full, 0.15, 9);
    CHECK(s.size() == 3);
    for (const Point& p : s.points) CHECK(uniq.count(p) == 1);
  }

  SUBCASE("ratio 0 empties; out-of-range throws") {
    CHECK(sample_sparse_points(full, 0.0, 9).empty());
    CHECK_THROWS_AS(sample_sparse_points(full, -0.1, 9), ArgumentError);
    CHECK_THROWS_AS(sample_sparse_points(full, 1.1, 9), ArgumentError);
  }

  SUBCASE("deterministic per seed, at least one point when ratio > 0") {
    const PointSet a = sample_sparse_points(full, 0.4, 77);
    const PointSet b = sample_sparse_points(full, 0.4, 77);
    CHECK(a.points == b.points);
    PointSet three;
    three.image_height = three.image_width = 10;
    three.points = {{1, 1}, {2, 2}, {3, 3}};
    CHECK(sample_sparse_points(three, 0.05, 1).size() == 1);
  }
}

TEST_CASE("render_heatmap values") {
  PointSet ps;
  ps.image_height = ps.image_width = 64;

  SUBCASE("empty set renders all zeros") {
    const Heatmap h = render_heatmap(ps, 4.0);
    for (size_t i = 0; i < h.size(); ++i) CHECK(h[i] == 0.0f);
  }

  SUBCASE("peak exactly 1 at the point; exp(-1/2) at distance sigma") {
    ps.points = {{32, 32}};
    const double sigma = 5.0;
    const Heatmap h = render_heatmap(ps, sigma);
    CHECK(h.at(32, 32) == 1.0f);
    CHECK(h.at(32, 37) == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
    for (size_t i = 0; i < h.size(); ++i) {
      CHECK(h[i] >= 0.0f);
      CHECK(h[i] <= 1.0f);
    }
  }

  SUBCASE("adding a point never decreases any pixel") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      PointSet base;
      base.image_height = base.image_width = 48;
      std::set<Point> pts;
      const int n = 1 + rng.uniform_int(5);
      while (int(pts.size()) < n)
        pts.insert({rng.uniform_int(48), rng.uniform_int(48)});
      base.points.assign(pts.begin(), pts.end());
      const Heatmap h0 = render_heatmap(base, 3.0);
      PointSet more = base;
      Point extra;
      do {
        extra = {rng.uniform_int(48), rng.uniform_int(48)};
      } while (pts.count(extra));
      more.points.push_back(extra);
      const Heatmap h1 = render_heatmap(more, 3.0);
      for (size_t i = 0; i < h0.size(); ++i) CHECK(h1[i] >= h0[i]);
    }
  }
}

TEST_CASE("detect_peaks") {
  SUBCASE("all-zero heatmap yields nothing") {
    Heatmap h(32, 32, 0.0f);
    CHECK(detect_peaks(h, 0.3, 4).empty());
  }

  SUBCASE("two points one pixel apart collapse under min_distance 3") {
    PointSet ps;
    ps.image_height = ps.image_width = 32;
    ps.points = {{16, 15}, {16, 16}};
    const Heatmap h = render_heatmap(ps, 2.0);
    const PointSet peaks = detect_peaks(h, 0.3, 3);
    CHECK(peaks.size() == 1);
  }

  SUBCASE("round-trip recovers well-separated points exactly") {
    Rng rng(1234);
    const double sigma = 6.0;
    for (int trial = 0; trial < 25; ++trial) {
      PointSet ps;
      ps.image_height = ps.image_width = 160;
      for (int tries = 0; tries < 200 && ps.size() < 4; ++tries) {
        const Point cand{rng.uniform_int(160), rng.uniform_int(160)};
        bool far = true;
        for (const Point& p : ps.points) {
          const double d = std::hypot(p.row - cand.row, p.col - cand.col);
          if (d <= 6.0 * sigma) far = false;
        }
        if (far) ps.points.push_back(cand);
      }
      REQUIRE(!ps.empty());
      const Heatmap h = render_heatmap(ps, sigma);
      PointSet rec = detect_peaks(h, 0.3, 2.0 * sigma);
      std::sort(rec.points.begin(), rec.points.end());
      std::sort(ps.points.begin(), ps.points.end());
      CHECK(rec.points == ps.points);
    }
  }

  SUBCASE("ordering is by descending value, invalid threshold throws") {
    Heatmap h(16, 16, 0.0f);
    h.at(2, 2) = 0.5f;
    h.at(10, 10) = 0.9f;
    const PointSet peaks = detect_peaks(h, 0.3, 2);
    REQUIRE(peaks.size() == 2);
    CHECK(peaks.points[0] == Point{10, 10});
    CHECK_THROWS_AS(detect_peaks(h, 0.0, 2), ArgumentError);
  }
}

TEST_CASE("point csv round trip and validation") {
  PointSet ps;
  ps.image_height = 20;
  ps.image_width = 30;
  ps.points = {{0, 0}, {7, 22}, {19, 29}};
  const PointSet back = from_csv(to_csv(ps), 20, 30);
  CHECK(back.points == ps.points);

  PointSet dup = ps;
  dup.points.push_back({7, 22});
  CHECK_THROWS_AS(dup.validate(), ValidationError);
  PointSet oob = ps;
  oob.points.push_back({20, 0});
  CHECK_THROWS_AS(oob.validate(), ValidationError);
}
