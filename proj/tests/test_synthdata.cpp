#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "wda/errors.hpp"
#include "wda/io.hpp"
#include "wda/rng.hpp"
#include "wda/synthdata.hpp"

using namespace wda;
using namespace wda::synthdata;

namespace {

DomainSpec small_spec() {
  DomainSpec s;
  s.blob_count_min = 2;
  s.blob_count_max = 5;
  s.blob_radius_min = 4;
  s.blob_radius_max = 8;
  s.boundary_raggedness = 0.2;
  return s;
}

std::string tmp_dir(const char* leaf) {
  const auto p = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("generate_domain") {
  SUBCASE("zero blob range produces empty instance maps") {
    DomainSpec s = small_spec();
    s.blob_count_min = s.blob_count_max = 0;
    const auto set = generate_domain(s, 3, 64, 11);
    for (const auto& img : set) {
      for (size_t i = 0; i < img.instances->size(); ++i)
        CHECK((*img.instances)[i] == 0);
      CHECK(img.points->empty());
    }
  }

  SUBCASE("same (spec, seed) twice is bit-identical") {
    const DomainSpec s = small_spec();
    const auto a = generate_domain(s, 4, 96, 5);
    const auto b = generate_domain(s, 4, 96, 5);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].image == b[i].image);
      CHECK(*a[i].instances == *b[i].instances);
      CHECK(a[i].points->points == b[i].points->points);
    }
  }

  SUBCASE("fixed blob count gives exactly that many instances and centers") {
    DomainSpec s = small_spec();
    s.blob_count_min = s.blob_count_max = 5;
    const auto set = generate_domain(s, 6, 128, 3);
    for (const auto& img : set) {
      int mx = 0;
      for (size_t i = 0; i < img.instances->size(); ++i)
        mx = std::max(mx, (*img.instances)[i]);
      CHECK(mx == 5);
      CHECK(img.points->size() == 5);
      img.validate();
    }
  }

  SUBCASE("samples satisfy the declared invariants") {
    const auto set = generate_domain(small_spec(), 4, 96, 19);
    for (const auto& img : set) {
      img.validate();
      for (size_t i = 0; i < img.image.size(); ++i) {
        CHECK(img.image[i] >= 0.0f);
        CHECK(img.image[i] <= 1.0f);
      }
    }
  }

  SUBCASE("infeasible specs fail naming the offending field") {
    DomainSpec tight = small_spec();
    tight.blob_radius_min = 40;
    tight.blob_radius_max = 50;
    CHECK_THROWS_WITH_AS(generate_domain(tight, 1, 64, 1),
                         doctest::Contains("blob_radius_range"),
                         GenerationError);

    DomainSpec crowded = small_spec();
    crowded.blob_count_min = crowded.blob_count_max = 60;
    crowded.blob_radius_min = 10;
    crowded.blob_radius_max = 12;
    CHECK_THROWS_WITH_AS(generate_domain(crowded, 1, 64, 1),
                         doctest::Contains("blob_count_range"),
                         GenerationError);
  }

  SUBCASE("argument validation") {
    CHECK_THROWS_AS(generate_domain(small_spec(), 0, 64, 1), ArgumentError);
    CHECK_THROWS_AS(generate_domain(small_spec(), 1, 32, 1), ArgumentError);
  }
}

TEST_CASE("make_benchmark split contracts") {
  BenchmarkSpec spec = builtin_spec("tiny");
  spec.n_target_train = 6;
  const Benchmark b = make_benchmark(spec, 0.15, 42);

  SUBCASE("source keeps dense labels, target train only points") {
    for (const auto& s : b.source) {
      CHECK(s.dense_label.has_value());
      CHECK(s.instances.has_value());
    }
    for (const auto& s : b.target_train) {
      CHECK(!s.dense_label.has_value());
      CHECK(!s.instances.has_value());
      CHECK(s.points.has_value());
    }
    for (const auto& s : b.target_test) {
      CHECK(s.dense_label.has_value());
      CHECK(s.instances.has_value());
      // Evaluation never sees empty ground truth.
      size_t fg = 0;
      for (size_t i = 0; i < s.dense_label->size(); ++i)
        fg += (*s.dense_label)[i] != 0;
      CHECK(fg > 0);
    }
  }

  SUBCASE("sparse points are a subset of the hidden instance centers") {
    // Regenerate the target domain with the benchmark's derivation seed.
    const auto full = generate_domain(
        spec.target, spec.n_target_train + spec.n_target_test, spec.image_size,
        mix_seed(42, 2));
    for (int i = 0; i < spec.n_target_train; ++i) {
      std::set<Point> centers(full[i].points->points.begin(),
                              full[i].points->points.end());
      for (const Point& p : b.target_train[i].points->points)
        CHECK(centers.count(p) == 1);
    }
  }

  SUBCASE("total sampled points near ratio * N within per-image rounding") {
    const auto full = generate_domain(
        spec.target, spec.n_target_train + spec.n_target_test, spec.image_size,
        mix_seed(42, 2));
    long n_total = 0, sampled = 0;
    for (int i = 0; i < spec.n_target_train; ++i) {
      n_total += long(full[i].points->size());
      sampled += long(b.target_train[i].points->size());
    }
    CHECK(std::abs(sampled - std::lround(0.15 * double(n_total))) <=
          spec.n_target_train);
  }

  SUBCASE("ratio 1 keeps all centers") {
    const Benchmark all = make_benchmark(spec, 1.0, 42);
    const auto full = generate_domain(
        spec.target, spec.n_target_train + spec.n_target_test, spec.image_size,
        mix_seed(42, 2));
    for (int i = 0; i < spec.n_target_train; ++i)
      CHECK(all.target_train[i].points->size() == full[i].points->size());
  }
}

TEST_CASE("benchmark save/load round trip") {
  const std::string dir = tmp_dir("wda_bench_roundtrip");
  const Benchmark b = make_benchmark(builtin_spec("tiny"), 0.15, 7);
  save_benchmark(b, dir);
  const Benchmark r = load_benchmark(dir);
  CHECK(r.seed == b.seed);
  CHECK(r.ratio == b.ratio);
  REQUIRE(r.source.size() == b.source.size());
  REQUIRE(r.target_train.size() == b.target_train.size());
  REQUIRE(r.target_test.size() == b.target_test.size());
  // 16-bit quantization: loaded pixels within half a step.
  for (size_t i = 0; i < r.source.size(); ++i)
    for (size_t j = 0; j < r.source[i].image.size(); ++j)
      CHECK(std::abs(r.source[i].image[j] - b.source[i].image[j]) < 1e-4f);
  for (size_t i = 0; i < r.target_train.size(); ++i)
    CHECK(r.target_train[i].points->points == b.target_train[i].points->points);
  for (size_t i = 0; i < r.target_test.size(); ++i)
    CHECK(*r.target_test[i].instances == *b.target_test[i].instances);

  CHECK_THROWS_AS(load_benchmark(dir + "_missing"), IoError);
}

TEST_CASE("contrast gap widens the histogram distance monotonically") {
  BenchmarkSpec spec = builtin_spec("tiny");
  const auto src = generate_domain(spec.source, 6, 96, 31);
  double prev = -1.0;
  for (const double c : {0.9, 0.7, 0.5}) {
    DomainSpec t = spec.source;
    t.contrast = c;
    const auto tgt = generate_domain(t, 6, 96, 32);
    const double d = histogram_distance(src, tgt);
    CHECK(d > prev);
    prev = d;
  }
}

TEST_CASE("load_stack") {
  const std::string dir = tmp_dir("wda_stack");
  io::make_dirs(dir);
  io::make_dirs(dir + "_labels");
  GridF a(32, 32, 0.25f), bimg(32, 32, 0.75f);
  io::write_png_gray8(dir + "/s0.png", a);
  io::write_png_gray8(dir + "/s1.png", bimg);
  GridF la(32, 32, 0.0f);
  for (int y = 4; y < 8; ++y)
    for (int x = 4; x < 8; ++x) la.at(y, x) = 1.0f;
  io::write_png_gray8(dir + "_labels/s0.png", la);
  io::write_png_gray8(dir + "_labels/s1.png", la);

  const auto slices = load_stack(dir);
  REQUIRE(slices.size() == 2);
  CHECK(slices[0].image.at(0, 0) == doctest::Approx(0.25f).epsilon(0.01));
  CHECK(slices[0].dense_label.has_value());
  CHECK(slices[0].dense_label->at(5, 5) == 1);
  CHECK(slices[0].instances.has_value());

  CHECK_THROWS_AS(load_stack(dir + "_nope"), IoError);

  // Shape-mismatched labels are a validation error.
  const std::string dir2 = tmp_dir("wda_stack2");
  io::make_dirs(dir2);
  io::make_dirs(dir2 + "_labels");
  io::write_png_gray8(dir2 + "/s0.png", a);
  io::write_png_gray8(dir2 + "_labels/s0.png", GridF(16, 16, 0.0f));
  CHECK_THROWS_AS(load_stack(dir2), ValidationError);
}
