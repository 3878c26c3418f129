#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "wda/config.hpp"
#include "wda/errors.hpp"
#include "wda/io.hpp"
#include "wda/trainer.hpp"

using namespace wda;

namespace {

std::string tmp_dir(const char* leaf) {
  const auto p = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(p);
  return p.string();
}

RunConfig tiny_cfg(int64_t z_max = 8) {
  RunConfig cfg;
  cfg.train.z_max = z_max;
  cfg.train.crop = 64;
  cfg.train.base_channels = 8;
  cfg.train.depth = 2;
  cfg.train.disc_channels = 8;
  cfg.train.cp_patch = 32;
  cfg.train.g1_lr = 1e-3;
  cfg.train.g2_epochs = 2;
  cfg.train.checkpoint_every = 4;
  cfg.train.seed = 11;
  cfg.weights.sigma1 = 6.0;
  cfg.weights.sigma2 = 1.5;
  return cfg;
}

Benchmark tiny_bench(uint64_t seed = 77) {
  return synthdata::make_benchmark(synthdata::builtin_spec("tiny"), 0.5, seed);
}

}  // namespace

TEST_CASE("learning-rate schedule endpoints and monotonicity") {
  CHECK(trainer::lr_schedule(5e-5, 0.9, 0, 10000) == 5e-5);
  CHECK(trainer::lr_schedule(5e-5, 0.9, 10000, 10000) == 0.0);
  double prev = 1e30;
  for (int64_t z = 0; z <= 10000; z += 500) {
    const double lr = trainer::lr_schedule(5e-5, 0.9, z, 10000);
    CHECK(lr < prev);
    prev = lr;
  }
  // Defaults: lr(0) is exactly the configured 5e-5 base.
  const TrainConfig def;
  CHECK(trainer::lr_schedule(def.g1_lr, def.poly_power, 0, def.z_max) == 5e-5);
}

TEST_CASE("toml config round trip and strictness") {
  RunConfig cfg = tiny_cfg();
  cfg.train.flags.cp_aug = false;
  cfg.weights.K = 7;
  const std::string toml = config::to_toml(cfg);
  const RunConfig back = config::parse_toml(toml);
  CHECK(back.train.z_max == cfg.train.z_max);
  CHECK(back.train.flags.cp_aug == false);
  CHECK(back.weights.K == 7);
  CHECK(back.train.g1_lr == cfg.train.g1_lr);

  CHECK_THROWS_AS(config::parse_toml("[train]\nzmax = 10\n"), ConfigError);
  CHECK_THROWS_AS(config::parse_toml("[training]\nz_max = 10\n"), ConfigError);
  CHECK_THROWS_AS(config::parse_toml("z_max = 10\n"), ConfigError);
  CHECK_THROWS_AS(config::parse_toml("[weights]\nK = 11\n"), ConfigError);
  CHECK_THROWS_AS(config::parse_toml("[train]\nz_max = banana\n"), ConfigError);
}

TEST_CASE("pretrain_counting validates inputs and learns a constant count") {
  RunConfig cfg = tiny_cfg();
  SUBCASE("source without instances is rejected") {
    Benchmark b = tiny_bench();
    std::vector<ImageSample> bad = b.target_train;  // points only
    CHECK_THROWS_AS(trainer::pretrain_counting(bad, cfg), ValidationError);
  }

  SUBCASE("loss decreases over epochs on a small set") {
    DomainSpec spec = synthdata::builtin_spec("tiny").source;
    spec.blob_count_min = spec.blob_count_max = 3;
    const auto set = synthdata::generate_domain(spec, 6, 64, 5);
    RunConfig c2 = cfg;
    c2.train.g2_epochs = 12;
    c2.train.crop = 64;
    const std::string dir = tmp_dir("wda_g2_log");
    auto g2 = trainer::pretrain_counting(set, c2, nullptr, dir);
    // Parse the loss log: last-epoch mse must undercut the first epoch.
    std::ifstream in(dir + "/logs/g2_losses.csv");
    std::string line, first, last;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (first.empty()) first = line;
      last = line;
    }
    const double mse_first = std::stod(first.substr(first.find(',') + 1));
    const double mse_last = std::stod(last.substr(last.find(',') + 1));
    CHECK(mse_last < mse_first);
  }
}

TEST_CASE("train_adaptation contracts") {
  const Benchmark bench = tiny_bench();

  SUBCASE("count flag without G2 is rejected") {
    RunConfig cfg = tiny_cfg();
    CHECK_THROWS_AS(
        trainer::train_adaptation(bench, cfg, std::nullopt, ""),
        ValidationError);
  }

  SUBCASE("flags-off run logs only source CE and adversarial terms") {
    RunConfig cfg = tiny_cfg();
    cfg.train.flags = AblationFlags{false, false, false, false, false};
    const std::string dir = tmp_dir("wda_run_flagsoff");
    trainer::train_adaptation(bench, cfg, std::nullopt, dir);
    std::ifstream in(dir + "/logs/losses.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "iter,L_s_src,L_s_pl,L_adv,L_d,L_c,lambda_c,total");
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
      double v[8];
      std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &v[0],
                  &v[1], &v[2], &v[3], &v[4], &v[5], &v[6], &v[7]);
      CHECK(v[1] > 0.0);   // source CE active
      CHECK(v[3] > 0.0);   // adversarial active
      CHECK(v[2] == 0.0);  // no pseudo-labels
      CHECK(v[4] == 0.0);  // no detection
      CHECK(v[5] == 0.0);  // no counting
      ++rows;
    }
    CHECK(rows == 8);
  }

  SUBCASE("checkpoint resume reproduces the uninterrupted run") {
    RunConfig cfg = tiny_cfg(6);
    cfg.train.checkpoint_every = 3;
    cfg.train.flags = AblationFlags{true, false, true, true, true};
    // Uninterrupted run.
    const std::string d1 = tmp_dir("wda_run_full");
    trainer::train_adaptation(bench, cfg, std::nullopt, d1);
    // Resumed run from the midpoint checkpoint.
    const std::string d2 = tmp_dir("wda_run_resumed");
    io::make_dirs(d2 + "/logs");
    trainer::TrainState resumed = trainer::train_adaptation(
        bench, cfg, std::nullopt, d2, d1 + "/checkpoints/z000003");

    // Compare final parameters bit-for-bit at single precision tolerance.
    trainer::TrainState full =
        trainer::TrainState::load(d1 + "/checkpoints/final");
    auto pa = full.g1.parameters();
    auto pb = resumed.g1.parameters();
    REQUIRE(pa.size() == pb.size());
    double max_rel = 0.0;
    for (size_t i = 0; i < pa.size(); ++i) {
      REQUIRE(pa[i]->size() == pb[i]->size());
      for (size_t j = 0; j < pa[i]->size(); ++j) {
        const double d = std::abs(double(pa[i]->w[j]) - double(pb[i]->w[j]));
        const double s = std::max(1.0, std::abs(double(pa[i]->w[j])));
        max_rel = std::max(max_rel, d / s);
      }
    }
    CHECK(max_rel <= 1e-10);

    // Loss rows after the resume point match the uninterrupted log.
    std::ifstream f1(d1 + "/logs/losses.csv"), f2(d2 + "/logs/losses.csv");
    std::string l1, l2;
    std::getline(f1, l1);  // header
    for (int i = 0; i < 3; ++i) std::getline(f1, l1);  // skip rows 0..2
    while (std::getline(f2, l2)) {
      std::getline(f1, l1);
      CHECK(l1 == l2);
    }
  }

  SUBCASE("non-finite loss aborts with a diagnostic dump") {
    RunConfig cfg = tiny_cfg(4);
    cfg.train.g1_lr = 1e18;  // guaranteed blow-up
    cfg.train.grad_clip = 1e30;
    cfg.train.flags.count = false;
    const std::string dir = tmp_dir("wda_run_nan");
    CHECK_THROWS_AS(trainer::train_adaptation(bench, cfg, std::nullopt, dir),
                    NumericError);
    bool have_dump = false;
    for (const auto& e :
         std::filesystem::directory_iterator(dir + "/diagnostics"))
      have_dump |= e.path().extension() == ".json";
    CHECK(have_dump);
  }
}

TEST_CASE("counting consistency is inactive inside the margin") {
  // With the count flag on and a prior equal to the estimate, the logged
  // L_c column stays 0 whenever |That - T| <= epsilon by the hinge shape.
  for (double gap : {0.0, 1.0, 2.9}) {
    CHECK(losses::counting_consistency(10.0 + gap, 10.0, 3.0) == 0.0);
    CHECK(losses::counting_consistency(10.0 - gap, 10.0, 3.0) == 0.0);
  }
}

TEST_CASE("predict honors the filter flag") {
  const Benchmark bench = tiny_bench();
  RunConfig cfg = tiny_cfg();
  nn::G1<float> g1(trainer::network_config(cfg.train), 3);
  const auto unfiltered =
      trainer::predict(g1, bench.target_test[0].image, false, cfg);
  const auto filtered =
      trainer::predict(g1, bench.target_test[0].image, true, cfg);
  // Filtering never adds foreground.
  for (size_t i = 0; i < filtered.mask.size(); ++i)
    if (filtered.mask[i]) CHECK(unfiltered.mask[i]);
}

TEST_CASE("ablation ladder matches Table-1 structure") {
  const auto ladder = trainer::ablation_ladder();
  REQUIRE(ladder.size() == 8);
  CHECK(ladder[0].name == "I");
  CHECK(!ladder[0].flags.detect);
  CHECK(!ladder[0].flags.filter);
  CHECK(ladder[1].flags.detect);
  CHECK(!ladder[1].flags.count);
  CHECK(ladder[3].flags.pseudo_label);
  CHECK(!ladder[3].flags.detect);
  CHECK(ladder[7].name == "VIII");
  CHECK(ladder[7].flags.detect);
  CHECK(ladder[7].flags.count);
  CHECK(ladder[7].flags.pseudo_label);
  CHECK(ladder[7].flags.cp_aug);
  CHECK(ladder[7].flags.filter);

  std::vector<trainer::EvalResult> results(8);
  for (size_t i = 0; i < 8; ++i) {
    results[i].dsc = 0.5 + 0.05 * double(i);
    results[i].pq = 0.4 + 0.05 * double(i);
  }
  const std::string md = trainer::ladder_markdown(ladder, results);
  int rows = 0;
  for (char c : md)
    if (c == '\n') ++rows;
  CHECK(rows == 10);  // header + separator + 8 models
}

TEST_CASE("evaluate writes metrics.json and overlays") {
  const Benchmark bench = tiny_bench();
  RunConfig cfg = tiny_cfg();
  nn::G1<float> g1(trainer::network_config(cfg.train), 3);
  const std::string dir = tmp_dir("wda_eval_out");
  const auto res =
      trainer::evaluate(g1, bench.target_test, true, cfg, dir);
  CHECK(io::file_exists(dir + "/eval/metrics.json"));
  CHECK(res.per_image.size() == bench.target_test.size());
  bool have_overlay = false;
  for (const auto& e : std::filesystem::directory_iterator(dir + "/previews"))
    have_overlay |= e.path().string().find("_overlay.png") != std::string::npos;
  CHECK(have_overlay);
  // Keys stay bit-stable for downstream tooling.
  const std::string js = io::read_text_file(dir + "/eval/metrics.json");
  for (const char* key : {"\"dsc\"", "\"aji\"", "\"pq\"", "\"sq\"", "\"rq\"",
                          "\"mean_count_error\"", "\"per_image\""})
    CHECK(js.find(key) != std::string::npos);
}
