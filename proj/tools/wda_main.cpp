// Command-line surface: synth / pretrain-count / train / eval / ablate.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "wda/config.hpp"
#include "wda/errors.hpp"
#include "wda/io.hpp"
#include "wda/log.hpp"
#include "wda/synthdata.hpp"
#include "wda/trainer.hpp"

namespace {

using namespace wda;

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kNumericError = 4;

BenchmarkSpec resolve_spec(const std::string& spec_arg) {
  if (spec_arg.rfind("builtin:", 0) == 0)
    return synthdata::builtin_spec(spec_arg.substr(8));
  return BenchmarkSpec::from_json(io::read_text_file(spec_arg));
}

RunConfig resolve_config(const std::string& config_path, uint64_t seed,
                         bool seed_given) {
  RunConfig cfg = config_path.empty() ? config::desk_preset()
                                      : config::load_toml(config_path);
  if (seed_given) cfg.train.seed = seed;
  return cfg;
}

void apply_no_flags(RunConfig& cfg, bool no_detect, bool no_count, bool no_pl,
                    bool no_cpaug, bool no_filter) {
  if (no_detect) cfg.train.flags.detect = false;
  if (no_count) cfg.train.flags.count = false;
  if (no_pl) cfg.train.flags.pseudo_label = false;
  if (no_cpaug) cfg.train.flags.cp_aug = false;
  if (no_filter) cfg.train.flags.filter = false;
}

int cmd_synth(const std::string& spec_arg, const std::string& out, double ratio,
              uint64_t seed) {
  const BenchmarkSpec spec = resolve_spec(spec_arg);
  const Benchmark bench = synthdata::make_benchmark(spec, ratio, seed);
  synthdata::save_benchmark(bench, out);
  std::printf("benchmark written to %s (%zu source, %zu target train, %zu "
              "target test)\n",
              out.c_str(), bench.source.size(), bench.target_train.size(),
              bench.target_test.size());
  return kOk;
}

int cmd_pretrain_count(const std::string& bench_dir, const std::string& out,
                       int epochs, const std::string& config_path,
                       uint64_t seed, bool seed_given) {
  RunConfig cfg = resolve_config(config_path, seed, seed_given);
  if (epochs > 0) cfg.train.g2_epochs = epochs;
  const Benchmark bench = synthdata::load_benchmark(bench_dir);
  auto g2 = trainer::pretrain_counting(bench.source, cfg, nullptr,
                                       out + ".logs");
  trainer::save_g2_checkpoint(g2, cfg, 0, out);
  std::printf("counting network written to %s\n", out.c_str());
  return kOk;
}

int cmd_train(const std::string& bench_dir, const std::string& config_path,
              const std::string& g2_path, const std::string& out,
              const std::string& resume, bool no_detect, bool no_count,
              bool no_pl, bool no_cpaug, bool no_filter, uint64_t seed,
              bool seed_given) {
  RunConfig cfg = resolve_config(config_path, seed, seed_given);
  apply_no_flags(cfg, no_detect, no_count, no_pl, no_cpaug, no_filter);
  const Benchmark bench = synthdata::load_benchmark(bench_dir);
  std::optional<nn::G2<float>> g2;
  if (!g2_path.empty()) g2 = trainer::load_g2_checkpoint(g2_path);
  auto state = trainer::train_adaptation(bench, cfg, std::move(g2), out, resume);
  const auto result = trainer::evaluate(state.g1, bench.target_test,
                                        state.cfg.train.flags.filter,
                                        state.cfg, out);
  std::printf("final: DSC %.1f%%  AJI %.1f%%  PQ %.1f%%\n", 100 * result.dsc,
              100 * result.aji, 100 * result.pq);
  return kOk;
}

int cmd_eval(const std::string& bench_dir, const std::string& ckpt,
             const std::string& out, bool no_filter) {
  const Benchmark bench = synthdata::load_benchmark(bench_dir);
  auto state = trainer::TrainState::load(ckpt);
  const bool filter = !no_filter && state.cfg.train.flags.filter;
  const auto result =
      trainer::evaluate(state.g1, bench.target_test, filter, state.cfg, out);
  std::printf("DSC %.1f%%  AJI %.1f%%  PQ %.1f%%  count err %.2f\n",
              100 * result.dsc, 100 * result.aji, 100 * result.pq,
              result.mean_count_error);
  return kOk;
}

int cmd_ablate(const std::string& bench_dir, const std::string& config_path,
               const std::string& g2_path, const std::string& out,
               uint64_t seed, bool seed_given) {
  const RunConfig base = resolve_config(config_path, seed, seed_given);
  const Benchmark bench = synthdata::load_benchmark(bench_dir);
  const auto ladder = trainer::ablation_ladder();
  std::vector<trainer::EvalResult> results;
  for (const auto& row : ladder) {
    RunConfig cfg = base;
    cfg.train.flags = row.flags;
    std::optional<nn::G2<float>> g2;
    if (cfg.train.flags.count) {
      if (g2_path.empty())
        throw ConfigError("ablate: --g2 checkpoint required (Count rows)");
      g2 = trainer::load_g2_checkpoint(g2_path);
    }
    const std::string run_dir = out + "/model_" + row.name;
    log::info("ablation model %s starting", row.name.c_str());
    auto state =
        trainer::train_adaptation(bench, cfg, std::move(g2), run_dir);
    results.push_back(trainer::evaluate(state.g1, bench.target_test,
                                        cfg.train.flags.filter, state.cfg,
                                        run_dir));
  }
  const std::string table = trainer::ladder_markdown(ladder, results);
  io::make_dirs(out);
  io::write_text_file(out + "/table.md", table);
  std::printf("%s", table.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly-supervised domain-adaptive segmentation workbench"};
  app.require_subcommand(1);

  std::string spec_arg, out, bench_dir, config_path, g2_path, ckpt, resume;
  double ratio = 0.15;
  uint64_t seed = 1;
  int epochs = 0;
  bool no_detect = false, no_count = false, no_pl = false, no_cpaug = false,
       no_filter = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark");
  synth->add_option("--spec", spec_arg,
                    "spec json file or builtin:{acceptance,tiny}")
      ->required();
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--ratio", ratio, "annotation ratio in [0,1]");
  auto* synth_seed = synth->add_option("--seed", seed, "rng seed");

  auto* pre = app.add_subcommand("pretrain-count",
                                 "train the counting network on the source split");
  pre->add_option("--bench", bench_dir, "benchmark directory")->required();
  pre->add_option("--out", ckpt, "checkpoint path (.wdat)")->required();
  pre->add_option("--epochs", epochs, "override epoch count");
  pre->add_option("--config", config_path, "toml config");
  auto* pre_seed = pre->add_option("--seed", seed, "rng seed");

  auto* train = app.add_subcommand("train", "run the adaptation loop");
  train->add_option("--bench", bench_dir, "benchmark directory")->required();
  train->add_option("--config", config_path, "toml config (default: desk preset)");
  train->add_option("--g2", g2_path, "counting checkpoint (.wdat)");
  train->add_option("--out", out, "run directory")->required();
  train->add_option("--resume", resume, "resume from a saved state directory");
  train->add_flag("--no-detect", no_detect, "disable the detection head loss");
  train->add_flag("--no-count", no_count, "disable the counting prior");
  train->add_flag("--no-pl", no_pl, "disable pseudo-label learning");
  train->add_flag("--no-cpaug", no_cpaug, "disable cut-and-paste augmentation");
  train->add_flag("--no-filter", no_filter, "disable detection-guided filtering");
  auto* train_seed = train->add_option("--seed", seed, "rng seed");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on target test");
  ev->add_option("--bench", bench_dir, "benchmark directory")->required();
  ev->add_option("--ckpt", ckpt, "training state directory")->required();
  ev->add_option("--out", out, "output directory")->required();
  ev->add_flag("--no-filter", no_filter, "disable detection-guided filtering");

  auto* ab = app.add_subcommand("ablate", "run the Model I..VIII ladder");
  ab->add_option("--bench", bench_dir, "benchmark directory")->required();
  ab->add_option("--config", config_path, "toml config (default: desk preset)");
  ab->add_option("--g2", g2_path, "counting checkpoint (.wdat)");
  ab->add_option("--out", out, "output directory")->required();
  auto* ab_seed = ab->add_option("--seed", seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  }

  try {
    if (synth->parsed())
      return cmd_synth(spec_arg, out, ratio, seed);
    if (pre->parsed())
      return cmd_pretrain_count(bench_dir, ckpt, epochs, config_path, seed,
                                !pre_seed->empty());
    if (train->parsed())
      return cmd_train(bench_dir, config_path, g2_path, out, resume, no_detect,
                       no_count, no_pl, no_cpaug, no_filter, seed,
                       !train_seed->empty());
    if (ev->parsed()) return cmd_eval(bench_dir, ckpt, out, no_filter);
    if (ab->parsed())
      return cmd_ablate(bench_dir, config_path, g2_path, out, seed,
                        !ab_seed->empty());
    (void)synth_seed;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumericError;
  } catch (const IoError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kDataError;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kDataError;
  } catch (const GenerationError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }
  return kOk;
}
