#include "wda/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "wda/annotations.hpp"
#include "wda/augment.hpp"
#include "wda/checkpoint.hpp"
#include "wda/errors.hpp"
#include "wda/io.hpp"
#include "wda/log.hpp"
#include "wda/metrics.hpp"
#include "wda/postprocess.hpp"
#include "wda/rng.hpp"

using nlohmann::json;

namespace wda::trainer {

namespace {

using nn::Backend;
using TensorF = Tensor<float>;

constexpr Backend kBe = Backend::kParallel;

TensorF to_tensor(const GridF& g) { return TensorF::from_grid(g); }

TensorF render_tensor(const PointSet& pts, double sigma, double peak) {
  return to_tensor(annotations::render_heatmap(pts, sigma, peak));
}

// Random square crop; points translate, labels crop, instances are dropped
// (never needed inside the training loop).
ImageSample crop_sample(const ImageSample& s, int y0, int x0, int size) {
  ImageSample out;
  out.name = s.name;
  out.domain_tag = s.domain_tag;
  out.image = GridF(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      out.image.at(y, x) = s.image.at(y0 + y, x0 + x);
  if (s.dense_label) {
    Mask m(size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) m.at(y, x) = s.dense_label->at(y0 + y, x0 + x);
    out.dense_label = std::move(m);
  }
  if (s.points) {
    PointSet ps;
    ps.image_height = ps.image_width = size;
    for (const Point& p : s.points->points)
      if (p.row >= y0 && p.row < y0 + size && p.col >= x0 && p.col < x0 + size)
        ps.points.push_back({p.row - y0, p.col - x0});
    out.points = std::move(ps);
  }
  return out;
}

ImageSample random_crop(const ImageSample& s, int size, Rng& rng) {
  if (s.h() == size && s.w() == size) return s;
  const int y0 = rng.uniform_int(s.h() - size + 1);
  const int x0 = rng.uniform_int(s.w() - size + 1);
  return crop_sample(s, y0, x0, size);
}

void append_line(const std::string& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  out << line << "\n";
}

void save_opt_buffers(std::ofstream& out,
                      const std::vector<std::vector<float>>& bufs) {
  const uint32_t n = uint32_t(bufs.size());
  out.write(reinterpret_cast<const char*>(&n), 4);
  for (const auto& b : bufs) {
    const uint64_t len = b.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(reinterpret_cast<const char*>(b.data()),
              std::streamsize(len * 4));
  }
}

void load_opt_buffers(std::ifstream& in, std::vector<std::vector<float>>& bufs) {
  uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), 4);
  if (n != bufs.size()) throw ValidationError("optimizer state count mismatch");
  for (auto& b : bufs) {
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    if (len != b.size()) throw ValidationError("optimizer state size mismatch");
    in.read(reinterpret_cast<char*>(b.data()), std::streamsize(len * 4));
  }
  if (!in) throw ValidationError("truncated optimizer state");
}

json network_json(const nn::NetworkConfig& n) {
  return json{{"base_channels", n.base_channels},
              {"depth", n.depth},
              {"block_kind", n.block_kind == nn::BlockKind::kStandard
                                 ? "standard"
                                 : "factorized"}};
}

nn::NetworkConfig network_from_json(const json& j) {
  nn::NetworkConfig n;
  n.base_channels = j.at("base_channels").get<int>();
  n.depth = j.at("depth").get<int>();
  n.block_kind = j.at("block_kind").get<std::string>() == "standard"
                     ? nn::BlockKind::kStandard
                     : nn::BlockKind::kFactorized;
  return n;
}

json network_sidecar(const RunConfig& cfg, const nn::NetworkConfig& net,
                     int64_t z, const char* kind) {
  return json{{"kind", kind},
              {"iteration", z},
              {"network", network_json(net)},
              {"config_toml", config::to_toml(cfg)}};
}

}  // namespace

double lr_schedule(double base, double power, int64_t z, int64_t z_max) {
  if (z_max < 1) throw ArgumentError("lr_schedule: z_max must be >= 1");
  const double frac = std::clamp(1.0 - double(z) / double(z_max), 0.0, 1.0);
  return base * std::pow(frac, power);
}

int64_t pseudo_label_warmup(int64_t z_max) { return z_max / 10; }

nn::NetworkConfig network_config(const TrainConfig& t) {
  nn::NetworkConfig cfg;
  cfg.base_channels = t.base_channels;
  cfg.depth = t.depth;
  cfg.block_kind = t.block_kind == "standard" ? nn::BlockKind::kStandard
                                              : nn::BlockKind::kFactorized;
  return cfg;
}

void TrainState::save(const std::string& dir) {
  io::make_dirs(dir);
  nn::save_params(g1.parameters(), dir + "/g1.wdat");
  io::write_text_file(dir + "/g1.json",
                      network_sidecar(cfg, g1.config(), z, "g1").dump(2));
  nn::save_params(disc.parameters(), dir + "/disc.wdat");
  io::write_text_file(
      dir + "/disc.json",
      network_sidecar(cfg, network_config(cfg.train), z, "discriminator")
          .dump(2));
  if (g2) {
    nn::save_params(g2->parameters(), dir + "/g2.wdat");
    io::write_text_file(
        dir + "/g2.json",
        network_sidecar(cfg, g2->config(), z, "g2").dump(2));
  }
  std::ofstream opt(dir + "/optim.bin", std::ios::binary);
  save_opt_buffers(opt, g1_opt.state());
  save_opt_buffers(opt, d_opt.state_m());
  save_opt_buffers(opt, d_opt.state_v());
  const int64_t adam_t = d_opt.steps();
  opt.write(reinterpret_cast<const char*>(&adam_t), 8);
  if (!opt) throw IoError("cannot write optimizer state in " + dir);

  // -inf thresholds (class absent) become a huge negative sentinel; JSON has
  // no infinity and the sentinel selects nothing just the same.
  std::vector<double> th = thresholds;
  for (double& v : th)
    if (!std::isfinite(v)) v = -1e308;
  json st{{"z", z}, {"thresholds", th}, {"has_g2", g2.has_value()}};
  io::write_text_file(dir + "/state.json", st.dump(2));
}

TrainState TrainState::load(const std::string& dir) {
  if (!io::file_exists(dir + "/state.json"))
    throw IoError("no training state at " + dir);
  json st, sidecar;
  try {
    st = json::parse(io::read_text_file(dir + "/state.json"));
    sidecar = json::parse(io::read_text_file(dir + "/g1.json"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad training state json: ") + e.what());
  }

  TrainState ts;
  ts.cfg = config::parse_toml(sidecar.at("config_toml").get<std::string>());
  ts.z = st.at("z").get<int64_t>();
  ts.thresholds = st.at("thresholds").get<std::vector<double>>();

  const nn::NetworkConfig ncfg = network_config(ts.cfg.train);
  ts.g1 = nn::G1<float>(ncfg, ts.cfg.train.seed);
  ts.disc = nn::Discriminator<float>(ts.cfg.train.seed + 1,
                                     ts.cfg.train.disc_channels);
  nn::load_params(ts.g1.parameters(), dir + "/g1.wdat");
  nn::load_params(ts.disc.parameters(), dir + "/disc.wdat");
  if (st.at("has_g2").get<bool>()) {
    json g2_sidecar;
    try {
      g2_sidecar = json::parse(io::read_text_file(dir + "/g2.json"));
    } catch (const json::exception& e) {
      throw ValidationError(std::string("bad g2 sidecar: ") + e.what());
    }
    ts.g2 = nn::G2<float>(network_from_json(g2_sidecar.at("network")),
                          ts.cfg.train.seed + 2);
    nn::load_params(ts.g2->parameters(), dir + "/g2.wdat");
  }
  ts.g1_opt = nn::SgdMomentum<float>(ts.g1.parameters(),
                                     ts.cfg.train.g1_momentum);
  ts.d_opt = nn::Adam<float>(ts.disc.parameters());
  std::ifstream opt(dir + "/optim.bin", std::ios::binary);
  if (!opt) throw IoError("cannot open optimizer state in " + dir);
  load_opt_buffers(opt, ts.g1_opt.state());
  load_opt_buffers(opt, ts.d_opt.state_m());
  load_opt_buffers(opt, ts.d_opt.state_v());
  int64_t adam_t = 0;
  opt.read(reinterpret_cast<char*>(&adam_t), 8);
  ts.d_opt.steps() = adam_t;
  return ts;
}

nn::G2<float> pretrain_counting(const std::vector<ImageSample>& source_set,
                                const RunConfig& cfg, nn::G1<float>* init_from,
                                const std::string& log_dir) {
  if (source_set.empty())
    throw ValidationError("pretrain_counting: empty source set");
  for (const auto& s : source_set)
    if (!s.instances || !s.points)
      throw ValidationError("pretrain_counting: source sample " + s.name +
                            " lacks instance annotations");

  const nn::NetworkConfig ncfg = network_config(cfg.train);
  nn::G2<float> g2(ncfg, cfg.train.seed + 2);
  if (init_from) g2.init_from_g1(*init_from);
  nn::Adam<float> opt(g2.parameters());

  std::string log_path;
  if (!log_dir.empty()) {
    io::make_dirs(log_dir + "/logs");
    log_path = log_dir + "/logs/g2_losses.csv";
    io::write_text_file(log_path, "epoch,mse,mae\n");
  }

  const int mult = ncfg.size_multiple();
  augment::AugParams aug;
  aug.p_photometric = 0.8;
  aug.brightness = 0.15;
  aug.contrast_lo = 0.75;
  aug.contrast_hi = 1.25;
  aug.p_blur = 0.3;
  aug.blur_sigma_hi = 1.0;

  std::vector<size_t> order(source_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.train.g2_epochs; ++epoch) {
    Rng erng(mix_seed(cfg.train.seed, 0xC0117 + epoch));
    erng.shuffle(order.begin(), order.end());
    double mse = 0.0, mae = 0.0;
    for (size_t k = 0; k < order.size(); ++k) {
      const ImageSample& full = source_set[order[k]];
      const int base = std::min(cfg.train.crop, std::min(full.h(), full.w()));
      // Crop and resample: counts survive scaling, apparent object size
      // does not, which is the point of the multi-scale recipe. The scale
      // jitter stays moderate so the density head sees consistent targets.
      int c = int(std::lround(base * erng.uniform(0.8, 1.0)));
      c = std::max(2 * mult, c / mult * mult);
      ImageSample crop = random_crop(full, c, erng);
      const double count = double(crop.points->size());
      const double scales[3] = {0.875, 1.0, 1.125};
      int out_size =
          int(std::lround(base * scales[erng.uniform_int(3)]));
      out_size = std::max(2 * mult, out_size / mult * mult);
      GridF resized = augment::resize_bilinear(crop.image, out_size, out_size);
      ImageSample aug_in;
      aug_in.image = std::move(resized);
      aug_in.domain_tag = Domain::kSource;
      const ImageSample final_s =
          augment::geometric_aug(aug_in, erng.next_u64(), aug);

      const float t_hat = g2.forward(to_tensor(final_s.image), kBe);
      const double err = double(t_hat) - count;
      mse += err * err;
      mae += std::abs(err);
      g2.zero_grad();
      g2.backward(float(2.0 * err), kBe);
      opt.step(g2.parameters(), cfg.train.g2_lr);
    }
    mse /= double(order.size());
    mae /= double(order.size());
    if (!std::isfinite(mse))
      throw NumericError("pretrain_counting: non-finite loss at epoch " +
                         std::to_string(epoch));
    if (!log_path.empty())
      append_line(log_path, std::to_string(epoch) + "," + std::to_string(mse) +
                                "," + std::to_string(mae));
    if (epoch % 8 == 0 || epoch + 1 == cfg.train.g2_epochs)
      log::info("g2 pretrain epoch %d mse %.3f mae %.3f", epoch, mse, mae);
  }
  return g2;
}

namespace {

struct IterLog {
  double l_s_src = 0, l_s_pl = 0, l_adv = 0, l_d = 0, l_c = 0;
  double lambda_c = 0, total = 0;
};

// One training sample pair forward/backward; returns the loss parts.
// Gradient scale carries 1/batch_size.
IterLog run_iteration(TrainState& ts, const Benchmark& bench, int64_t z,
                      bool pl_active, const std::string& run_dir) {
  const RunConfig& cfg = ts.cfg;
  const TrainConfig& tc = cfg.train;
  const losses::LossWeights& lw = cfg.weights;
  const AblationFlags& flags = tc.flags;
  const double inv_b = 1.0 / double(tc.batch_size);

  IterLog out;
  out.lambda_c = z <= tc.z_max ? 1.0 - double(z) / double(tc.z_max) : 0.0;

  ts.g1.zero_grad();
  ts.disc.zero_grad();

  std::vector<TensorF> ps_detached, pt_detached;

  for (int b = 0; b < tc.batch_size; ++b) {
    Rng rng(mix_seed(tc.seed, uint64_t(z) * 64 + uint64_t(b)));

    // ---- source branch -----------------------------------------------------
    const ImageSample& src_full =
        bench.source[rng.uniform_int(int(bench.source.size()))];
    ImageSample src = random_crop(src_full, std::min(tc.crop, src_full.h()), rng);
    src = augment::geometric_aug(src, rng.next_u64());

    const TensorF xs = to_tensor(src.image);
    auto so = ts.g1.forward(xs, kBe, flags.detect, false);
    ps_detached.push_back(*so.seg_probs);

    losses::PseudoLabel no_pl;
    no_pl.selected = Mask(src.h(), src.w(), 0);
    no_pl.cls = GridU8(src.h(), src.w(), 0);

    TensorF dlog_s;
    const losses::SegLoss seg_src = losses::seg_loss<float>(
        *so.seg_probs, *src.dense_label, *so.seg_probs, no_pl, &dlog_s,
        nullptr);
    out.l_s_src += seg_src.source_term * inv_b;
    for (size_t i = 0; i < dlog_s.size(); ++i) dlog_s[i] *= float(inv_b);

    TensorF ddet_s;
    if (flags.detect) {
      const TensorF d_s = render_tensor(*src.points, lw.sigma1, 1.0);
      const TensorF beta_s = render_tensor(*src.points, lw.sigma2, lw.beta_peak);
      // Source half of the detection loss; the target half runs in the
      // target branch with its own gradients.
      TensorF zero_t(1, 1, 1);
      Mask zero_w(1, 1, 0);
      TensorF zero_b(1, 1, 1);
      const double l_src = losses::detection_loss<float>(
          *so.det_heatmap, d_s, zero_t, zero_t, zero_w, beta_s, zero_b,
          lw.lambda_point, &ddet_s, nullptr);
      out.l_d += l_src * inv_b;
      const float scale = float(lw.lambda_d * inv_b);
      for (size_t i = 0; i < ddet_s.size(); ++i) ddet_s[i] *= scale;
    }
    ts.g1.backward(&dlog_s, nullptr, flags.detect ? &ddet_s : nullptr, 0.0f,
                   kBe);

    // ---- target branch -----------------------------------------------------
    const int nt = int(bench.target_train.size());
    const ImageSample& ta = bench.target_train[rng.uniform_int(nt)];
    ImageSample tgt;
    if (flags.cp_aug && nt > 1) {
      const ImageSample& tb = bench.target_train[rng.uniform_int(nt)];
      tgt = augment::cp_aug(ta, tb, std::min(tc.cp_patch, ta.h()));
    } else {
      tgt = ta;
    }
    tgt = random_crop(tgt, std::min(tc.crop, tgt.h()), rng);
    tgt = augment::geometric_aug(tgt, rng.next_u64());

    const TensorF xt = to_tensor(tgt.image);
    const bool with_count = flags.count && out.lambda_c > 0.0;
    auto to = ts.g1.forward(xt, kBe, flags.detect, with_count);
    pt_detached.push_back(*to.seg_probs);

    // Pseudo-label cross entropy on the selected pixels.
    TensorF dlog_t;
    losses::PseudoLabel pl;
    if (flags.pseudo_label && pl_active && ts.thresholds.size() == 2) {
      pl = losses::select_pseudo_labels(*to.seg_probs, ts.thresholds);
    } else {
      pl.selected = Mask(tgt.h(), tgt.w(), 0);
      pl.cls = GridU8(tgt.h(), tgt.w(), 0);
    }
    Mask dummy_y(tgt.h(), tgt.w(), 0);
    const losses::SegLoss seg_tgt = losses::seg_loss<float>(
        *to.seg_probs, dummy_y, *to.seg_probs, pl, nullptr, &dlog_t);
    out.l_s_pl += seg_tgt.target_term * inv_b;
    for (size_t i = 0; i < dlog_t.size(); ++i) dlog_t[i] *= float(inv_b);

    // Weighted heatmap regression against the sparse annotations.
    TensorF ddet_t;
    if (flags.detect) {
      const TensorF dbar = render_tensor(*tgt.points, lw.sigma1, 1.0);
      const TensorF beta_t = render_tensor(*tgt.points, lw.sigma2, lw.beta_peak);
      const Mask w = losses::background_weight_map(*to.seg_probs, dbar, lw.rho);
      TensorF zero_s(1, 1, 1);
      TensorF zero_b(1, 1, 1);
      const double l_tgt = losses::detection_loss<float>(
          zero_s, zero_s, *to.det_heatmap, dbar, w, zero_b, beta_t,
          lw.lambda_point, nullptr, &ddet_t);
      out.l_d += l_tgt * inv_b;
      const float scale = float(lw.lambda_d * inv_b);
      for (size_t i = 0; i < ddet_t.size(); ++i) ddet_t[i] *= scale;
    }

    // Counting consistency against the frozen prior.
    float dcount = 0.0f;
    if (with_count) {
      const double prior = double(ts.g2->forward(xt, kBe));
      double dt = 0.0;
      const double l_c = losses::counting_consistency(
          double(to.count_estimate), prior, lw.epsilon, &dt);
      out.l_c += l_c * inv_b;
      dcount = float(out.lambda_c * dt * inv_b);
    }

    // Output-space alignment: push D(p_t) toward the source label; input
    // gradients flow into G1, discriminator gradients are discarded before
    // its own update below.
    const TensorF& logits_t = ts.disc.forward(*to.seg_probs, kBe);
    TensorF dlogits;
    const double l_adv =
        losses::bce_logits(logits_t, losses::kSourceLabel, &dlogits);
    out.l_adv += l_adv * inv_b;
    for (size_t i = 0; i < dlogits.size(); ++i)
      dlogits[i] *= float(lw.lambda_a * inv_b);
    TensorF dp_adv;
    ts.disc.backward(dlogits, &dp_adv, kBe);

    ts.g1.backward(&dlog_t, &dp_adv, flags.detect ? &ddet_t : nullptr, dcount,
                   kBe);
  }

  out.total = out.l_s_src + out.l_s_pl + lw.lambda_a * out.l_adv +
              lw.lambda_d * out.l_d + out.lambda_c * out.l_c;

  if (!std::isfinite(out.total)) {
    if (!run_dir.empty()) {
      io::make_dirs(run_dir + "/diagnostics");
      json diag{{"iteration", z},
                {"l_s_src", out.l_s_src},
                {"l_s_pl", out.l_s_pl},
                {"l_adv", out.l_adv},
                {"l_d", out.l_d},
                {"l_c", out.l_c}};
      io::write_text_file(
          run_dir + "/diagnostics/iter_" + std::to_string(z) + ".json",
          diag.dump(2));
    }
    throw NumericError("non-finite loss at iteration " + std::to_string(z));
  }

  // Global-norm clip guards the early iterations against loss spikes.
  {
    double sq = 0.0;
    for (auto* p : ts.g1.parameters())
      for (float g : p->g) sq += double(g) * double(g);
    const double norm = std::sqrt(sq);
    if (norm > tc.grad_clip) {
      const float scale = float(tc.grad_clip / norm);
      for (auto* p : ts.g1.parameters())
        for (float& g : p->g) g *= scale;
    }
  }
  ts.g1_opt.step(ts.g1.parameters(),
                 lr_schedule(tc.g1_lr, tc.poly_power, z, tc.z_max));

  // Discriminator update on detached predictions, after G1.
  ts.disc.zero_grad();
  double l_d_total = 0.0;
  for (const TensorF& ps : ps_detached) {
    const TensorF& lg = ts.disc.forward(ps, kBe);
    TensorF dlg;
    l_d_total += losses::bce_logits(lg, losses::kSourceLabel, &dlg) * inv_b;
    for (size_t i = 0; i < dlg.size(); ++i) dlg[i] *= float(inv_b);
    ts.disc.backward(dlg, nullptr, kBe);
  }
  for (const TensorF& pt : pt_detached) {
    const TensorF& lg = ts.disc.forward(pt, kBe);
    TensorF dlg;
    l_d_total += losses::bce_logits(lg, losses::kTargetLabel, &dlg) * inv_b;
    for (size_t i = 0; i < dlg.size(); ++i) dlg[i] *= float(inv_b);
    ts.disc.backward(dlg, nullptr, kBe);
  }
  (void)l_d_total;
  ts.d_opt.step(ts.disc.parameters(), tc.disc_lr);

  return out;
}

std::vector<double> recompute_thresholds(TrainState& ts,
                                         const Benchmark& bench) {
  std::vector<std::vector<double>> per_class(2);
  for (const ImageSample& s : bench.target_train) {
    const auto o = ts.g1.forward(to_tensor(s.image), kBe, false, false);
    const Grid<float> ent = losses::pixel_entropy(*o.seg_probs);
    const size_t n = o.seg_probs->plane();
    for (size_t i = 0; i < n; ++i) {
      const int cls = (*o.seg_probs)[n + i] > (*o.seg_probs)[i] ? 1 : 0;
      per_class[cls].push_back(double(ent[i]));
    }
  }
  return losses::decile_threshold(per_class, ts.cfg.weights.K);
}

void write_previews(TrainState& ts, const Benchmark& bench, int64_t z,
                    const std::string& run_dir) {
  const ImageSample& s = bench.target_train.front();
  const auto o = ts.g1.forward(to_tensor(s.image), kBe, true, false);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s/previews/z%06lld", run_dir.c_str(),
                static_cast<long long>(z));
  GridF fg(s.h(), s.w());
  const size_t n = o.seg_probs->plane();
  for (size_t i = 0; i < n; ++i) fg[i] = (*o.seg_probs)[n + i];
  io::write_png_gray8(std::string(buf) + "_prob.png", fg);
  GridF det(s.h(), s.w());
  for (size_t i = 0; i < n; ++i)
    det[i] = std::clamp((*o.det_heatmap)[i], 0.0f, 1.0f);
  io::write_png_gray8(std::string(buf) + "_det.png", det);
}

}  // namespace

TrainState train_adaptation(const Benchmark& bench, const RunConfig& cfg,
                            std::optional<nn::G2<float>> g2,
                            const std::string& run_dir,
                            const std::string& resume_dir) {
  cfg.train.validate();
  cfg.weights.validate();
  if (bench.source.empty() || bench.target_train.empty())
    throw ValidationError("train_adaptation: benchmark is missing a split");
  for (const auto& s : bench.source)
    if (!s.dense_label || !s.points)
      throw ValidationError("train_adaptation: source sample " + s.name +
                            " lacks labels");
  for (const auto& s : bench.target_train)
    if (!s.points)
      throw ValidationError("train_adaptation: target sample " + s.name +
                            " lacks points");
  if (cfg.train.flags.count && !g2 && resume_dir.empty())
    throw ValidationError(
        "train_adaptation: count flag requires a pretrained counting network");
  const nn::NetworkConfig ncfg = network_config(cfg.train);
  const int crop = std::min(cfg.train.crop, bench.source.front().h());
  if (crop % ncfg.size_multiple() != 0)
    throw ConfigError("crop size must be divisible by " +
                      std::to_string(ncfg.size_multiple()));

  TrainState ts;
  if (!resume_dir.empty()) {
    ts = TrainState::load(resume_dir);
  } else {
    ts.cfg = cfg;
    ts.g1 = nn::G1<float>(ncfg, cfg.train.seed);
    ts.disc =
        nn::Discriminator<float>(cfg.train.seed + 1, cfg.train.disc_channels);
    ts.g2 = std::move(g2);
    ts.g1_opt = nn::SgdMomentum<float>(ts.g1.parameters(), cfg.train.g1_momentum);
    ts.d_opt = nn::Adam<float>(ts.disc.parameters());
  }

  std::string loss_csv;
  if (!run_dir.empty()) {
    io::make_dirs(run_dir + "/checkpoints");
    io::make_dirs(run_dir + "/logs");
    io::make_dirs(run_dir + "/previews");
    loss_csv = run_dir + "/logs/losses.csv";
    if (ts.z == 0)
      io::write_text_file(loss_csv,
                          "iter,L_s_src,L_s_pl,L_adv,L_d,L_c,lambda_c,total\n");
  }

  const int64_t warmup = pseudo_label_warmup(ts.cfg.train.z_max);
  const int64_t epoch_len = int64_t(bench.target_train.size());

  for (int64_t z = ts.z; z < ts.cfg.train.z_max; ++z) {
    ts.z = z;
    const bool pl_on = ts.cfg.train.flags.pseudo_label && z >= warmup;
    if (pl_on && (ts.thresholds.size() != 2 || z % epoch_len == 0)) {
      ts.thresholds = recompute_thresholds(ts, bench);
    }
    const IterLog il = run_iteration(ts, bench, z, pl_on, run_dir);
    if (!loss_csv.empty()) {
      char row[256];
      std::snprintf(row, sizeof(row), "%lld,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g",
                    static_cast<long long>(z), il.l_s_src, il.l_s_pl, il.l_adv,
                    il.l_d, il.l_c, il.lambda_c, il.total);
      append_line(loss_csv, row);
    }
    if (!run_dir.empty() && (z + 1) % ts.cfg.train.checkpoint_every == 0) {
      char sub[32];
      std::snprintf(sub, sizeof(sub), "/checkpoints/z%06lld",
                    static_cast<long long>(z + 1));
      ts.z = z + 1;
      ts.save(run_dir + sub);
      write_previews(ts, bench, z + 1, run_dir);
    }
    if (z % 100 == 0)
      log::info("iter %lld: total %.4f (src %.4f pl %.4f adv %.4f det %.4f "
                "cnt %.4f)",
                static_cast<long long>(z), il.total, il.l_s_src, il.l_s_pl,
                il.l_adv, il.l_d, il.l_c);
  }
  ts.z = ts.cfg.train.z_max;
  if (!run_dir.empty()) {
    ts.save(run_dir + "/checkpoints/final");
  }
  return ts;
}

Prediction predict(nn::G1<float>& g1, const GridF& image, bool filter,
                   const RunConfig& cfg) {
  Prediction out;
  const auto o = g1.forward(to_tensor(image), kBe, true, true);
  const size_t n = o.seg_probs->plane();
  out.fg_prob = GridF(image.h(), image.w());
  for (size_t i = 0; i < n; ++i) out.fg_prob[i] = (*o.seg_probs)[n + i];
  out.det_heatmap = GridF(image.h(), image.w());
  for (size_t i = 0; i < n; ++i)
    out.det_heatmap[i] = std::clamp((*o.det_heatmap)[i], 0.0f, 1.0f);
  out.count_estimate = double(o.count_estimate);

  Mask mask(image.h(), image.w(), 0);
  for (size_t i = 0; i < n; ++i)
    mask[i] = (*o.seg_probs)[n + i] > (*o.seg_probs)[i] ? 1 : 0;

  out.peaks = annotations::detect_peaks(out.det_heatmap, cfg.train.peak_threshold,
                                        2.0 * cfg.weights.sigma1);
  if (filter) {
    mask = postprocess::open_close(mask, cfg.train.filter_radius);
    mask = postprocess::filter_with_peaks(mask, out.peaks);
  }
  out.instances = postprocess::label_components(mask);
  out.mask = std::move(mask);
  return out;
}

std::string EvalResult::to_json() const {
  json per = json::array();
  for (const EvalImage& e : per_image) {
    per.push_back(json{{"name", e.name},
                       {"dsc", e.dsc},
                       {"aji", e.aji},
                       {"pq", e.pq},
                       {"sq", e.sq},
                       {"rq", e.rq},
                       {"count_error", e.count_error},
                       {"gt_count", e.gt_count},
                       {"pred_count", e.pred_count}});
  }
  const json j{{"dsc", dsc},          {"aji", aji},
               {"pq", pq},            {"sq", sq},
               {"rq", rq},            {"mean_count_error", mean_count_error},
               {"per_image", per}};
  return j.dump(2);
}

EvalResult evaluate(nn::G1<float>& g1, const std::vector<ImageSample>& test_set,
                    bool filter, const RunConfig& cfg,
                    const std::string& out_dir) {
  if (test_set.empty()) throw ValidationError("evaluate: empty test set");
  EvalResult res;
  metrics::DscParts dsc_pool;
  metrics::AjiParts aji_pool;
  double iou_pool = 0.0;
  int tp = 0, fp = 0, fn = 0;
  double count_err_sum = 0.0;

  if (!out_dir.empty()) {
    io::make_dirs(out_dir + "/eval");
    io::make_dirs(out_dir + "/previews");
  }

  for (const ImageSample& s : test_set) {
    if (!s.dense_label || !s.instances)
      throw ValidationError("evaluate: test sample " + s.name +
                            " lacks ground truth");
    const Prediction pred = predict(g1, s.image, filter, cfg);

    EvalImage ei;
    ei.name = s.name;
    const auto dp = metrics::dsc_parts(*s.dense_label, pred.mask);
    dsc_pool.intersection += dp.intersection;
    dsc_pool.area_a += dp.area_a;
    dsc_pool.area_b += dp.area_b;
    ei.dsc = dp.value();
    const auto ap = metrics::aji_parts(*s.instances, pred.instances);
    aji_pool.numerator += ap.numerator;
    aji_pool.denominator += ap.denominator;
    ei.aji = ap.value();
    const auto pr = metrics::pq(*s.instances, pred.instances);
    iou_pool += pr.iou_sum;
    tp += pr.tp;
    fp += pr.fp;
    fn += pr.fn;
    ei.pq = pr.pq;
    ei.sq = pr.sq;
    ei.rq = pr.rq;
    int gt_count = 0;
    for (size_t i = 0; i < s.instances->size(); ++i)
      gt_count = std::max(gt_count, (*s.instances)[i]);
    ei.gt_count = gt_count;
    ei.pred_count = pred.count_estimate;
    ei.count_error = metrics::count_error(pred.count_estimate, gt_count);
    count_err_sum += ei.count_error;
    res.per_image.push_back(ei);

    if (!out_dir.empty()) {
      Grid<std::array<uint8_t, 3>> overlay(s.h(), s.w());
      for (size_t i = 0; i < overlay.size(); ++i) {
        const uint8_t g = uint8_t(std::clamp(s.image[i], 0.0f, 1.0f) * 255.0f);
        const bool gt = (*s.dense_label)[i] != 0;
        const bool pd = pred.mask[i] != 0;
        if (gt && pd) overlay[i] = {0, 255, 0};        // true positive
        else if (pd) overlay[i] = {255, 0, 0};         // false positive
        else if (gt) overlay[i] = {0, 0, 255};         // false negative
        else overlay[i] = {g, g, g};
      }
      io::write_png_rgb8(out_dir + "/previews/" + s.name + "_overlay.png",
                         overlay);
    }
  }

  res.dsc = dsc_pool.value();
  res.aji = aji_pool.value();
  const auto pq_pool = metrics::pq_from_parts(iou_pool, tp, fp, fn);
  res.pq = pq_pool.pq;
  res.sq = pq_pool.sq;
  res.rq = pq_pool.rq;
  res.mean_count_error = count_err_sum / double(test_set.size());

  if (!out_dir.empty())
    io::write_text_file(out_dir + "/eval/metrics.json", res.to_json());
  return res;
}

namespace {

std::string sidecar_path(const std::string& path) {
  const auto dot = path.rfind('.');
  return (dot == std::string::npos ? path : path.substr(0, dot)) + ".json";
}

}  // namespace

void save_g2_checkpoint(nn::G2<float>& g2, const RunConfig& cfg, int64_t z,
                        const std::string& path) {
  nn::save_params(g2.parameters(), path);
  io::write_text_file(sidecar_path(path),
                      network_sidecar(cfg, g2.config(), z, "g2").dump(2));
}

nn::G2<float> load_g2_checkpoint(const std::string& path) {
  json sidecar;
  try {
    sidecar = json::parse(io::read_text_file(sidecar_path(path)));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad checkpoint sidecar: ") + e.what());
  }
  if (sidecar.at("kind").get<std::string>() != "g2")
    throw ValidationError(path + " is not a counting-network checkpoint");
  nn::G2<float> g2(network_from_json(sidecar.at("network")), 0);
  nn::load_params(g2.parameters(), path);
  return g2;
}

std::vector<LadderRow> ablation_ladder() {
  auto mk = [](bool d, bool c, bool p, bool a, bool f) {
    AblationFlags fl;
    fl.detect = d;
    fl.count = c;
    fl.pseudo_label = p;
    fl.cp_aug = a;
    fl.filter = f;
    return fl;
  };
  return {
      {"I", mk(false, false, false, false, false)},
      {"II", mk(true, false, false, false, false)},
      {"III", mk(true, true, false, false, false)},
      {"IV", mk(false, false, true, false, false)},
      {"V", mk(true, false, true, false, false)},
      {"VI", mk(true, true, true, false, false)},
      {"VII", mk(true, true, true, true, false)},
      {"VIII", mk(true, true, true, true, true)},
  };
}

std::string ladder_markdown(const std::vector<LadderRow>& rows,
                            const std::vector<EvalResult>& results) {
  if (rows.size() != results.size())
    throw ArgumentError("ladder_markdown: row/result count mismatch");
  std::string out =
      "| Model | Detect | Count | P-L | CP-Aug | Filter | DSC(%) | PQ(%) |\n"
      "|-------|--------|-------|-----|--------|--------|--------|-------|\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const AblationFlags& f = rows[i].flags;
    char line[160];
    std::snprintf(line, sizeof(line),
                  "| %-5s | %s | %s | %s | %s | %s | %.1f | %.1f |\n",
                  rows[i].name.c_str(), f.detect ? "x" : " ",
                  f.count ? "x" : " ", f.pseudo_label ? "x" : " ",
                  f.cp_aug ? "x" : " ", f.filter ? "x" : " ",
                  100.0 * results[i].dsc, 100.0 * results[i].pq);
    out += line;
  }
  return out;
}

}  // namespace wda::trainer
