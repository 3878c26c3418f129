#ifndef WDA_TRAINER_HPP_
#define WDA_TRAINER_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wda/config.hpp"
#include "wda/losses.hpp"
#include "wda/networks.hpp"
#include "wda/optim.hpp"
#include "wda/synthdata.hpp"

namespace wda::trainer {

// Polynomial decay: base * (1 - z / z_max)^power; exactly 0 at z = z_max.
double lr_schedule(double base, double power, int64_t z, int64_t z_max);

int64_t pseudo_label_warmup(int64_t z_max);  // z_max / 10

// Everything needed to resume training mid-run: iteration, the three
// networks, optimizer state and the current pseudo-label thresholds.
// Serialized as one parameter archive + JSON sidecar per network.
struct TrainState {
  RunConfig cfg;
  int64_t z = 0;
  nn::G1<float> g1;
  nn::Discriminator<float> disc;
  std::optional<nn::G2<float>> g2;
  nn::SgdMomentum<float> g1_opt;
  nn::Adam<float> d_opt;
  std::vector<double> thresholds;  // entropy cutoffs per class, or empty

  void save(const std::string& dir);
  static TrainState load(const std::string& dir);
};

nn::NetworkConfig network_config(const TrainConfig& t);

// Mean-squared-error count regression on multi-scale augmented source crops.
// Source samples must carry instance maps. The returned network is treated
// as frozen by the adaptation loop.
nn::G2<float> pretrain_counting(const std::vector<ImageSample>& source_set,
                                const RunConfig& cfg,
                                nn::G1<float>* init_from = nullptr,
                                const std::string& log_dir = "");

// Alternating G1/D adaptation per the combined objective with flag-gated
// parts. run_dir receives checkpoints/, logs/losses.csv and previews/;
// resume_dir continues a saved state. g2 is required when the count flag is
// set.
TrainState train_adaptation(const Benchmark& bench, const RunConfig& cfg,
                            std::optional<nn::G2<float>> g2,
                            const std::string& run_dir,
                            const std::string& resume_dir = "");

struct Prediction {
  Mask mask;
  InstanceMap instances;
  PointSet peaks;
  double count_estimate = 0.0;
  Heatmap fg_prob;
  Heatmap det_heatmap;  // clamped to [0,1]
};

// argmax segmentation -> optional open/close + detection-guided component
// filtering -> connected components.
Prediction predict(nn::G1<float>& g1, const GridF& image, bool filter,
                   const RunConfig& cfg);

struct EvalImage {
  std::string name;
  double dsc = 0, aji = 0, pq = 0, sq = 0, rq = 0;
  double count_error = 0;
  int gt_count = 0;
  double pred_count = 0;
};

struct EvalResult {
  double dsc = 0, aji = 0, pq = 0, sq = 0, rq = 0;  // pooled over the set
  double mean_count_error = 0;
  std::vector<EvalImage> per_image;
  std::string to_json() const;
};

// Pooled + per-image metrics over a labeled test set; when out_dir is given
// writes eval/metrics.json and previews/<name>_overlay.png with
// green/red/blue = TP/FP/FN pixels.
EvalResult evaluate(nn::G1<float>& g1, const std::vector<ImageSample>& test_set,
                    bool filter, const RunConfig& cfg,
                    const std::string& out_dir = "");

// Counting-network checkpoint: parameter archive at `path` plus a JSON
// sidecar (same stem, .json) recording the network shape and iteration.
void save_g2_checkpoint(nn::G2<float>& g2, const RunConfig& cfg, int64_t z,
                        const std::string& path);
nn::G2<float> load_g2_checkpoint(const std::string& path);

// Table-1 ladder in publication order: I (all off) .. VIII (all on).
struct LadderRow {
  std::string name;
  AblationFlags flags;
};
std::vector<LadderRow> ablation_ladder();
std::string ladder_markdown(const std::vector<LadderRow>& rows,
                            const std::vector<EvalResult>& results);

}  // namespace wda::trainer

#endif  // WDA_TRAINER_HPP_
