#ifndef WDA_CONFIG_HPP_
#define WDA_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "wda/losses.hpp"

namespace wda {

// Table-1 component switches; all on = Model VIII, all off = Model I.
struct AblationFlags {
  bool detect = true;
  bool count = true;
  bool pseudo_label = true;
  bool cp_aug = true;
  bool filter = true;
};

struct TrainConfig {
  int64_t z_max = 10000;
  int batch_size = 1;
  int crop = 512;
  double g1_lr = 5e-5;       // SGD with polynomial decay
  double g1_momentum = 0.9;
  double poly_power = 0.9;
  double disc_lr = 1e-4;     // Adam
  double g2_lr = 1e-3;       // Adam
  int g2_epochs = 60;
  uint64_t seed = 1;
  int64_t checkpoint_every = 500;
  int base_channels = 16;
  int depth = 4;
  std::string block_kind = "factorized";
  int disc_channels = 64;
  int cp_patch = 256;
  int filter_radius = 1;
  double peak_threshold = 0.3;
  double grad_clip = 10.0;  // global L2 norm bound on G1 gradients
  AblationFlags flags;

  void validate() const;
};

struct RunConfig {
  TrainConfig train;
  losses::LossWeights weights;
};

namespace config {

// Strict TOML subset: [train] and [weights] tables mirroring the structs
// field-for-field. Unknown keys or tables are ConfigErrors so ablation-study
// typos fail fast instead of silently running defaults.
RunConfig parse_toml(const std::string& text);
RunConfig load_toml(const std::string& path);
std::string to_toml(const RunConfig& cfg);

// Desk-scale preset driving the synthetic end-to-end experiments: 2000
// iterations on 256 px crops with the 16-channel depth-4 backbone.
RunConfig desk_preset();

}  // namespace config
}  // namespace wda

#endif  // WDA_CONFIG_HPP_
