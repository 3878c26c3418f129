#ifndef WDA_NETWORKS_HPP_
#define WDA_NETWORKS_HPP_

#include <string>
#include <vector>

#include "wda/layers.hpp"

namespace wda::nn {

enum class BlockKind { kStandard, kFactorized };

struct NetworkConfig {
  int base_channels = 16;
  int depth = 4;
  BlockKind block_kind = BlockKind::kFactorized;

  void validate() const {
    if (depth < 2) throw ValidationError("NetworkConfig: depth must be >= 2");
    if (base_channels < 8)
      throw ValidationError("NetworkConfig: base_channels must be >= 8");
  }
  int channels(int level) const { return base_channels << level; }
  // Spatial sizes must divide this for the pooling ladder to work out.
  int size_multiple() const { return 1 << (depth - 1); }
};

// Basic unit of the trunk. The factorized variant sums parallel 1x3 and 3x1
// convolutions before a pointwise projection; the standard variant puts a
// plain 3x3 in their place and serves as the comparison baseline.
template <typename T>
class Block {
 public:
  Block() = default;
  Block(const std::string& name, BlockKind kind, int in_c, int out_c, Rng& rng)
      : kind_(kind) {
    if (kind == BlockKind::kFactorized) {
      row_ = Conv2d<T>(name + ".row", in_c, out_c, 1, 3, 1, 0, 1, rng);
      col_ = Conv2d<T>(name + ".col", in_c, out_c, 3, 1, 1, 1, 0, rng);
    } else {
      row_ = Conv2d<T>(name + ".full", in_c, out_c, 3, 3, 1, 1, 1, rng);
    }
    pw_ = Conv2d<T>(name + ".pw", out_c, out_c, 1, 1, 1, 0, 0, rng);
  }

  const Tensor<T>& forward(const Tensor<T>& x, Backend be) {
    sum_ = row_.forward(x, be);
    if (kind_ == BlockKind::kFactorized) add_into(sum_, col_.forward(x, be));
    relu_forward(sum_, h_);
    relu_forward(pw_.forward(h_, be), y_);
    return y_;
  }

  // dx is overwritten; parameter gradients accumulate.
  void backward(const Tensor<T>& dy, Tensor<T>& dx, Backend be,
                bool need_dx = true) {
    relu_backward(y_, dy, g0_);
    pw_.backward(g0_, &g1_, be);
    relu_backward(h_, g1_, g0_);
    row_.backward(g0_, need_dx ? &dx : nullptr, be);
    if (kind_ == BlockKind::kFactorized) {
      col_.backward(g0_, need_dx ? &g1_ : nullptr, be);
      if (need_dx) add_into(dx, g1_);
    }
  }

  const Tensor<T>& output() const { return y_; }
  void collect(std::vector<Param<T>*>& out) {
    row_.collect(out);
    if (kind_ == BlockKind::kFactorized) col_.collect(out);
    pw_.collect(out);
  }

 private:
  BlockKind kind_ = BlockKind::kFactorized;
  Conv2d<T> row_, col_, pw_;
  Tensor<T> sum_, h_, y_, g0_, g1_;
};

// Encoder-decoder with additive skips: one block per level, channel count
// doubling with depth, average-pool downsampling (smooth gradients
// everywhere), nearest upsampling plus a 1x1 projection on the way back up.
template <typename T>
class UNetTrunk {
 public:
  UNetTrunk() = default;
  UNetTrunk(const NetworkConfig& cfg, const std::string& prefix, Rng& rng)
      : cfg_(cfg) {
    cfg.validate();
    int in_c = 1;
    for (int i = 0; i < cfg.depth; ++i) {
      enc_.emplace_back(prefix + ".enc" + std::to_string(i), cfg.block_kind,
                        in_c, cfg.channels(i), rng);
      in_c = cfg.channels(i);
    }
    for (int i = 0; i < cfg.depth - 1; ++i) {
      proj_.emplace_back(prefix + ".proj" + std::to_string(i),
                         cfg.channels(i + 1), cfg.channels(i), 1, 1, 1, 0, 0,
                         rng);
      dec_.emplace_back(prefix + ".dec" + std::to_string(i), cfg.block_kind,
                        cfg.channels(i), cfg.channels(i), rng);
    }
    pools_.resize(cfg.depth - 1);
    ups_.resize(cfg.depth - 1);
    enc_out_.resize(cfg.depth);
    sum_.resize(cfg.depth - 1);
    grad_e_.resize(cfg.depth);
  }

  // Input spatial size must be divisible by 2^(depth-1).
  const Tensor<T>& forward(const Tensor<T>& x, Backend be) {
    const int d = cfg_.depth;
    if (x.h() % cfg_.size_multiple() || x.w() % cfg_.size_multiple())
      throw ValidationError("trunk input size must be divisible by " +
                            std::to_string(cfg_.size_multiple()));
    const Tensor<T>* cur = &x;
    for (int i = 0; i < d; ++i) {
      enc_out_[i] = &enc_[i].forward(*cur, be);
      if (i + 1 < d) cur = &pools_[i].forward(*enc_out_[i], be);
    }
    // Decoder stages run shallow-most last: stage i consumes the output of
    // stage i+1 (or the deepest encoder block for i = depth-2).
    const Tensor<T>* deep = enc_out_[d - 1];
    for (int i = d - 2; i >= 0; --i) {
      const Tensor<T>& up = ups_[i].forward(*deep, be);
      sum_[i] = proj_[i].forward(up, be);
      add_into(sum_[i], *enc_out_[i]);
      deep = &dec_[i].forward(sum_[i], be);
    }
    return *deep;
  }

  void backward(const Tensor<T>& dfeatures, Backend be) {
    const int d = cfg_.depth;
    for (int i = 0; i < d; ++i) {
      grad_e_[i].resize(enc_out_[i]->c(), enc_out_[i]->h(), enc_out_[i]->w());
      grad_e_[i].zero();
    }
    gcur_ = dfeatures;
    for (int i = 0; i < d - 1; ++i) {
      dec_[i].backward(gcur_, g0_, be);   // g0_ = d(sum_i)
      add_into(grad_e_[i], g0_);          // skip branch
      proj_[i].backward(g0_, &g1_, be);   // g1_ = d(upsampled)
      ups_[i].backward(g1_, gcur_, be);   // gcur_ = d(stage i input)
    }
    add_into(grad_e_[d - 1], gcur_);
    for (int i = d - 1; i >= 0; --i) {
      enc_[i].backward(grad_e_[i], g0_, be, /*need_dx=*/i > 0);
      if (i > 0) {
        pools_[i - 1].backward(g0_, g1_, be);
        add_into(grad_e_[i - 1], g1_);
      }
    }
  }

  void collect(std::vector<Param<T>*>& out) {
    for (auto& b : enc_) b.collect(out);
    for (auto& p : proj_) p.collect(out);
    for (auto& b : dec_) b.collect(out);
  }

  const NetworkConfig& config() const { return cfg_; }

 private:
  NetworkConfig cfg_;
  std::vector<Block<T>> enc_, dec_;
  std::vector<Conv2d<T>> proj_;
  std::vector<AvgPool2<T>> pools_;
  std::vector<Upsample2<T>> ups_;
  std::vector<const Tensor<T>*> enc_out_;
  std::vector<Tensor<T>> sum_, grad_e_;
  Tensor<T> gcur_, g0_, g1_;
};

// Detection-segmentation network. Shared trunk; a one-block segmentation
// head with per-pixel softmax, a two-block detection head regressing the
// center heatmap, and a counting readout on the detection features: one
// block, a non-negative 1-channel map, and a global sum scaled by the
// integral of a unit-peak Gaussian so the readout behaves like a density.
template <typename T>
class G1 {
 public:
  static constexpr double kCountNorm = 628.3185307179587;  // 2*pi*10^2

  struct Output {
    const Tensor<T>* seg_probs = nullptr;    // 2 x H x W, rows sum to 1
    const Tensor<T>* det_heatmap = nullptr;  // 1 x H x W, unbounded
    T count_estimate = T(0);
  };

  G1() = default;
  G1(const NetworkConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed);
    const int c = cfg.base_channels;
    trunk_ = UNetTrunk<T>(cfg, "trunk", rng);
    seg_block_ = Block<T>("seg.block", cfg.block_kind, c, c, rng);
    seg_pred_ = Conv2d<T>("seg.pred", c, 2, 1, 1, 1, 0, 0, rng);
    det_block1_ = Block<T>("det.block1", cfg.block_kind, c, c, rng);
    det_block2_ = Block<T>("det.block2", cfg.block_kind, c, c, rng);
    det_pred_ = Conv2d<T>("det.pred", c, 1, 1, 1, 1, 0, 0, rng);
    cnt_block_ = Block<T>("cnt.block", cfg.block_kind, c, c, rng);
    cnt_pred_ = Conv2d<T>("cnt.pred", c, 1, 1, 1, 1, 0, 0, rng);
    // Prediction layers start small so early logits and heatmaps sit near
    // zero; the count map starts essentially silent.
    seg_pred_.scale_weights(T(0.1));
    det_pred_.scale_weights(T(0.1));
    cnt_pred_.scale_weights(T(0.1));
    cnt_pred_.bias().w[0] = T(-6);
  }

  Output forward(const Tensor<T>& x, Backend be, bool with_det = true,
                 bool with_count = true) {
    with_det_ = with_det;
    with_count_ = with_det && with_count;
    const Tensor<T>& f = trunk_.forward(x, be);
    softmax_forward(seg_pred_.forward(seg_block_.forward(f, be), be), probs_);
    Output out;
    out.seg_probs = &probs_;
    if (with_det_) {
      const Tensor<T>& d2 =
          det_block2_.forward(det_block1_.forward(f, be), be);
      out.det_heatmap = &det_pred_.forward(d2, be);
      if (with_count_) {
        softplus_forward(
            cnt_pred_.forward(cnt_block_.forward(d2, be), be), cmap_);
        T sum = T(0);
        for (size_t i = 0; i < cmap_.size(); ++i) sum += cmap_[i];
        count_ = sum / T(kCountNorm);
        out.count_estimate = count_;
      }
    }
    return out;
  }

  // Gradients with respect to the three outputs; any may be absent.
  // dseg_logits feeds the pre-softmax layer directly (cross-entropy path);
  // dseg_probs passes through the softmax Jacobian (adversarial path).
  void backward(const Tensor<T>* dseg_logits, const Tensor<T>* dseg_probs,
                const Tensor<T>* ddet, T dcount, Backend be) {
    dlog_.resize(probs_.c(), probs_.h(), probs_.w());
    dlog_.zero();
    if (dseg_logits) add_into(dlog_, *dseg_logits);
    if (dseg_probs) softmax_backward_accum(probs_, *dseg_probs, dlog_);
    seg_pred_.backward(dlog_, &g0_, be);
    seg_block_.backward(g0_, dfeat_, be);

    if (with_det_ && (ddet || dcount != T(0))) {
      const Tensor<T>& d2 = det_block2_.output();
      d2grad_.resize(d2.c(), d2.h(), d2.w());
      d2grad_.zero();
      if (with_count_ && dcount != T(0)) {
        g0_.resize(1, cmap_.h(), cmap_.w());
        g0_.fill(dcount / T(kCountNorm));
        softplus_backward(cmap_, g0_, g1_);
        cnt_pred_.backward(g1_, &g0_, be);
        cnt_block_.backward(g0_, g1_, be);
        add_into(d2grad_, g1_);
      }
      if (ddet) {
        det_pred_.backward(*ddet, &g0_, be);
        add_into(d2grad_, g0_);
      }
      det_block2_.backward(d2grad_, g0_, be);
      det_block1_.backward(g0_, g1_, be);
      add_into(dfeat_, g1_);
    }
    trunk_.backward(dfeat_, be);
  }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    trunk_.collect(out);
    seg_block_.collect(out);
    seg_pred_.collect(out);
    det_block1_.collect(out);
    det_block2_.collect(out);
    det_pred_.collect(out);
    cnt_block_.collect(out);
    cnt_pred_.collect(out);
    return out;
  }

  std::vector<Param<T>*> trunk_parameters() {
    std::vector<Param<T>*> out;
    trunk_.collect(out);
    return out;
  }

  void zero_grad() {
    for (Param<T>* p : parameters()) p->zero_grad();
  }

  const NetworkConfig& config() const { return cfg_; }
  const Tensor<T>& seg_probs() const { return probs_; }

 private:
  NetworkConfig cfg_;
  UNetTrunk<T> trunk_;
  Block<T> seg_block_, det_block1_, det_block2_, cnt_block_;
  Conv2d<T> seg_pred_, det_pred_, cnt_pred_;
  Tensor<T> probs_, cmap_, dlog_, dfeat_, d2grad_, g0_, g1_;
  T count_ = T(0);
  bool with_det_ = true, with_count_ = true;
};

// Counting network: same trunk family with a global-integration scalar head.
template <typename T>
class G2 {
 public:
  G2() = default;
  G2(const NetworkConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed);
    trunk_ = UNetTrunk<T>(cfg, "trunk", rng);
    pred_ = Conv2d<T>("count.pred", cfg.base_channels, 1, 1, 1, 1, 0, 0, rng);
    pred_.scale_weights(T(0.1));
    pred_.bias().w[0] = T(-6);
  }

  T forward(const Tensor<T>& x, Backend be) {
    softplus_forward(pred_.forward(trunk_.forward(x, be), be), cmap_);
    T sum = T(0);
    for (size_t i = 0; i < cmap_.size(); ++i) sum += cmap_[i];
    count_ = sum / T(G1<T>::kCountNorm);
    return count_;
  }

  void backward(T dcount, Backend be) {
    g0_.resize(1, cmap_.h(), cmap_.w());
    g0_.fill(dcount / T(G1<T>::kCountNorm));
    softplus_backward(cmap_, g0_, g1_);
    pred_.backward(g1_, &g0_, be);
    trunk_.backward(g0_, be);
  }

  // Copies trunk parameters from a G1 of the same configuration.
  void init_from_g1(G1<T>& g1) {
    auto src = g1.trunk_parameters();
    std::vector<Param<T>*> dst;
    trunk_.collect(dst);
    if (src.size() != dst.size())
      throw ValidationError("init_from_g1: incompatible trunk layout");
    for (size_t i = 0; i < src.size(); ++i) {
      if (src[i]->name != dst[i]->name || src[i]->size() != dst[i]->size())
        throw ValidationError("init_from_g1: parameter mismatch at " +
                              dst[i]->name);
      dst[i]->w = src[i]->w;
    }
  }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    trunk_.collect(out);
    pred_.collect(out);
    return out;
  }

  void zero_grad() {
    for (Param<T>* p : parameters()) p->zero_grad();
  }

  const NetworkConfig& config() const { return cfg_; }

 private:
  NetworkConfig cfg_;
  UNetTrunk<T> trunk_;
  Conv2d<T> pred_;
  Tensor<T> cmap_, g0_, g1_;
  T count_ = T(0);
};

// Output-space discriminator: five 4x4 stride-2 convolutions with channel
// ladder {ndf, 2ndf, 4ndf, 8ndf, 1} and LeakyReLU(0.2) between, producing a
// patch logit map (input extent shrinks by the stride product 32).
template <typename T>
class Discriminator {
 public:
  Discriminator() = default;
  explicit Discriminator(uint64_t seed, int ndf = 64, int in_channels = 2) {
    Rng rng(seed);
    const int ch[6] = {in_channels, ndf, 2 * ndf, 4 * ndf, 8 * ndf, 1};
    for (int i = 0; i < 5; ++i)
      conv_[i] = Conv2d<T>("disc.conv" + std::to_string(i + 1), ch[i],
                           ch[i + 1], 4, 4, 2, 1, 1, rng);
  }

  const Tensor<T>& forward(const Tensor<T>& x, Backend be) {
    const Tensor<T>* cur = &x;
    for (int i = 0; i < 4; ++i) {
      leaky_relu_forward(conv_[i].forward(*cur, be), T(0.2), act_[i]);
      cur = &act_[i];
    }
    return conv_[4].forward(*cur, be);
  }

  void backward(const Tensor<T>& dlogits, Tensor<T>* dx, Backend be) {
    conv_[4].backward(dlogits, &g0_, be);
    for (int i = 3; i >= 0; --i) {
      leaky_relu_backward(act_[i], T(0.2), g0_, g1_);
      conv_[i].backward(g1_, i == 0 ? dx : &g0_, be);
    }
  }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    for (auto& c : conv_) c.collect(out);
    return out;
  }

  void zero_grad() {
    for (Param<T>* p : parameters()) p->zero_grad();
  }

 private:
  Conv2d<T> conv_[5];
  Tensor<T> act_[4];
  Tensor<T> g0_, g1_;
};

}  // namespace wda::nn

#endif  // WDA_NETWORKS_HPP_
