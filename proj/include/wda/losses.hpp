#ifndef WDA_LOSSES_HPP_
#define WDA_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "wda/errors.hpp"
#include "wda/grid.hpp"
#include "wda/log.hpp"
#include "wda/networks.hpp"
#include "wda/tensor.hpp"

namespace wda::losses {

// Trade-off weights and map bandwidths. Defaults follow the training recipe:
// lambda_a 1e-3, lambda_d 1e-1, point weight 3 with peak 0.2, margin 3,
// background threshold 0.1, 8th decile, bandwidths 10 and 2.
struct LossWeights {
  double lambda_a = 1e-3;
  double lambda_d = 1e-1;
  double lambda_point = 3.0;
  double epsilon = 3.0;
  double rho = 0.1;
  int K = 8;
  double sigma1 = 10.0;
  double sigma2 = 2.0;
  double beta_peak = 0.2;

  void validate() const {
    if (lambda_a <= 0 || lambda_d <= 0 || lambda_point <= 0 || epsilon <= 0 ||
        rho <= 0 || sigma1 <= 0 || sigma2 <= 0 || beta_peak <= 0)
      throw ValidationError("LossWeights: all weights must be positive");
    if (K < 1 || K > 9) throw ValidationError("LossWeights: K must be in 1..9");
    if (sigma2 >= sigma1)
      throw ValidationError("LossWeights: sigma2 must be < sigma1");
  }
};

// Channel count for segmentation; background is class 0, foreground class 1.
constexpr int kClasses = 2;
constexpr int kForeground = 1;

// -inf threshold selects nothing (class absent from the dataset).
constexpr double kNoThreshold = -std::numeric_limits<double>::infinity();

// E(p_i) = -sum_l p_il ln p_il with 0 ln 0 = 0. Rejects non-simplex rows
// (|sum - 1| > 1e-4).
template <typename T>
Grid<T> pixel_entropy(const Tensor<T>& p) {
  const size_t n = p.plane();
  Grid<T> out(p.h(), p.w());
  for (size_t i = 0; i < n; ++i) {
    T sum = T(0), e = T(0);
    for (int l = 0; l < p.c(); ++l) {
      const T v = p[l * n + i];
      sum += v;
      if (v > T(0)) e -= v * std::log(v);
    }
    if (std::abs(double(sum) - 1.0) > 1e-4)
      throw ValidationError("pixel_entropy: probabilities do not sum to 1");
    out[i] = e;
  }
  return out;
}

// Nearest-rank Kth decile per class: the ceil(K/10 * n)-th smallest value.
// Empty classes get -inf (selects nothing) with a warning.
inline std::vector<double> decile_threshold(
    const std::vector<std::vector<double>>& entropies_by_class, int K) {
  if (K < 1 || K > 9) throw ArgumentError("decile_threshold: K must be in 1..9");
  std::vector<double> out;
  for (size_t l = 0; l < entropies_by_class.size(); ++l) {
    std::vector<double> v = entropies_by_class[l];
    if (v.empty()) {
      log::warn("decile_threshold: class %zu has no pixels, selecting none", l);
      out.push_back(kNoThreshold);
      continue;
    }
    const size_t rank =
        size_t(std::ceil(double(K) / 10.0 * double(v.size())));  // 1-based
    std::nth_element(v.begin(), v.begin() + (rank - 1), v.end());
    out.push_back(v[rank - 1]);
  }
  return out;
}

// Per-pixel one-hot-or-null training target for the target domain.
struct PseudoLabel {
  Mask selected;  // nonzero where a pseudo-label exists
  GridU8 cls;     // argmax class, meaningful only where selected

  size_t count_selected() const {
    size_t n = 0;
    for (size_t i = 0; i < selected.size(); ++i) n += selected[i] != 0;
    return n;
  }
};

// Argmax class where the pixel entropy is within the class threshold
// (inclusive at the threshold element, so the nearest-rank pixel itself is
// kept); argmax ties resolve toward the background class.
template <typename T>
PseudoLabel select_pseudo_labels(const Tensor<T>& p,
                                 const std::vector<double>& thresholds) {
  if (int(thresholds.size()) != p.c())
    throw ArgumentError("select_pseudo_labels: one threshold per class");
  const size_t n = p.plane();
  const Grid<T> ent = pixel_entropy(p);
  PseudoLabel out;
  out.selected = Mask(p.h(), p.w(), 0);
  out.cls = GridU8(p.h(), p.w(), 0);
  for (size_t i = 0; i < n; ++i) {
    int best = 0;
    for (int l = 1; l < p.c(); ++l)
      if (p[l * n + i] > p[best * n + i]) best = l;
    if (double(ent[i]) <= thresholds[best]) {
      out.selected[i] = 1;
      out.cls[i] = uint8_t(best);
    }
  }
  return out;
}

// Convenience form computing thresholds from this map's own deciles.
template <typename T>
PseudoLabel select_pseudo_labels(const Tensor<T>& p, int K) {
  const size_t n = p.plane();
  const Grid<T> ent = pixel_entropy(p);
  std::vector<std::vector<double>> per_class(p.c());
  for (size_t i = 0; i < n; ++i) {
    int best = 0;
    for (int l = 1; l < p.c(); ++l)
      if (p[l * n + i] > p[best * n + i]) best = l;
    per_class[best].push_back(double(ent[i]));
  }
  return select_pseudo_labels(p, decile_threshold(per_class, K));
}

struct SegLoss {
  double source_term = 0.0;
  double target_term = 0.0;
  double total = 0.0;
};

// Mean cross-entropy over source pixels plus mean cross-entropy over the
// selected target pixels (no selected pixels -> zero target term). Optional
// outputs receive the gradients with respect to the pre-softmax logits.
template <typename T>
SegLoss seg_loss(const Tensor<T>& p_s, const Mask& y_s, const Tensor<T>& p_t,
                 const PseudoLabel& pl, Tensor<T>* dlog_s = nullptr,
                 Tensor<T>* dlog_t = nullptr) {
  if (p_s.h() != y_s.h() || p_s.w() != y_s.w())
    throw ArgumentError("seg_loss: source shape mismatch");
  if (p_t.h() != pl.selected.h() || p_t.w() != pl.selected.w())
    throw ArgumentError("seg_loss: target shape mismatch");
  constexpr double kTiny = 1e-12;

  SegLoss out;
  {
    const size_t n = p_s.plane();
    if (dlog_s) {
      dlog_s->resize(p_s.c(), p_s.h(), p_s.w());
      dlog_s->zero();
    }
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const int y = y_s[i] ? 1 : 0;
      acc -= std::log(std::max(double(p_s[y * n + i]), kTiny));
      if (dlog_s)
        for (int l = 0; l < p_s.c(); ++l)
          (*dlog_s)[l * n + i] =
              (p_s[l * n + i] - T(l == y ? 1 : 0)) / T(double(n));
    }
    out.source_term = acc / double(n);
  }
  {
    const size_t n = p_t.plane();
    if (dlog_t) {
      dlog_t->resize(p_t.c(), p_t.h(), p_t.w());
      dlog_t->zero();
    }
    size_t sel = 0;
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) sel += pl.selected[i] != 0;
    if (sel > 0) {
      for (size_t i = 0; i < n; ++i) {
        if (!pl.selected[i]) continue;  // null labels contribute nothing
        const int y = pl.cls[i];
        acc -= std::log(std::max(double(p_t[y * n + i]), kTiny));
        if (dlog_t)
          for (int l = 0; l < p_t.c(); ++l)
            (*dlog_t)[l * n + i] =
                (p_t[l * n + i] - T(l == y ? 1 : 0)) / T(double(sel));
      }
      out.target_term = acc / double(sel);
    }
  }
  out.total = out.source_term + out.target_term;
  return out;
}

// w_i = 1 on the estimated background (foreground probability below rho) and
// on the annotated neighbourhood (target heatmap positive); 0 elsewhere.
template <typename T>
Mask background_weight_map(const Tensor<T>& p_t, const Tensor<T>& dbar_t,
                           double rho) {
  if (rho <= 0.0 || rho >= 1.0)
    throw ArgumentError("background_weight_map: rho must be in (0,1)");
  if (p_t.h() != dbar_t.h() || p_t.w() != dbar_t.w())
    throw ArgumentError("background_weight_map: shape mismatch");
  const size_t n = p_t.plane();
  Mask w(p_t.h(), p_t.w(), 0);
  for (size_t i = 0; i < n; ++i)
    w[i] = (double(p_t[kForeground * n + i]) < rho || dbar_t[i] > T(0)) ? 1 : 0;
  return w;
}

// Weighted center-regression loss: per-pixel means of
//   (1 + lambda beta_s) (dhat_s - d_s)^2   over the source crop and
//   (w + lambda beta_t) (dhat_t - dbar_t)^2 over the target crop.
// Optional outputs receive d(loss)/d(dhat).
template <typename T>
double detection_loss(const Tensor<T>& dhat_s, const Tensor<T>& d_s,
                      const Tensor<T>& dhat_t, const Tensor<T>& dbar_t,
                      const Mask& w, const Tensor<T>& beta_s,
                      const Tensor<T>& beta_t, double lambda_point,
                      Tensor<T>* ddhat_s = nullptr,
                      Tensor<T>* ddhat_t = nullptr) {
  if (!dhat_s.same_shape(d_s) || !dhat_t.same_shape(dbar_t))
    throw ArgumentError("detection_loss: prediction/target shape mismatch");
  if (!dhat_s.same_shape(beta_s) || !dhat_t.same_shape(beta_t))
    throw ArgumentError("detection_loss: beta map shape mismatch");
  if (w.h() != dhat_t.h() || w.w() != dhat_t.w())
    throw ArgumentError("detection_loss: weight map shape mismatch");

  double loss = 0.0;
  {
    const size_t n = dhat_s.size();
    if (ddhat_s) {
      ddhat_s->resize(dhat_s.c(), dhat_s.h(), dhat_s.w());
    }
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double coef = 1.0 + lambda_point * double(beta_s[i]);
      const double err = double(dhat_s[i]) - double(d_s[i]);
      acc += coef * err * err;
      if (ddhat_s) (*ddhat_s)[i] = T(2.0 * coef * err / double(n));
    }
    loss += acc / double(n);
  }
  {
    const size_t n = dhat_t.size();
    if (ddhat_t) {
      ddhat_t->resize(dhat_t.c(), dhat_t.h(), dhat_t.w());
    }
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double coef = double(w[i]) + lambda_point * double(beta_t[i]);
      const double err = double(dhat_t[i]) - double(dbar_t[i]);
      acc += coef * err * err;
      if (ddhat_t) (*ddhat_t)[i] = T(2.0 * coef * err / double(n));
    }
    loss += acc / double(n);
  }
  return loss;
}

// Hinge consistency with soft margin epsilon around the counting prior:
// max(0, (T - eps) - That) + max(0, That - (T + eps)).
inline double counting_consistency(double t_hat, double t_prior, double eps,
                                   double* dt_hat = nullptr) {
  if (eps < 0) throw ArgumentError("counting_consistency: epsilon must be >= 0");
  const double lo = (t_prior - eps) - t_hat;
  const double hi = t_hat - (t_prior + eps);
  if (dt_hat) *dt_hat = (lo > 0 ? -1.0 : 0.0) + (hi > 0 ? 1.0 : 0.0);
  return std::max(0.0, lo) + std::max(0.0, hi);
}

// Numerically stable binary cross-entropy against a constant label, averaged
// over the patch logit map.
template <typename T>
double bce_logits(const Tensor<T>& logits, double label,
                  Tensor<T>* dlogits = nullptr) {
  const size_t n = logits.size();
  if (n == 0) throw ArgumentError("bce_logits: empty logit map");
  if (dlogits) {
    dlogits->resize(logits.c(), logits.h(), logits.w());
  }
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double z = double(logits[i]);
    acc += std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
    if (dlogits) {
      const double sig = 1.0 / (1.0 + std::exp(-z));
      (*dlogits)[i] = T((sig - label) / double(n));
    }
  }
  return acc / double(n);
}

struct AdvLosses {
  double l_adv = 0.0;       // pushes D(p_t) toward the source label
  double l_d_source = 0.0;  // D(p_s) classified as source
  double l_d_target = 0.0;  // D(p_t) classified as target
  double l_d() const { return l_d_source + l_d_target; }
};

constexpr double kSourceLabel = 1.0;
constexpr double kTargetLabel = 0.0;

// Loss values only (the training loop stages its own gradient plumbing so
// that l_adv updates G1 and l_d updates D).
template <typename T>
AdvLosses adversarial_losses(nn::Discriminator<T>& d, const Tensor<T>& p_s,
                             const Tensor<T>& p_t, nn::Backend be) {
  AdvLosses out;
  const Tensor<T> logit_s = d.forward(p_s, be);
  out.l_d_source = bce_logits(logit_s, kSourceLabel);
  const Tensor<T> logit_t = d.forward(p_t, be);
  out.l_d_target = bce_logits(logit_t, kTargetLabel);
  out.l_adv = bce_logits(logit_t, kSourceLabel);
  return out;
}

struct ObjectiveParts {
  double l_s = 0.0;
  double l_adv = 0.0;
  double l_d = 0.0;
  double l_c = 0.0;
};

struct Objective {
  double total = 0.0;
  double lambda_c = 0.0;
};

// L = L_s + lambda_a L_adv + lambda_d L_d + lambda_c(z) L_c with
// lambda_c = 1 - z / z_max decaying over iterations.
inline Objective total_objective(const ObjectiveParts& parts, int64_t z,
                                 int64_t z_max, const LossWeights& w) {
  if (z_max < 1) throw ArgumentError("total_objective: z_max must be >= 1");
  if (z < 0) throw ArgumentError("total_objective: z must be >= 0");
  Objective out;
  if (z > z_max) {
    log::warn("total_objective: z=%lld beyond z_max=%lld, clamping lambda_c",
              static_cast<long long>(z), static_cast<long long>(z_max));
    out.lambda_c = 0.0;
  } else {
    out.lambda_c = 1.0 - double(z) / double(z_max);
  }
  out.total = parts.l_s + w.lambda_a * parts.l_adv + w.lambda_d * parts.l_d +
              out.lambda_c * parts.l_c;
  return out;
}

}  // namespace wda::losses

#endif  // WDA_LOSSES_HPP_
