#include "wda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "wda/errors.hpp"

namespace wda::metrics {

namespace {

int max_id(const InstanceMap& m) {
  int n = 0;
  for (size_t i = 0; i < m.size(); ++i) n = std::max(n, m[i]);
  return n;
}

// Pairwise intersection table plus per-instance areas in one pass.
struct Overlap {
  int ng = 0, np = 0;
  std::vector<long> gt_area, pred_area;
  std::map<std::pair<int, int>, long> inter;  // (gt id, pred id) -> pixels

  Overlap(const InstanceMap& gt, const InstanceMap& pred) {
    if (!gt.same_shape(pred))
      throw ArgumentError("instance maps must have the same shape");
    ng = max_id(gt);
    np = max_id(pred);
    gt_area.assign(ng + 1, 0);
    pred_area.assign(np + 1, 0);
    for (size_t i = 0; i < gt.size(); ++i) {
      const int g = gt[i], p = pred[i];
      if (g > 0) ++gt_area[g];
      if (p > 0) ++pred_area[p];
      if (g > 0 && p > 0) ++inter[{g, p}];
    }
  }
};

}  // namespace

double DscParts::value() const {
  const long denom = area_a + area_b;
  return denom == 0 ? 1.0 : 2.0 * double(intersection) / double(denom);
}

DscParts dsc_parts(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw ArgumentError("dsc: shape mismatch");
  DscParts p;
  for (size_t i = 0; i < a.size(); ++i) {
    const bool fa = a[i] != 0, fb = b[i] != 0;
    p.area_a += fa;
    p.area_b += fb;
    p.intersection += fa && fb;
  }
  return p;
}

double dsc(const Mask& a, const Mask& b) { return dsc_parts(a, b).value(); }

double AjiParts::value() const {
  return denominator == 0 ? 1.0 : double(numerator) / double(denominator);
}

AjiParts aji_parts(const InstanceMap& gt, const InstanceMap& pred) {
  const Overlap ov(gt, pred);
  std::vector<char> used(ov.np + 1, 0);
  AjiParts out;
  for (int g = 1; g <= ov.ng; ++g) {
    int best_p = 0;
    long best_inter = 0, best_union = 1;
    for (const auto& [key, inter] : ov.inter) {
      if (key.first != g || used[key.second]) continue;
      const long uni = ov.gt_area[g] + ov.pred_area[key.second] - inter;
      // Exact Jaccard comparison; strict > keeps the smaller pred id on ties.
      if (best_p == 0 || inter * best_union > best_inter * uni) {
        best_p = key.second;
        best_inter = inter;
        best_union = uni;
      }
    }
    if (best_p > 0) {
      used[best_p] = 1;
      out.numerator += best_inter;
      out.denominator += best_union;
    } else {
      out.denominator += ov.gt_area[g];
    }
  }
  for (int p = 1; p <= ov.np; ++p)
    if (!used[p]) out.denominator += ov.pred_area[p];
  return out;
}

double aji(const InstanceMap& gt, const InstanceMap& pred) {
  return aji_parts(gt, pred).value();
}

PqResult pq_from_parts(double iou_sum, int tp, int fp, int fn) {
  PqResult r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.iou_sum = iou_sum;
  if (tp + fp + fn == 0) {
    r.pq = r.sq = r.rq = 1.0;
    return r;
  }
  const double denom = tp + 0.5 * fp + 0.5 * fn;
  r.pq = iou_sum / denom;
  r.sq = tp > 0 ? iou_sum / tp : 0.0;
  r.rq = tp / denom;
  return r;
}

PqResult pq(const InstanceMap& gt, const InstanceMap& pred) {
  const Overlap ov(gt, pred);
  std::vector<char> gt_matched(ov.ng + 1, 0), pred_matched(ov.np + 1, 0);
  double iou_sum = 0.0;
  int tp = 0;
  for (const auto& [key, inter] : ov.inter) {
    const long uni = ov.gt_area[key.first] + ov.pred_area[key.second] - inter;
    const double iou = double(inter) / double(uni);
    if (iou > 0.5) {  // such matches are provably one-to-one
      gt_matched[key.first] = 1;
      pred_matched[key.second] = 1;
      iou_sum += iou;
      ++tp;
    }
  }
  int fn = 0, fp = 0;
  for (int g = 1; g <= ov.ng; ++g) fn += !gt_matched[g];
  for (int p = 1; p <= ov.np; ++p) fp += !pred_matched[p];
  return pq_from_parts(iou_sum, tp, fp, fn);
}

double count_error(double pred_count, int gt_count) {
  return std::abs(double(std::lround(pred_count)) - double(gt_count));
}

}  // namespace wda::metrics
