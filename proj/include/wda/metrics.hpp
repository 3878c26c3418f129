#ifndef WDA_METRICS_HPP_
#define WDA_METRICS_HPP_

#include "wda/grid.hpp"

namespace wda::metrics {

// 2|a n b| / (|a| + |b|); 1 when both masks are empty.
double dsc(const Mask& a, const Mask& b);

// Pooled-aggregation pieces: dsc = 2*intersection / (area_a + area_b).
struct DscParts {
  long intersection = 0;
  long area_a = 0;
  long area_b = 0;
  double value() const;
};
DscParts dsc_parts(const Mask& a, const Mask& b);

// Aggregated Jaccard index. Ground-truth instances are processed in
// ascending id; each matches the unused prediction with the highest Jaccard
// (ties toward the smaller prediction id, zero-overlap predictions are not
// candidates). Numerator sums matched intersections; the denominator sums
// matched unions, unmatched ground-truth areas, and unmatched prediction
// areas.
struct AjiParts {
  long numerator = 0;
  long denominator = 0;
  double value() const;
};
AjiParts aji_parts(const InstanceMap& gt, const InstanceMap& pred);
double aji(const InstanceMap& gt, const InstanceMap& pred);

// Panoptic quality with the unique IoU > 0.5 matching. Both-empty inputs
// score 1 by convention so per-image averages stay defined.
struct PqResult {
  double pq = 0.0, sq = 0.0, rq = 0.0;
  int tp = 0, fp = 0, fn = 0;
  double iou_sum = 0.0;
};
PqResult pq(const InstanceMap& gt, const InstanceMap& pred);
PqResult pq_from_parts(double iou_sum, int tp, int fp, int fn);

// |round(pred) - gt|
double count_error(double pred_count, int gt_count);

}  // namespace wda::metrics

#endif  // WDA_METRICS_HPP_
