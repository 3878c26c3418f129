#ifndef WDA_TESTS_ORACLES_HPP_
#define WDA_TESTS_ORACLES_HPP_

// Brute-force reference implementations, deliberately independent of the
// library code paths they verify: every pairwise quantity is recomputed by
// full pixel scans and the matching rules are applied literally.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "wda/grid.hpp"

namespace wda::oracles {

inline int count_ids(const InstanceMap& m) {
  int n = 0;
  for (size_t i = 0; i < m.size(); ++i) n = std::max(n, m[i]);
  return n;
}

inline long area_of(const InstanceMap& m, int id) {
  long a = 0;
  for (size_t i = 0; i < m.size(); ++i) a += m[i] == id;
  return a;
}

inline long intersection_of(const InstanceMap& a, int ida, const InstanceMap& b,
                            int idb) {
  long n = 0;
  for (size_t i = 0; i < a.size(); ++i) n += (a[i] == ida && b[i] == idb);
  return n;
}

// Aggregated Jaccard by the stated greedy rule: ground truth in ascending
// id, best unused positive-overlap prediction by exact Jaccard comparison,
// ties toward the smaller prediction id.
inline double brute_aji(const InstanceMap& gt, const InstanceMap& pred) {
  const int ng = count_ids(gt), np = count_ids(pred);
  std::vector<char> used(np + 1, 0);
  long num = 0, den = 0;
  for (int g = 1; g <= ng; ++g) {
    const long ga = area_of(gt, g);
    int best = 0;
    long bi = 0, bu = 1;
    for (int p = 1; p <= np; ++p) {
      if (used[p]) continue;
      const long inter = intersection_of(gt, g, pred, p);
      if (inter == 0) continue;
      const long uni = ga + area_of(pred, p) - inter;
      if (best == 0 || inter * bu > bi * uni) {
        best = p;
        bi = inter;
        bu = uni;
      }
    }
    if (best > 0) {
      used[best] = 1;
      num += bi;
      den += bu;
    } else {
      den += ga;
    }
  }
  for (int p = 1; p <= np; ++p)
    if (!used[p]) den += area_of(pred, p);
  return den == 0 ? 1.0 : double(num) / double(den);
}

struct BrutePq {
  double pq = 0, sq = 0, rq = 0;
  double iou_sum = 0;
  int tp = 0, fp = 0, fn = 0;
};

// Panoptic quality by full pair enumeration of IoU > 0.5 matches (verifying
// their uniqueness along the way).
inline BrutePq brute_pq(const InstanceMap& gt, const InstanceMap& pred) {
  const int ng = count_ids(gt), np = count_ids(pred);
  std::vector<char> gm(ng + 1, 0), pm(np + 1, 0);
  double iou_sum = 0.0;
  int tp = 0;
  for (int g = 1; g <= ng; ++g) {
    for (int p = 1; p <= np; ++p) {
      const long inter = intersection_of(gt, g, pred, p);
      if (inter == 0) continue;
      const long uni = area_of(gt, g) + area_of(pred, p) - inter;
      if (2 * inter > uni) {  // IoU > 0.5, exactly
        // The matching must be one-to-one; a second match would mean the
        // IoU > 0.5 uniqueness argument failed.
        if (gm[g] || pm[p]) throw std::logic_error("pq matching not unique");
        gm[g] = 1;
        pm[p] = 1;
        iou_sum += double(inter) / double(uni);
        ++tp;
      }
    }
  }
  BrutePq out;
  out.tp = tp;
  out.iou_sum = iou_sum;
  for (int g = 1; g <= ng; ++g) out.fn += !gm[g];
  for (int p = 1; p <= np; ++p) out.fp += !pm[p];
  if (out.tp + out.fp + out.fn == 0) {
    out.pq = out.sq = out.rq = 1.0;
    return out;
  }
  const double den = out.tp + 0.5 * out.fp + 0.5 * out.fn;
  out.pq = iou_sum / den;
  out.sq = tp > 0 ? iou_sum / tp : 0.0;
  out.rq = tp / den;
  return out;
}

}  // namespace wda::oracles

#endif  // WDA_TESTS_ORACLES_HPP_
