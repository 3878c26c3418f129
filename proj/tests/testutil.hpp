#ifndef WDA_TESTS_TESTUTIL_HPP_
#define WDA_TESTS_TESTUTIL_HPP_

#include <algorithm>
#include <vector>

#include "wda/grid.hpp"
#include "wda/rng.hpp"

namespace wda::testutil {

// Random valid instance map: seeded BFS region growth, which guarantees
// 4-connected, non-overlapping instances with contiguous ids.
inline InstanceMap random_instances(int h, int w, int max_instances, Rng& rng) {
  InstanceMap m(h, w, 0);
  const int n = rng.uniform_int(max_instances + 1);
  int placed = 0;
  for (int k = 0; k < n; ++k) {
    const int sy = rng.uniform_int(h), sx = rng.uniform_int(w);
    if (m.at(sy, sx) != 0) continue;
    ++placed;
    const int target_area = 1 + rng.uniform_int(h * w / std::max(1, 2 * n));
    std::vector<int> frontier = {sy * w + sx};
    m.at(sy, sx) = placed;
    int area = 1;
    while (!frontier.empty() && area < target_area) {
      const int pick = rng.uniform_int(int(frontier.size()));
      const int cur = frontier[pick];
      frontier[pick] = frontier.back();
      frontier.pop_back();
      const int cy = cur / w, cx = cur % w;
      const int ny[4] = {cy - 1, cy + 1, cy, cy};
      const int nx[4] = {cx, cx, cx - 1, cx + 1};
      for (int d = 0; d < 4; ++d) {
        if (ny[d] < 0 || ny[d] >= h || nx[d] < 0 || nx[d] >= w) continue;
        if (m.at(ny[d], nx[d]) != 0) continue;
        m.at(ny[d], nx[d]) = placed;
        frontier.push_back(ny[d] * w + nx[d]);
        if (++area >= target_area) break;
      }
    }
  }
  return m;
}

inline Mask random_mask(int h, int w, double fg_prob, Rng& rng) {
  Mask m(h, w, 0);
  for (size_t i = 0; i < m.size(); ++i) m[i] = rng.bernoulli(fg_prob) ? 1 : 0;
  return m;
}

}  // namespace wda::testutil

#endif  // WDA_TESTS_TESTUTIL_HPP_
