#include "wda/postprocess.hpp"

#include <algorithm>
#include <vector>

#include "wda/errors.hpp"

namespace wda::postprocess {

namespace {

// Separable square-element min/max filter: rows then columns.
template <bool Max>
Mask square_filter(const Mask& m, int radius) {
  // Outside the frame counts as background for dilation and as foreground
  // for erosion, so shapes touching the border are not nibbled away.
  const uint8_t pad = Max ? 0 : 1;
  const int h = m.h(), w = m.w();
  Mask tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      uint8_t v = pad;
      for (int dx = -radius; dx <= radius; ++dx) {
        const int xx = x + dx;
        const uint8_t s = (xx >= 0 && xx < w) ? (m.at(y, xx) ? 1 : 0) : pad;
        v = Max ? std::max(v, s) : std::min(v, s);
      }
      tmp.at(y, x) = v;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      uint8_t v = pad;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        const uint8_t s = (yy >= 0 && yy < h) ? tmp.at(yy, x) : pad;
        v = Max ? std::max(v, s) : std::min(v, s);
      }
      out.at(y, x) = v;
    }
  }
  return out;
}

}  // namespace

Mask erode(const Mask& mask, int radius) {
  return square_filter<false>(mask, radius);
}

Mask dilate(const Mask& mask, int radius) {
  return square_filter<true>(mask, radius);
}

Mask open_close(const Mask& mask, int radius) {
  if (radius < 1) throw ArgumentError("open_close: radius must be >= 1");
  Mask opened = dilate(erode(mask, radius), radius);
  return erode(dilate(opened, radius), radius);
}

InstanceMap label_components(const Mask& mask) {
  const int h = mask.h(), w = mask.w();
  InstanceMap labels(h, w, 0);
  std::vector<int> stack;
  int next = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(y, x) || labels.at(y, x) != 0) continue;
      ++next;
      stack.push_back(y * w + x);
      labels.at(y, x) = next;
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const int cy = i / w, cx = i % w;
        const int ny[4] = {cy - 1, cy + 1, cy, cy};
        const int nx[4] = {cx, cx, cx - 1, cx + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
          if (!mask.at(ny[k], nx[k]) || labels.at(ny[k], nx[k]) != 0) continue;
          labels.at(ny[k], nx[k]) = next;
          stack.push_back(ny[k] * w + nx[k]);
        }
      }
    }
  }
  return labels;
}

Mask filter_with_peaks(const Mask& mask, const PointSet& peaks) {
  const InstanceMap labels = label_components(mask);
  int n = 0;
  for (size_t i = 0; i < labels.size(); ++i) n = std::max(n, labels[i]);

  std::vector<char> keep(n + 1, 0);
  for (const Point& p : peaks.points) {
    if (!labels.in_bounds(p.row, p.col))
      throw ArgumentError("filter_with_peaks: peak out of bounds");
    const int id = labels.at(p.row, p.col);
    if (id > 0) keep[id] = 1;
  }

  Mask out(mask.h(), mask.w(), 0);
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = (labels[i] > 0 && keep[labels[i]]) ? 1 : 0;
  return out;
}

}  // namespace wda::postprocess
