#include "wda/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "wda/errors.hpp"
#include "wda/io.hpp"
#include "wda/rng.hpp"

namespace wda {

void PointSet::validate() const {
  std::set<Point> seen;
  for (const Point& p : points) {
    if (p.row < 0 || p.row >= image_height || p.col < 0 ||
        p.col >= image_width)
      throw ValidationError("point out of bounds");
    if (!seen.insert(p).second) throw ValidationError("duplicate point");
  }
}

namespace annotations {

PointSet instance_centers(const InstanceMap& inst) {
  int n = 0;
  for (size_t i = 0; i < inst.size(); ++i) n = std::max(n, inst[i]);

  std::vector<double> sum_r(n + 1, 0.0), sum_c(n + 1, 0.0);
  std::vector<long> cnt(n + 1, 0);
  for (int y = 0; y < inst.h(); ++y) {
    for (int x = 0; x < inst.w(); ++x) {
      const int id = inst.at(y, x);
      if (id <= 0) continue;
      sum_r[id] += y;
      sum_c[id] += x;
      ++cnt[id];
    }
  }

  PointSet out;
  out.image_height = inst.h();
  out.image_width = inst.w();
  for (int id = 1; id <= n; ++id) {
    if (cnt[id] == 0) continue;
    const double cy = sum_r[id] / cnt[id];
    const double cx = sum_c[id] / cnt[id];
    Point p{int(std::lround(cy)), int(std::lround(cx))};
    if (!inst.in_bounds(p.row, p.col) || inst.at(p.row, p.col) != id) {
      // Concave instance: snap to the nearest instance pixel, first in
      // row-major order among equidistant candidates.
      double best = 1e300;
      Point bp = p;
      for (int y = 0; y < inst.h(); ++y) {
        for (int x = 0; x < inst.w(); ++x) {
          if (inst.at(y, x) != id) continue;
          const double d = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          if (d < best - 1e-12) {
            best = d;
            bp = {y, x};
          }
        }
      }
      p = bp;
    }
    out.points.push_back(p);
  }
  return out;
}

PointSet sample_sparse_points(const PointSet& full, double ratio,
                              uint64_t seed) {
  if (ratio < 0.0 || ratio > 1.0)
    throw ArgumentError("sample_sparse_points: ratio must be in [0,1]");
  PointSet out;
  out.image_height = full.image_height;
  out.image_width = full.image_width;
  const size_t n = full.size();
  if (n == 0 || ratio == 0.0) return out;

  size_t m = static_cast<size_t>(std::lround(ratio * double(n)));
  m = std::clamp<size_t>(std::max<size_t>(m, 1), 1, n);

  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(m);
  for (size_t i : idx) out.points.push_back(full.points[i]);
  std::sort(out.points.begin(), out.points.end());
  return out;
}

Heatmap render_heatmap(const PointSet& pts, double sigma) {
  return render_heatmap(pts, sigma, 1.0);
}

Heatmap render_heatmap(const PointSet& pts, double sigma, double peak) {
  if (sigma <= 0.0) throw ArgumentError("render_heatmap: sigma must be > 0");
  Heatmap h(pts.image_height, pts.image_width, 0.0f);
  // Contributions beyond this radius are below 1e-12 of the peak.
  const int radius = int(std::ceil(7.5 * sigma));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (const Point& p : pts.points) {
    const int y0 = std::max(0, p.row - radius);
    const int y1 = std::min(h.h() - 1, p.row + radius);
    const int x0 = std::max(0, p.col - radius);
    const int x1 = std::min(h.w() - 1, p.col + radius);
    for (int y = y0; y <= y1; ++y) {
      const double dy = y - p.row;
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - p.col;
        const float v = float(peak * std::exp(-(dy * dy + dx * dx) * inv));
        if (v > h.at(y, x)) h.at(y, x) = v;
      }
    }
  }
  return h;
}

PointSet detect_peaks(const Heatmap& h, double threshold,
                      double min_distance) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw ArgumentError("detect_peaks: threshold must be in (0,1)");

  struct Cand {
    float value;
    Point p;
  };
  std::vector<Cand> cands;
  for (int y = 0; y < h.h(); ++y) {
    for (int x = 0; x < h.w(); ++x) {
      const float v = h.at(y, x);
      if (v < threshold) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const int yy = y + dy, xx = x + dx;
          if (!h.in_bounds(yy, xx)) continue;
          if (h.at(yy, xx) > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) cands.push_back({v, {y, x}});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.p < b.p;
  });

  PointSet out;
  out.image_height = h.h();
  out.image_width = h.w();
  for (const Cand& c : cands) {
    bool ok = true;
    for (const Point& q : out.points) {
      const int cheb = std::max(std::abs(q.row - c.p.row),
                                std::abs(q.col - c.p.col));
      if (cheb < min_distance) {
        ok = false;
        break;
      }
    }
    if (ok) out.points.push_back(c.p);
  }
  return out;
}

std::string to_csv(const PointSet& ps) {
  std::ostringstream ss;
  ss << "row,col\n";
  for (const Point& p : ps.points) ss << p.row << "," << p.col << "\n";
  return ss.str();
}

PointSet from_csv(const std::string& text, int height, int width) {
  PointSet ps;
  ps.image_height = height;
  ps.image_width = width;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("row,col", 0) != 0)
    throw ValidationError("point csv missing 'row,col' header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ValidationError("malformed point csv line: " + line);
    Point p{std::stoi(line.substr(0, comma)), std::stoi(line.substr(comma + 1))};
    ps.points.push_back(p);
  }
  ps.validate();
  return ps;
}

void save_csv(const PointSet& ps, const std::string& path) {
  io::write_text_file(path, to_csv(ps));
}

PointSet load_csv(const std::string& path, int height, int width) {
  return from_csv(io::read_text_file(path), height, width);
}

}  // namespace annotations
}  // namespace wda
