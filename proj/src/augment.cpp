#include "wda/augment.hpp"

#include <algorithm>
#include <cmath>

#include "wda/errors.hpp"
#include "wda/rng.hpp"

namespace wda::augment {

namespace {

// Clockwise quarter turn: (r, c) -> (c, H-1-r).
template <typename T>
Grid<T> rot90(const Grid<T>& g) {
  Grid<T> out(g.w(), g.h());
  for (int y = 0; y < g.h(); ++y)
    for (int x = 0; x < g.w(); ++x) out.at(x, g.h() - 1 - y) = g.at(y, x);
  return out;
}

template <typename T>
Grid<T> hflip(const Grid<T>& g) {
  Grid<T> out(g.h(), g.w());
  for (int y = 0; y < g.h(); ++y)
    for (int x = 0; x < g.w(); ++x) out.at(y, g.w() - 1 - x) = g.at(y, x);
  return out;
}

}  // namespace

template <typename T>
Grid<T> apply_dihedral(const Grid<T>& g, int k) {
  if (k < 0 || k > 7) throw ArgumentError("dihedral element must be in [0,8)");
  Grid<T> out = g;
  if (k >= 4) {
    out = hflip(out);
    k -= 4;
  }
  for (int i = 0; i < k; ++i) out = rot90(out);
  return out;
}

Point map_point_dihedral(const Point& p, int h, int w, int k) {
  if (k < 0 || k > 7) throw ArgumentError("dihedral element must be in [0,8)");
  Point q = p;
  if (k >= 4) {
    q = {q.row, w - 1 - q.col};
    k -= 4;
  }
  int ch = h, cw = w;
  for (int i = 0; i < k; ++i) {
    q = {q.col, ch - 1 - q.row};
    std::swap(ch, cw);
  }
  return q;
}

ImageSample apply_dihedral_sample(const ImageSample& s, int k) {
  ImageSample out;
  out.name = s.name;
  out.domain_tag = s.domain_tag;
  out.image = apply_dihedral(s.image, k);
  if (s.dense_label) out.dense_label = apply_dihedral(*s.dense_label, k);
  if (s.instances) out.instances = apply_dihedral(*s.instances, k);
  if (s.points) {
    PointSet ps;
    ps.image_height = out.image.h();
    ps.image_width = out.image.w();
    for (const Point& p : s.points->points)
      ps.points.push_back(map_point_dihedral(p, s.h(), s.w(), k));
    std::sort(ps.points.begin(), ps.points.end());
    out.points = std::move(ps);
  }
  return out;
}

GridF gaussian_blur(const GridF& img, double sigma) {
  if (sigma <= 0) return img;
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<float> kern(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kern[i + radius] = float(std::exp(-0.5 * i * i / (sigma * sigma)));
    sum += kern[i + radius];
  }
  for (float& v : kern) v = float(v / sum);

  const int h = img.h(), w = img.w();
  GridF tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float v = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        v += kern[i + radius] * img.at(y, xx);
      }
      tmp.at(y, x) = v;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float v = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        v += kern[i + radius] * tmp.at(yy, x);
      }
      out.at(y, x) = v;
    }
  }
  return out;
}

GridF resize_bilinear(const GridF& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    throw ArgumentError("resize_bilinear: bad output size");
  GridF out(out_h, out_w);
  const double sy = double(img.h()) / out_h;
  const double sx = double(img.w()) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(img.h() - 1));
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, img.h() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx =
          std::clamp((x + 0.5) * sx - 0.5, 0.0, double(img.w() - 1));
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, img.w() - 1);
      const double tx = fx - x0;
      out.at(y, x) = float((1 - ty) * ((1 - tx) * img.at(y0, x0) +
                                       tx * img.at(y0, x1)) +
                           ty * ((1 - tx) * img.at(y1, x0) +
                                 tx * img.at(y1, x1)));
    }
  }
  return out;
}

ImageSample geometric_aug(const ImageSample& s, uint64_t seed,
                          const AugParams& params) {
  Rng rng(seed);
  ImageSample out = apply_dihedral_sample(s, rng.uniform_int(8));
  if (rng.bernoulli(params.p_photometric)) {
    const float off = float(rng.uniform(-params.brightness, params.brightness));
    const float scale =
        float(rng.uniform(params.contrast_lo, params.contrast_hi));
    for (size_t i = 0; i < out.image.size(); ++i)
      out.image[i] =
          std::clamp(0.5f + scale * (out.image[i] - 0.5f) + off, 0.0f, 1.0f);
  }
  if (rng.bernoulli(params.p_blur)) {
    out.image = gaussian_blur(
        out.image, rng.uniform(params.blur_sigma_lo, params.blur_sigma_hi));
  }
  return out;
}

namespace {

constexpr int kWindowStride = 16;

template <typename Better>
Window search_window(const PointSet& pts, int patch, Better better) {
  const int h = pts.image_height, w = pts.image_width;
  if (patch > h || patch > w)
    throw ArgumentError("cp_aug: patch exceeds image size");
  Window best{0, 0};
  int best_count = count_in_window(pts, best, patch);
  for (int r = 0; r <= h - patch; r += kWindowStride) {
    for (int c = 0; c <= w - patch; c += kWindowStride) {
      const int n = count_in_window(pts, {r, c}, patch);
      if (better(n, best_count)) {
        best = {r, c};
        best_count = n;
      }
    }
  }
  return best;
}

}  // namespace

int count_in_window(const PointSet& pts, const Window& w, int patch) {
  int n = 0;
  for (const Point& p : pts.points)
    if (p.row >= w.row && p.row < w.row + patch && p.col >= w.col &&
        p.col < w.col + patch)
      ++n;
  return n;
}

Window densest_window(const PointSet& pts, int patch) {
  return search_window(pts, patch, [](int n, int best) { return n > best; });
}

Window sparsest_window(const PointSet& pts, int patch) {
  return search_window(pts, patch, [](int n, int best) { return n < best; });
}

ImageSample cp_aug(const ImageSample& a, const ImageSample& b, int patch) {
  if (a.h() != b.h() || a.w() != b.w())
    throw ArgumentError("cp_aug: sample size mismatch");
  if (a.domain_tag != Domain::kTarget || b.domain_tag != Domain::kTarget)
    throw ArgumentError("cp_aug: both samples must be target-domain");
  if (patch > a.h() || patch > a.w())
    throw ArgumentError("cp_aug: patch exceeds image size");
  if (!a.points || !b.points)
    throw ArgumentError("cp_aug: samples must carry point annotations");

  const Window wa = densest_window(*a.points, patch);
  const Window wb = sparsest_window(*b.points, patch);

  ImageSample out;
  out.name = b.name + "+cp";
  out.domain_tag = Domain::kTarget;
  out.image = b.image;
  for (int y = 0; y < patch; ++y)
    for (int x = 0; x < patch; ++x)
      out.image.at(wb.row + y, wb.col + x) = a.image.at(wa.row + y, wa.col + x);

  PointSet pts;
  pts.image_height = b.h();
  pts.image_width = b.w();
  for (const Point& p : b.points->points) {
    const bool inside = p.row >= wb.row && p.row < wb.row + patch &&
                        p.col >= wb.col && p.col < wb.col + patch;
    if (!inside) pts.points.push_back(p);
  }
  for (const Point& p : a.points->points) {
    const bool inside = p.row >= wa.row && p.row < wa.row + patch &&
                        p.col >= wa.col && p.col < wa.col + patch;
    if (inside)
      pts.points.push_back(
          {p.row - wa.row + wb.row, p.col - wa.col + wb.col});
  }
  std::sort(pts.points.begin(), pts.points.end());
  out.points = std::move(pts);
  return out;
}

template Grid<float> apply_dihedral<float>(const Grid<float>&, int);
template Grid<double> apply_dihedral<double>(const Grid<double>&, int);
template Grid<uint8_t> apply_dihedral<uint8_t>(const Grid<uint8_t>&, int);
template Grid<int32_t> apply_dihedral<int32_t>(const Grid<int32_t>&, int);

}  // namespace wda::augment
