#ifndef WDA_ANNOTATIONS_HPP_
#define WDA_ANNOTATIONS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "wda/grid.hpp"

namespace wda {

struct Point {
  int row = 0;
  int col = 0;
  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

// Center-point annotations for one image. Points are unique and in bounds.
struct PointSet {
  std::vector<Point> points;
  int image_height = 0;
  int image_width = 0;

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  // Throws ValidationError on out-of-bounds or duplicate points.
  void validate() const;

  friend bool operator==(const PointSet&, const PointSet&) = default;
};

namespace annotations {

// One point per instance id: the centroid rounded to the nearest pixel,
// snapped to the nearest instance pixel (row-major tie break) when the
// rounded centroid falls outside a concave instance.
PointSet instance_centers(const InstanceMap& inst);

// Uniformly random subset of round(ratio * N) points (at least 1 when
// ratio > 0 and the input is non-empty), deterministic per seed. Output is
// sorted row-major. Throws ArgumentError for ratio outside [0, 1].
PointSet sample_sparse_points(const PointSet& full, double ratio,
                              uint64_t seed);

// Per-pixel max over per-point unit-peak Gaussians exp(-d^2 / (2 sigma^2)).
Heatmap render_heatmap(const PointSet& pts, double sigma);
// Same shape/kernel but peak value `peak` (the confidence map of Eq)
Heatmap render_heatmap(const PointSet& pts, double sigma, double peak);

// Local maxima with value >= threshold, non-maximum suppressed so every
// surviving pair is at Chebyshev distance >= min_distance. Ordered by
// descending value, ties row-major. threshold must lie in (0, 1).
PointSet detect_peaks(const Heatmap& h, double threshold, double min_distance);

// CSV with header "row,col".
std::string to_csv(const PointSet& ps);
PointSet from_csv(const std::string& text, int height, int width);
void save_csv(const PointSet& ps, const std::string& path);
PointSet load_csv(const std::string& path, int height, int width);

}  // namespace annotations
}  // namespace wda

#endif  // WDA_ANNOTATIONS_HPP_
