#ifndef WDA_AUGMENT_HPP_
#define WDA_AUGMENT_HPP_

#include <cstdint>

#include "wda/synthdata.hpp"

namespace wda::augment {

// Dihedral-group element k in [0,8): k < 4 rotates clockwise k quarter
// turns; k >= 4 flips horizontally first. Applied identically to pixels and
// point coordinates.
template <typename T>
Grid<T> apply_dihedral(const Grid<T>& g, int k);
Point map_point_dihedral(const Point& p, int h, int w, int k);
ImageSample apply_dihedral_sample(const ImageSample& s, int k);

struct AugParams {
  double p_photometric = 0.5;
  double brightness = 0.1;       // additive offset drawn from +-brightness
  double contrast_lo = 0.9;      // multiplicative around 0.5
  double contrast_hi = 1.1;
  double p_blur = 0.3;
  double blur_sigma_lo = 0.5;
  double blur_sigma_hi = 1.5;
};

// Random dihedral transform applied to image, labels, instances and points;
// blur and intensity jitter touch the image only. Deterministic per seed.
ImageSample geometric_aug(const ImageSample& s, uint64_t seed,
                          const AugParams& params = {});

// Separable Gaussian blur (kernel radius 3 sigma).
GridF gaussian_blur(const GridF& img, double sigma);

// Bilinear resampling (align-corners-off convention).
GridF resize_bilinear(const GridF& img, int out_h, int out_w);

struct Window {
  int row = 0;
  int col = 0;
};

// Stride-16 grid search; ties resolved toward the smallest row then column.
Window densest_window(const PointSet& pts, int patch);
Window sparsest_window(const PointSet& pts, int patch);
int count_in_window(const PointSet& pts, const Window& w, int patch);

// Cross-position cut-and-paste: the patch-sized window of `a` with the most
// annotation points replaces the window of `b` with the fewest. Points of
// `b` inside the replaced window are dropped; points of `a` inside the cut
// window translate with it.
ImageSample cp_aug(const ImageSample& a, const ImageSample& b, int patch);

}  // namespace wda::augment

#endif  // WDA_AUGMENT_HPP_
