#ifndef WDA_POSTPROCESS_HPP_
#define WDA_POSTPROCESS_HPP_

#include "wda/annotations.hpp"
#include "wda/grid.hpp"

namespace wda::postprocess {

// Keep exactly the 4-connected foreground components containing at least one
// peak; empty peaks clears everything. Never adds pixels; idempotent.
Mask filter_with_peaks(const Mask& mask, const PointSet& peaks);

// Morphological opening then closing with a (2*radius+1)^2 square element.
Mask open_close(const Mask& mask, int radius);

// 4-connected components labeled 1..N in row-major discovery order.
InstanceMap label_components(const Mask& mask);

// Binary erosion / dilation with a square element (exposed for tests).
Mask erode(const Mask& mask, int radius);
Mask dilate(const Mask& mask, int radius);

}  // namespace wda::postprocess

#endif  // WDA_POSTPROCESS_HPP_
