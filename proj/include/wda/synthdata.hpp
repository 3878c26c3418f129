#ifndef WDA_SYNTHDATA_HPP_
#define WDA_SYNTHDATA_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wda/annotations.hpp"
#include "wda/grid.hpp"

namespace wda {

enum class Domain { kSource, kTarget };

// One 2D grayscale image with whatever supervision the split carries.
struct ImageSample {
  GridF image;  // values in [0,1]
  std::optional<Mask> dense_label;
  std::optional<InstanceMap> instances;
  std::optional<PointSet> points;
  Domain domain_tag = Domain::kSource;
  std::string name;

  int h() const { return image.h(); }
  int w() const { return image.w(); }
  // Checks dense_label == (instances > 0) and points within instance centers
  // when the respective fields are present.
  void validate() const;
};

// Appearance knobs for one synthetic domain; stands in for the acquisition
// gap between EM preparations.
struct DomainSpec {
  int blob_count_min = 3, blob_count_max = 8;
  double blob_radius_min = 8.0, blob_radius_max = 16.0;
  double boundary_raggedness = 0.25;
  double fg_mean = 0.75, fg_std = 0.05;
  double background_texture_scale = 24.0;
  double contrast = 1.0;
  double noise_std = 0.03;

  void validate() const;
  std::string to_json() const;
  static DomainSpec from_json(const std::string& text);
};

struct BenchmarkSpec {
  int image_size = 256;
  int n_source = 24;
  int n_target_train = 24;
  int n_target_test = 8;
  DomainSpec source;
  DomainSpec target;

  std::string to_json() const;
  static BenchmarkSpec from_json(const std::string& text);
};

struct Benchmark {
  BenchmarkSpec spec;
  double ratio = 0.15;
  uint64_t seed = 0;
  std::vector<ImageSample> source;        // dense labels + instances + centers
  std::vector<ImageSample> target_train;  // image + sparse points only
  std::vector<ImageSample> target_test;   // dense labels + instances
};

namespace synthdata {

// Deterministic per (spec, seed); every sample carries dense_label,
// instances and the full center PointSet. Blobs are non-overlapping ragged
// ellipses with >= 2 px separation. Throws GenerationError naming the
// offending spec field when placement is infeasible.
std::vector<ImageSample> generate_domain(const DomainSpec& spec, int n_images,
                                         int size, uint64_t seed);

Benchmark make_benchmark(const BenchmarkSpec& spec, double annotation_ratio,
                         uint64_t seed);

void save_benchmark(const Benchmark& b, const std::string& dir);
Benchmark load_benchmark(const std::string& dir);

// Slices from a directory of PNGs or a 3D .npy volume, normalized to [0,1].
// A sibling "<path>_labels" stack provides dense labels when present.
// axis_order names the npy axes, e.g. "zyx" (slice axis 'z').
std::vector<ImageSample> load_stack(const std::string& path,
                                    const std::string& axis_order = "zyx");

// Named presets: "acceptance" (256 px, the shift used by the end-to-end
// harness), "tiny" (64 px, fast CLI smoke runs).
BenchmarkSpec builtin_spec(const std::string& name);

// Redraws the sparse target annotations from the same hidden instance
// centers with a fresh sampling seed, leaving every image untouched; the
// annotation-robustness harness varies only this.
void resample_annotations(Benchmark& b, uint64_t sample_seed);

// Mean absolute difference between pooled 32-bin intensity histograms; the
// domain-shift monotonicity diagnostic.
double histogram_distance(const std::vector<ImageSample>& a,
                          const std::vector<ImageSample>& b);

}  // namespace synthdata
}  // namespace wda

#endif  // WDA_SYNTHDATA_HPP_
