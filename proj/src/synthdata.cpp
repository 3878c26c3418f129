#include "wda/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "wda/errors.hpp"
#include "wda/io.hpp"
#include "wda/postprocess.hpp"
#include "wda/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace wda {

void ImageSample::validate() const {
  if (dense_label && instances) {
    if (dense_label->h() != instances->h() || dense_label->w() != instances->w())
      throw ValidationError(name + ": label/instance shape mismatch");
    for (size_t i = 0; i < dense_label->size(); ++i)
      if (((*dense_label)[i] != 0) != ((*instances)[i] > 0))
        throw ValidationError(name + ": dense_label != (instances > 0)");
  }
  if (points) {
    points->validate();
    if (instances) {
      const PointSet centers = annotations::instance_centers(*instances);
      std::set<Point> all(centers.points.begin(), centers.points.end());
      for (const Point& p : points->points)
        if (!all.count(p))
          throw ValidationError(name + ": point is not an instance center");
    }
  }
}

void DomainSpec::validate() const {
  if (blob_count_min < 0 || blob_count_min > blob_count_max)
    throw ValidationError("blob_count_range: need 0 <= min <= max");
  if (blob_radius_min < 1.5 || blob_radius_min > blob_radius_max)
    throw ValidationError("blob_radius_range: need 1.5 <= min <= max");
  if (boundary_raggedness < 0)
    throw ValidationError("boundary_raggedness must be >= 0");
  if (fg_std < 0 || noise_std < 0)
    throw ValidationError("intensity std must be >= 0");
  if (background_texture_scale < 2)
    throw ValidationError("background_texture_scale must be >= 2");
  if (contrast <= 0) throw ValidationError("contrast must be > 0");
}

namespace {

json domain_to_json(const DomainSpec& s) {
  return json{{"blob_count", {s.blob_count_min, s.blob_count_max}},
              {"blob_radius", {s.blob_radius_min, s.blob_radius_max}},
              {"boundary_raggedness", s.boundary_raggedness},
              {"fg_mean", s.fg_mean},
              {"fg_std", s.fg_std},
              {"background_texture_scale", s.background_texture_scale},
              {"contrast", s.contrast},
              {"noise_std", s.noise_std}};
}

DomainSpec domain_from_json(const json& j) {
  DomainSpec s;
  s.blob_count_min = j.at("blob_count").at(0).get<int>();
  s.blob_count_max = j.at("blob_count").at(1).get<int>();
  s.blob_radius_min = j.at("blob_radius").at(0).get<double>();
  s.blob_radius_max = j.at("blob_radius").at(1).get<double>();
  s.boundary_raggedness = j.at("boundary_raggedness").get<double>();
  s.fg_mean = j.at("fg_mean").get<double>();
  s.fg_std = j.at("fg_std").get<double>();
  s.background_texture_scale = j.at("background_texture_scale").get<double>();
  s.contrast = j.at("contrast").get<double>();
  s.noise_std = j.at("noise_std").get<double>();
  return s;
}

}  // namespace

std::string DomainSpec::to_json() const { return domain_to_json(*this).dump(2); }

DomainSpec DomainSpec::from_json(const std::string& text) {
  try {
    return domain_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad domain spec json: ") + e.what());
  }
}

std::string BenchmarkSpec::to_json() const {
  json j{{"image_size", image_size},
         {"n_source", n_source},
         {"n_target_train", n_target_train},
         {"n_target_test", n_target_test},
         {"source", domain_to_json(source)},
         {"target", domain_to_json(target)}};
  return j.dump(2);
}

BenchmarkSpec BenchmarkSpec::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    BenchmarkSpec s;
    s.image_size = j.at("image_size").get<int>();
    s.n_source = j.at("n_source").get<int>();
    s.n_target_train = j.at("n_target_train").get<int>();
    s.n_target_test = j.at("n_target_test").get<int>();
    s.source = domain_from_json(j.at("source"));
    s.target = domain_from_json(j.at("target"));
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad benchmark spec json: ") + e.what());
  }
}

namespace synthdata {

namespace {

// Bilinearly interpolated random lattice in [-1, 1].
GridF value_noise(int h, int w, double scale, Rng& rng) {
  const int gh = int(h / scale) + 2, gw = int(w / scale) + 2;
  GridF lattice(gh, gw);
  for (size_t i = 0; i < lattice.size(); ++i)
    lattice[i] = float(rng.uniform(-1.0, 1.0));
  GridF out(h, w);
  for (int y = 0; y < h; ++y) {
    const double fy = y / scale;
    const int y0 = int(fy);
    const double ty = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = x / scale;
      const int x0 = int(fx);
      const double tx = fx - x0;
      const double v00 = lattice.at(y0, x0), v01 = lattice.at(y0, x0 + 1);
      const double v10 = lattice.at(y0 + 1, x0), v11 = lattice.at(y0 + 1, x0 + 1);
      out.at(y, x) = float((1 - ty) * ((1 - tx) * v00 + tx * v01) +
                           ty * ((1 - tx) * v10 + tx * v11));
    }
  }
  return out;
}

struct BlobPixels {
  std::vector<int> idx;  // flat indices
};

// Rasterize one ragged ellipse; returns the largest 4-connected component of
// the analytic region so the instance invariant holds for any raggedness.
BlobPixels rasterize_blob(int size, double cy, double cx, double ra, double rb,
                          double angle, double ragged, Rng& rng) {
  constexpr int kHarmonics = 3;
  double amp[kHarmonics], phase[kHarmonics];
  for (int k = 0; k < kHarmonics; ++k) {
    amp[k] = ragged * rng.uniform(0.2, 1.0) / (k + 2);
    phase[k] = rng.uniform(0.0, 6.283185307179586);
  }
  const double cs = std::cos(angle), sn = std::sin(angle);
  const double rmax = std::max(ra, rb) * (1.0 + ragged);
  const int y0 = std::max(0, int(std::floor(cy - rmax - 1)));
  const int y1 = std::min(size - 1, int(std::ceil(cy + rmax + 1)));
  const int x0 = std::max(0, int(std::floor(cx - rmax - 1)));
  const int x1 = std::min(size - 1, int(std::ceil(cx + rmax + 1)));
  if (y1 < y0 || x1 < x0) return {};

  Mask local(y1 - y0 + 1, x1 - x0 + 1, 0);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dy = y - cy, dx = x - cx;
      const double u = cs * dx + sn * dy;
      const double v = -sn * dx + cs * dy;
      const double r = std::sqrt((u / ra) * (u / ra) + (v / rb) * (v / rb));
      const double phi = std::atan2(v, u);
      double rim = 1.0;
      for (int k = 0; k < kHarmonics; ++k)
        rim += amp[k] * std::sin((k + 2) * phi + phase[k]);
      if (r <= rim) local.at(y - y0, x - x0) = 1;
    }
  }
  const InstanceMap cc = postprocess::label_components(local);
  int n = 0;
  for (size_t i = 0; i < cc.size(); ++i) n = std::max(n, cc[i]);
  if (n == 0) return {};
  std::vector<int> area(n + 1, 0);
  for (size_t i = 0; i < cc.size(); ++i)
    if (cc[i] > 0) ++area[cc[i]];
  const int keep =
      int(std::max_element(area.begin() + 1, area.end()) - area.begin());

  BlobPixels bp;
  for (int y = 0; y < cc.h(); ++y)
    for (int x = 0; x < cc.w(); ++x)
      if (cc.at(y, x) == keep) bp.idx.push_back((y + y0) * size + (x + x0));
  return bp;
}

ImageSample generate_image(const DomainSpec& spec, int size, uint64_t seed,
                           const std::string& name, Domain tag) {
  Rng rng(seed);
  const int want = rng.uniform_int(spec.blob_count_min, spec.blob_count_max);

  InstanceMap inst(size, size, 0);
  Mask blocked(size, size, 0);  // occupied pixels dilated by the 2 px gap
  int placed = 0;
  for (int b = 0; b < want; ++b) {
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      const double ra = rng.uniform(spec.blob_radius_min, spec.blob_radius_max);
      const double rb = rng.uniform(spec.blob_radius_min, spec.blob_radius_max);
      const double margin = std::max(ra, rb) * (1.0 + spec.boundary_raggedness);
      if (2 * margin + 4 >= size) continue;
      const double cy = rng.uniform(margin + 2, size - margin - 2);
      const double cx = rng.uniform(margin + 2, size - margin - 2);
      const double angle = rng.uniform(0.0, 3.141592653589793);
      BlobPixels bp = rasterize_blob(size, cy, cx, ra, rb, angle,
                                     spec.boundary_raggedness, rng);
      if (bp.idx.size() < 9) continue;
      bool clash = false;
      for (int i : bp.idx)
        if (blocked[i]) {
          clash = true;
          break;
        }
      if (clash) continue;
      ++placed;
      for (int i : bp.idx) {
        inst[i] = placed;
        const int y = i / size, x = i % size;
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx)
            if (blocked.in_bounds(y + dy, x + dx))
              blocked.at(y + dy, x + dx) = 1;
      }
      ok = true;
    }
    if (!ok) {
      const char* field = placed == 0 ? "blob_radius_range" : "blob_count_range";
      throw GenerationError(
          std::string("cannot place blob ") + std::to_string(b + 1) + "/" +
          std::to_string(want) + " in a " + std::to_string(size) +
          "px image; spec field at fault: " + field);
    }
  }

  // Appearance: textured background, per-blob intensity, contrast, noise.
  ImageSample s;
  s.name = name;
  s.domain_tag = tag;
  GridF img = value_noise(size, size, spec.background_texture_scale, rng);
  for (size_t i = 0; i < img.size(); ++i) img[i] = 0.35f + 0.12f * img[i];
  std::vector<float> blob_intensity(placed + 1, 0.0f);
  for (int id = 1; id <= placed; ++id)
    blob_intensity[id] =
        float(std::clamp(rng.normal(spec.fg_mean, spec.fg_std), 0.0, 1.0));
  for (size_t i = 0; i < img.size(); ++i)
    if (inst[i] > 0) img[i] = blob_intensity[inst[i]];
  for (size_t i = 0; i < img.size(); ++i) {
    double v = 0.5 + spec.contrast * (img[i] - 0.5);
    v += spec.noise_std * rng.normal();
    img[i] = float(std::clamp(v, 0.0, 1.0));
  }

  s.image = std::move(img);
  s.instances = std::move(inst);
  Mask label(size, size, 0);
  for (size_t i = 0; i < label.size(); ++i)
    label[i] = (*s.instances)[i] > 0 ? 1 : 0;
  s.dense_label = std::move(label);
  s.points = annotations::instance_centers(*s.instances);
  return s;
}

}  // namespace

std::vector<ImageSample> generate_domain(const DomainSpec& spec, int n_images,
                                         int size, uint64_t seed) {
  spec.validate();
  if (n_images < 1) throw ArgumentError("generate_domain: n_images >= 1");
  if (size < 64) throw ArgumentError("generate_domain: size >= 64");

  std::vector<ImageSample> out(n_images);
  std::exception_ptr err;
  // Per-image seeds derive from (seed, index); order independent.
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_images; ++i) {
    try {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%04d", i);
      out[i] = generate_image(spec, size, mix_seed(seed, i), buf,
                              Domain::kSource);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

Benchmark make_benchmark(const BenchmarkSpec& spec, double annotation_ratio,
                         uint64_t seed) {
  if (annotation_ratio < 0.0 || annotation_ratio > 1.0)
    throw ArgumentError("annotation_ratio must be in [0,1]");

  Benchmark b;
  b.spec = spec;
  b.ratio = annotation_ratio;
  b.seed = seed;

  b.source = generate_domain(spec.source, spec.n_source, spec.image_size,
                             mix_seed(seed, 1));
  for (size_t i = 0; i < b.source.size(); ++i)
    b.source[i].name = "src_" + b.source[i].name;

  auto target =
      generate_domain(spec.target, spec.n_target_train + spec.n_target_test,
                      spec.image_size, mix_seed(seed, 2));
  for (int i = 0; i < spec.n_target_train; ++i) {
    ImageSample s;
    s.image = std::move(target[i].image);
    s.domain_tag = Domain::kTarget;
    s.name = "tgt_train_" + target[i].name;
    s.points = annotations::sample_sparse_points(
        *target[i].points, annotation_ratio, mix_seed(seed, 1000 + i));
    b.target_train.push_back(std::move(s));
  }
  for (int i = spec.n_target_train; i < int(target.size()); ++i) {
    ImageSample s;
    s.image = std::move(target[i].image);
    s.dense_label = std::move(target[i].dense_label);
    s.instances = std::move(target[i].instances);
    s.domain_tag = Domain::kTarget;
    s.name = "tgt_test_" + target[i].name;
    b.target_test.push_back(std::move(s));
  }
  return b;
}

void save_benchmark(const Benchmark& b, const std::string& dir) {
  io::make_dirs(dir + "/source/images");
  io::make_dirs(dir + "/source/labels");
  io::make_dirs(dir + "/target_train/images");
  io::make_dirs(dir + "/target_train/points");
  io::make_dirs(dir + "/target_test/images");
  io::make_dirs(dir + "/target_test/labels");
  io::make_dirs(dir + "/target_test/instances");

  auto mask_to_grid = [](const Mask& m) {
    GridF g(m.h(), m.w());
    for (size_t i = 0; i < m.size(); ++i) g[i] = m[i] ? 1.0f : 0.0f;
    return g;
  };

  for (const ImageSample& s : b.source) {
    io::write_png_gray16(dir + "/source/images/" + s.name + ".png", s.image);
    io::write_png_gray8(dir + "/source/labels/" + s.name + ".png",
                        mask_to_grid(*s.dense_label));
  }
  for (const ImageSample& s : b.target_train) {
    io::write_png_gray16(dir + "/target_train/images/" + s.name + ".png",
                         s.image);
    annotations::save_csv(*s.points,
                          dir + "/target_train/points/" + s.name + ".csv");
  }
  for (const ImageSample& s : b.target_test) {
    io::write_png_gray16(dir + "/target_test/images/" + s.name + ".png",
                         s.image);
    io::write_png_gray8(dir + "/target_test/labels/" + s.name + ".png",
                        mask_to_grid(*s.dense_label));
    Grid<uint16_t> ids(s.instances->h(), s.instances->w());
    for (size_t i = 0; i < ids.size(); ++i)
      ids[i] = uint16_t((*s.instances)[i]);
    io::write_png_gray16_raw(dir + "/target_test/instances/" + s.name + ".png",
                             ids);
  }

  json manifest{{"format", "wda-benchmark-v1"},
                {"seed", b.seed},
                {"ratio", b.ratio},
                {"spec", json::parse(b.spec.to_json())}};
  io::write_text_file(dir + "/benchmark.json", manifest.dump(2));
}

Benchmark load_benchmark(const std::string& dir) {
  if (!io::file_exists(dir + "/benchmark.json"))
    throw IoError("no benchmark manifest at " + dir + "/benchmark.json");
  json manifest;
  try {
    manifest = json::parse(io::read_text_file(dir + "/benchmark.json"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad benchmark manifest: ") + e.what());
  }

  Benchmark b;
  b.seed = manifest.at("seed").get<uint64_t>();
  b.ratio = manifest.at("ratio").get<double>();
  b.spec = BenchmarkSpec::from_json(manifest.at("spec").dump());

  auto load_mask = [](const std::string& path) {
    const GridF g = io::read_png_gray(path);
    Mask m(g.h(), g.w());
    for (size_t i = 0; i < g.size(); ++i) m[i] = g[i] > 0.5f ? 1 : 0;
    return m;
  };

  for (const std::string& f : io::list_files(dir + "/source/images", ".png")) {
    ImageSample s;
    s.name = f.substr(0, f.size() - 4);
    s.domain_tag = Domain::kSource;
    s.image = io::read_png_gray(dir + "/source/images/" + f);
    s.dense_label = load_mask(dir + "/source/labels/" + f);
    s.instances = postprocess::label_components(*s.dense_label);
    s.points = annotations::instance_centers(*s.instances);
    b.source.push_back(std::move(s));
  }
  for (const std::string& f :
       io::list_files(dir + "/target_train/images", ".png")) {
    ImageSample s;
    s.name = f.substr(0, f.size() - 4);
    s.domain_tag = Domain::kTarget;
    s.image = io::read_png_gray(dir + "/target_train/images/" + f);
    s.points = annotations::load_csv(
        dir + "/target_train/points/" + s.name + ".csv", s.image.h(),
        s.image.w());
    b.target_train.push_back(std::move(s));
  }
  for (const std::string& f :
       io::list_files(dir + "/target_test/images", ".png")) {
    ImageSample s;
    s.name = f.substr(0, f.size() - 4);
    s.domain_tag = Domain::kTarget;
    s.image = io::read_png_gray(dir + "/target_test/images/" + f);
    s.dense_label = load_mask(dir + "/target_test/labels/" + f);
    const Grid<uint16_t> ids =
        io::read_png_gray16_raw(dir + "/target_test/instances/" + f);
    InstanceMap inst(ids.h(), ids.w());
    for (size_t i = 0; i < ids.size(); ++i) inst[i] = ids[i];
    s.instances = std::move(inst);
    b.target_test.push_back(std::move(s));
  }
  if (b.source.empty() || b.target_train.empty() || b.target_test.empty())
    throw ValidationError("benchmark at " + dir + " is missing a split");
  return b;
}

std::vector<ImageSample> load_stack(const std::string& path,
                                    const std::string& axis_order) {
  std::vector<GridF> images;
  std::vector<GridF> labels;

  if (fs::is_directory(path)) {
    const auto files = io::list_files(path, ".png");
    if (files.empty()) throw IoError("no png slices in " + path);
    for (const auto& f : files) images.push_back(io::read_png_gray(path + "/" + f));
    const std::string lbl_dir = path + "_labels";
    if (fs::is_directory(lbl_dir)) {
      const auto lfiles = io::list_files(lbl_dir, ".png");
      if (lfiles.size() != files.size())
        throw ValidationError("label stack slice count mismatch: " + lbl_dir);
      for (const auto& f : lfiles)
        labels.push_back(io::read_png_gray(lbl_dir + "/" + f));
    }
  } else if (io::file_exists(path)) {
    if (axis_order != "zyx")
      throw ArgumentError("unsupported axis_order: " + axis_order);
    images = io::read_npy_volume(path);
    std::string lbl = path;
    const auto dot = lbl.rfind('.');
    lbl = lbl.substr(0, dot) + "_labels.npy";
    if (io::file_exists(lbl)) labels = io::read_npy_volume(lbl);
    if (!labels.empty() && labels.size() != images.size())
      throw ValidationError("label volume depth mismatch: " + lbl);
  } else {
    throw IoError("no such stack: " + path);
  }

  // Normalize intensities that fall outside [0,1].
  float lo = 1e30f, hi = -1e30f;
  for (const auto& g : images)
    for (size_t i = 0; i < g.size(); ++i) {
      lo = std::min(lo, g[i]);
      hi = std::max(hi, g[i]);
    }
  const bool renorm = lo < 0.0f || hi > 1.0f;
  const float scale = hi > lo ? 1.0f / (hi - lo) : 1.0f;

  std::vector<ImageSample> out;
  for (size_t z = 0; z < images.size(); ++z) {
    ImageSample s;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "slice_%04zu", z);
    s.name = buf;
    s.domain_tag = Domain::kTarget;
    s.image = std::move(images[z]);
    if (renorm)
      for (size_t i = 0; i < s.image.size(); ++i)
        s.image[i] = (s.image[i] - lo) * scale;
    if (!labels.empty()) {
      if (!labels[z].same_shape(s.image))
        throw ValidationError("label slice shape mismatch at " + s.name);
      Mask m(labels[z].h(), labels[z].w());
      for (size_t i = 0; i < m.size(); ++i) m[i] = labels[z][i] > 0.5f ? 1 : 0;
      s.dense_label = std::move(m);
      s.instances = postprocess::label_components(*s.dense_label);
    }
    out.push_back(std::move(s));
  }
  return out;
}

BenchmarkSpec builtin_spec(const std::string& name) {
  BenchmarkSpec s;
  if (name == "acceptance") {
    s.image_size = 256;
    s.n_source = 24;
    s.n_target_train = 24;
    s.n_target_test = 8;
    s.source.blob_count_min = 3;
    s.source.blob_count_max = 9;
    s.source.blob_radius_min = 9;
    s.source.blob_radius_max = 18;
    s.source.boundary_raggedness = 0.25;
    s.source.fg_mean = 0.75;
    s.source.fg_std = 0.05;
    s.source.background_texture_scale = 24;
    s.source.contrast = 1.0;
    s.source.noise_std = 0.03;
    s.target = s.source;
    s.target.fg_mean = 0.62;
    s.target.fg_std = 0.05;
    s.target.background_texture_scale = 10;
    s.target.contrast = 0.9;
    s.target.noise_std = 0.05;
    return s;
  }
  if (name == "tiny") {
    s.image_size = 64;
    s.n_source = 4;
    s.n_target_train = 4;
    s.n_target_test = 2;
    s.source.blob_count_min = 2;
    s.source.blob_count_max = 4;
    s.source.blob_radius_min = 4;
    s.source.blob_radius_max = 7;
    s.source.boundary_raggedness = 0.15;
    s.target = s.source;
    s.target.fg_mean = 0.55;
    s.target.contrast = 0.85;
    return s;
  }
  throw ArgumentError("unknown builtin spec: " + name);
}

void resample_annotations(Benchmark& b, uint64_t sample_seed) {
  const auto target = generate_domain(
      b.spec.target, b.spec.n_target_train + b.spec.n_target_test,
      b.spec.image_size, mix_seed(b.seed, 2));
  if (int(b.target_train.size()) != b.spec.n_target_train)
    throw ValidationError("resample_annotations: unexpected split size");
  for (int i = 0; i < b.spec.n_target_train; ++i) {
    b.target_train[i].points = annotations::sample_sparse_points(
        *target[i].points, b.ratio, mix_seed(sample_seed, 1000 + i));
  }
}

double histogram_distance(const std::vector<ImageSample>& a,
                          const std::vector<ImageSample>& b) {
  constexpr int kBins = 32;
  auto hist = [](const std::vector<ImageSample>& set) {
    std::vector<double> h(kBins, 0.0);
    size_t n = 0;
    for (const auto& s : set) {
      for (size_t i = 0; i < s.image.size(); ++i) {
        const int bin = std::min(kBins - 1, int(s.image[i] * kBins));
        h[bin] += 1.0;
      }
      n += s.image.size();
    }
    for (double& v : h) v /= double(n);
    return h;
  };
  const auto ha = hist(a), hb = hist(b);
  double d = 0.0;
  for (int i = 0; i < kBins; ++i) d += std::abs(ha[i] - hb[i]);
  return d / kBins;
}

}  // namespace synthdata
}  // namespace wda
