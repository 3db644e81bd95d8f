#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "fieldfuse/dataset.hpp"
#include "fieldfuse/ingest.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("fieldfuse_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
  std::filesystem::path path_;
};

inline fieldfuse::Ring rect_ring(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
}

inline fieldfuse::FieldPolygon rect_field(const std::string& id, const std::string& crop, double x0, double y0,
                                          double x1, double y1) {
  fieldfuse::FieldPolygon f;
  f.field_id = id;
  f.crop_label = crop;
  f.rings = {rect_ring(x0, y0, x1, y1)};
  f.area_ha = (x1 - x0) * (y1 - y0) / 10000.0;
  return f;
}

inline fieldfuse::FieldSet make_set(std::vector<fieldfuse::FieldPolygon> fields) {
  fieldfuse::FieldSet s;
  s.fields = std::move(fields);
  s.class_catalog = fieldfuse::build_catalog(s.fields);
  return s;
}

// Two Gaussian blobs in `dim` dimensions centred at -sep/2 and +sep/2 on
// every axis.
inline fieldfuse::PixelDataset blobs(std::size_t per_class, int dim, double sep, std::uint64_t seed) {
  fieldfuse::PixelDataset d;
  d.dim = dim;
  d.class_catalog = {"A", "B"};
  auto rng = fieldfuse::make_rng(seed, "test_blobs");
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    for (auto& v : x) v = (label == 0 ? -sep / 2 : sep / 2) + fieldfuse::standard_normal(rng);
    d.push_row(x, label, -1, -1, -1);
  }
  return d;
}

// Random probability vector with entries bounded away from zero.
inline std::vector<double> random_simplex(fieldfuse::Rng& rng, int n) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (auto& v : p) {
    v = -std::log(1.0 - fieldfuse::uniform_unit(rng)) + 1e-6;
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

} // namespace testutil
