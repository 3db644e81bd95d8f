#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldfuse/common.hpp"

namespace fieldfuse {

// North-up affine grid: pixel (row, col) has its center at
// (x0 + (col + 0.5) * pixel_size_m, y0 - (row + 0.5) * pixel_size_m).
struct GeoTransform {
  double x0 = 0.0;
  double y0 = 0.0;
  double pixel_size_m = 10.0;

  bool operator==(const GeoTransform&) const = default;
};

struct BandRaster {
  std::string name;
  int width = 0;
  int height = 0;
  int resolution_m = 10;
  std::vector<std::uint16_t> values; // row-major

  std::uint16_t at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * width + col];
  }
  double extent_x() const { return double(width) * resolution_m; }
  double extent_y() const { return double(height) * resolution_m; }
};

struct SceneBundle {
  std::string scene_id;
  GeoTransform geo;
  std::vector<BandRaster> bands;

  // 10 m target grid derived from the shared footprint.
  int target_width(int target_resolution_m = 10) const;
  int target_height(int target_resolution_m = 10) const;
  const BandRaster& band(std::string_view name) const;
};

// Throws Error if the bundle breaks a structural invariant.
void validate_scene(const SceneBundle& scene);

// Directory with scene.json + one raw little-endian u16 file per band.
SceneBundle load_scene(const std::string& dir);
void save_scene(const SceneBundle& scene, const std::string& dir);

struct Point {
  double x = 0.0;
  double y = 0.0;
};
using Ring = std::vector<Point>;

struct FieldPolygon {
  std::string field_id;
  std::string crop_label;
  // All rings of all parts; inside-ness is decided by the even-odd rule over
  // the whole set, which also handles holes.
  std::vector<Ring> rings;
  double area_ha = 0.0;
};

struct FieldSet {
  std::vector<FieldPolygon> fields;
  std::vector<std::string> class_catalog;

  int class_index(std::string_view label) const; // -1 when absent
  int n_classes() const { return static_cast<int>(class_catalog.size()); }
};

// Signed shoelace area of one ring (positive counter-clockwise).
double ring_signed_area(const Ring& ring);
// |outer| minus holes, per polygon part, in map units squared.
double polygon_area(const std::vector<std::vector<Ring>>& parts);

// Alphabetical catalog of the distinct crop labels.
std::vector<std::string> build_catalog(const std::vector<FieldPolygon>& fields);

FieldSet parse_fields_geojson(const std::string& text);
FieldSet load_fields(const std::string& path);
std::string fields_to_geojson(const FieldSet& fields);
void save_fields(const FieldSet& fields, const std::string& path);

// Per-pixel field assignment on the target grid.
struct LabelRaster {
  int width = 0;
  int height = 0;
  GeoTransform geo;
  std::vector<std::string> field_ids;      // field table, index = field slot
  std::vector<int> field_classes;          // class index per field slot
  std::vector<std::string> class_catalog;
  std::vector<std::int32_t> field_index;   // per pixel, -1 = none

  std::size_t pixel_count() const { return field_index.size(); }
  int class_at(std::size_t pixel) const {
    const int f = field_index[pixel];
    return f < 0 ? -1 : field_classes[static_cast<std::size_t>(f)];
  }
  std::vector<std::size_t> pixels_per_field() const;
};

struct GridSpec {
  int width = 0;
  int height = 0;
  GeoTransform geo;
};

GridSpec target_grid(const SceneBundle& scene, int target_resolution_m = 10);

// Inclusive point-in-polygon: even-odd rule, points on an edge count inside.
bool point_in_rings(const std::vector<Ring>& rings, Point p);

struct RasterizeResult {
  LabelRaster labels;
  Warnings warnings;
};

// Pixel centers inside a field are assigned to it; on overlap the field
// listed first keeps the pixel.
RasterizeResult rasterize_fields(const FieldSet& fields, const GridSpec& grid);

struct FilterOptions {
  std::size_t min_pixels = 50;
  std::vector<std::string> excluded = {"Dates", "Intercrop"};
};

// Drops small and excluded-class fields and rebuilds the class catalog.
FieldSet filter_fields(const FieldSet& fields, const LabelRaster& labels,
                       const FilterOptions& options = {});

// Restricts a label raster to the fields of `retained` (matched by field_id)
// and re-indexes classes against retained.class_catalog.
LabelRaster relabel(const LabelRaster& labels, const FieldSet& retained);

void save_labels(const LabelRaster& labels, const std::string& dir);
LabelRaster load_labels(const std::string& dir);

} // namespace fieldfuse
