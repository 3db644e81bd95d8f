#include "fieldfuse/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "json.hpp"

namespace fieldfuse {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<std::uint8_t> read_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing band file '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_binary(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

bool valid_resolution(int r) { return r == 10 || r == 20 || r == 60; }

} // namespace

int SceneBundle::target_width(int target_resolution_m) const {
  if (bands.empty()) return 0;
  return static_cast<int>(std::lround(bands.front().extent_x() / target_resolution_m));
}

int SceneBundle::target_height(int target_resolution_m) const {
  if (bands.empty()) return 0;
  return static_cast<int>(std::lround(bands.front().extent_y() / target_resolution_m));
}

const BandRaster& SceneBundle::band(std::string_view name) const {
  for (const auto& b : bands)
    if (b.name == name) return b;
  throw Error("missing band " + std::string(name));
}

void validate_scene(const SceneBundle& scene) {
  if (scene.bands.size() != kBandCount)
    throw Error("missing band: scene has " + std::to_string(scene.bands.size()) +
                " bands, expected " + std::to_string(kBandCount));
  std::set<std::string> names;
  const auto& first = scene.bands.front();
  for (const auto& b : scene.bands) {
    if (!names.insert(b.name).second) throw Error("duplicate band " + b.name);
    if (!valid_resolution(b.resolution_m))
      throw Error("band " + b.name + " has unsupported resolution " +
                  std::to_string(b.resolution_m));
    if (b.width <= 0 || b.height <= 0) throw Error("band " + b.name + " is empty");
    if (b.values.size() != static_cast<std::size_t>(b.width) * b.height)
      throw Error("band " + b.name + " value count does not match width*height");
    if (b.extent_x() != first.extent_x() || b.extent_y() != first.extent_y())
      throw Error("band " + b.name + " footprint differs from band " + first.name);
  }
}

SceneBundle load_scene(const std::string& dir) {
  const fs::path root(dir);
  json header;
  try {
    header = json::parse(read_text_file((root / "scene.json").string()));
  } catch (const json::exception& e) {
    throw Error("malformed scene.json: " + std::string(e.what()));
  }
  SceneBundle scene;
  try {
    scene.scene_id = header.at("scene_id").get<std::string>();
    const auto& geo = header.at("geo_transform");
    scene.geo.x0 = geo.at("x0").get<double>();
    scene.geo.y0 = geo.at("y0").get<double>();
    scene.geo.pixel_size_m = geo.at("pixel_size_m").get<double>();
    for (const auto& jb : header.at("bands")) {
      BandRaster band;
      band.name = jb.at("name").get<std::string>();
      band.width = jb.at("width").get<int>();
      band.height = jb.at("height").get<int>();
      band.resolution_m = jb.at("resolution_m").get<int>();
      const auto dtype = jb.at("dtype").get<std::string>();
      if (dtype != "u16") throw Error("unsupported dtype '" + dtype + "' for band " + band.name);
      const auto bytes = read_binary(root / jb.at("file").get<std::string>());
      const std::size_t count = static_cast<std::size_t>(band.width) * band.height;
      if (bytes.size() != count * 2)
        throw Error("band " + band.name + ": header/binary length mismatch (" +
                    std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(count * 2) + ")");
      band.values.resize(count);
      for (std::size_t i = 0; i < count; ++i)
        band.values[i] = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
      scene.bands.push_back(std::move(band));
    }
  } catch (const json::exception& e) {
    throw Error("malformed scene.json: " + std::string(e.what()));
  }
  validate_scene(scene);
  return scene;
}

void save_scene(const SceneBundle& scene, const std::string& dir) {
  validate_scene(scene);
  const fs::path root(dir);
  fs::create_directories(root);
  json header;
  header["scene_id"] = scene.scene_id;
  header["geo_transform"] = {{"x0", scene.geo.x0},
                             {"y0", scene.geo.y0},
                             {"pixel_size_m", scene.geo.pixel_size_m}};
  header["bands"] = json::array();
  for (const auto& b : scene.bands) {
    const std::string file = b.name + ".u16";
    header["bands"].push_back({{"name", b.name},
                               {"width", b.width},
                               {"height", b.height},
                               {"resolution_m", b.resolution_m},
                               {"file", file},
                               {"dtype", "u16"}});
    std::vector<std::uint8_t> bytes(b.values.size() * 2);
    for (std::size_t i = 0; i < b.values.size(); ++i) {
      bytes[2 * i] = static_cast<std::uint8_t>(b.values[i] & 0xff);
      bytes[2 * i + 1] = static_cast<std::uint8_t>(b.values[i] >> 8);
    }
    write_binary(root / file, bytes);
  }
  write_text_file((root / "scene.json").string(), header.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Polygons

double ring_signed_area(const Ring& ring) {
  double twice = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i)
    twice += ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
  return 0.5 * twice;
}

double polygon_area(const std::vector<std::vector<Ring>>& parts) {
  double total = 0.0;
  for (const auto& part : parts) {
    if (part.empty()) continue;
    double a = std::abs(ring_signed_area(part.front()));
    for (std::size_t h = 1; h < part.size(); ++h) a -= std::abs(ring_signed_area(part[h]));
    total += a;
  }
  return total;
}

int FieldSet::class_index(std::string_view label) const {
  for (std::size_t i = 0; i < class_catalog.size(); ++i)
    if (class_catalog[i] == label) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> build_catalog(const std::vector<FieldPolygon>& fields) {
  std::set<std::string> labels;
  for (const auto& f : fields) labels.insert(f.crop_label);
  return {labels.begin(), labels.end()};
}

namespace {

Ring parse_ring(const json& coords, const std::string& id) {
  if (!coords.is_array()) throw Error("field " + id + ": ring is not an array");
  Ring ring;
  for (const auto& pt : coords) {
    if (!pt.is_array() || pt.size() < 2)
      throw Error("field " + id + ": malformed coordinate");
    ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  if (ring.size() < 4) throw Error("field " + id + ": ring has fewer than 4 vertices");
  if (ring.front().x != ring.back().x || ring.front().y != ring.back().y)
    throw Error("field " + id + ": ring is not closed");
  return ring;
}

std::string property_string(const json& props, const char* key, std::size_t feature) {
  if (!props.is_object() || !props.contains(key))
    throw Error("feature " + std::to_string(feature) + ": missing property '" + key + "'");
  const auto& v = props.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error("feature " + std::to_string(feature) + ": property '" + key +
              "' must be a string");
}

} // namespace

FieldSet parse_fields_geojson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("malformed GeoJSON: " + std::string(e.what()));
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array())
    throw Error("malformed GeoJSON: expected a FeatureCollection");

  FieldSet set;
  std::set<std::string> seen;
  std::size_t index = 0;
  try {
    for (const auto& feature : doc["features"]) {
      const json props = feature.value("properties", json::object());
      FieldPolygon field;
      field.field_id = property_string(props, "field_id", index);
      field.crop_label = property_string(props, "crop", index);
      if (!seen.insert(field.field_id).second)
        throw Error("duplicate field_id '" + field.field_id + "'");
      if (!feature.contains("geometry") || !feature["geometry"].is_object())
        throw Error("field " + field.field_id + ": missing geometry");
      const auto& geom = feature["geometry"];
      const std::string type = geom.value("type", "");
      std::vector<std::vector<Ring>> parts;
      if (type == "Polygon") {
        parts.emplace_back();
        for (const auto& r : geom.at("coordinates"))
          parts.back().push_back(parse_ring(r, field.field_id));
      } else if (type == "MultiPolygon") {
        for (const auto& poly : geom.at("coordinates")) {
          parts.emplace_back();
          for (const auto& r : poly) parts.back().push_back(parse_ring(r, field.field_id));
        }
      } else {
        throw Error("field " + field.field_id + ": non-polygon geometry '" + type + "'");
      }
      field.area_ha = polygon_area(parts) / 10000.0;
      if (!(field.area_ha > 0.0))
        throw Error("field " + field.field_id + ": polygon has zero area");
      for (auto& part : parts)
        for (auto& r : part) field.rings.push_back(std::move(r));
      set.fields.push_back(std::move(field));
      ++index;
    }
  } catch (const json::exception& e) {
    throw Error("malformed GeoJSON: " + std::string(e.what()));
  }
  set.class_catalog = build_catalog(set.fields);
  return set;
}

FieldSet load_fields(const std::string& path) {
  return parse_fields_geojson(read_text_file(path));
}

std::string fields_to_geojson(const FieldSet& fields) {
  json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = json::array();
  for (const auto& f : fields.fields) {
    json rings = json::array();
    for (const auto& r : f.rings) {
      json ring = json::array();
      for (const auto& p : r) ring.push_back({p.x, p.y});
      rings.push_back(std::move(ring));
    }
    doc["features"].push_back(
        {{"type", "Feature"},
         {"properties", {{"field_id", f.field_id}, {"crop", f.crop_label}}},
         {"geometry", {{"type", "Polygon"}, {"coordinates", std::move(rings)}}}});
  }
  return doc.dump() + "\n";
}

void save_fields(const FieldSet& fields, const std::string& path) {
  write_text_file(path, fields_to_geojson(fields));
}

// ---------------------------------------------------------------------------
// Rasterization

std::vector<std::size_t> LabelRaster::pixels_per_field() const {
  std::vector<std::size_t> counts(field_ids.size(), 0);
  for (auto f : field_index)
    if (f >= 0) ++counts[static_cast<std::size_t>(f)];
  return counts;
}

GridSpec target_grid(const SceneBundle& scene, int target_resolution_m) {
  GridSpec grid;
  grid.width = scene.target_width(target_resolution_m);
  grid.height = scene.target_height(target_resolution_m);
  grid.geo = scene.geo;
  grid.geo.pixel_size_m = target_resolution_m;
  return grid;
}

bool point_in_rings(const std::vector<Ring>& rings, Point p) {
  bool inside = false;
  for (const auto& ring : rings) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
      const Point a = ring[i];
      const Point b = ring[i + 1];
      const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
      if (cross == 0.0 && p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
          p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y))
        return true;
      if ((a.y > p.y) != (b.y > p.y)) {
        const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if (p.x < x_cross) inside = !inside;
      }
    }
  }
  return inside;
}

namespace {

// Pixel indices (row-major) whose centers fall inside `field`.
std::vector<std::int64_t> field_pixels(const FieldPolygon& field, const GridSpec& grid) {
  double min_x = INFINITY, max_x = -INFINITY, min_y = INFINITY, max_y = -INFINITY;
  for (const auto& r : field.rings)
    for (const auto& p : r) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  const double ps = grid.geo.pixel_size_m;
  // center(col) = x0 + (col + 0.5) ps  =>  col = (x - x0) / ps - 0.5
  const int c0 = std::max(0, static_cast<int>(std::floor((min_x - grid.geo.x0) / ps - 0.5)));
  const int c1 = std::min(grid.width - 1,
                          static_cast<int>(std::ceil((max_x - grid.geo.x0) / ps - 0.5)));
  const int r0 = std::max(0, static_cast<int>(std::floor((grid.geo.y0 - max_y) / ps - 0.5)));
  const int r1 = std::min(grid.height - 1,
                          static_cast<int>(std::ceil((grid.geo.y0 - min_y) / ps - 0.5)));
  std::vector<std::int64_t> out;
  for (int row = r0; row <= r1; ++row) {
    const double y = grid.geo.y0 - (row + 0.5) * ps;
    for (int col = c0; col <= c1; ++col) {
      const double x = grid.geo.x0 + (col + 0.5) * ps;
      if (point_in_rings(field.rings, {x, y}))
        out.push_back(static_cast<std::int64_t>(row) * grid.width + col);
    }
  }
  return out;
}

} // namespace

RasterizeResult rasterize_fields(const FieldSet& fields, const GridSpec& grid) {
  if (grid.width <= 0 || grid.height <= 0) throw Error("rasterize: empty grid");
  const std::size_t n = fields.fields.size();
  std::vector<std::vector<std::int64_t>> hits(n);

#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t f = 0; f < static_cast<std::int64_t>(n); ++f)
    hits[static_cast<std::size_t>(f)] = field_pixels(fields.fields[static_cast<std::size_t>(f)], grid);

  RasterizeResult result;
  auto& lr = result.labels;
  lr.width = grid.width;
  lr.height = grid.height;
  lr.geo = grid.geo;
  lr.class_catalog = fields.class_catalog;
  lr.field_index.assign(static_cast<std::size_t>(grid.width) * grid.height, -1);
  for (const auto& f : fields.fields) {
    lr.field_ids.push_back(f.field_id);
    lr.field_classes.push_back(fields.class_index(f.crop_label));
  }

  // Conflicts are resolved serially in listing order.
  for (std::size_t f = 0; f < n; ++f) {
    std::map<std::int32_t, std::size_t> lost_to;
    for (auto px : hits[f]) {
      auto& slot = lr.field_index[static_cast<std::size_t>(px)];
      if (slot < 0)
        slot = static_cast<std::int32_t>(f);
      else
        ++lost_to[slot];
    }
    for (const auto& [winner, count] : lost_to)
      result.warnings.push_back("field " + fields.fields[f].field_id + " overlaps field " +
                                lr.field_ids[static_cast<std::size_t>(winner)] + " on " +
                                std::to_string(count) + " pixels; kept by " +
                                lr.field_ids[static_cast<std::size_t>(winner)]);
    if (hits[f].empty())
      result.warnings.push_back("field " + fields.fields[f].field_id +
                                " covers no pixel centers of the grid");
  }
  return result;
}

FieldSet filter_fields(const FieldSet& fields, const LabelRaster& labels,
                       const FilterOptions& options) {
  std::unordered_map<std::string, std::size_t> counts;
  const auto per_field = labels.pixels_per_field();
  for (std::size_t i = 0; i < labels.field_ids.size(); ++i)
    counts[labels.field_ids[i]] = per_field[i];

  FieldSet out;
  for (const auto& f : fields.fields) {
    const auto it = counts.find(f.field_id);
    const std::size_t px = it == counts.end() ? 0 : it->second;
    if (px < options.min_pixels) continue;
    if (std::find(options.excluded.begin(), options.excluded.end(), f.crop_label) !=
        options.excluded.end())
      continue;
    out.fields.push_back(f);
  }
  if (out.fields.empty()) throw Error("empty field set: every field was filtered out");
  out.class_catalog = build_catalog(out.fields);
  return out;
}

LabelRaster relabel(const LabelRaster& labels, const FieldSet& retained) {
  LabelRaster out;
  out.width = labels.width;
  out.height = labels.height;
  out.geo = labels.geo;
  out.class_catalog = retained.class_catalog;
  std::unordered_map<std::string, std::int32_t> slot;
  for (const auto& f : retained.fields) {
    slot.emplace(f.field_id, static_cast<std::int32_t>(out.field_ids.size()));
    out.field_ids.push_back(f.field_id);
    out.field_classes.push_back(retained.class_index(f.crop_label));
  }
  std::vector<std::int32_t> remap(labels.field_ids.size(), -1);
  for (std::size_t i = 0; i < labels.field_ids.size(); ++i) {
    const auto it = slot.find(labels.field_ids[i]);
    if (it != slot.end()) remap[i] = it->second;
  }
  out.field_index.resize(labels.field_index.size());
  for (std::size_t p = 0; p < labels.field_index.size(); ++p) {
    const auto f = labels.field_index[p];
    out.field_index[p] = f < 0 ? -1 : remap[static_cast<std::size_t>(f)];
  }
  return out;
}

void save_labels(const LabelRaster& labels, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  json header;
  header["width"] = labels.width;
  header["height"] = labels.height;
  header["geo_transform"] = {{"x0", labels.geo.x0},
                             {"y0", labels.geo.y0},
                             {"pixel_size_m", labels.geo.pixel_size_m}};
  header["class_catalog"] = labels.class_catalog;
  header["field_ids"] = labels.field_ids;
  header["field_classes"] = labels.field_classes;
  header["file"] = "field_index.i32";
  header["dtype"] = "i32";
  std::vector<std::uint8_t> bytes(labels.field_index.size() * 4);
  for (std::size_t i = 0; i < labels.field_index.size(); ++i) {
    const auto v = static_cast<std::uint32_t>(labels.field_index[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(v >> (8 * b));
  }
  write_binary(root / "field_index.i32", bytes);
  write_text_file((root / "labels.json").string(), header.dump(2) + "\n");
}

LabelRaster load_labels(const std::string& dir) {
  const fs::path root(dir);
  LabelRaster labels;
  try {
    const json header = json::parse(read_text_file((root / "labels.json").string()));
    if (header.at("dtype").get<std::string>() != "i32")
      throw Error("labels: unsupported dtype");
    labels.width = header.at("width").get<int>();
    labels.height = header.at("height").get<int>();
    const auto& geo = header.at("geo_transform");
    labels.geo = {geo.at("x0").get<double>(), geo.at("y0").get<double>(),
                  geo.at("pixel_size_m").get<double>()};
    labels.class_catalog = header.at("class_catalog").get<std::vector<std::string>>();
    labels.field_ids = header.at("field_ids").get<std::vector<std::string>>();
    labels.field_classes = header.at("field_classes").get<std::vector<int>>();
    const auto bytes = read_binary(root / header.at("file").get<std::string>());
    const std::size_t count = static_cast<std::size_t>(labels.width) * labels.height;
    if (bytes.size() != count * 4) throw Error("labels: header/binary length mismatch");
    labels.field_index.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) v |= std::uint32_t(bytes[4 * i + b]) << (8 * b);
      labels.field_index[i] = static_cast<std::int32_t>(v);
    }
  } catch (const json::exception& e) {
    throw Error("malformed labels.json: " + std::string(e.what()));
  }
  if (labels.field_ids.size() != labels.field_classes.size())
    throw Error("labels: field table size mismatch");
  for (auto f : labels.field_index)
    if (f >= static_cast<std::int32_t>(labels.field_ids.size()))
      throw Error("labels: pixel references unknown field");
  return labels;
}

} // namespace fieldfuse
