#include "doctest.h"

#include <cmath>
#include <fstream>
#include <iterator>

#include "fieldfuse/ingest.hpp"
#include "fieldfuse/synthgen.hpp"
#include "helpers.hpp"

using namespace fieldfuse;
using testutil::rect_field;
using testutil::make_set;

namespace {

std::string bytes_of(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string feature_json(const std::string& id, const std::string& crop, const std::string& coords) {
  return R"({"type":"Feature","properties":{"field_id":")" + id + R"(","crop":")" + crop +
         R"("},"geometry":{"type":"Polygon","coordinates":[)" + coords + "]}}";
}

std::string collection(const std::vector<std::string>& features) {
  std::string s = R"({"type":"FeatureCollection","features":[)";
  for (std::size_t i = 0; i < features.size(); ++i) s += (i ? "," : "") + features[i];
  return s + "]}";
}

double heron(Point a, Point b, Point c) {
  const double ab = std::hypot(b.x - a.x, b.y - a.y);
  const double bc = std::hypot(c.x - b.x, c.y - b.y);
  const double ca = std::hypot(a.x - c.x, a.y - c.y);
  const double s = (ab + bc + ca) / 2;
  return std::sqrt(std::max(0.0, s * (s - ab) * (s - bc) * (s - ca)));
}

// Winding-number test with explicit on-segment handling.
bool inside_oracle(const Ring& ring, Point p) {
  int winding = 0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const Point a = ring[i], b = ring[i + 1];
    const double cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
    if (cross == 0.0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
        std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y))
      return true;
    if (a.y <= p.y) {
      if (b.y > p.y && cross > 0) ++winding;
    } else if (b.y <= p.y && cross < 0) {
      --winding;
    }
  }
  return winding != 0;
}

GridSpec grid(int w, int h, double x0 = 0.0, double y0 = 0.0) {
  GridSpec g;
  g.width = w;
  g.height = h;
  g.geo = {x0, y0 == 0.0 ? h * 10.0 : y0, 10.0};
  return g;
}

} // namespace

TEST_SUITE("ingest") {

TEST_CASE("scene bundle round-trips byte for byte") {
  testutil::TempDir dir("scene");
  SynthSpec spec;
  spec.n_fields = 10;
  spec.grid_width = 60;
  spec.grid_height = 60;
  spec.min_field_pixels = 20;
  spec.max_field_pixels = 40;
  spec.native_resolutions = true;
  const auto s = generate(spec);
  save_scene(s.scene, dir / "a");
  const auto loaded = load_scene(dir / "a");
  CHECK(loaded.bands.size() == 13);
  save_scene(loaded, dir / "b");
  for (const auto& b : s.scene.bands)
    CHECK(bytes_of(dir / ("a/" + b.name + ".u16")) == bytes_of(dir / ("b/" + b.name + ".u16")));
  CHECK(loaded.band("B01").resolution_m == 60);
  CHECK(loaded.band("B05").resolution_m == 20);
  CHECK(loaded.target_width() == 60);
}

TEST_CASE("scene with 12 bands is rejected") {
  SynthSpec spec;
  spec.n_fields = 2;
  spec.grid_width = 30;
  spec.grid_height = 30;
  spec.min_field_pixels = 4;
  spec.max_field_pixels = 9;
  auto s = generate(spec).scene;
  s.bands.pop_back();
  CHECK_THROWS_WITH_AS(validate_scene(s), doctest::Contains("missing band"), Error);
}

TEST_CASE("square of 100 m has area 1 ha") {
  const auto set = parse_fields_geojson(
      collection({feature_json("F1", "Maize", "[[0,0],[100,0],[100,100],[0,100],[0,0]]")}));
  REQUIRE(set.fields.size() == 1);
  CHECK(set.fields[0].area_ha == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(set.class_catalog == std::vector<std::string>{"Maize"});
}

TEST_CASE("duplicate field ids are rejected") {
  const auto ring = "[[0,0],[10,0],[10,10],[0,10],[0,0]]";
  CHECK_THROWS_WITH_AS(parse_fields_geojson(collection({feature_json("F1", "A", ring), feature_json("F1", "B", ring)})),
                       doctest::Contains("duplicate field_id"), Error);
}

TEST_CASE("geojson errors") {
  CHECK_THROWS_AS(parse_fields_geojson("{not json"), Error);
  CHECK_THROWS_AS(parse_fields_geojson(R"({"type":"Feature"})"), Error);
  CHECK_THROWS_WITH_AS(
      parse_fields_geojson(
          R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"field_id":"F1","crop":"A"},"geometry":{"type":"Point","coordinates":[0,0]}}]})"),
      doctest::Contains("non-polygon"), Error);
  CHECK_THROWS_WITH_AS(
      parse_fields_geojson(
          R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"crop":"A"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]})"),
      doctest::Contains("field_id"), Error);
}

TEST_CASE("convex pentagon area matches fan triangulation") {
  const Ring penta = {{0, 0}, {40, -10}, {70, 20}, {45, 60}, {-5, 40}, {0, 0}};
  const auto set = parse_fields_geojson(
      collection({feature_json("P", "A", "[[0,0],[40,-10],[70,20],[45,60],[-5,40],[0,0]]")}));
  double fan = 0.0;
  for (std::size_t i = 1; i + 2 < penta.size(); ++i) fan += heron(penta[0], penta[i], penta[i + 1]);
  CHECK(set.fields[0].area_ha * 10000.0 == doctest::Approx(fan).epsilon(1e-9));
}

TEST_CASE("polygon with a hole subtracts the hole") {
  const auto set = parse_fields_geojson(collection({feature_json(
      "H", "A", "[[0,0],[100,0],[100,100],[0,100],[0,0]],[[20,20],[20,40],[40,40],[40,20],[20,20]]")}));
  CHECK(set.fields[0].area_ha == doctest::Approx(0.96));
}

TEST_CASE("geojson round-trips") {
  const auto a = make_set({rect_field("F1", "Maize", 0, 0, 50, 30), rect_field("F2", "Cotton", 60, 0, 90, 30)});
  const auto b = parse_fields_geojson(fields_to_geojson(a));
  REQUIRE(b.fields.size() == 2);
  CHECK(b.fields[1].field_id == "F2");
  CHECK(b.fields[1].crop_label == "Cotton");
  CHECK(b.class_catalog == std::vector<std::string>{"Cotton", "Maize"});
  CHECK(b.fields[0].area_ha == doctest::Approx(0.15));
}

TEST_CASE("square covering a 5x5 block of centers gets 25 pixels") {
  const auto g = grid(10, 10);
  const auto set = make_set({rect_field("F1", "A", 10, 40, 60, 90)});
  const auto r = rasterize_fields(set, g);
  CHECK(r.warnings.empty());
  CHECK(r.labels.pixels_per_field()[0] == 25);
  // Centers at x = 15..55 and y = 45..85, i.e. cols 1..5 and rows 1..5.
  for (int row = 0; row < 10; ++row)
    for (int col = 0; col < 10; ++col) {
      const bool in = row >= 1 && row <= 5 && col >= 1 && col <= 5;
      CHECK((r.labels.field_index[static_cast<std::size_t>(row * 10 + col)] == 0) == in);
    }
}

TEST_CASE("pixel centers on an edge count as inside") {
  const auto g = grid(4, 4);
  const auto set = make_set({rect_field("F1", "A", 15, 15, 25, 25)}); // corners are pixel centers
  const auto r = rasterize_fields(set, g);
  CHECK(r.labels.pixels_per_field()[0] == 4);
}

TEST_CASE("polygon outside the extent covers nothing and warns") {
  const auto set = make_set({rect_field("F1", "A", 500, 500, 600, 600)});
  const auto r = rasterize_fields(set, grid(10, 10));
  CHECK(r.labels.pixels_per_field()[0] == 0);
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("overlap goes to the first listed field") {
  const auto set = make_set({rect_field("F1", "A", 0, 0, 50, 50), rect_field("F2", "B", 30, 30, 100, 100)});
  const auto r = rasterize_fields(set, grid(10, 10));
  const auto counts = r.labels.pixels_per_field();
  CHECK(counts[0] == 25);
  CHECK(counts[1] == 49 - 4);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("random star polygons match the exhaustive point-in-polygon oracle") {
  auto rng = make_rng(11, "star");
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 5 + static_cast<int>(uniform_index(rng, 10));
    const double cx = 200 + 100 * uniform_unit(rng), cy = 200 + 100 * uniform_unit(rng);
    Ring ring;
    for (int i = 0; i < n; ++i) {
      const double ang = 2 * M_PI * (i + 0.8 * uniform_unit(rng)) / n;
      const double rad = 30 + 150 * uniform_unit(rng);
      ring.push_back({cx + rad * std::cos(ang), cy + rad * std::sin(ang)});
    }
    ring.push_back(ring.front());
    FieldPolygon f;
    f.field_id = "S";
    f.crop_label = "A";
    f.rings = {ring};
    const auto g = grid(50, 50);
    const auto r = rasterize_fields(make_set({f}), g);
    for (int row = 0; row < g.height; ++row)
      for (int col = 0; col < g.width; ++col) {
        const Point c{g.geo.x0 + (col + 0.5) * 10.0, g.geo.y0 - (row + 0.5) * 10.0};
        const bool got = r.labels.field_index[static_cast<std::size_t>(row * g.width + col)] == 0;
        if (got != inside_oracle(ring, c)) FAIL("mismatch at trial " << trial << " row " << row << " col " << col);
      }
  }
}

TEST_CASE("rasterization is deterministic") {
  SynthSpec spec;
  spec.n_fields = 40;
  spec.grid_width = 120;
  spec.grid_height = 120;
  const auto s = generate(spec);
  const auto a = rasterize_fields(s.fields, target_grid(s.scene));
  const auto b = rasterize_fields(s.fields, target_grid(s.scene));
  CHECK(a.labels.field_index == b.labels.field_index);
}

TEST_CASE("filter drops small and excluded fields") {
  // 7x7 = 49 pixels, 5x10 = 50 pixels, and a large Dates field.
  const auto set = make_set({rect_field("small", "Maize", 0, 0, 70, 70), rect_field("ok", "Maize", 100, 0, 200, 50),
                             rect_field("dates", "Dates", 0, 100, 200, 200),
                             rect_field("inter", "Intercrop", 210, 0, 300, 200)});
  GridSpec g = grid(30, 20);
  const auto r = rasterize_fields(set, g);
  const auto kept = filter_fields(set, r.labels);
  REQUIRE(kept.fields.size() == 1);
  CHECK(kept.fields[0].field_id == "ok");
  CHECK(kept.class_catalog == std::vector<std::string>{"Maize"});

  const auto relabeled = relabel(r.labels, kept);
  CHECK(relabeled.field_ids == std::vector<std::string>{"ok"});
  CHECK(relabeled.pixels_per_field()[0] == 50);

  FilterOptions none;
  none.min_pixels = 1000;
  CHECK_THROWS_WITH_AS(filter_fields(set, r.labels, none), doctest::Contains("empty field set"), Error);
}

TEST_CASE("label raster round-trips") {
  testutil::TempDir dir("labels");
  const auto set = make_set({rect_field("F1", "A", 0, 0, 50, 50), rect_field("F2", "B", 50, 50, 100, 100)});
  const auto r = rasterize_fields(set, grid(10, 10));
  save_labels(r.labels, dir / "l");
  const auto back = load_labels(dir / "l");
  CHECK(back.field_index == r.labels.field_index);
  CHECK(back.field_ids == r.labels.field_ids);
  CHECK(back.field_classes == r.labels.field_classes);
  CHECK(back.class_catalog == r.labels.class_catalog);
  CHECK(back.geo == r.labels.geo);
}

}
