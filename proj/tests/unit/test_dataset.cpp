#include "doctest.h"

#include <cmath>
#include <map>
#include <set>

#include "fieldfuse/dataset.hpp"
#include "fieldfuse/synthgen.hpp"
#include "helpers.hpp"

using namespace fieldfuse;

namespace {

// Fields laid out as horizontal strips of the given pixel counts on a
// one-row-per-field raster; no polygons needed.
struct StripFixture {
  FieldSet fields;
  LabelRaster labels;
  FeatureStack stack;
};

StripFixture strips(const std::vector<std::pair<std::string, std::size_t>>& field_sizes) {
  StripFixture f;
  std::size_t width = 0;
  for (const auto& [cls, n] : field_sizes) width = std::max(width, n + 1); // one unlabeled pixel per row
  for (std::size_t i = 0; i < field_sizes.size(); ++i) {
    FieldPolygon p;
    p.field_id = "F" + std::to_string(100 + i);
    p.crop_label = field_sizes[i].first;
    f.fields.fields.push_back(p);
  }
  f.fields.class_catalog = build_catalog(f.fields.fields);
  f.labels.width = static_cast<int>(width);
  f.labels.height = static_cast<int>(field_sizes.size());
  f.labels.class_catalog = f.fields.class_catalog;
  f.labels.field_index.assign(width * field_sizes.size(), -1);
  for (std::size_t i = 0; i < field_sizes.size(); ++i) {
    f.labels.field_ids.push_back(f.fields.fields[i].field_id);
    f.labels.field_classes.push_back(f.fields.class_index(field_sizes[i].first));
    for (std::size_t c = 0; c < field_sizes[i].second; ++c)
      f.labels.field_index[i * width + c] = static_cast<std::int32_t>(i);
  }
  f.stack.width = f.labels.width;
  f.stack.height = f.labels.height;
  f.stack.channels = {"x", "y"};
  f.stack.values.assign(2, std::vector<double>(f.labels.field_index.size()));
  for (std::size_t p = 0; p < f.labels.field_index.size(); ++p) {
    f.stack.values[0][p] = static_cast<double>(p);
    f.stack.values[1][p] = -static_cast<double>(p);
  }
  return f;
}

PixelDataset counts_dataset(const std::vector<int>& labels, int dim = 2) {
  PixelDataset d;
  d.dim = dim;
  d.class_catalog = {"A", "B", "C"};
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int j = 0; j < dim; ++j) x[static_cast<std::size_t>(j)] = static_cast<double>(i * 10 + j);
    d.push_row(x, labels[i], static_cast<std::int32_t>(i), 0, static_cast<int>(i));
  }
  d.field_ids.resize(labels.size(), "f");
  return d;
}

} // namespace

TEST_SUITE("dataset") {

TEST_CASE("split names") {
  CHECK(parse_split("validation") == Split::Validation);
  CHECK(std::string(split_name(Split::Test)) == "test");
  CHECK_THROWS_AS(parse_split("dev"), Error);
}

TEST_CASE("one class of 8 equal fields splits 6/1/1") {
  const auto f = strips(std::vector<std::pair<std::string, std::size_t>>(8, {"A", 10}));
  const auto s = stratified_field_split(f.fields, f.labels);
  std::map<Split, int> n;
  for (const auto& [id, sp] : s.assignment) ++n[sp];
  CHECK(n[Split::Train] == 6);
  CHECK(n[Split::Validation] == 1);
  CHECK(n[Split::Test] == 1);
  CHECK(s.achieved[0][0] == doctest::Approx(0.75));
}

TEST_CASE("class with one field goes to train with a warning") {
  auto sizes = std::vector<std::pair<std::string, std::size_t>>(8, {"A", 10});
  sizes.push_back({"B", 30});
  const auto f = strips(sizes);
  const auto s = stratified_field_split(f.fields, f.labels);
  CHECK(*s.find("F108") == Split::Train);
  bool warned = false;
  for (const auto& w : s.warnings) warned = warned || w.find("'B' has only 1") != std::string::npos;
  CHECK(warned);
}

TEST_CASE("split fractions must sum to one") {
  const auto f = strips({{"A", 10}});
  CHECK_THROWS_AS(stratified_field_split(f.fields, f.labels, {0.5, 0.2, 0.2}), Error);
}

TEST_CASE("random fixture keeps every class's train share within [0.70, 0.80]") {
  auto rng = make_rng(21, "split");
  std::vector<std::pair<std::string, std::size_t>> sizes;
  for (const char* cls : {"A", "B", "C", "D"})
    for (int i = 0; i < 40; ++i) sizes.push_back({cls, 50 + uniform_index(rng, 350)});
  const auto f = strips(sizes);
  const auto s = stratified_field_split(f.fields, f.labels);
  // Recount from the assignment, independent of `achieved`.
  std::map<std::string, std::array<double, 3>> pix;
  for (std::size_t i = 0; i < sizes.size(); ++i)
    pix[sizes[i].first][static_cast<std::size_t>(*s.find(f.fields.fields[i].field_id))] += static_cast<double>(sizes[i].second);
  for (const auto& [cls, p] : pix) {
    const double share = p[0] / (p[0] + p[1] + p[2]);
    CHECK(share >= 0.70);
    CHECK(share <= 0.80);
  }
  CHECK(s.assignment.size() == sizes.size());
}

TEST_CASE("split csv round-trips") {
  const auto f = strips(std::vector<std::pair<std::string, std::size_t>>(8, {"A", 10}));
  const auto s = stratified_field_split(f.fields, f.labels);
  const auto back = split_from_csv(split_to_csv(s));
  CHECK(back.assignment == s.assignment);
  CHECK_THROWS_AS(split_from_csv("id,split\n"), Error);
  CHECK_THROWS_AS(split_from_csv("field_id,split\nF1,train\nF1,test\n"), Error);
}

TEST_CASE("assemble partitions labeled pixels") {
  const auto f = strips({{"A", 60}, {"B", 60}});
  SplitAssignment s;
  s.assignment = {{"F100", Split::Train}, {"F101", Split::Test}};
  const auto ds = assemble(f.stack, f.labels, s);
  CHECK(ds[0].size() == 60);
  CHECK(ds[1].size() == 0);
  CHECK(ds[2].size() == 60);
  std::set<double> seen;
  for (const auto& d : ds)
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(seen.insert(d.row(i)[0]).second);
  CHECK(seen.size() == 120);
  // The unlabeled pixel at the end of each row never appears.
  CHECK(seen.count(60.0) == 0);
  CHECK(ds[2].field_id(0) == "F101");
  CHECK(ds[2].labels[0] == 1);
}

TEST_CASE("per-split row counts equal rasterized pixel counts on a synthetic scene") {
  SynthSpec spec;
  spec.n_fields = 60;
  spec.grid_width = 180;
  spec.grid_height = 180;
  const auto scene = generate(spec);
  const auto r = rasterize_fields(scene.fields, target_grid(scene.scene));
  const auto s = stratified_field_split(scene.fields, r.labels);
  FeatureStack stack;
  stack.width = r.labels.width;
  stack.height = r.labels.height;
  stack.channels = {"c"};
  stack.values.assign(1, std::vector<double>(r.labels.pixel_count(), 0.0));
  const auto ds = assemble(stack, r.labels, s);
  std::array<std::size_t, 3> expected = {0, 0, 0};
  for (std::size_t i = 0; i < scene.fields.fields.size(); ++i)
    expected[static_cast<std::size_t>(*s.find(scene.fields.fields[i].field_id))] +=
        static_cast<std::size_t>(scene.field_pixels[i]);
  for (int k = 0; k < 3; ++k) CHECK(ds[static_cast<std::size_t>(k)].size() == expected[static_cast<std::size_t>(k)]);
  CHECK(split_pixels(r.labels, s, Split::Validation).size() == expected[1]);
}

TEST_CASE("ROS equalises to the majority count and keeps originals first") {
  const auto d = counts_dataset({0, 0, 0, 1});
  const auto r = balance(d, {Scheme::ROS, 5, 1});
  CHECK(r.data.class_counts() == std::vector<std::size_t>{3, 3, 0});
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(r.data.row(i)[0] == d.row(i)[0]);
  for (std::size_t i = d.size(); i < r.data.size(); ++i) {
    CHECK(r.data.labels[i] == 1);
    CHECK(r.data.row(i)[0] == 30.0);
    CHECK(r.row_source[i] == "ros");
  }
}

TEST_CASE("RUS equalises to the minority count and preserves order") {
  const auto d = counts_dataset({0, 1, 0, 0, 1, 0, 2, 2, 2});
  const auto r = balance(d, {Scheme::RUS, 5, 3});
  CHECK(r.data.class_counts() == std::vector<std::size_t>{2, 2, 2});
  for (std::size_t i = 1; i < r.data.size(); ++i) CHECK(r.data.row(i)[0] > r.data.row(i - 1)[0]);
}

TEST_CASE("weighting follows total / (N * count)") {
  PixelDataset d = counts_dataset({0, 0, 0, 1});
  d.class_catalog = {"A", "B"};
  const auto r = balance(d, {Scheme::Weighting, 5, 0});
  REQUIRE(r.class_weights.size() == 2);
  CHECK(r.class_weights[0] == 4.0 / 6.0);
  CHECK(r.class_weights[1] == 2.0);
  CHECK(r.data.size() == 4);
  const auto w = row_weights(r.data, r.class_weights);
  CHECK(w[3] == 2.0);
  CHECK(row_weights(r.data, {}) == std::vector<double>(4, 1.0));
}

TEST_CASE("SMOTE interpolates on the seed-neighbour segment") {
  PixelDataset d;
  d.dim = 2;
  d.class_catalog = {"A", "B"};
  for (int i = 0; i < 5; ++i) d.push_row(std::vector<double>{10.0 + i, 10.0}, 0, -1, -1, -1);
  d.push_row(std::vector<double>{0.0, 0.0}, 1, -1, -1, -1);
  d.push_row(std::vector<double>{2.0, 2.0}, 1, -1, -1, -1);
  const auto r = balance(d, {Scheme::SMOTE, 5, 9});
  CHECK(r.data.class_counts() == std::vector<std::size_t>{5, 5});
  REQUIRE(r.provenance.size() == 3);
  bool lowered = false;
  for (const auto& w : r.warnings) lowered = lowered || w.find("k=1") != std::string::npos;
  CHECK(lowered);
  for (const auto& p : r.provenance) {
    const auto x = r.data.row(p.output_row);
    const auto a = d.row(p.seed_row), b = d.row(p.neighbor_row);
    CHECK(p.lambda >= 0.0);
    CHECK(p.lambda < 1.0);
    for (int j = 0; j < 2; ++j) CHECK(std::abs(x[j] - (a[j] + p.lambda * (b[j] - a[j]))) <= 1e-12);
    // On the segment between (0,0) and (2,2): both coordinates equal.
    CHECK(x[0] == x[1]);
    CHECK(r.data.field_id(p.output_row) == "synthetic");
  }
  CHECK(balanced_debug_csv(r).find("smote") != std::string::npos);
}

TEST_CASE("SMOTE with a single-row class duplicates it") {
  const auto d = counts_dataset({0, 0, 0, 1});
  const auto r = balance(d, {Scheme::SMOTE, 5, 1});
  CHECK(r.data.class_counts() == std::vector<std::size_t>{3, 3, 0});
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("balancing is seed-deterministic") {
  const auto d = counts_dataset({0, 0, 0, 0, 0, 1, 1, 2});
  for (auto scheme : {Scheme::ROS, Scheme::RUS, Scheme::SMOTE}) {
    const auto a = balance(d, {scheme, 2, 5});
    const auto b = balance(d, {scheme, 2, 5});
    CHECK(a.data.features == b.data.features);
  }
  CHECK(parse_scheme("smote") == Scheme::SMOTE);
  CHECK_THROWS_AS(parse_scheme("adasyn"), Error);
}

}
