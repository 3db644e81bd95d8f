#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>

#include "fieldfuse/pipeline.hpp"
#include "fieldfuse/synthgen.hpp"
#include "helpers.hpp"

using namespace fieldfuse;
namespace fs = std::filesystem;

namespace {

void write_small_scene(const std::string& dir) {
  SynthSpec spec;
  spec.n_fields = 40;
  spec.n_classes = 3;
  spec.grid_width = 150;
  spec.grid_height = 150;
  spec.min_field_pixels = 50;
  spec.max_field_pixels = 120;
  spec.sigma = 900;
  spec.field_sigma = 300;
  const auto s = generate(spec);
  save_scene(s.scene, dir + "/scene");
  save_fields(s.fields, dir + "/fields.geojson");
}

std::vector<std::string> tree_files(const fs::path& root) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).string());
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config defaults are the reference experiment") {
  const auto c = parse_config("{}");
  CHECK(c.classifiers.size() == 3);
  CHECK(c.balancing.size() == 4);
  CHECK(c.aggregation.size() == 3);
  CHECK_FALSE(c.alpha.has_value());
  CHECK(c.params.knn_k == 8);
  CHECK(c.params.rf.n_trees == 200);
  CHECK(c.params.rf.max_depth == 15);
  CHECK(c.params.rf.min_samples_leaf == 10);
  CHECK(c.params.gb.n_rounds == 250);
  CHECK(c.params.gb.max_depth == 10);
  CHECK(c.params.gb.learning_rate == 0.05);
  CHECK(c.params.gb.subsample == 0.5);
  CHECK(c.split_fractions[0] == 0.75);
  CHECK(c.filter.min_pixels == 50);
}

TEST_CASE("config parsing resolves paths and validates") {
  const auto c = parse_config(R"({"scene":"s","fields":"/abs/f.geojson","classifiers":["rf"],"alpha":0.35,
                                  "rf":{"n_trees":3},"split_fractions":[0.5,0.25,0.25]})",
                              "/base");
  CHECK(c.scene == "/base/s");
  CHECK(c.fields == "/abs/f.geojson");
  CHECK(c.alpha.value() == 0.35);
  CHECK(c.params.rf.n_trees == 3);
  CHECK_THROWS_AS(parse_config(R"({"split_fractions":[0.5,0.5,0.5]})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"schema_version":2})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"classifiers":["svm"]})"), Error);
  CHECK_THROWS_AS(parse_config("nope"), Error);
  const auto again = parse_config(config_to_json(c));
  CHECK(config_to_json(again) == config_to_json(c));
}

TEST_CASE("FIELDFUSE_SEED overrides the config seed") {
  ::setenv("FIELDFUSE_SEED", "777", 1);
  const auto c = parse_config(R"({"seed":1})");
  ::unsetenv("FIELDFUSE_SEED");
  CHECK(c.seed == 777);
}

TEST_CASE("knn with class weighting is rejected") {
  const auto d = testutil::blobs(10, 2, 1.0, 1);
  CHECK_THROWS_AS(train_on(d, {"a", "b"}, ClassifierKind::Knn, Scheme::Weighting, {}, 1), Error);
}

TEST_CASE("training normalizes with train statistics only") {
  auto d = testutil::blobs(50, 2, 4.0, 2);
  d.field_ids = {"F1"};
  std::fill(d.field_slot.begin(), d.field_slot.end(), 0);
  const auto m = train_on(d, {"a", "b"}, ClassifierKind::Knn, Scheme::None, {}, 1);
  double mean0 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) mean0 += d.row(i)[0];
  CHECK(m.normalizer.mean[0] == doctest::Approx(mean0 / d.size()));
  const auto t = predict_dataset(m, d);
  validate_table(t);
}

TEST_CASE("full run writes every artifact and is reproducible") {
  testutil::TempDir dir("pipeline");
  write_small_scene(dir / "data");
  const std::string cfg = R"({"scene":"data/scene","fields":"data/fields.geojson","output_dir":"OUT","seed":5,
    "classifiers":["knn","rf"],"balancing":["ros","weighting"],"rf":{"n_trees":10}})";
  for (const char* out : {"a", "b"}) {
    std::string text = cfg;
    text.replace(text.find("OUT"), 3, out);
    run_pipeline(parse_config(text, dir.path().string()));
  }
  const auto files = tree_files(dir.path() / "a");
  CHECK(files == tree_files(dir.path() / "b"));
  for (const auto& f : files)
    if (f != "config.resolved.json") // records its own output_dir
      CHECK_MESSAGE(read_text_file((dir.path() / "a" / f).string()) == read_text_file((dir.path() / "b" / f).string()), f);
  for (const char* f : {"split.csv", "comparison.txt", "runs/rf_weighting/report_bayesian.json",
                        "runs/knn_ros/alpha_search.json", "runs/rf_ros/probs_test.csv", "labels/labels.json"})
    CHECK_MESSAGE(fs::exists(dir.path() / "a" / f), f);
  // knn + weighting is skipped rather than run.
  CHECK_FALSE(fs::exists(dir.path() / "a" / "runs" / "knn_weighting"));
}

TEST_CASE("stage errors carry the stage exit code") {
  RunConfig c;
  c.scene = "/nonexistent/scene";
  c.fields = "/nonexistent/fields.geojson";
  testutil::TempDir dir("stage_err");
  c.output_dir = dir / "out";
  try {
    run_pipeline(c);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "ingest");
    CHECK(e.exit_code() == exit_codes::kIngest);
  }
}

}
