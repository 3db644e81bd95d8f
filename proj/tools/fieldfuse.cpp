// fieldfuse command-line front end. Each subcommand wraps one pipeline stage
// with file I/O; `run` executes the whole chain from a config file.
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fieldfuse/pipeline.hpp"
#include "fieldfuse/synthgen.hpp"

namespace fs = std::filesystem;
using namespace fieldfuse;

namespace {

template <class Fn>
void guarded(const char* stage, int code, Fn&& fn) {
  try {
    fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, code, e.what());
  }
}

struct SynthOpts {
  std::string out;
  SynthSpec spec;
};

struct IngestOpts {
  std::string scene, fields, out;
  std::size_t min_pixels = 50;
  std::vector<std::string> excluded = {"Dates", "Intercrop"};
};

struct FeaturesOpts {
  std::string scene, out;
};

struct SplitOpts {
  std::string labels, fields, out;
  std::vector<double> fractions = {0.75, 0.125, 0.125};
  std::uint64_t seed = 42;
};

struct TrainOpts {
  std::string features, labels, split, out, classifier = "gb", balancing = "ros";
  std::uint64_t seed = 42;
  ClassifierParams params;
};

struct PredictOpts {
  std::string model, features, labels, split, out, which = "test";
};

struct AggregateOpts {
  std::string probs, out, strategy = "bayesian", validation, fields;
  double alpha = 0.35;
};

struct EvaluateOpts {
  std::string preds, probs, fields, out, text, classifier, balancing;
};

struct CompareOpts {
  std::vector<std::string> reports;
  std::string out, csv;
};

void run_synth(const SynthOpts& o) {
  guarded("synth", exit_codes::kSynth, [&] {
    const auto s = generate(o.spec);
    save_scene(s.scene, (fs::path(o.out) / "scene").string());
    save_fields(s.fields, (fs::path(o.out) / "fields.geojson").string());
    log_info("synth fields=" + std::to_string(s.fields.fields.size()) + " out=" + o.out);
  });
}

void run_ingest(const IngestOpts& o) {
  guarded("ingest", exit_codes::kIngest, [&] {
    const auto r = stage_ingest(load_scene(o.scene), load_fields(o.fields), {o.min_pixels, o.excluded});
    log_warnings(r.warnings);
    save_labels(r.labels, (fs::path(o.out) / "labels").string());
    save_fields(r.retained, (fs::path(o.out) / "fields_filtered.geojson").string());
  });
}

void run_features(const FeaturesOpts& o) {
  guarded("features", exit_codes::kFeatures, [&] { save_stack(stage_features(load_scene(o.scene)), o.out); });
}

void run_split(const SplitOpts& o) {
  guarded("split", exit_codes::kSplit, [&] {
    if (o.fractions.size() != 3) throw Error("--fractions needs three values");
    const auto s = stratified_field_split(load_fields(o.fields), load_labels(o.labels),
                                          {o.fractions[0], o.fractions[1], o.fractions[2]}, o.seed);
    log_warnings(s.warnings);
    write_text_file(o.out, split_to_csv(s));
  });
}

void run_train(const TrainOpts& o) {
  guarded("train", exit_codes::kTrain, [&] {
    const auto stack = load_stack(o.features);
    const auto model = stage_train(stack, load_labels(o.labels), split_from_csv(read_text_file(o.split)),
                                   parse_classifier(o.classifier), parse_scheme(o.balancing), o.params, o.seed);
    save_model(model, o.out);
  });
}

void run_predict(const PredictOpts& o) {
  guarded("predict", exit_codes::kPredict, [&] {
    const auto table = stage_predict(load_model(o.model), load_stack(o.features), load_labels(o.labels),
                                     split_from_csv(read_text_file(o.split)), parse_split(o.which));
    write_text_file(o.out, table_to_csv(table));
  });
}

void run_aggregate(const AggregateOpts& o) {
  guarded("aggregate", exit_codes::kAggregate, [&] {
    const auto strategy = parse_strategy(o.strategy);
    double alpha = o.alpha;
    if (!o.validation.empty()) {
      if (o.fields.empty()) throw Error("--validation needs --fields for ground truth");
      const auto search = grid_search_alpha(table_from_csv(read_text_file(o.validation)),
                                            truth_map(load_fields(o.fields)));
      alpha = search.best_alpha;
      log_info("best_alpha=" + format_double(alpha));
    }
    const auto table = table_from_csv(read_text_file(o.probs));
    write_text_file(o.out, predictions_to_csv(aggregate_table(table, strategy, alpha), table.n_classes));
  });
}

void run_evaluate(const EvaluateOpts& o) {
  guarded("evaluate", exit_codes::kEvaluate, [&] {
    if (o.preds.empty() == o.probs.empty()) throw Error("give exactly one of --preds or --probs");
    const auto fields = load_fields(o.fields);
    const auto truth = truth_map(fields);
    auto report = o.preds.empty()
                      ? evaluate_pixels(table_from_csv(read_text_file(o.probs)), truth, fields.class_catalog)
                      : evaluate_fields(predictions_from_csv(read_text_file(o.preds)), truth, fields.class_catalog);
    report.classifier = o.classifier;
    report.balancing = o.balancing;
    write_text_file(o.out, report_to_json(report));
    if (!o.text.empty()) write_text_file(o.text, report_to_text(report));
    else std::cout << report_to_text(report);
  });
}

void run_compare(const CompareOpts& o) {
  guarded("compare", exit_codes::kCompare, [&] {
    std::vector<ComparisonEntry> entries;
    for (const auto& path : o.reports) entries.push_back(to_entry(report_from_json(read_text_file(path))));
    const auto table = compare_strategies(entries);
    if (o.out.empty()) std::cout << table.text;
    else write_text_file(o.out, table.text);
    if (!o.csv.empty()) write_text_file(o.csv, table.csv);
  });
}

void add_model_params(CLI::App* cmd, ClassifierParams& p) {
  cmd->add_option("--knn-k", p.knn_k, "KNN neighbours");
  cmd->add_option("--rf-trees", p.rf.n_trees, "random forest trees");
  cmd->add_option("--rf-depth", p.rf.max_depth, "random forest max depth");
  cmd->add_option("--rf-min-leaf", p.rf.min_samples_leaf, "random forest min samples per leaf");
  cmd->add_option("--gb-rounds", p.gb.n_rounds, "boosting rounds");
  cmd->add_option("--gb-depth", p.gb.max_depth, "boosting tree depth");
  cmd->add_option("--gb-lr", p.gb.learning_rate, "boosting learning rate");
  cmd->add_option("--gb-subsample", p.gb.subsample, "boosting row subsample");
  cmd->add_option("--smote-k", p.smote_k, "SMOTE neighbours");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"fieldfuse: crop-type classification with field-level aggregation"};
  app.require_subcommand(1);
  int threads = 0;
  bool quiet = false, verbose = false;
  app.add_option("--threads", threads, "worker threads (0 = OpenMP default)");
  app.add_flag("-q,--quiet", quiet, "only print errors");
  app.add_flag("-v,--verbose", verbose, "debug logging");

  SynthOpts synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic scene and field polygons");
  c_synth->add_option("--out", synth.out, "output directory")->required();
  c_synth->add_option("--seed", synth.spec.seed, "generator seed");
  c_synth->add_option("--classes", synth.spec.n_classes, "number of classes");
  c_synth->add_option("--fields", synth.spec.n_fields, "number of fields");
  c_synth->add_option("--min-field-pixels", synth.spec.min_field_pixels);
  c_synth->add_option("--max-field-pixels", synth.spec.max_field_pixels);
  c_synth->add_option("--width", synth.spec.grid_width, "grid width in 10 m pixels");
  c_synth->add_option("--height", synth.spec.grid_height, "grid height in 10 m pixels");
  c_synth->add_option("--sigma", synth.spec.sigma, "per-pixel noise (DN)");
  c_synth->add_option("--field-sigma", synth.spec.field_sigma, "per-field offset noise (DN)");
  c_synth->add_option("--imbalance", synth.spec.class_imbalance, "class frequency decay");
  c_synth->add_flag("--native-resolutions", synth.spec.native_resolutions, "store 20/60 m bands at native size");

  IngestOpts ingest;
  auto* c_ingest = app.add_subcommand("ingest", "rasterize and filter field polygons");
  c_ingest->add_option("--scene", ingest.scene, "scene bundle directory")->required();
  c_ingest->add_option("--fields", ingest.fields, "field GeoJSON")->required();
  c_ingest->add_option("--out", ingest.out, "output directory")->required();
  c_ingest->add_option("--min-pixels", ingest.min_pixels, "drop fields with fewer pixels");
  c_ingest->add_option("--exclude", ingest.excluded, "crop labels to drop");

  FeaturesOpts features;
  auto* c_features = app.add_subcommand("features", "build the 17-channel feature stack");
  c_features->add_option("--scene", features.scene, "scene bundle directory")->required();
  c_features->add_option("--out", features.out, "output stack directory")->required();

  SplitOpts split;
  auto* c_split = app.add_subcommand("split", "stratified field-level split");
  c_split->add_option("--labels", split.labels, "label raster directory")->required();
  c_split->add_option("--fields", split.fields, "filtered field GeoJSON")->required();
  c_split->add_option("--out", split.out, "split CSV")->required();
  c_split->add_option("--fractions", split.fractions, "train validation test")->expected(3);
  c_split->add_option("--seed", split.seed);

  TrainOpts train;
  auto* c_train = app.add_subcommand("train", "balance the training split and fit a classifier");
  c_train->add_option("--features", train.features, "feature stack directory")->required();
  c_train->add_option("--labels", train.labels, "label raster directory")->required();
  c_train->add_option("--split", train.split, "split CSV")->required();
  c_train->add_option("--out", train.out, "model JSON")->required();
  c_train->add_option("--classifier", train.classifier, "knn, rf or gb");
  c_train->add_option("--balancing", train.balancing, "none, ros, rus, smote or weighting");
  c_train->add_option("--seed", train.seed);
  add_model_params(c_train, train.params);

  PredictOpts predict;
  auto* c_predict = app.add_subcommand("predict", "per-pixel class probabilities");
  c_predict->add_option("--model", predict.model, "model JSON")->required();
  c_predict->add_option("--features", predict.features, "feature stack directory")->required();
  c_predict->add_option("--labels", predict.labels, "label raster directory")->required();
  c_predict->add_option("--split", predict.split, "split CSV")->required();
  c_predict->add_option("--which", predict.which, "train, validation or test");
  c_predict->add_option("--out", predict.out, "probability CSV")->required();

  AggregateOpts aggregate;
  auto* c_aggregate = app.add_subcommand("aggregate", "fuse pixel probabilities per field");
  c_aggregate->add_option("--probs", aggregate.probs, "probability CSV")->required();
  c_aggregate->add_option("--strategy", aggregate.strategy, "majority, average or bayesian");
  c_aggregate->add_option("--alpha", aggregate.alpha, "smoothing alpha for bayesian");
  c_aggregate->add_option("--validation", aggregate.validation, "validation probabilities for alpha grid search");
  c_aggregate->add_option("--fields", aggregate.fields, "field GeoJSON with ground truth");
  c_aggregate->add_option("--out", aggregate.out, "prediction CSV")->required();

  EvaluateOpts evaluate;
  auto* c_evaluate = app.add_subcommand("evaluate", "confusion matrix, OA and macro F1");
  c_evaluate->add_option("--preds", evaluate.preds, "field prediction CSV");
  c_evaluate->add_option("--probs", evaluate.probs, "pixel probability CSV");
  c_evaluate->add_option("--fields", evaluate.fields, "field GeoJSON with ground truth")->required();
  c_evaluate->add_option("--out", evaluate.out, "report JSON")->required();
  c_evaluate->add_option("--text", evaluate.text, "report text file");
  c_evaluate->add_option("--classifier", evaluate.classifier, "classifier tag");
  c_evaluate->add_option("--balancing", evaluate.balancing, "balancing tag");

  CompareOpts compare;
  auto* c_compare = app.add_subcommand("compare", "tabulate reports across strategies");
  c_compare->add_option("reports", compare.reports, "report JSON files")->required();
  c_compare->add_option("--out", compare.out, "text table (default stdout)");
  c_compare->add_option("--csv", compare.csv, "CSV table");

  std::string config_path;
  auto* c_run = app.add_subcommand("run", "full pipeline from a JSON config");
  c_run->add_option("--config", config_path, "config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_codes::kUsage;
  }

  set_log_level(quiet ? LogLevel::Error : verbose ? LogLevel::Debug : LogLevel::Info);
  if (threads > 0) set_thread_count(threads);

  try {
    if (*c_synth) run_synth(synth);
    else if (*c_ingest) run_ingest(ingest);
    else if (*c_features) run_features(features);
    else if (*c_split) run_split(split);
    else if (*c_train) run_train(train);
    else if (*c_predict) run_predict(predict);
    else if (*c_aggregate) run_aggregate(aggregate);
    else if (*c_evaluate) run_evaluate(evaluate);
    else if (*c_compare) run_compare(compare);
    else if (*c_run) {
      RunConfig config;
      try {
        config = load_config(config_path);
      } catch (const std::exception& e) {
        throw StageError("config", exit_codes::kConfig, e.what());
      }
      if (threads > 0) config.threads = threads;
      run_pipeline(config);
    }
  } catch (const StageError& e) {
    log(LogLevel::Error, e.what());
    return e.exit_code();
  }
  return 0;
}
