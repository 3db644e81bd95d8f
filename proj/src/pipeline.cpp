#include "fieldfuse/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "json.hpp"

namespace fieldfuse {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

template <class T, class Parse>
std::vector<T> parse_list(const json& j, const char* key, Parse parse, std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  std::vector<T> out;
  if (v.is_string()) {
    out.push_back(parse(v.get<std::string>()));
  } else {
    for (const auto& e : v) out.push_back(parse(e.get<std::string>()));
  }
  if (out.empty()) throw Error(std::string("config: '") + key + "' must not be empty");
  return out;
}

class StageTimer {
public:
  explicit StageTimer(std::string stage) : stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_);
    log_info("stage=" + stage_ + " wall_ms=" + std::to_string(ms.count()));
  }

private:
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

template <class Fn>
auto in_stage(const std::string& stage, int code, Fn&& fn) {
  StageTimer timer(stage);
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, code, e.what());
  }
}

} // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  RunConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("config: " + std::string(e.what()));
  }
  try {
    const int version = j.value("schema_version", RunConfig::kSchemaVersion);
    if (version != RunConfig::kSchemaVersion)
      throw Error("config: unsupported schema_version " + std::to_string(version));
    c.scene = resolve(base_dir, j.value("scene", ""));
    c.fields = resolve(base_dir, j.value("fields", ""));
    c.output_dir = resolve(base_dir, j.value("output_dir", "fieldfuse-out"));
    c.seed = j.value("seed", c.seed);
    c.classifiers = parse_list<ClassifierKind>(j, "classifiers", parse_classifier, c.classifiers);
    c.balancing = parse_list<Scheme>(j, "balancing", parse_scheme, c.balancing);
    c.aggregation = parse_list<Strategy>(j, "aggregation", parse_strategy, c.aggregation);
    if (j.contains("alpha") && !j["alpha"].is_null()) c.alpha = j["alpha"].get<double>();
    if (j.contains("alpha_grid")) c.alpha_grid = j["alpha_grid"].get<std::vector<double>>();
    if (j.contains("split_fractions")) {
      const auto f = j["split_fractions"].get<std::vector<double>>();
      if (f.size() != 3) throw Error("config: split_fractions needs three values");
      c.split_fractions = {f[0], f[1], f[2]};
    }
    if (std::abs(c.split_fractions[0] + c.split_fractions[1] + c.split_fractions[2] - 1.0) > 1e-9)
      throw Error("config: split_fractions must sum to 1");
    if (j.contains("filter")) {
      const auto& f = j["filter"];
      c.filter.min_pixels = f.value("min_pixels", c.filter.min_pixels);
      c.filter.excluded = f.value("excluded", c.filter.excluded);
    }
    if (j.contains("knn")) c.params.knn_k = j["knn"].value("k", c.params.knn_k);
    if (j.contains("rf")) {
      const auto& r = j["rf"];
      auto& p = c.params.rf;
      p.n_trees = r.value("n_trees", p.n_trees);
      p.max_depth = r.value("max_depth", p.max_depth);
      p.min_samples_leaf = r.value("min_samples_leaf", p.min_samples_leaf);
      p.max_features = r.value("max_features", p.max_features);
      p.bootstrap = r.value("bootstrap", p.bootstrap);
    }
    if (j.contains("gb")) {
      const auto& g = j["gb"];
      auto& p = c.params.gb;
      p.n_rounds = g.value("n_rounds", p.n_rounds);
      p.max_depth = g.value("max_depth", p.max_depth);
      p.min_samples_leaf = g.value("min_samples_leaf", p.min_samples_leaf);
      p.learning_rate = g.value("learning_rate", p.learning_rate);
      p.subsample = g.value("subsample", p.subsample);
    }
    c.params.smote_k = j.value("smote_k", c.params.smote_k);
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw Error("config: " + std::string(e.what()));
  }
  if (const char* env = std::getenv("FIELDFUSE_SEED"); env && *env)
    c.seed = static_cast<std::uint64_t>(parse_int(env));
  return c;
}

RunConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path), fs::path(path).parent_path().string());
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = RunConfig::kSchemaVersion;
  j["scene"] = c.scene;
  j["fields"] = c.fields;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  for (auto k : c.classifiers) j["classifiers"].push_back(classifier_name(k));
  for (auto s : c.balancing) j["balancing"].push_back(scheme_name(s));
  for (auto s : c.aggregation) j["aggregation"].push_back(strategy_name(s));
  j["alpha"] = c.alpha ? json(*c.alpha) : json(nullptr);
  j["alpha_grid"] = c.alpha_grid;
  j["split_fractions"] = c.split_fractions;
  j["filter"] = {{"min_pixels", c.filter.min_pixels}, {"excluded", c.filter.excluded}};
  j["knn"] = {{"k", c.params.knn_k}};
  j["rf"] = {{"n_trees", c.params.rf.n_trees},
             {"max_depth", c.params.rf.max_depth},
             {"min_samples_leaf", c.params.rf.min_samples_leaf},
             {"max_features", c.params.rf.max_features},
             {"bootstrap", c.params.rf.bootstrap}};
  j["gb"] = {{"n_rounds", c.params.gb.n_rounds},
             {"max_depth", c.params.gb.max_depth},
             {"min_samples_leaf", c.params.gb.min_samples_leaf},
             {"learning_rate", c.params.gb.learning_rate},
             {"subsample", c.params.gb.subsample}};
  j["smote_k"] = c.params.smote_k;
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

IngestResult stage_ingest(const SceneBundle& scene, const FieldSet& fields, const FilterOptions& filter) {
  IngestResult out;
  auto raster = rasterize_fields(fields, target_grid(scene));
  out.warnings = std::move(raster.warnings);
  out.retained = filter_fields(fields, raster.labels, filter);
  out.labels = relabel(raster.labels, out.retained);
  return out;
}

FeatureStack stage_features(const SceneBundle& scene) {
  auto stack = build_feature_stack(scene);
  quantize_f32(stack);
  return stack;
}

void normalize_rows(const Normalizer& normalizer, PixelDataset& data) {
  if (normalizer.mean.size() != static_cast<std::size_t>(data.dim))
    throw Error("normalizer: channel mismatch");
  const auto dim = static_cast<std::size_t>(data.dim);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t c = 0; c < dim; ++c) {
      auto& v = data.features[i * dim + c];
      v = (v - normalizer.mean[c]) / normalizer.stddev[c];
    }
}

TrainedModel train_on(const PixelDataset& raw_train, const std::vector<std::string>& channels,
                      ClassifierKind kind, Scheme balancing, const ClassifierParams& params,
                      std::uint64_t seed) {
  if (raw_train.size() == 0) throw Error("train: empty training split");
  if (kind == ClassifierKind::Knn && balancing == Scheme::Weighting)
    throw Error("train: class weighting does not apply to knn");

  TrainedModel model;
  model.class_catalog = raw_train.class_catalog;
  model.balancing = balancing;

  // Normalizer statistics over the training pixels only.
  const auto dim = static_cast<std::size_t>(raw_train.dim);
  model.normalizer.channels = channels;
  model.normalizer.mean.assign(dim, 0.0);
  model.normalizer.stddev.assign(dim, 0.0);
  const double n = static_cast<double>(raw_train.size());
  for (std::size_t c = 0; c < dim; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < raw_train.size(); ++i) sum += raw_train.features[i * dim + c];
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < raw_train.size(); ++i) {
      const double d = raw_train.features[i * dim + c] - mean;
      ss += d * d;
    }
    model.normalizer.mean[c] = mean;
    model.normalizer.stddev[c] = std::max(std::sqrt(ss / n), Normalizer::kStdFloor);
  }

  PixelDataset train = raw_train;
  normalize_rows(model.normalizer, train);
  auto balanced = balance(train, {balancing, params.smote_k, seed});
  log_warnings(balanced.warnings);
  const auto weights = row_weights(balanced.data, balanced.class_weights);
  const std::span<const double> w = balancing == Scheme::Weighting ? std::span<const double>(weights)
                                                                   : std::span<const double>();
  switch (kind) {
  case ClassifierKind::Knn:
    model.model = knn_fit(balanced.data, params.knn_k);
    break;
  case ClassifierKind::RandomForest: {
    auto p = params.rf;
    p.seed = seed;
    model.model = rf_fit(balanced.data, w, p);
    break;
  }
  case ClassifierKind::GradientBoosting: {
    auto p = params.gb;
    p.seed = seed;
    model.model = gb_fit(balanced.data, w, p);
    break;
  }
  }
  return model;
}

TrainedModel stage_train(const FeatureStack& stack, const LabelRaster& labels, const SplitAssignment& split,
                         ClassifierKind kind, Scheme balancing, const ClassifierParams& params,
                         std::uint64_t seed) {
  const auto train = assemble_split(stack, labels, split, Split::Train);
  return train_on(train, stack.channels, kind, balancing, params, seed);
}

ProbabilityTable predict_dataset(const TrainedModel& model, const PixelDataset& raw) {
  PixelDataset data = raw;
  normalize_rows(model.normalizer, data);
  ProbabilityTable table;
  table.n_classes = model.n_classes();
  table.field_ids = data.field_ids;
  table.field_slot = data.field_slot;
  table.rows = data.rows;
  table.cols = data.cols;
  if (data.size() > 0) table.probs = model.predict_proba(data.features);
  return table;
}

ProbabilityTable stage_predict(const TrainedModel& model, const FeatureStack& stack, const LabelRaster& labels,
                               const SplitAssignment& split, Split which) {
  if (model.normalizer.channels != stack.channels)
    throw Error("predict: model channels do not match the feature stack");
  if (model.class_catalog != labels.class_catalog)
    throw Error("predict: model class catalog does not match the label raster");
  return predict_dataset(model, assemble_split(stack, labels, split, which));
}

std::map<std::string, int> truth_map(const FieldSet& fields) {
  std::map<std::string, int> out;
  for (const auto& f : fields.fields) out[f.field_id] = fields.class_index(f.crop_label);
  return out;
}

EvalReport evaluate_pixels(const ProbabilityTable& table, const std::map<std::string, int>& truth,
                           const std::vector<std::string>& catalog) {
  std::vector<int> t, p;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto it = truth.find(table.field_id(i));
    if (it == truth.end()) throw Error("evaluate: field " + table.field_id(i) + " has no ground truth");
    t.push_back(it->second);
    p.push_back(argmax(table.row(i)));
  }
  auto report = metrics(confusion(t, p, table.n_classes, Level::Pixel));
  report.class_catalog = catalog;
  report.strategy = "pixel";
  return report;
}

EvalReport evaluate_fields(const std::vector<FieldPrediction>& preds, const std::map<std::string, int>& truth,
                           const std::vector<std::string>& catalog) {
  if (preds.empty()) throw Error("evaluate: no field predictions");
  std::vector<int> t, p;
  for (const auto& pr : preds) {
    const auto it = truth.find(pr.field_id);
    if (it == truth.end()) throw Error("evaluate: field " + pr.field_id + " has no ground truth");
    t.push_back(it->second);
    p.push_back(pr.pred_class);
  }
  auto report = metrics(confusion(t, p, static_cast<int>(preds.front().scores.size()), Level::Field));
  report.class_catalog = catalog;
  report.strategy = strategy_name(preds.front().strategy);
  return report;
}

// ---------------------------------------------------------------------------

void run_pipeline(const RunConfig& config) {
  using namespace exit_codes;
  if (config.threads > 0) set_thread_count(config.threads);
  const std::string cfg_json = config_to_json(config);
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a(cfg_json)));
  log_info("run seed=" + std::to_string(config.seed) + " config_hash=" + hash +
           " threads=" + std::to_string(thread_count()));

  const fs::path out(config.output_dir);
  fs::create_directories(out);
  write_text_file((out / "config.resolved.json").string(), cfg_json);

  const auto scene = in_stage("ingest", kIngest, [&] { return load_scene(config.scene); });
  const auto ingest = in_stage("ingest", kIngest, [&] {
    auto r = stage_ingest(scene, load_fields(config.fields), config.filter);
    log_warnings(r.warnings);
    save_labels(r.labels, (out / "labels").string());
    save_fields(r.retained, (out / "fields_filtered.geojson").string());
    log_info("ingest retained_fields=" + std::to_string(r.retained.fields.size()) +
             " classes=" + std::to_string(r.retained.n_classes()));
    return r;
  });
  const auto stack = in_stage("features", kFeatures, [&] {
    auto s = stage_features(scene);
    save_stack(s, (out / "features").string());
    return s;
  });
  const auto split = in_stage("split", kSplit, [&] {
    auto s = stratified_field_split(ingest.retained, ingest.labels, config.split_fractions, config.seed);
    log_warnings(s.warnings);
    write_text_file((out / "split.csv").string(), split_to_csv(s));
    return s;
  });

  const auto truth = truth_map(ingest.retained);
  const auto& catalog = ingest.retained.class_catalog;
  const auto datasets = assemble(stack, ingest.labels, split);
  std::vector<ComparisonEntry> entries;

  for (auto kind : config.classifiers)
    for (auto scheme : config.balancing) {
      if (kind == ClassifierKind::Knn && scheme == Scheme::Weighting) {
        log_warn("skipping knn with class weighting (not applicable)");
        continue;
      }
      const std::string tag = std::string(classifier_name(kind)) + "_" + scheme_name(scheme);
      const fs::path dir = out / "runs" / tag;
      const auto model = in_stage("train", kTrain, [&] {
        auto m = train_on(datasets[0], stack.channels, kind, scheme, config.params, config.seed);
        save_model(m, (dir / "model.json").string());
        return m;
      });
      const auto val = in_stage("predict", kPredict, [&] {
        auto t = predict_dataset(model, datasets[1]);
        write_text_file((dir / "probs_validation.csv").string(), table_to_csv(t));
        return t;
      });
      const auto test = in_stage("predict", kPredict, [&] {
        auto t = predict_dataset(model, datasets[2]);
        write_text_file((dir / "probs_test.csv").string(), table_to_csv(t));
        return t;
      });

      in_stage("evaluate", kEvaluate, [&] {
        auto r = evaluate_pixels(test, truth, catalog);
        r.classifier = classifier_name(kind);
        r.balancing = scheme_name(scheme);
        write_text_file((dir / "report_pixel.json").string(), report_to_json(r));
        write_text_file((dir / "report_pixel.txt").string(), report_to_text(r));
        entries.push_back(to_entry(r));
        return 0;
      });

      for (auto strategy : config.aggregation) {
        double alpha = config.alpha.value_or(0.35);
        if (strategy == Strategy::Bayesian && !config.alpha) {
          alpha = in_stage("aggregate", kAggregate, [&] {
            if (val.size() == 0) {
              log_warn("no validation pixels; using alpha 0.35");
              return 0.35;
            }
            const auto search = grid_search_alpha(val, truth, config.alpha_grid);
            json j;
            j["grid"] = search.grid;
            j["accuracy"] = search.accuracy;
            j["best_alpha"] = search.best_alpha;
            write_text_file((dir / "alpha_search.json").string(), j.dump(2) + "\n");
            log_info(tag + " best_alpha=" + format_double(search.best_alpha));
            return search.best_alpha;
          });
        }
        const auto preds = in_stage("aggregate", kAggregate, [&] {
          auto p = aggregate_table(test, strategy, alpha);
          write_text_file((dir / (std::string("preds_") + strategy_name(strategy) + ".csv")).string(),
                          predictions_to_csv(p, test.n_classes));
          return p;
        });
        in_stage("evaluate", kEvaluate, [&] {
          auto r = evaluate_fields(preds, truth, catalog);
          r.classifier = classifier_name(kind);
          r.balancing = scheme_name(scheme);
          const std::string stem = std::string("report_") + strategy_name(strategy);
          write_text_file((dir / (stem + ".json")).string(), report_to_json(r));
          write_text_file((dir / (stem + ".txt")).string(), report_to_text(r));
          entries.push_back(to_entry(r));
          log_info(tag + " " + strategy_name(strategy) + " field_oa=" + format_double(r.oa));
          return 0;
        });
      }
    }

  in_stage("compare", kCompare, [&] {
    const auto table = compare_strategies(entries);
    write_text_file((out / "comparison.txt").string(), table.text);
    write_text_file((out / "comparison.csv").string(), table.csv);
    return 0;
  });
}

} // namespace fieldfuse
