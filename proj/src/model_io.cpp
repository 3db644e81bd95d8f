#include "fieldfuse/model_io.hpp"

#include "json.hpp"

namespace fieldfuse {

using json = nlohmann::json;

const char* classifier_name(ClassifierKind kind) {
  switch (kind) {
  case ClassifierKind::Knn: return "knn";
  case ClassifierKind::RandomForest: return "rf";
  case ClassifierKind::GradientBoosting: return "gb";
  }
  return "?";
}

ClassifierKind parse_classifier(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "knn") return ClassifierKind::Knn;
  if (lower == "rf" || lower == "random_forest") return ClassifierKind::RandomForest;
  if (lower == "gb" || lower == "gbm" || lower == "gradient_boosting") return ClassifierKind::GradientBoosting;
  throw Error("unknown classifier '" + std::string(name) + "'");
}

ClassifierKind TrainedModel::kind() const {
  return static_cast<ClassifierKind>(model.index());
}

std::vector<double> TrainedModel::predict_proba(std::span<const double> features) const {
  return std::visit(
      [&](const auto& m) -> std::vector<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) return knn_predict_batch(m, features);
        else if constexpr (std::is_same_v<T, ForestModel>) return rf_predict_batch(m, features);
        else return gb_predict_batch(m, features);
      },
      model);
}

namespace {

json tree_to_json(const DecisionTree& t) {
  json j;
  j["n_outputs"] = t.n_outputs;
  std::vector<std::int32_t> feature, left, right, value;
  std::vector<double> threshold;
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  j["feature"] = feature;
  j["threshold"] = threshold;
  j["left"] = left;
  j["right"] = right;
  j["value"] = value;
  j["values"] = t.values;
  return j;
}

DecisionTree tree_from_json(const json& j) {
  DecisionTree t;
  t.n_outputs = j.at("n_outputs").get<int>();
  const auto feature = j.at("feature").get<std::vector<std::int32_t>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<std::int32_t>>();
  const auto right = j.at("right").get<std::vector<std::int32_t>>();
  const auto value = j.at("value").get<std::vector<std::int32_t>>();
  t.values = j.at("values").get<std::vector<double>>();
  const std::size_t n = feature.size();
  if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n)
    throw Error("model: inconsistent tree arrays");
  for (std::size_t i = 0; i < n; ++i) {
    const auto bad = [&](std::int32_t c) { return c < 0 || static_cast<std::size_t>(c) >= n; };
    if (feature[i] >= 0 ? (bad(left[i]) || bad(right[i]))
                        : (value[i] < 0 || static_cast<std::size_t>(value[i]) + t.n_outputs > t.values.size()))
      throw Error("model: tree node out of range");
    t.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
  }
  return t;
}

} // namespace

std::string model_to_json(const TrainedModel& model) {
  json j;
  j["format"] = "fieldfuse-model";
  j["version"] = TrainedModel::kFormatVersion;
  j["kind"] = classifier_name(model.kind());
  j["class_catalog"] = model.class_catalog;
  j["balancing"] = scheme_name(model.balancing);
  j["normalizer"] = {{"channels", model.normalizer.channels},
                     {"mean", model.normalizer.mean},
                     {"std", model.normalizer.stddev}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        j["dim"] = m.dim;
        j["n_classes"] = m.n_classes;
        if constexpr (std::is_same_v<T, KnnModel>) {
          j["params"] = {{"k", m.k}};
          j["features"] = m.features;
          j["labels"] = m.labels;
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          j["params"] = {{"n_trees", m.params.n_trees},
                         {"max_depth", m.params.max_depth},
                         {"min_samples_leaf", m.params.min_samples_leaf},
                         {"max_features", m.params.max_features},
                         {"bootstrap", m.params.bootstrap},
                         {"seed", m.params.seed}};
          j["trees"] = json::array();
          for (const auto& t : m.trees) j["trees"].push_back(tree_to_json(t));
        } else {
          j["params"] = {{"n_rounds", m.params.n_rounds},
                         {"max_depth", m.params.max_depth},
                         {"min_samples_leaf", m.params.min_samples_leaf},
                         {"learning_rate", m.params.learning_rate},
                         {"subsample", m.params.subsample},
                         {"seed", m.params.seed}};
          j["init_scores"] = m.init_scores;
          j["trees"] = json::array();
          for (const auto& t : m.trees) j["trees"].push_back(tree_to_json(t));
        }
      },
      model.model);
  return j.dump() + "\n";
}

TrainedModel model_from_json(const std::string& text) {
  TrainedModel out;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "fieldfuse-model")
      throw Error("model: not a fieldfuse model file");
    const int version = j.at("version").get<int>();
    if (version != TrainedModel::kFormatVersion)
      throw Error("model: unsupported format version " + std::to_string(version));
    out.class_catalog = j.at("class_catalog").get<std::vector<std::string>>();
    out.balancing = parse_scheme(j.at("balancing").get<std::string>());
    const auto& jn = j.at("normalizer");
    out.normalizer.channels = jn.at("channels").get<std::vector<std::string>>();
    out.normalizer.mean = jn.at("mean").get<std::vector<double>>();
    out.normalizer.stddev = jn.at("std").get<std::vector<double>>();
    const auto& p = j.at("params");
    const int dim = j.at("dim").get<int>();
    const int n_classes = j.at("n_classes").get<int>();
    switch (parse_classifier(j.at("kind").get<std::string>())) {
    case ClassifierKind::Knn: {
      KnnModel m;
      m.dim = dim;
      m.n_classes = n_classes;
      m.k = p.at("k").get<int>();
      m.features = j.at("features").get<std::vector<double>>();
      m.labels = j.at("labels").get<std::vector<int>>();
      if (m.features.size() != m.labels.size() * static_cast<std::size_t>(dim))
        throw Error("model: knn feature/label size mismatch");
      out.model = std::move(m);
      break;
    }
    case ClassifierKind::RandomForest: {
      ForestModel m;
      m.dim = dim;
      m.n_classes = n_classes;
      m.params.n_trees = p.at("n_trees").get<int>();
      m.params.max_depth = p.at("max_depth").get<int>();
      m.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
      m.params.max_features = p.at("max_features").get<int>();
      m.params.bootstrap = p.at("bootstrap").get<bool>();
      m.params.seed = p.at("seed").get<std::uint64_t>();
      for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
      out.model = std::move(m);
      break;
    }
    case ClassifierKind::GradientBoosting: {
      GbmModel m;
      m.dim = dim;
      m.n_classes = n_classes;
      m.params.n_rounds = p.at("n_rounds").get<int>();
      m.params.max_depth = p.at("max_depth").get<int>();
      m.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
      m.params.learning_rate = p.at("learning_rate").get<double>();
      m.params.subsample = p.at("subsample").get<double>();
      m.params.seed = p.at("seed").get<std::uint64_t>();
      m.init_scores = j.at("init_scores").get<std::vector<double>>();
      for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
      out.model = std::move(m);
      break;
    }
    }
  } catch (const json::exception& e) {
    throw Error("malformed model file: " + std::string(e.what()));
  }
  return out;
}

void save_model(const TrainedModel& model, const std::string& path) {
  write_text_file(path, model_to_json(model));
}

TrainedModel load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

} // namespace fieldfuse
