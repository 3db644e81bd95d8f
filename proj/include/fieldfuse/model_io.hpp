#pragma once

#include <string>
#include <variant>
#include <vector>

#include "fieldfuse/dataset.hpp"
#include "fieldfuse/features.hpp"
#include "fieldfuse/forest.hpp"
#include "fieldfuse/gbm.hpp"
#include "fieldfuse/knn.hpp"

namespace fieldfuse {

enum class ClassifierKind { Knn, RandomForest, GradientBoosting };
const char* classifier_name(ClassifierKind kind);
ClassifierKind parse_classifier(std::string_view name);

// A fitted classifier together with everything needed to apply it to a raw
// feature stack.
struct TrainedModel {
  static constexpr int kFormatVersion = 1;

  std::vector<std::string> class_catalog;
  Normalizer normalizer;
  Scheme balancing = Scheme::None;
  std::variant<KnnModel, ForestModel, GbmModel> model;

  ClassifierKind kind() const;
  int n_classes() const { return static_cast<int>(class_catalog.size()); }

  // Row-major probabilities for row-major (already normalised) features.
  std::vector<double> predict_proba(std::span<const double> features) const;
};

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

} // namespace fieldfuse
