#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fieldfuse/aggregation.hpp"
#include "fieldfuse/dataset.hpp"
#include "fieldfuse/evaluation.hpp"
#include "fieldfuse/features.hpp"
#include "fieldfuse/ingest.hpp"
#include "fieldfuse/model_io.hpp"

namespace fieldfuse {

// Error raised inside a pipeline stage; the CLI turns `exit_code` into the
// process status.
class StageError : public Error {
public:
  StageError(std::string stage, int exit_code, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)), exit_code_(exit_code) {}
  const std::string& stage() const { return stage_; }
  int exit_code() const { return exit_code_; }

private:
  std::string stage_;
  int exit_code_;
};

namespace exit_codes {
inline constexpr int kUsage = 1;
inline constexpr int kConfig = 2;
inline constexpr int kIngest = 10;
inline constexpr int kFeatures = 11;
inline constexpr int kSplit = 12;
inline constexpr int kTrain = 13;
inline constexpr int kPredict = 14;
inline constexpr int kAggregate = 15;
inline constexpr int kEvaluate = 16;
inline constexpr int kCompare = 17;
inline constexpr int kSynth = 18;
} // namespace exit_codes

struct ClassifierParams {
  int knn_k = 8;
  ForestParams rf;
  GbmParams gb;
  int smote_k = 5;
};

struct RunConfig {
  static constexpr int kSchemaVersion = 1;

  std::string scene;
  std::string fields;
  std::string output_dir;
  std::uint64_t seed = 42;
  std::vector<ClassifierKind> classifiers = {ClassifierKind::Knn, ClassifierKind::RandomForest,
                                             ClassifierKind::GradientBoosting};
  std::vector<Scheme> balancing = {Scheme::ROS, Scheme::RUS, Scheme::SMOTE, Scheme::Weighting};
  std::vector<Strategy> aggregation = {Strategy::Majority, Strategy::Average, Strategy::Bayesian};
  std::optional<double> alpha;               // fixed alpha skips the grid search
  std::vector<double> alpha_grid = default_alpha_grid();
  std::array<double, 3> split_fractions = {0.75, 0.125, 0.125};
  FilterOptions filter;
  ClassifierParams params;
  int threads = 0;
};

// Relative paths are resolved against `base_dir`. FIELDFUSE_SEED, when set,
// overrides the seed.
RunConfig parse_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& config);

// ---------------------------------------------------------------------------
// Stages. Each is a pure function of its inputs.

struct IngestResult {
  FieldSet retained;
  LabelRaster labels; // restricted to retained fields
  Warnings warnings;
};

IngestResult stage_ingest(const SceneBundle& scene, const FieldSet& fields, const FilterOptions& filter);

// Feature stack rounded to f32 so in-memory and on-disk runs agree.
FeatureStack stage_features(const SceneBundle& scene);

TrainedModel stage_train(const FeatureStack& stack, const LabelRaster& labels, const SplitAssignment& split,
                         ClassifierKind kind, Scheme balancing, const ClassifierParams& params,
                         std::uint64_t seed);

// Same, from an already assembled (raw, unnormalised) training dataset.
TrainedModel train_on(const PixelDataset& raw_train, const std::vector<std::string>& channels,
                      ClassifierKind kind, Scheme balancing, const ClassifierParams& params,
                      std::uint64_t seed);

void normalize_rows(const Normalizer& normalizer, PixelDataset& data);

ProbabilityTable stage_predict(const TrainedModel& model, const FeatureStack& stack, const LabelRaster& labels,
                               const SplitAssignment& split, Split which);
ProbabilityTable predict_dataset(const TrainedModel& model, const PixelDataset& raw);

std::map<std::string, int> truth_map(const FieldSet& fields);

EvalReport evaluate_pixels(const ProbabilityTable& table, const std::map<std::string, int>& truth,
                           const std::vector<std::string>& catalog);
EvalReport evaluate_fields(const std::vector<FieldPrediction>& preds, const std::map<std::string, int>& truth,
                           const std::vector<std::string>& catalog);

// Runs ingest -> features -> split -> balance -> train -> predict ->
// aggregate -> evaluate for every classifier x balancing combination and
// writes every intermediate under config.output_dir.
void run_pipeline(const RunConfig& config);

} // namespace fieldfuse
