#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fieldfuse/common.hpp"
#include "fieldfuse/ingest.hpp"

namespace fieldfuse {

// Per-pixel class probabilities keyed by pixel and field.
struct ProbabilityTable {
  int n_classes = 0;
  std::vector<std::string> field_ids;   // table referenced by field_slot
  std::vector<std::int32_t> field_slot; // per row
  std::vector<int> rows;
  std::vector<int> cols;
  std::vector<double> probs;            // row-major, size() x n_classes

  std::size_t size() const { return field_slot.size(); }
  std::span<const double> row(std::size_t i) const {
    return {probs.data() + i * static_cast<std::size_t>(n_classes), static_cast<std::size_t>(n_classes)};
  }
  const std::string& field_id(std::size_t i) const {
    return field_ids[static_cast<std::size_t>(field_slot[i])];
  }
};

// Throws unless every row is a probability vector (entries >= 0, sum 1 +- 1e-6).
void validate_table(const ProbabilityTable& table);

std::string table_to_csv(const ProbabilityTable& table);
ProbabilityTable table_from_csv(const std::string& text);

// Row indices per field, fields in order of first appearance.
std::vector<std::pair<std::string, std::vector<std::size_t>>> group_by_field(const ProbabilityTable& table);

struct SmoothingConfig {
  double alpha = 0.35;
  int n_classes = 2;
};

// Throws for alpha outside (0, 1); returns a warning when alpha <= 1/N, where
// smoothing stops being order-preserving.
Warnings validate_smoothing(const SmoothingConfig& cfg);

// p_hat(k) = alpha p(k) + (1 - alpha) / (N - 1) * (1 - p(k)).
std::vector<double> smooth(std::span<const double> p, const SmoothingConfig& cfg);

enum class Strategy { Majority, Average, Bayesian };
const char* strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);

struct FieldPrediction {
  std::string field_id;
  int pred_class = 0;
  std::vector<double> scores;
  Strategy strategy = Strategy::Majority;
  std::size_t n_pixels = 0;
};

// `probs` holds the field's pixels row-major (m x n_classes).
FieldPrediction aggregate_majority(std::span<const double> probs, int n_classes);
FieldPrediction aggregate_average(std::span<const double> probs, int n_classes);
FieldPrediction aggregate_bayesian(std::span<const double> probs, const SmoothingConfig& cfg);

// Log-odds evidence I(k) = sum_i log((1 - p_hat(k|x_i)) / p_hat(k|x_i)).
std::vector<double> bayesian_evidence(std::span<const double> probs, const SmoothingConfig& cfg);

// 1 / (1 + exp(v)) without overflow.
double logistic_of_negative(double v);

// Lowest index wins ties.
int argmax(std::span<const double> v);
int argmin(std::span<const double> v);

FieldPrediction aggregate(std::span<const double> probs, int n_classes, Strategy strategy,
                          double alpha);

// Aggregates every field of the table (parallel over fields).
std::vector<FieldPrediction> aggregate_table(const ProbabilityTable& table, Strategy strategy,
                                             double alpha = 0.35);

struct AlphaSearchResult {
  double best_alpha = 0.35;
  std::vector<double> grid;
  std::vector<double> accuracy; // field-level OA in [0, 1] per grid value
};

std::vector<double> default_alpha_grid();

// Picks the alpha with the highest Bayesian field accuracy; ties go to the
// smaller alpha. `truth` maps field_id to class index.
AlphaSearchResult grid_search_alpha(const ProbabilityTable& validation,
                                    const std::map<std::string, int>& truth,
                                    const std::vector<double>& grid = default_alpha_grid());

std::string predictions_to_csv(const std::vector<FieldPrediction>& preds, int n_classes);
std::vector<FieldPrediction> predictions_from_csv(const std::string& text);
std::string predictions_to_geojson(const FieldSet& fields, const std::vector<FieldPrediction>& preds);

} // namespace fieldfuse
