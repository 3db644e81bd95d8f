#pragma once

#include <span>
#include <string>
#include <vector>

#include "fieldfuse/common.hpp"

namespace fieldfuse {

enum class Level { Pixel, Field };
const char* level_name(Level level);

// rows = true class, columns = predicted class
struct ConfusionMatrix {
  int n_classes = 0;
  Level level = Level::Field;
  std::vector<std::size_t> counts;

  std::size_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * n_classes + pred];
  }
  std::size_t total() const;
  std::size_t trace() const;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, int n_classes,
                          Level level = Level::Field);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  ConfusionMatrix cm;
  double oa = 0.0;       // percent
  double macro_f1 = 0.0; // mean F1 over classes with support
  std::vector<ClassMetrics> per_class;

  // Tags identifying the experiment cell.
  std::string classifier;
  std::string balancing;
  std::string strategy; // "pixel" for pixel-wise reports
  std::vector<std::string> class_catalog;
};

EvalReport metrics(const ConfusionMatrix& cm);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_to_text(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);

// One OA / macro-F1 cell of a comparison.
struct ComparisonEntry {
  std::string classifier;
  std::string balancing;
  std::string strategy;
  double oa = 0.0;
  double macro_f1 = 0.0;
};

ComparisonEntry to_entry(const EvalReport& report);

struct ComparisonTable {
  std::string text;
  std::string csv;
};

// Pixel-wise table, field OA by aggregation, Bayesian table, and the
// Bayesian-minus-majority / Bayesian-minus-averaging deltas.
ComparisonTable compare_strategies(const std::vector<ComparisonEntry>& entries);

} // namespace fieldfuse
