#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fieldfuse/features.hpp"
#include "fieldfuse/ingest.hpp"

namespace fieldfuse {

// Per-pixel learning rows. Feature vectors are stored row-major.
struct PixelDataset {
  int dim = kFeatureCount;
  std::vector<std::string> class_catalog;
  std::vector<std::string> field_ids;  // table referenced by field_slot
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<std::int32_t> field_slot; // -1 marks synthetic rows
  std::vector<int> rows;                // pixel coordinates, -1 when synthetic
  std::vector<int> cols;

  std::size_t size() const { return labels.size(); }
  int n_classes() const { return static_cast<int>(class_catalog.size()); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  std::string field_id(std::size_t i) const {
    return field_slot[i] < 0 ? std::string("synthetic") : field_ids[static_cast<std::size_t>(field_slot[i])];
  }
  std::vector<std::size_t> class_counts() const;
  void push_row(std::span<const double> x, int label, std::int32_t slot, int row, int col);
};

enum class Split { Train = 0, Validation = 1, Test = 2 };
const char* split_name(Split s);
Split parse_split(std::string_view name);

struct SplitAssignment {
  std::vector<std::pair<std::string, Split>> assignment; // in field listing order
  std::array<double, 3> fractions = {0.75, 0.125, 0.125};
  // achieved[class][split] = share of that class's pixels in the split
  std::vector<std::array<double, 3>> achieved;
  Warnings warnings;

  const Split* find(std::string_view field_id) const;
};

SplitAssignment stratified_field_split(const FieldSet& fields, const LabelRaster& labels,
                                       std::array<double, 3> fractions = {0.75, 0.125, 0.125},
                                       std::uint64_t seed = 0);

std::string split_to_csv(const SplitAssignment& split);
SplitAssignment split_from_csv(const std::string& text);

// Labeled pixel indices whose field was assigned to `which`.
std::vector<std::size_t> split_pixels(const LabelRaster& labels, const SplitAssignment& split,
                                      Split which);

std::array<PixelDataset, 3> assemble(const FeatureStack& stack, const LabelRaster& labels,
                                     const SplitAssignment& split);
PixelDataset assemble_split(const FeatureStack& stack, const LabelRaster& labels,
                            const SplitAssignment& split, Split which);

enum class Scheme { None, ROS, RUS, SMOTE, Weighting };
const char* scheme_name(Scheme s);
Scheme parse_scheme(std::string_view name);

struct BalancingSpec {
  Scheme scheme = Scheme::None;
  int smote_k = 5;
  std::uint64_t seed = 0;
};

struct SmoteProvenance {
  std::size_t output_row = 0;
  std::size_t seed_row = 0;     // rows of the input dataset
  std::size_t neighbor_row = 0;
  double lambda = 0.0;
};

struct BalanceResult {
  PixelDataset data;
  std::vector<double> class_weights; // only for Weighting
  std::vector<SmoteProvenance> provenance;
  std::vector<std::string> row_source; // "original", "ros" or "smote" per row
  Warnings warnings;
};

BalanceResult balance(const PixelDataset& train, const BalancingSpec& spec);

// Per-row sample weights from class weights (empty weights -> all ones).
std::vector<double> row_weights(const PixelDataset& data, std::span<const double> class_weights);

std::string balanced_debug_csv(const BalanceResult& result);

} // namespace fieldfuse
