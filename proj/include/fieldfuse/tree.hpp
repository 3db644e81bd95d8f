#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fieldfuse/common.hpp"

namespace fieldfuse {

struct TreeNode {
  std::int32_t feature = -1; // -1 for leaves
  double threshold = 0.0;    // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t value = 0;    // offset into DecisionTree::values for leaves
};

// Binary tree whose leaves hold `n_outputs` values: class probabilities for
// classification trees, a single score for regression trees.
struct DecisionTree {
  int n_outputs = 1;
  std::vector<TreeNode> nodes;
  std::vector<double> values;

  std::span<const double> leaf(std::span<const double> x) const;
  std::span<const double> leaf(const double* x) const;
  int depth() const;
  std::size_t leaf_count() const;
};

struct TreeParams {
  int max_depth = 15;
  int min_samples_leaf = 1;
  int max_features = 0; // candidates per node; 0 means every feature
};

// Column-wise presorted view of a row-major matrix, shared by every tree of
// an ensemble. Each column lists (value, row) ascending by value then row.
struct SortedColumns {
  struct Entry {
    double value;
    std::int32_t row;
  };
  std::vector<std::vector<Entry>> columns;

  static SortedColumns build(std::span<const double> features, std::size_t n_rows, int dim);
  // Keeps rows with non-zero multiplicity.
  SortedColumns select(std::span<const std::uint32_t> counts) const;
};

struct MatrixView {
  std::span<const double> features; // row-major
  std::size_t n_rows = 0;
  int dim = 0;
  const double* row(std::size_t i) const { return features.data() + i * dim; }
};

// Gini-impurity classification tree. `weights` are per-row fractional
// counts (already multiplied by multiplicity), `counts` the integer
// multiplicities used for the min_samples_leaf rule.
DecisionTree fit_classification_tree(const MatrixView& x, std::span<const int> labels, int n_classes,
                                     std::span<const double> weights,
                                     std::span<const std::uint32_t> counts, SortedColumns columns,
                                     const TreeParams& params, Rng* rng);

// Variance-reduction regression tree on `targets`.
DecisionTree fit_regression_tree(const MatrixView& x, std::span<const double> targets,
                                 std::span<const double> weights,
                                 std::span<const std::uint32_t> counts, SortedColumns columns,
                                 const TreeParams& params, Rng* rng);

} // namespace fieldfuse
