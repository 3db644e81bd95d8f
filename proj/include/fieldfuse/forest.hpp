#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fieldfuse/dataset.hpp"
#include "fieldfuse/tree.hpp"

namespace fieldfuse {

struct ForestParams {
  int n_trees = 200;
  int max_depth = 15;
  int min_samples_leaf = 10;
  int max_features = 0; // 0 -> ceil(sqrt(dim))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct ForestModel {
  ForestParams params;
  int dim = 0;
  int n_classes = 0;
  std::vector<DecisionTree> trees;
};

// Trees are grown independently (in parallel) from per-tree derived seeds,
// so the result does not depend on the thread count.
ForestModel rf_fit(const PixelDataset& train, std::span<const double> weights = {},
                   const ForestParams& params = {});

std::vector<double> rf_predict(const ForestModel& model, std::span<const double> x);
std::vector<double> rf_predict_batch(const ForestModel& model, std::span<const double> queries);

namespace detail {
void rf_predict_into(const ForestModel& model, const double* x, double* out);
}

} // namespace fieldfuse
