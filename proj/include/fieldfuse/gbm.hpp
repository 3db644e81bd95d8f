#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fieldfuse/dataset.hpp"
#include "fieldfuse/tree.hpp"

namespace fieldfuse {

struct GbmParams {
  int n_rounds = 250;
  int max_depth = 10;
  int min_samples_leaf = 1;
  double learning_rate = 0.05;
  double subsample = 0.5;
  std::uint64_t seed = 0;
};

// Multiclass gradient boosting with a softmax link: one regression tree per
// class per round, fitted to y_c - softmax_c(F).
struct GbmModel {
  GbmParams params;
  int dim = 0;
  int n_classes = 0;
  std::vector<double> init_scores;  // log class priors
  std::vector<DecisionTree> trees;  // round-major, n_classes per round

  int rounds() const { return n_classes == 0 ? 0 : static_cast<int>(trees.size()) / n_classes; }
};

// Score given to classes absent from the training set (exp(-50) ~ 2e-22).
inline constexpr double kAbsentClassScore = -50.0;

GbmModel gb_fit(const PixelDataset& train, std::span<const double> weights = {},
                const GbmParams& params = {});

std::vector<double> gb_predict(const GbmModel& model, std::span<const double> x);
std::vector<double> gb_predict_batch(const GbmModel& model, std::span<const double> queries);

// In-place numerically stable softmax.
void softmax(std::span<double> scores);

namespace detail {
void gb_predict_into(const GbmModel& model, const double* x, double* out);
}

} // namespace fieldfuse
