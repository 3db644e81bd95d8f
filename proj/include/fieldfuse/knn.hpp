#pragma once

#include <span>
#include <vector>

#include "fieldfuse/dataset.hpp"

namespace fieldfuse {

// Distance-weighted k-nearest-neighbours on Euclidean distance.
struct KnnModel {
  int k = 8;
  int dim = 0;
  int n_classes = 0;
  std::vector<double> features; // row-major training rows
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

KnnModel knn_fit(const PixelDataset& train, int k = 8);

// p(c|x) = sum of 1/d over neighbours of class c, normalised. Neighbours at
// distance zero take all of the mass, shared equally.
std::vector<double> knn_predict(const KnnModel& model, std::span<const double> x);

// Row-major queries in, row-major n x n_classes probabilities out.
std::vector<double> knn_predict_batch(const KnnModel& model, std::span<const double> queries);

namespace detail {
// Fills `out` (n_classes) for one query; used by both the parallel batch and
// the serial reference.
void knn_predict_into(const KnnModel& model, const double* x, double* out);
} // namespace detail

} // namespace fieldfuse
