#include "fieldfuse/knn.hpp"

#include <algorithm>
#include <cmath>

namespace fieldfuse {

KnnModel knn_fit(const PixelDataset& train, int k) {
  if (train.size() == 0) throw Error("knn: empty training set");
  if (k < 1) throw Error("knn: k must be >= 1");
  KnnModel m;
  m.k = k;
  if (static_cast<std::size_t>(k) > train.size()) {
    log_warn("knn: k=" + std::to_string(k) + " exceeds training size " +
             std::to_string(train.size()) + "; using k=" + std::to_string(train.size()));
    m.k = static_cast<int>(train.size());
  }
  m.dim = train.dim;
  m.n_classes = train.n_classes();
  m.features = train.features;
  m.labels = train.labels;
  return m;
}

namespace detail {

void knn_predict_into(const KnnModel& model, const double* x, double* out) {
  const std::size_t n = model.size();
  const std::size_t k = static_cast<std::size_t>(model.k);
  const int dim = model.dim;
  // Max-heap on (squared distance, row) keeps the k best seen so far.
  std::vector<std::pair<double, std::size_t>> heap;
  heap.reserve(k + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = model.features.data() + i * dim;
    const double bound = heap.size() == k ? heap.front().first : INFINITY;
    double s = 0.0;
    int j = 0;
    for (; j < dim; ++j) {
      const double d = x[j] - r[j];
      s += d * d;
      if (s > bound) break;
    }
    if (j < dim) continue;
    if (heap.size() < k) {
      heap.emplace_back(s, i);
      std::push_heap(heap.begin(), heap.end());
    } else if (std::make_pair(s, i) < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = {s, i};
      std::push_heap(heap.begin(), heap.end());
    }
  }
  std::sort(heap.begin(), heap.end());
  std::fill(out, out + model.n_classes, 0.0);
  std::size_t zero = 0;
  for (const auto& [d2, i] : heap)
    if (d2 == 0.0) ++zero;
  if (zero > 0) {
    for (const auto& [d2, i] : heap)
      if (d2 == 0.0) out[model.labels[i]] += 1.0 / static_cast<double>(zero);
    return;
  }
  double total = 0.0;
  for (const auto& [d2, i] : heap) {
    const double w = 1.0 / std::max(std::sqrt(d2), 1e-12);
    out[model.labels[i]] += w;
    total += w;
  }
  for (int c = 0; c < model.n_classes; ++c) out[c] /= total;
}

} // namespace detail

std::vector<double> knn_predict(const KnnModel& model, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(model.dim)) throw Error("knn: query dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(model.n_classes));
  detail::knn_predict_into(model, x.data(), out.data());
  return out;
}

std::vector<double> knn_predict_batch(const KnnModel& model, std::span<const double> queries) {
  if (queries.size() % static_cast<std::size_t>(model.dim) != 0)
    throw Error("knn: query dimension mismatch");
  const auto n = static_cast<std::int64_t>(queries.size() / model.dim);
  std::vector<double> out(static_cast<std::size_t>(n) * model.n_classes);
#pragma omp parallel for schedule(dynamic, 32)
  for (std::int64_t q = 0; q < n; ++q)
    detail::knn_predict_into(model, queries.data() + q * model.dim,
                             out.data() + q * model.n_classes);
  return out;
}

} // namespace fieldfuse
