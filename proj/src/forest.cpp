#include "fieldfuse/forest.hpp"

#include <cmath>

namespace fieldfuse {

ForestModel rf_fit(const PixelDataset& train, std::span<const double> weights,
                   const ForestParams& params) {
  if (train.size() == 0) throw Error("rf: empty training set");
  if (params.n_trees < 1) throw Error("rf: n_trees must be >= 1");
  if (!weights.empty() && weights.size() != train.size()) throw Error("rf: weight count mismatch");

  ForestModel model;
  model.params = params;
  model.dim = train.dim;
  model.n_classes = train.n_classes();
  if (model.params.max_features <= 0)
    model.params.max_features = static_cast<int>(std::ceil(std::sqrt(double(train.dim))));
  model.trees.resize(static_cast<std::size_t>(params.n_trees));

  const std::size_t n = train.size();
  const MatrixView view{train.features, n, train.dim};
  const auto sorted = SortedColumns::build(train.features, n, train.dim);
  const TreeParams tp{params.max_depth, params.min_samples_leaf, model.params.max_features};

#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < params.n_trees; ++t) {
    auto rng = make_rng(params.seed, "rf_tree", static_cast<std::uint64_t>(t));
    std::vector<std::uint32_t> counts(n, params.bootstrap ? 0u : 1u);
    if (params.bootstrap)
      for (std::size_t j = 0; j < n; ++j) ++counts[uniform_index(rng, n)];
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
      w[i] = counts[i] * (weights.empty() ? 1.0 : weights[i]);
    model.trees[static_cast<std::size_t>(t)] =
        fit_classification_tree(view, train.labels, model.n_classes, w, counts,
                                sorted.select(counts), tp, &rng);
  }
  return model;
}

namespace detail {
void rf_predict_into(const ForestModel& model, const double* x, double* out) {
  std::fill(out, out + model.n_classes, 0.0);
  for (const auto& tree : model.trees) {
    const auto p = tree.leaf(x);
    for (int c = 0; c < model.n_classes; ++c) out[c] += p[static_cast<std::size_t>(c)];
  }
  const double inv = 1.0 / static_cast<double>(model.trees.size());
  for (int c = 0; c < model.n_classes; ++c) out[c] *= inv;
}
} // namespace detail

std::vector<double> rf_predict(const ForestModel& model, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(model.dim)) throw Error("rf: query dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(model.n_classes));
  detail::rf_predict_into(model, x.data(), out.data());
  return out;
}

std::vector<double> rf_predict_batch(const ForestModel& model, std::span<const double> queries) {
  if (queries.size() % static_cast<std::size_t>(model.dim) != 0)
    throw Error("rf: query dimension mismatch");
  const auto n = static_cast<std::int64_t>(queries.size() / model.dim);
  std::vector<double> out(static_cast<std::size_t>(n) * model.n_classes);
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < n; ++q)
    detail::rf_predict_into(model, queries.data() + q * model.dim, out.data() + q * model.n_classes);
  return out;
}

} // namespace fieldfuse
