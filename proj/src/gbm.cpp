#include "fieldfuse/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fieldfuse {

void softmax(std::span<double> scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (auto& s : scores) {
    s = std::exp(s - top);
    total += s;
  }
  for (auto& s : scores) s /= total;
}

GbmModel gb_fit(const PixelDataset& train, std::span<const double> weights, const GbmParams& params) {
  const std::size_t n = train.size();
  if (n == 0) throw Error("gb: empty training set");
  if (!weights.empty() && weights.size() != n) throw Error("gb: weight count mismatch");
  if (params.n_rounds < 0) throw Error("gb: n_rounds must be >= 0");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0)) throw Error("gb: subsample must be in (0, 1]");

  const int K = train.n_classes();
  const int dim = train.dim;
  GbmModel model;
  model.params = params;
  model.dim = dim;
  model.n_classes = K;

  std::vector<double> w(n, 1.0);
  if (!weights.empty()) std::copy(weights.begin(), weights.end(), w.begin());
  std::vector<double> class_weight(static_cast<std::size_t>(K), 0.0);
  for (std::size_t i = 0; i < n; ++i) class_weight[static_cast<std::size_t>(train.labels[i])] += w[i];
  const double total_weight = std::accumulate(class_weight.begin(), class_weight.end(), 0.0);
  if (std::count_if(class_weight.begin(), class_weight.end(), [](double v) { return v > 0.0; }) < 2)
    throw Error("gb: training set has a single class");
  for (double cw : class_weight)
    model.init_scores.push_back(cw > 0.0 ? std::log(cw / total_weight) : kAbsentClassScore);

  // Row-major scores F(x) for every training row.
  std::vector<double> scores(n * static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < n; ++i)
    std::copy(model.init_scores.begin(), model.init_scores.end(), scores.begin() + static_cast<std::ptrdiff_t>(i * K));

  const MatrixView view{train.features, n, dim};
  const auto sorted = SortedColumns::build(train.features, n, dim);
  const TreeParams tp{params.max_depth, params.min_samples_leaf, 0};
  const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.subsample * double(n))));

  std::vector<double> prob(n * static_cast<std::size_t>(K));
  std::vector<std::size_t> order(n);
  std::vector<std::uint32_t> counts(n);
  model.trees.reserve(static_cast<std::size_t>(params.n_rounds) * K);

  for (int round = 0; round < params.n_rounds; ++round) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      std::copy_n(scores.begin() + i * K, K, prob.begin() + i * K);
      softmax(std::span<double>(prob.data() + i * K, static_cast<std::size_t>(K)));
    }

    auto rng = make_rng(params.seed, "gb_round", static_cast<std::uint64_t>(round));
    std::fill(counts.begin(), counts.end(), 0u);
    if (take >= n) {
      std::fill(counts.begin(), counts.end(), 1u);
    } else {
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t j = 0; j < take; ++j) {
        std::swap(order[j], order[j + uniform_index(rng, n - j)]);
        counts[order[j]] = 1;
      }
    }
    const auto subset = sorted.select(counts);
    std::vector<double> sample_w(n);
    for (std::size_t i = 0; i < n; ++i) sample_w[i] = counts[i] * w[i];

    std::vector<DecisionTree> round_trees(static_cast<std::size_t>(K));
#pragma omp parallel for schedule(dynamic, 1)
    for (int c = 0; c < K; ++c) {
      if (class_weight[static_cast<std::size_t>(c)] <= 0.0) {
        DecisionTree stump;
        stump.nodes.push_back({});
        stump.values.push_back(0.0);
        round_trees[static_cast<std::size_t>(c)] = std::move(stump);
        continue;
      }
      std::vector<double> residual(n);
      for (std::size_t i = 0; i < n; ++i)
        residual[i] = (train.labels[i] == c ? 1.0 : 0.0) - prob[i * K + c];
      round_trees[static_cast<std::size_t>(c)] =
          fit_regression_tree(view, residual, sample_w, counts, subset, tp, nullptr);
    }

#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      const double* x = view.row(static_cast<std::size_t>(i));
      for (int c = 0; c < K; ++c)
        scores[static_cast<std::size_t>(i) * K + c] +=
            params.learning_rate * round_trees[static_cast<std::size_t>(c)].leaf(x)[0];
    }
    for (auto& t : round_trees) model.trees.push_back(std::move(t));
  }
  return model;
}

namespace detail {
void gb_predict_into(const GbmModel& model, const double* x, double* out) {
  const int K = model.n_classes;
  std::copy(model.init_scores.begin(), model.init_scores.end(), out);
  for (std::size_t t = 0; t < model.trees.size(); ++t)
    out[t % static_cast<std::size_t>(K)] += model.params.learning_rate * model.trees[t].leaf(x)[0];
  softmax(std::span<double>(out, static_cast<std::size_t>(K)));
}
} // namespace detail

std::vector<double> gb_predict(const GbmModel& model, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(model.dim)) throw Error("gb: query dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(model.n_classes));
  detail::gb_predict_into(model, x.data(), out.data());
  return out;
}

std::vector<double> gb_predict_batch(const GbmModel& model, std::span<const double> queries) {
  if (queries.size() % static_cast<std::size_t>(model.dim) != 0)
    throw Error("gb: query dimension mismatch");
  const auto n = static_cast<std::int64_t>(queries.size() / model.dim);
  std::vector<double> out(static_cast<std::size_t>(n) * model.n_classes);
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < n; ++q)
    detail::gb_predict_into(model, queries.data() + q * model.dim, out.data() + q * model.n_classes);
  return out;
}

} // namespace fieldfuse
