#include "fieldfuse/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fieldfuse {

std::span<const double> DecisionTree::leaf(const double* x) const {
  std::int32_t i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return {values.data() + nodes[static_cast<std::size_t>(i)].value, static_cast<std::size_t>(n_outputs)};
}

std::span<const double> DecisionTree::leaf(std::span<const double> x) const { return leaf(x.data()); }

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<std::int32_t, int>> stack = {{0, 0}};
  int best = 0;
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const auto& n = nodes[static_cast<std::size_t>(i)];
    if (n.feature >= 0) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return best;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

SortedColumns SortedColumns::build(std::span<const double> features, std::size_t n_rows, int dim) {
  SortedColumns sc;
  sc.columns.resize(static_cast<std::size_t>(dim));
#pragma omp parallel for schedule(static)
  for (int f = 0; f < dim; ++f) {
    auto& col = sc.columns[static_cast<std::size_t>(f)];
    col.resize(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i)
      col[i] = {features[i * dim + f], static_cast<std::int32_t>(i)};
    std::sort(col.begin(), col.end(), [](const Entry& a, const Entry& b) {
      return a.value != b.value ? a.value < b.value : a.row < b.row;
    });
  }
  return sc;
}

SortedColumns SortedColumns::select(std::span<const std::uint32_t> counts) const {
  SortedColumns out;
  out.columns.resize(columns.size());
  for (std::size_t f = 0; f < columns.size(); ++f) {
    auto& dst = out.columns[f];
    dst.reserve(columns[f].size());
    for (const auto& e : columns[f])
      if (counts[static_cast<std::size_t>(e.row)] > 0) dst.push_back(e);
  }
  return out;
}

namespace {

// Class-weight histogram statistics for Gini splits.
struct GiniCriterion {
  std::span<const int> labels;
  int n_classes;

  struct Stats {
    std::vector<double> w;
    double total = 0.0;
  };
  Stats empty() const { return {std::vector<double>(static_cast<std::size_t>(n_classes), 0.0), 0.0}; }
  void add(Stats& s, std::int32_t row, double weight) const {
    s.w[static_cast<std::size_t>(labels[static_cast<std::size_t>(row)])] += weight;
    s.total += weight;
  }
  // Larger is better: sum_k w_k^2 / W, i.e. W * (1 - gini).
  double score(const Stats& s) const {
    if (s.total <= 0.0) return 0.0;
    double sq = 0.0;
    for (double v : s.w) sq += v * v;
    return sq / s.total;
  }
  double score_right(const Stats& total, const Stats& left) const {
    const double wr = total.total - left.total;
    if (wr <= 0.0) return 0.0;
    double sq = 0.0;
    for (std::size_t k = 0; k < total.w.size(); ++k) {
      const double r = total.w[k] - left.w[k];
      sq += r * r;
    }
    return sq / wr;
  }
  bool pure(const Stats& s) const {
    int present = 0;
    for (double v : s.w)
      if (v > 0.0) ++present;
    return present <= 1;
  }
  void leaf(const Stats& s, std::vector<double>& out) const {
    for (double v : s.w) out.push_back(s.total > 0.0 ? v / s.total : 1.0 / n_classes);
  }
  int outputs() const { return n_classes; }
};

struct VarianceCriterion {
  std::span<const double> targets;

  struct Stats {
    double sum = 0.0;
    double total = 0.0;
    double min = INFINITY;
    double max = -INFINITY;
  };
  Stats empty() const { return {}; }
  void add(Stats& s, std::int32_t row, double weight) const {
    const double y = targets[static_cast<std::size_t>(row)];
    s.sum += weight * y;
    s.total += weight;
    s.min = std::min(s.min, y);
    s.max = std::max(s.max, y);
  }
  double score(const Stats& s) const { return s.total > 0.0 ? s.sum * s.sum / s.total : 0.0; }
  double score_right(const Stats& total, const Stats& left) const {
    const double wr = total.total - left.total;
    if (wr <= 0.0) return 0.0;
    const double sr = total.sum - left.sum;
    return sr * sr / wr;
  }
  bool pure(const Stats& s) const { return s.max <= s.min; }
  void leaf(const Stats& s, std::vector<double>& out) const {
    out.push_back(s.total > 0.0 ? s.sum / s.total : 0.0);
  }
  int outputs() const { return 1; }
};

template <class Criterion>
class TreeBuilder {
public:
  TreeBuilder(const MatrixView& x, const Criterion& crit, std::span<const double> weights,
              std::span<const std::uint32_t> counts, SortedColumns columns, const TreeParams& params,
              Rng* rng)
      : x_(x), crit_(crit), weights_(weights), counts_(counts), cols_(std::move(columns)),
        params_(params), rng_(rng), goes_left_(x.n_rows, 0) {
    tree_.n_outputs = crit.outputs();
    const std::size_t m = cols_.columns.empty() ? 0 : cols_.columns.front().size();
    scratch_.resize(m);
  }

  DecisionTree build() {
    const std::size_t m = cols_.columns.empty() ? 0 : cols_.columns.front().size();
    if (m == 0) throw Error("tree: no training rows");
    grow(0, m, 0);
    return std::move(tree_);
  }

private:
  struct Best {
    int feature = -1;
    std::size_t split = 0; // left = [begin, split)
    double threshold = 0.0;
    double score = -INFINITY;
  };

  std::int32_t make_leaf(const typename Criterion::Stats& s) {
    TreeNode node;
    node.value = static_cast<std::int32_t>(tree_.values.size());
    crit_.leaf(s, tree_.values);
    tree_.nodes.push_back(node);
    return static_cast<std::int32_t>(tree_.nodes.size() - 1);
  }

  std::int32_t grow(std::size_t begin, std::size_t end, int depth) {
    const auto& first = cols_.columns.front();
    auto stats = crit_.empty();
    std::uint64_t count = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = first[i].row;
      crit_.add(stats, row, weights_[static_cast<std::size_t>(row)]);
      count += counts_[static_cast<std::size_t>(row)];
    }
    const auto min_leaf = static_cast<std::uint64_t>(std::max(1, params_.min_samples_leaf));
    if (depth >= params_.max_depth || count < 2 * min_leaf || crit_.pure(stats))
      return make_leaf(stats);

    const Best best = find_split(begin, end, stats, min_leaf);
    const double parent = crit_.score(stats);
    if (best.feature < 0 || !(best.score - parent > 1e-12 * std::max(1.0, stats.total)))
      return make_leaf(stats);

    const auto& split_col = cols_.columns[static_cast<std::size_t>(best.feature)];
    for (std::size_t i = begin; i < end; ++i)
      goes_left_[static_cast<std::size_t>(split_col[i].row)] = i < best.split ? 1 : 0;
    for (auto& col : cols_.columns) {
      std::size_t l = begin;
      std::size_t r = 0;
      for (std::size_t i = begin; i < end; ++i) {
        if (goes_left_[static_cast<std::size_t>(col[i].row)])
          col[l++] = col[i];
        else
          scratch_[r++] = col[i];
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r),
                col.begin() + static_cast<std::ptrdiff_t>(l));
    }

    const auto self = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back({best.feature, best.threshold, -1, -1, 0});
    const std::size_t mid = best.split;
    const auto left = grow(begin, mid, depth + 1);
    const auto right = grow(mid, end, depth + 1);
    tree_.nodes[static_cast<std::size_t>(self)].left = left;
    tree_.nodes[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  std::vector<int> candidate_features() {
    const int dim = static_cast<int>(cols_.columns.size());
    std::vector<int> all(static_cast<std::size_t>(dim));
    std::iota(all.begin(), all.end(), 0);
    if (params_.max_features <= 0 || params_.max_features >= dim || rng_ == nullptr) return all;
    const auto take = static_cast<std::size_t>(params_.max_features);
    for (std::size_t j = 0; j < take; ++j)
      std::swap(all[j], all[j + uniform_index(*rng_, all.size() - j)]);
    all.resize(take);
    std::sort(all.begin(), all.end());
    return all;
  }

  Best find_split(std::size_t begin, std::size_t end, const typename Criterion::Stats& total,
                  std::uint64_t min_leaf) {
    Best best;
    std::uint64_t total_count = 0;
    for (std::size_t i = begin; i < end; ++i)
      total_count += counts_[static_cast<std::size_t>(cols_.columns.front()[i].row)];

    for (int f : candidate_features()) {
      const auto& col = cols_.columns[static_cast<std::size_t>(f)];
      auto left = crit_.empty();
      std::uint64_t left_count = 0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        const auto row = static_cast<std::size_t>(col[i].row);
        crit_.add(left, col[i].row, weights_[row]);
        left_count += counts_[row];
        if (total_count - left_count < min_leaf) break;
        if (left_count < min_leaf || !(col[i].value < col[i + 1].value)) continue;
        const double s = crit_.score(left) + crit_.score_right(total, left);
        if (s > best.score) {
          best.score = s;
          best.feature = f;
          best.split = i + 1;
          double mid = 0.5 * (col[i].value + col[i + 1].value);
          if (!(mid < col[i + 1].value)) mid = col[i].value;
          best.threshold = mid;
        }
      }
    }
    return best;
  }

  const MatrixView& x_;
  const Criterion& crit_;
  std::span<const double> weights_;
  std::span<const std::uint32_t> counts_;
  SortedColumns cols_;
  TreeParams params_;
  Rng* rng_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<SortedColumns::Entry> scratch_;
  DecisionTree tree_;
};

} // namespace

DecisionTree fit_classification_tree(const MatrixView& x, std::span<const int> labels, int n_classes,
                                     std::span<const double> weights,
                                     std::span<const std::uint32_t> counts, SortedColumns columns,
                                     const TreeParams& params, Rng* rng) {
  GiniCriterion crit{labels, n_classes};
  return TreeBuilder<GiniCriterion>(x, crit, weights, counts, std::move(columns), params, rng).build();
}

DecisionTree fit_regression_tree(const MatrixView& x, std::span<const double> targets,
                                 std::span<const double> weights,
                                 std::span<const std::uint32_t> counts, SortedColumns columns,
                                 const TreeParams& params, Rng* rng) {
  VarianceCriterion crit{targets};
  return TreeBuilder<VarianceCriterion>(x, crit, weights, counts, std::move(columns), params, rng).build();
}

} // namespace fieldfuse
