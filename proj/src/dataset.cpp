#include "fieldfuse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace fieldfuse {

std::vector<std::size_t> PixelDataset::class_counts() const {
  std::vector<std::size_t> counts(class_catalog.size(), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

void PixelDataset::push_row(std::span<const double> x, int label, std::int32_t slot, int row,
                            int col) {
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
  field_slot.push_back(slot);
  rows.push_back(row);
  cols.push_back(col);
}

const char* split_name(Split s) {
  switch (s) {
  case Split::Train: return "train";
  case Split::Validation: return "validation";
  case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "validation" || name == "val") return Split::Validation;
  if (name == "test") return Split::Test;
  throw Error("unknown split '" + std::string(name) + "'");
}

const Split* SplitAssignment::find(std::string_view field_id) const {
  for (const auto& [id, s] : assignment)
    if (id == field_id) return &s;
  return nullptr;
}

SplitAssignment stratified_field_split(const FieldSet& fields, const LabelRaster& labels,
                                       std::array<double, 3> fractions, std::uint64_t /*seed*/) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9 || *std::min_element(fractions.begin(), fractions.end()) < 0.0)
    throw Error("split fractions must be non-negative and sum to 1");

  std::unordered_map<std::string, std::size_t> pixel_count;
  const auto per_field = labels.pixels_per_field();
  for (std::size_t i = 0; i < labels.field_ids.size(); ++i)
    pixel_count[labels.field_ids[i]] = per_field[i];

  SplitAssignment out;
  out.fractions = fractions;
  out.achieved.assign(fields.class_catalog.size(), {0.0, 0.0, 0.0});
  std::unordered_map<std::string, Split> decided;

  for (std::size_t k = 0; k < fields.class_catalog.size(); ++k) {
    const auto& cls = fields.class_catalog[k];
    struct Member {
      std::string id;
      std::size_t pixels;
    };
    std::vector<Member> members;
    for (const auto& f : fields.fields)
      if (f.crop_label == cls) {
        const auto it = pixel_count.find(f.field_id);
        members.push_back({f.field_id, it == pixel_count.end() ? 0 : it->second});
      }
    if (members.empty()) throw Error("split: class '" + cls + "' has no fields");
    if (members.size() < 3)
      out.warnings.push_back("split: class '" + cls + "' has only " +
                             std::to_string(members.size()) + " field(s)");
    std::sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
      return a.pixels != b.pixels ? a.pixels > b.pixels : a.id < b.id;
    });
    double total = 0.0;
    for (const auto& m : members) total += static_cast<double>(m.pixels);

    std::array<double, 3> assigned = {0.0, 0.0, 0.0};
    for (const auto& m : members) {
      int best = 0;
      double best_deficit = -INFINITY;
      for (int s = 0; s < 3; ++s) {
        const double deficit = fractions[s] * total - assigned[s];
        if (deficit > best_deficit) {
          best_deficit = deficit;
          best = s;
        }
      }
      assigned[best] += static_cast<double>(m.pixels);
      decided[m.id] = static_cast<Split>(best);
    }
    for (int s = 0; s < 3; ++s) {
      out.achieved[k][s] = total > 0 ? assigned[s] / total : 0.0;
      if (std::abs(out.achieved[k][s] - fractions[s]) > 0.05)
        out.warnings.push_back("split: class '" + cls + "' " + split_name(Split(s)) +
                               " pixel share " + std::to_string(out.achieved[k][s]) +
                               " deviates from target " + std::to_string(fractions[s]));
    }
  }
  for (const auto& f : fields.fields) {
    const auto it = decided.find(f.field_id);
    if (it != decided.end()) out.assignment.emplace_back(f.field_id, it->second);
  }
  return out;
}

std::string split_to_csv(const SplitAssignment& split) {
  std::ostringstream os;
  os << "field_id,split\n";
  for (const auto& [id, s] : split.assignment) os << id << ',' << split_name(s) << '\n';
  return os.str();
}

SplitAssignment split_from_csv(const std::string& text) {
  SplitAssignment out;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"field_id", "split"})
    throw Error("split csv: expected header 'field_id,split'");
  std::unordered_map<std::string, bool> seen;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw Error("split csv: malformed line '" + line + "'");
    if (seen[cells[0]]) throw Error("split csv: duplicate field_id '" + cells[0] + "'");
    seen[cells[0]] = true;
    out.assignment.emplace_back(cells[0], parse_split(cells[1]));
  }
  return out;
}

namespace {
std::vector<int> slot_splits(const LabelRaster& labels, const SplitAssignment& split) {
  std::unordered_map<std::string, Split> lookup(split.assignment.begin(), split.assignment.end());
  std::vector<int> out(labels.field_ids.size(), -1);
  for (std::size_t i = 0; i < labels.field_ids.size(); ++i) {
    const auto it = lookup.find(labels.field_ids[i]);
    if (it != lookup.end()) out[i] = static_cast<int>(it->second);
  }
  return out;
}
} // namespace

std::vector<std::size_t> split_pixels(const LabelRaster& labels, const SplitAssignment& split,
                                      Split which) {
  const auto splits = slot_splits(labels, split);
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < labels.field_index.size(); ++p) {
    const auto f = labels.field_index[p];
    if (f >= 0 && splits[static_cast<std::size_t>(f)] == static_cast<int>(which)) out.push_back(p);
  }
  return out;
}

std::array<PixelDataset, 3> assemble(const FeatureStack& stack, const LabelRaster& labels,
                                     const SplitAssignment& split) {
  if (stack.width != labels.width || stack.height != labels.height)
    throw Error("assemble: feature stack and label raster dimensions differ");
  const auto splits = slot_splits(labels, split);
  std::array<PixelDataset, 3> out;
  for (auto& ds : out) {
    ds.dim = stack.channel_count();
    ds.class_catalog = labels.class_catalog;
    ds.field_ids = labels.field_ids;
  }
  std::vector<double> x(static_cast<std::size_t>(stack.channel_count()));
  for (std::size_t p = 0; p < labels.field_index.size(); ++p) {
    const auto f = labels.field_index[p];
    if (f < 0) continue;
    const int s = splits[static_cast<std::size_t>(f)];
    if (s < 0)
      throw Error("assemble: field " + labels.field_ids[static_cast<std::size_t>(f)] +
                  " has no split assignment");
    for (std::size_t c = 0; c < x.size(); ++c) x[c] = stack.values[c][p];
    out[static_cast<std::size_t>(s)].push_row(x, labels.field_classes[static_cast<std::size_t>(f)], f,
                                              static_cast<int>(p / labels.width),
                                              static_cast<int>(p % labels.width));
  }
  return out;
}

PixelDataset assemble_split(const FeatureStack& stack, const LabelRaster& labels,
                            const SplitAssignment& split, Split which) {
  auto all = assemble(stack, labels, split);
  return std::move(all[static_cast<std::size_t>(which)]);
}

// ---------------------------------------------------------------------------
// Balancing

const char* scheme_name(Scheme s) {
  switch (s) {
  case Scheme::None: return "none";
  case Scheme::ROS: return "ros";
  case Scheme::RUS: return "rus";
  case Scheme::SMOTE: return "smote";
  case Scheme::Weighting: return "weighting";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "none") return Scheme::None;
  if (lower == "ros") return Scheme::ROS;
  if (lower == "rus") return Scheme::RUS;
  if (lower == "smote") return Scheme::SMOTE;
  if (lower == "weighting" || lower == "weights") return Scheme::Weighting;
  throw Error("unknown balancing scheme '" + std::string(name) + "'");
}

namespace {

std::vector<std::vector<std::size_t>> rows_by_class(const PixelDataset& d) {
  std::vector<std::vector<std::size_t>> out(d.class_catalog.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[static_cast<std::size_t>(d.labels[i])].push_back(i);
  return out;
}

void copy_row(const PixelDataset& src, std::size_t i, PixelDataset& dst) {
  dst.push_row(src.row(i), src.labels[i], src.field_slot[i], src.rows[i], src.cols[i]);
}

PixelDataset empty_like(const PixelDataset& d) {
  PixelDataset out;
  out.dim = d.dim;
  out.class_catalog = d.class_catalog;
  out.field_ids = d.field_ids;
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

// k nearest same-class neighbours of every member (indices into `members`).
std::vector<std::vector<std::size_t>> class_neighbors(const PixelDataset& d,
                                                      const std::vector<std::size_t>& members,
                                                      std::size_t k) {
  std::vector<std::vector<std::size_t>> out(members.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t a = 0; a < static_cast<std::int64_t>(members.size()); ++a) {
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(members.size() - 1);
    const auto xa = d.row(members[static_cast<std::size_t>(a)]);
    for (std::size_t b = 0; b < members.size(); ++b) {
      if (b == static_cast<std::size_t>(a)) continue;
      cand.emplace_back(squared_distance(xa, d.row(members[b])), b);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    auto& nn = out[static_cast<std::size_t>(a)];
    for (std::size_t j = 0; j < k; ++j) nn.push_back(cand[j].second);
  }
  return out;
}

} // namespace

BalanceResult balance(const PixelDataset& train, const BalancingSpec& spec) {
  if (train.size() == 0) throw Error("balance: empty training set");
  if (spec.smote_k < 1) throw Error("balance: smote_k must be >= 1");
  BalanceResult result;
  const auto by_class = rows_by_class(train);
  std::size_t majority = 0;
  std::size_t minority = SIZE_MAX;
  for (const auto& rows : by_class)
    if (!rows.empty()) {
      majority = std::max(majority, rows.size());
      minority = std::min(minority, rows.size());
    }

  auto keep_all = [&] {
    result.data = train;
    result.row_source.assign(train.size(), "original");
  };

  switch (spec.scheme) {
  case Scheme::None:
    keep_all();
    break;

  case Scheme::Weighting: {
    keep_all();
    const double total = static_cast<double>(train.size());
    const double n = static_cast<double>(train.class_catalog.size());
    for (const auto& rows : by_class)
      result.class_weights.push_back(rows.empty() ? 0.0 : total / (n * static_cast<double>(rows.size())));
    break;
  }

  case Scheme::ROS: {
    keep_all();
    auto rng = make_rng(spec.seed, "ros");
    for (const auto& rows : by_class) {
      if (rows.empty()) continue;
      for (std::size_t j = rows.size(); j < majority; ++j) {
        copy_row(train, rows[uniform_index(rng, rows.size())], result.data);
        result.row_source.push_back("ros");
      }
    }
    break;
  }

  case Scheme::RUS: {
    auto rng = make_rng(spec.seed, "rus");
    std::vector<char> keep(train.size(), 0);
    for (auto rows : by_class) {
      if (rows.empty()) continue;
      for (std::size_t j = 0; j < minority; ++j) {
        const auto pick = j + uniform_index(rng, rows.size() - j);
        std::swap(rows[j], rows[pick]);
        keep[rows[j]] = 1;
      }
    }
    result.data = empty_like(train);
    for (std::size_t i = 0; i < train.size(); ++i)
      if (keep[i]) {
        copy_row(train, i, result.data);
        result.row_source.push_back("original");
      }
    break;
  }

  case Scheme::SMOTE: {
    keep_all();
    auto rng = make_rng(spec.seed, "smote");
    std::vector<double> x(static_cast<std::size_t>(train.dim));
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      const auto& rows = by_class[c];
      if (rows.empty() || rows.size() >= majority) continue;
      const std::size_t need = majority - rows.size();
      if (rows.size() == 1) {
        result.warnings.push_back("smote: class '" + train.class_catalog[c] +
                                  "' has a single row; duplicating it");
        for (std::size_t j = 0; j < need; ++j) {
          copy_row(train, rows[0], result.data);
          result.row_source.push_back("ros");
        }
        continue;
      }
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(spec.smote_k), rows.size() - 1);
      if (k < static_cast<std::size_t>(spec.smote_k))
        result.warnings.push_back("smote: class '" + train.class_catalog[c] + "' uses k=" +
                                  std::to_string(k));
      const auto nn = class_neighbors(train, rows, k);
      for (std::size_t j = 0; j < need; ++j) {
        const std::size_t a = uniform_index(rng, rows.size());
        const std::size_t b = nn[a][uniform_index(rng, k)];
        const double lambda = uniform_unit(rng);
        const auto xa = train.row(rows[a]);
        const auto xb = train.row(rows[b]);
        for (std::size_t t = 0; t < x.size(); ++t) x[t] = xa[t] + lambda * (xb[t] - xa[t]);
        result.provenance.push_back({result.data.size(), rows[a], rows[b], lambda});
        result.data.push_row(x, static_cast<int>(c), -1, -1, -1);
        result.row_source.push_back("smote");
      }
    }
    break;
  }
  }
  return result;
}

std::vector<double> row_weights(const PixelDataset& data, std::span<const double> class_weights) {
  std::vector<double> w(data.size(), 1.0);
  if (class_weights.empty()) return w;
  for (std::size_t i = 0; i < data.size(); ++i) w[i] = class_weights[static_cast<std::size_t>(data.labels[i])];
  return w;
}

std::string balanced_debug_csv(const BalanceResult& result) {
  const auto& d = result.data;
  std::map<std::size_t, const SmoteProvenance*> prov;
  for (const auto& p : result.provenance) prov[p.output_row] = &p;
  std::ostringstream os;
  os << "row,source,class,field_id,seed_row,neighbor_row,lambda";
  for (int j = 0; j < d.dim; ++j) os << ",f" << j;
  os << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    os << i << ',' << result.row_source[i] << ',' << d.labels[i] << ',' << d.field_id(i);
    const auto it = prov.find(i);
    if (it != prov.end())
      os << ',' << it->second->seed_row << ',' << it->second->neighbor_row << ','
         << format_double(it->second->lambda);
    else
      os << ",,,";
    for (double v : d.row(i)) os << ',' << format_double(v);
    os << '\n';
  }
  return os.str();
}

} // namespace fieldfuse
