#include "fieldfuse/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace fieldfuse {

void validate_table(const ProbabilityTable& table) {
  if (table.n_classes < 1) throw Error("probability table: no classes");
  if (table.probs.size() != table.size() * static_cast<std::size_t>(table.n_classes) ||
      table.rows.size() != table.size() || table.cols.size() != table.size())
    throw Error("probability table: inconsistent column sizes");
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table.field_slot[i] < 0 || static_cast<std::size_t>(table.field_slot[i]) >= table.field_ids.size())
      throw Error("probability table: row " + std::to_string(i) + " has no field");
    double sum = 0.0;
    for (double p : table.row(i)) {
      if (!(p >= 0.0)) throw Error("probability table: negative or NaN entry in row " + std::to_string(i));
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw Error("probability table: row " + std::to_string(i) + " sums to " + format_double(sum));
  }
}

std::string table_to_csv(const ProbabilityTable& table) {
  std::ostringstream os;
  os << "row,col,field_id";
  for (int k = 0; k < table.n_classes; ++k) os << ",p_" << k;
  os << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    os << table.rows[i] << ',' << table.cols[i] << ',' << table.field_id(i);
    for (double p : table.row(i)) os << ',' << format_double(p);
    os << '\n';
  }
  return os.str();
}

ProbabilityTable table_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("probability table: empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "row" || header[1] != "col" || header[2] != "field_id")
    throw Error("probability table: expected header 'row,col,field_id,p_0..'");
  ProbabilityTable table;
  table.n_classes = static_cast<int>(header.size() - 3);
  for (int k = 0; k < table.n_classes; ++k)
    if (header[3 + static_cast<std::size_t>(k)] != "p_" + std::to_string(k))
      throw Error("probability table: unexpected column '" + header[3 + static_cast<std::size_t>(k)] + "'");
  std::unordered_map<std::string, std::int32_t> slots;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw Error("probability table: line " + std::to_string(line_no) + " has " +
                  std::to_string(cells.size()) + " cells");
    table.rows.push_back(static_cast<int>(parse_int(cells[0])));
    table.cols.push_back(static_cast<int>(parse_int(cells[1])));
    auto [it, inserted] = slots.try_emplace(cells[2], static_cast<std::int32_t>(table.field_ids.size()));
    if (inserted) table.field_ids.push_back(cells[2]);
    table.field_slot.push_back(it->second);
    for (int k = 0; k < table.n_classes; ++k)
      table.probs.push_back(parse_double(cells[3 + static_cast<std::size_t>(k)]));
  }
  validate_table(table);
  return table;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> group_by_field(const ProbabilityTable& table) {
  std::vector<std::int32_t> order(table.field_ids.size(), -1);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto& g = order[static_cast<std::size_t>(table.field_slot[i])];
    if (g < 0) {
      g = static_cast<std::int32_t>(groups.size());
      groups.emplace_back(table.field_id(i), std::vector<std::size_t>{});
    }
    groups[static_cast<std::size_t>(g)].second.push_back(i);
  }
  return groups;
}

// ---------------------------------------------------------------------------

Warnings validate_smoothing(const SmoothingConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw Error("smoothing: alpha must lie in (0, 1), got " + format_double(cfg.alpha));
  if (cfg.n_classes < 2) throw Error("smoothing: needs at least 2 classes");
  Warnings w;
  if (cfg.alpha * cfg.n_classes <= 1.0)
    w.push_back("smoothing: alpha " + format_double(cfg.alpha) + " <= 1/N for N=" +
                std::to_string(cfg.n_classes) + "; smoothing reverses the class ranking");
  return w;
}

std::vector<double> smooth(std::span<const double> p, const SmoothingConfig& cfg) {
  validate_smoothing(cfg);
  if (p.size() != static_cast<std::size_t>(cfg.n_classes))
    throw Error("smoothing: vector length does not match class count");
  const double off = (1.0 - cfg.alpha) / (cfg.n_classes - 1);
  std::vector<double> out(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) out[k] = cfg.alpha * p[k] + off * (1.0 - p[k]);
  return out;
}

const char* strategy_name(Strategy s) {
  switch (s) {
  case Strategy::Majority: return "majority";
  case Strategy::Average: return "average";
  case Strategy::Bayesian: return "bayesian";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "majority") return Strategy::Majority;
  if (name == "average" || name == "averaging") return Strategy::Average;
  if (name == "bayesian" || name == "bayes") return Strategy::Bayesian;
  throw Error("unknown aggregation strategy '" + std::string(name) + "'");
}

int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

int argmin(std::span<const double> v) {
  int best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] < v[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

namespace {
std::size_t pixel_count(std::span<const double> probs, int n_classes) {
  if (n_classes < 1 || probs.size() % static_cast<std::size_t>(n_classes) != 0)
    throw Error("aggregate: probability block does not match class count");
  const std::size_t m = probs.size() / static_cast<std::size_t>(n_classes);
  if (m == 0) throw Error("aggregate: empty field");
  return m;
}
} // namespace

FieldPrediction aggregate_majority(std::span<const double> probs, int n_classes) {
  const std::size_t m = pixel_count(probs, n_classes);
  FieldPrediction out;
  out.strategy = Strategy::Majority;
  out.n_pixels = m;
  std::vector<std::size_t> votes(static_cast<std::size_t>(n_classes), 0);
  for (std::size_t i = 0; i < m; ++i)
    ++votes[static_cast<std::size_t>(argmax(probs.subspan(i * n_classes, static_cast<std::size_t>(n_classes))))];
  for (auto v : votes) out.scores.push_back(static_cast<double>(v) / static_cast<double>(m));
  out.pred_class = argmax(out.scores);
  return out;
}

FieldPrediction aggregate_average(std::span<const double> probs, int n_classes) {
  const std::size_t m = pixel_count(probs, n_classes);
  FieldPrediction out;
  out.strategy = Strategy::Average;
  out.n_pixels = m;
  out.scores.assign(static_cast<std::size_t>(n_classes), 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (int k = 0; k < n_classes; ++k) out.scores[static_cast<std::size_t>(k)] += probs[i * n_classes + k];
  for (auto& s : out.scores) s /= static_cast<double>(m);
  out.pred_class = argmax(out.scores);
  return out;
}

std::vector<double> bayesian_evidence(std::span<const double> probs, const SmoothingConfig& cfg) {
  const int n = cfg.n_classes;
  const std::size_t m = pixel_count(probs, n);
  validate_smoothing(cfg);
  const double off = (1.0 - cfg.alpha) / (n - 1);
  std::vector<double> evidence(static_cast<std::size_t>(n), 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (int k = 0; k < n; ++k) {
      const double p = probs[i * n + k];
      const double ph = cfg.alpha * p + off * (1.0 - p);
      evidence[static_cast<std::size_t>(k)] += std::log((1.0 - ph) / ph);
    }
  for (double e : evidence)
    if (!std::isfinite(e)) throw Error("bayesian aggregation: non-finite evidence");
  return evidence;
}

double logistic_of_negative(double v) {
  if (v >= 0.0) {
    const double e = std::exp(-v);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(v));
}

FieldPrediction aggregate_bayesian(std::span<const double> probs, const SmoothingConfig& cfg) {
  const auto evidence = bayesian_evidence(probs, cfg);
  FieldPrediction out;
  out.strategy = Strategy::Bayesian;
  out.n_pixels = probs.size() / static_cast<std::size_t>(cfg.n_classes);
  // argmax_k 1/(1+exp(I(k))) == argmin_k I(k); the latter never saturates.
  out.pred_class = argmin(evidence);
  for (double e : evidence) out.scores.push_back(logistic_of_negative(e));
  return out;
}

FieldPrediction aggregate(std::span<const double> probs, int n_classes, Strategy strategy, double alpha) {
  switch (strategy) {
  case Strategy::Majority: return aggregate_majority(probs, n_classes);
  case Strategy::Average: return aggregate_average(probs, n_classes);
  case Strategy::Bayesian: return aggregate_bayesian(probs, {alpha, n_classes});
  }
  throw Error("aggregate: unknown strategy");
}

std::vector<FieldPrediction> aggregate_table(const ProbabilityTable& table, Strategy strategy, double alpha) {
  if (strategy == Strategy::Bayesian) log_warnings(validate_smoothing({alpha, table.n_classes}));
  const auto groups = group_by_field(table);
  std::vector<FieldPrediction> out(groups.size());
  const auto n = static_cast<std::size_t>(table.n_classes);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t g = 0; g < static_cast<std::int64_t>(groups.size()); ++g) {
    const auto& [id, rows] = groups[static_cast<std::size_t>(g)];
    std::vector<double> block;
    block.reserve(rows.size() * n);
    for (auto r : rows) {
      const auto p = table.row(r);
      block.insert(block.end(), p.begin(), p.end());
    }
    auto pred = aggregate(block, table.n_classes, strategy, alpha);
    pred.field_id = id;
    out[static_cast<std::size_t>(g)] = std::move(pred);
  }
  return out;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(i / 20.0);
  return grid;
}

AlphaSearchResult grid_search_alpha(const ProbabilityTable& validation,
                                    const std::map<std::string, int>& truth,
                                    const std::vector<double>& grid) {
  if (grid.empty()) throw Error("grid search: empty alpha grid");
  const auto groups = group_by_field(validation);
  if (groups.empty()) throw Error("grid search: no validation fields");
  std::vector<int> labels;
  for (const auto& [id, rows] : groups) {
    const auto it = truth.find(id);
    if (it == truth.end()) throw Error("grid search: field " + id + " has no ground truth");
    labels.push_back(it->second);
  }
  std::vector<std::vector<double>> blocks(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (auto r : groups[g].second) {
      const auto p = validation.row(r);
      blocks[g].insert(blocks[g].end(), p.begin(), p.end());
    }

  AlphaSearchResult result;
  result.grid = grid;
  result.accuracy.assign(grid.size(), 0.0);
  for (double a : grid) validate_smoothing({a, validation.n_classes});
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t a = 0; a < static_cast<std::int64_t>(grid.size()); ++a) {
    const SmoothingConfig cfg{grid[static_cast<std::size_t>(a)], validation.n_classes};
    std::size_t correct = 0;
    for (std::size_t g = 0; g < blocks.size(); ++g)
      if (argmin(bayesian_evidence(blocks[g], cfg)) == labels[g]) ++correct;
    result.accuracy[static_cast<std::size_t>(a)] = static_cast<double>(correct) / static_cast<double>(blocks.size());
  }
  std::size_t best = 0;
  for (std::size_t a = 1; a < grid.size(); ++a) {
    const double acc = result.accuracy[a];
    const double top = result.accuracy[best];
    if (acc > top || (acc == top && grid[a] < grid[best])) best = a;
  }
  result.best_alpha = grid[best];
  return result;
}

std::string predictions_to_csv(const std::vector<FieldPrediction>& preds, int n_classes) {
  std::ostringstream os;
  os << "field_id,pred_class";
  for (int k = 0; k < n_classes; ++k) os << ",score_" << k;
  os << ",strategy,n_pixels\n";
  for (const auto& p : preds) {
    os << p.field_id << ',' << p.pred_class;
    for (double s : p.scores) os << ',' << format_double(s);
    os << ',' << strategy_name(p.strategy) << ',' << p.n_pixels << '\n';
  }
  return os.str();
}

std::vector<FieldPrediction> predictions_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("predictions: empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 5 || header[0] != "field_id" || header[1] != "pred_class" ||
      header[header.size() - 2] != "strategy" || header.back() != "n_pixels")
    throw Error("predictions: expected header 'field_id,pred_class,score_0..,strategy,n_pixels'");
  const std::size_t n = header.size() - 4;
  std::vector<FieldPrediction> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw Error("predictions: malformed line '" + line + "'");
    FieldPrediction p;
    p.field_id = cells[0];
    p.pred_class = static_cast<int>(parse_int(cells[1]));
    for (std::size_t k = 0; k < n; ++k) p.scores.push_back(parse_double(cells[2 + k]));
    p.strategy = parse_strategy(cells[2 + n]);
    p.n_pixels = static_cast<std::size_t>(parse_int(cells[3 + n]));
    if (p.pred_class < 0 || static_cast<std::size_t>(p.pred_class) >= n)
      throw Error("predictions: class index out of range for field " + p.field_id);
    out.push_back(std::move(p));
  }
  return out;
}

std::string predictions_to_geojson(const FieldSet& fields, const std::vector<FieldPrediction>& preds) {
  using json = nlohmann::json;
  std::unordered_map<std::string, const FieldPrediction*> lookup;
  for (const auto& p : preds) lookup[p.field_id] = &p;
  json doc = json::parse(fields_to_geojson(fields));
  for (auto& feature : doc["features"]) {
    auto& props = feature["properties"];
    const auto it = lookup.find(props["field_id"].get<std::string>());
    if (it == lookup.end()) continue;
    const auto& p = *it->second;
    props["pred_class"] = p.pred_class;
    if (static_cast<std::size_t>(p.pred_class) < fields.class_catalog.size())
      props["pred_label"] = fields.class_catalog[static_cast<std::size_t>(p.pred_class)];
    props["strategy"] = strategy_name(p.strategy);
    props["n_pixels"] = p.n_pixels;
    props["scores"] = p.scores;
  }
  return doc.dump() + "\n";
}

} // namespace fieldfuse
