#include "fieldfuse/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fieldfuse {

using json = nlohmann::json;

const char* level_name(Level level) { return level == Level::Pixel ? "pixel" : "field"; }

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (int k = 0; k < n_classes; ++k) t += at(k, k);
  return t;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, int n_classes,
                          Level level) {
  if (truth.size() != pred.size()) throw Error("confusion: label length mismatch");
  if (truth.empty()) throw Error("confusion: no units to evaluate");
  if (n_classes < 1) throw Error("confusion: n_classes must be >= 1");
  ConfusionMatrix cm;
  cm.n_classes = n_classes;
  cm.level = level;
  cm.counts.assign(static_cast<std::size_t>(n_classes) * n_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n_classes || pred[i] < 0 || pred[i] >= n_classes)
      throw Error("confusion: label out of range at unit " + std::to_string(i));
    ++cm.counts[static_cast<std::size_t>(truth[i]) * n_classes + pred[i]];
  }
  return cm;
}

EvalReport metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw Error("metrics: empty confusion matrix");
  EvalReport r;
  r.cm = cm;
  r.oa = 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
  double f1_sum = 0.0;
  int supported = 0;
  for (int k = 0; k < cm.n_classes; ++k) {
    std::size_t col = 0, row = 0;
    for (int j = 0; j < cm.n_classes; ++j) {
      col += cm.at(j, k);
      row += cm.at(k, j);
    }
    const double tp = static_cast<double>(cm.at(k, k));
    ClassMetrics m;
    m.support = row;
    m.precision = col > 0 ? tp / static_cast<double>(col) : 0.0;
    m.recall = row > 0 ? tp / static_cast<double>(row) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    if (row > 0) {
      f1_sum += m.f1;
      ++supported;
    }
    r.per_class.push_back(m);
  }
  r.macro_f1 = supported > 0 ? f1_sum / supported : 0.0;
  return r;
}

std::string report_to_json(const EvalReport& r) {
  json j;
  j["classifier"] = r.classifier;
  j["balancing"] = r.balancing;
  j["strategy"] = r.strategy;
  j["level"] = level_name(r.cm.level);
  j["class_catalog"] = r.class_catalog;
  j["n_classes"] = r.cm.n_classes;
  json rows = json::array();
  for (int t = 0; t < r.cm.n_classes; ++t) {
    json row = json::array();
    for (int p = 0; p < r.cm.n_classes; ++p) row.push_back(r.cm.at(t, p));
    rows.push_back(std::move(row));
  }
  j["confusion"] = std::move(rows);
  j["oa"] = r.oa;
  j["macro_f1"] = r.macro_f1;
  j["per_class"] = json::array();
  for (const auto& m : r.per_class)
    j["per_class"].push_back(
        {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}});
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ConfusionMatrix cm;
    cm.n_classes = j.at("n_classes").get<int>();
    cm.level = j.at("level").get<std::string>() == "pixel" ? Level::Pixel : Level::Field;
    for (const auto& row : j.at("confusion"))
      for (const auto& v : row) cm.counts.push_back(v.get<std::size_t>());
    if (cm.counts.size() != static_cast<std::size_t>(cm.n_classes) * cm.n_classes)
      throw Error("report: confusion matrix shape mismatch");
    EvalReport r = metrics(cm);
    r.classifier = j.value("classifier", "");
    r.balancing = j.value("balancing", "");
    r.strategy = j.value("strategy", "");
    r.class_catalog = j.value("class_catalog", std::vector<std::string>{});
    return r;
  } catch (const json::exception& e) {
    throw Error("malformed report: " + std::string(e.what()));
  }
}

namespace {
std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string lpad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string class_name(const EvalReport& r, int k) {
  return static_cast<std::size_t>(k) < r.class_catalog.size() ? r.class_catalog[static_cast<std::size_t>(k)]
                                                               : std::to_string(k);
}
} // namespace

std::string report_to_text(const EvalReport& r) {
  std::ostringstream os;
  os << level_name(r.cm.level) << "-wise evaluation";
  if (!r.classifier.empty()) os << "  classifier=" << r.classifier;
  if (!r.balancing.empty()) os << "  balancing=" << r.balancing;
  if (!r.strategy.empty()) os << "  strategy=" << r.strategy;
  os << "\n  units: " << r.cm.total() << "\n  OA: " << fixed(r.oa, 2) << " %\n  macro F1: "
     << fixed(r.macro_f1, 3) << "\n\n";
  os << "  " << pad("class", 12) << lpad("precision", 10) << lpad("recall", 10) << lpad("f1", 10)
     << lpad("support", 10) << '\n';
  for (int k = 0; k < r.cm.n_classes; ++k) {
    const auto& m = r.per_class[static_cast<std::size_t>(k)];
    os << "  " << pad(class_name(r, k), 12) << lpad(fixed(m.precision, 3), 10)
       << lpad(fixed(m.recall, 3), 10) << lpad(fixed(m.f1, 3), 10)
       << lpad(std::to_string(m.support), 10) << '\n';
  }
  os << "\n  confusion (rows = truth, columns = predicted)\n";
  for (int t = 0; t < r.cm.n_classes; ++t) {
    os << "  " << pad(class_name(r, t), 12);
    for (int p = 0; p < r.cm.n_classes; ++p) os << lpad(std::to_string(r.cm.at(t, p)), 7);
    os << '\n';
  }
  return os.str();
}

std::string report_to_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "classifier,balancing,strategy,level,class,precision,recall,f1,support\n";
  for (int k = 0; k < r.cm.n_classes; ++k) {
    const auto& m = r.per_class[static_cast<std::size_t>(k)];
    os << r.classifier << ',' << r.balancing << ',' << r.strategy << ',' << level_name(r.cm.level) << ','
       << class_name(r, k) << ',' << format_double(m.precision) << ',' << format_double(m.recall) << ','
       << format_double(m.f1) << ',' << m.support << '\n';
  }
  os << r.classifier << ',' << r.balancing << ',' << r.strategy << ',' << level_name(r.cm.level)
     << ",OA," << format_double(r.oa) << ",,,\n";
  os << r.classifier << ',' << r.balancing << ',' << r.strategy << ',' << level_name(r.cm.level)
     << ",macro_f1,,," << format_double(r.macro_f1) << ",\n";
  return os.str();
}

ComparisonEntry to_entry(const EvalReport& r) {
  return {r.classifier, r.balancing, r.strategy, r.oa, r.macro_f1};
}

// ---------------------------------------------------------------------------
// Comparison tables

namespace {

const std::vector<std::string> kClassifierOrder = {"knn", "rf", "gb"};
const std::vector<std::string> kBalancingOrder = {"ros", "rus", "smote", "weighting", "none"};
const std::vector<std::string> kStrategyOrder = {"bayesian", "average", "majority"};

std::string display(const std::string& tag) {
  static const std::map<std::string, std::string> names = {
      {"knn", "KNN"},         {"rf", "RF"},           {"gb", "GB"},
      {"ros", "ROS"},         {"rus", "RUS"},         {"smote", "SMOTE"},
      {"weighting", "Weighting"}, {"none", "None"},   {"bayesian", "Bayesian"},
      {"average", "Averaging"}, {"majority", "Majority"}, {"pixel", "Pixel"}};
  const auto it = names.find(tag);
  return it == names.end() ? tag : it->second;
}

// Known tags first in canonical order, unknown tags after, alphabetically.
std::vector<std::string> ordered(const std::set<std::string>& present, const std::vector<std::string>& canon) {
  std::vector<std::string> out;
  for (const auto& c : canon)
    if (present.count(c)) out.push_back(c);
  for (const auto& p : present)
    if (std::find(canon.begin(), canon.end(), p) == canon.end()) out.push_back(p);
  return out;
}

using Key = std::tuple<std::string, std::string, std::string>;

std::string signed_fixed(double v, int digits) { return (v >= 0 ? "+" : "") + fixed(v, digits); }

} // namespace

ComparisonTable compare_strategies(const std::vector<ComparisonEntry>& entries) {
  std::map<Key, ComparisonEntry> cells;
  std::set<std::string> classifiers, balancings, strategies;
  for (const auto& e : entries) {
    cells[{e.classifier, e.balancing, e.strategy}] = e;
    classifiers.insert(e.classifier);
    balancings.insert(e.balancing);
    if (e.strategy != "pixel") strategies.insert(e.strategy);
  }
  const auto clf = ordered(classifiers, kClassifierOrder);
  const auto bal = ordered(balancings, kBalancingOrder);
  const auto strat = ordered(strategies, kStrategyOrder);
  const auto find = [&](const std::string& c, const std::string& b, const std::string& s) -> const ComparisonEntry* {
    const auto it = cells.find({c, b, s});
    return it == cells.end() ? nullptr : &it->second;
  };

  std::ostringstream os;
  std::ostringstream csv;
  csv << "classifier,balancing,strategy,oa,macro_f1\n";
  for (const auto& c : clf)
    for (const auto& b : bal) {
      std::vector<std::string> rows = {"pixel"};
      rows.insert(rows.end(), strat.begin(), strat.end());
      for (const auto& s : rows)
        if (const auto* e = find(c, b, s))
          csv << c << ',' << b << ',' << s << ',' << fixed(e->oa, 2) << ',' << fixed(e->macro_f1, 3) << '\n';
    }

  // OA / macro F1 per classifier x balancing for one strategy.
  const auto two_metric_table = [&](const std::string& title, const std::string& strategy) {
    bool any = false;
    for (const auto& c : clf)
      for (const auto& b : bal) any = any || find(c, b, strategy);
    if (!any) return;
    os << title << '\n';
    os << pad("Classifier", 12);
    for (const auto& b : bal) os << "| " << pad(display(b), 15);
    os << '\n' << pad("", 12);
    for (std::size_t i = 0; i < bal.size(); ++i) os << "| " << pad("OA     MacroF1", 15);
    os << '\n';
    for (const auto& c : clf) {
      bool row_any = false;
      for (const auto& b : bal) row_any = row_any || find(c, b, strategy);
      if (!row_any) continue;
      os << pad(display(c), 12);
      for (const auto& b : bal) {
        const auto* e = find(c, b, strategy);
        os << "| " << pad(e ? lpad(fixed(e->oa, 2), 6) + "  " + fixed(e->macro_f1, 3) : "  ---     ---", 15);
      }
      os << '\n';
    }
    os << '\n';
  };

  two_metric_table("Pixel-wise classification (before aggregation)", "pixel");

  if (!strat.empty()) {
    os << "Field-wise overall accuracy (%) by aggregation\n";
    os << pad("Balancing", 11) << pad("Aggregation", 13);
    for (const auto& c : clf) os << lpad(display(c), 9);
    os << '\n';
    for (const auto& b : bal) {
      bool first = true;
      for (const auto& s : strat) {
        bool row_any = false;
        for (const auto& c : clf) row_any = row_any || find(c, b, s);
        if (!row_any) continue;
        os << pad(first ? display(b) : "", 11) << pad(display(s), 13);
        first = false;
        for (const auto& c : clf) {
          const auto* e = find(c, b, s);
          os << lpad(e ? fixed(e->oa, 2) : "---", 9);
        }
        os << '\n';
      }
    }
    os << '\n';
  }

  two_metric_table("Field-wise classification after Bayesian aggregation", "bayesian");

  std::ostringstream deltas;
  for (const auto& c : clf)
    for (const auto& b : bal) {
      const auto* bay = find(c, b, "bayesian");
      if (!bay) continue;
      const auto* maj = find(c, b, "majority");
      const auto* avg = find(c, b, "average");
      if (!maj && !avg) continue;
      deltas << pad(display(c), 12) << pad(display(b), 11)
             << lpad(maj ? signed_fixed(bay->oa - maj->oa, 2) : "---", 14)
             << lpad(avg ? signed_fixed(bay->oa - avg->oa, 2) : "---", 14) << '\n';
    }
  if (!deltas.str().empty()) {
    os << "Bayesian aggregation gain in field OA (percentage points)\n";
    os << pad("Classifier", 12) << pad("Balancing", 11) << lpad("vs Majority", 14) << lpad("vs Averaging", 14)
       << '\n'
       << deltas.str() << '\n';
  }
  return {os.str(), csv.str()};
}

} // namespace fieldfuse
