#pragma once

// Confusion matrices, precision / recall / F1, recall by sublabel, and
// Cohen's kappa. Metrics are kept as exact fractions; a zero denominator is
// reported as undefined, never as 0.

#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "stancenet/corpus.hpp"
#include "stancenet/error.hpp"
#include "stancenet/util.hpp"

namespace stancenet::eval {

using json = nlohmann::json;

/// Nonnegative fraction in lowest terms.
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Ratio of(std::int64_t n, std::int64_t d) {
    const std::int64_t g = std::gcd(n, d);
    return g == 0 ? Ratio{0, 1} : Ratio{n / g, d / g};
  }

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Ratio& a, const Ratio& b) {
    return a.num * b.den == b.num * a.den;
  }
};

/// nullopt denominator zero.
using Metric = std::optional<Ratio>;

inline Metric fraction(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return Ratio::of(num, den);
}

inline json metric_json(const Metric& m) { return m ? json(m->value()) : json(nullptr); }

inline std::string metric_cell(const Metric& m) { return m ? fixed(m->value(), 2) : "undef"; }

struct ConfusionMatrix {
  /// counts[truth][prediction], classes ordered AntiTrans, ProTrans, Neutral.
  std::array<std::array<std::int64_t, 3>, 3> counts{};

  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto& row : counts) {
      for (auto c : row) t += c;
    }
    return t;
  }
  std::int64_t row_sum(Stance truth) const {
    std::int64_t t = 0;
    for (auto c : counts[index_of(truth)]) t += c;
    return t;
  }
  std::int64_t column_sum(Stance pred) const {
    std::int64_t t = 0;
    for (const auto& row : counts) t += row[index_of(pred)];
    return t;
  }
  std::int64_t at(Stance truth, Stance pred) const {
    return counts[index_of(truth)][index_of(pred)];
  }
};

struct ConfusionResult {
  ConfusionMatrix matrix;
  std::size_t unclassified = 0;        // predictions without a verdict, excluded
  std::size_t missing_predictions = 0; // truth entries nobody predicted
};

/// Predictions map post id to verdict (nullopt: Unclassified). Every
/// predicted post must have truth.
inline ConfusionResult confusion(const std::map<std::string, std::optional<Stance>>& preds,
                                 const std::map<std::string, Stance>& truth) {
  std::vector<std::string> missing;
  for (const auto& [id, p] : preds) {
    if (!truth.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string msg = "predictions without ground truth:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  ConfusionResult out;
  for (const auto& [id, p] : preds) {
    if (!p) {
      ++out.unclassified;
      continue;
    }
    ++out.matrix.counts[index_of(truth.at(id))][index_of(*p)];
  }
  for (const auto& [id, t] : truth) {
    if (!preds.count(id)) ++out.missing_predictions;
  }
  return out;
}

struct ClassMetrics {
  Metric precision;
  Metric recall;
  Metric f1;
  std::int64_t support = 0;  // truth row sum
};

struct MetricsReport {
  std::array<ClassMetrics, 3> per_class;
  Metric accuracy;
  std::int64_t total = 0;

  const ClassMetrics& of(Stance s) const { return per_class[index_of(s)]; }
};

inline MetricsReport metrics(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.total = cm.total();
  std::int64_t trace = 0;
  for (auto s : kStances) {
    auto& m = r.per_class[index_of(s)];
    const std::int64_t tp = cm.at(s, s);
    trace += tp;
    const std::int64_t col = cm.column_sum(s);
    const std::int64_t row = cm.row_sum(s);
    m.support = row;
    m.precision = fraction(tp, col);
    m.recall = fraction(tp, row);
    // F1 = 2PR/(P+R) = 2tp/(col+row), defined when P and R are and P+R > 0.
    if (m.precision && m.recall && tp > 0) m.f1 = fraction(2 * tp, col + row);
  }
  r.accuracy = fraction(trace, r.total);
  return r;
}

// ---------------------------------------------------------------------------

struct SublabelRecall {
  Metric recall;
  std::int64_t support = 0;
  Metric proportion;  // support / evaluated samples
};

struct SublabelReport {
  std::map<Sublabel, SublabelRecall> rows;
  std::vector<std::string> notes;  // sublabels omitted for zero support
  std::int64_t total = 0;
};

/// Recall of the primary label among samples carrying each sublabel.
/// Unclassified and missing predictions are excluded from the population.
inline SublabelReport recall_by_sublabel(const std::map<std::string, std::optional<Stance>>& preds,
                                         const std::map<std::string, StanceLabel>& truth) {
  SublabelReport out;
  std::map<Sublabel, std::pair<std::int64_t, std::int64_t>> hits;  // (correct, support)
  for (const auto& [id, label] : truth) {
    auto p = preds.find(id);
    if (p == preds.end() || !p->second) continue;
    ++out.total;
    for (auto s : label.sublabels) {
      auto& h = hits[s];
      ++h.second;
      if (*p->second == label.primary) ++h.first;
    }
  }
  for (auto s : kSublabels) {
    auto it = hits.find(s);
    if (it == hits.end() || it->second.second == 0) {
      out.notes.push_back(to_string(s) + ": no samples carry this sublabel");
      continue;
    }
    out.rows[s] = {fraction(it->second.first, it->second.second), it->second.second,
                   fraction(it->second.second, out.total)};
  }
  return out;
}

// ---------------------------------------------------------------------------

struct AgreementReport {
  std::size_t n = 0;
  std::optional<double> observed;  // p_o
  std::optional<double> expected;  // p_e
  std::optional<double> kappa;
  std::string reason;              // set when kappa is undefined
};

/// Cohen's kappa with marginal-product expected agreement. Both maps must
/// cover the same ids. Computed from integer counts so the result is exactly
/// symmetric in its arguments.
template <class Label>
AgreementReport cohen_kappa(const std::map<std::string, Label>& a,
                            const std::map<std::string, Label>& b) {
  AgreementReport r;
  if (a.size() != b.size()) throw DataError("kappa inputs cover different samples");
  for (const auto& [id, v] : a) {
    if (!b.count(id)) throw DataError("sample '" + id + "' labeled by only one annotator");
  }
  r.n = a.size();
  if (r.n == 0) {
    r.reason = "no doubly-labeled samples";
    return r;
  }
  std::int64_t agree = 0;
  std::map<Label, std::int64_t> ca;
  std::map<Label, std::int64_t> cb;
  for (const auto& [id, la] : a) {
    const Label& lb = b.at(id);
    if (la == lb) ++agree;
    ++ca[la];
    ++cb[lb];
  }
  const auto n = static_cast<std::int64_t>(r.n);
  std::int64_t chance = 0;  // sum over labels of ca * cb
  for (const auto& [label, count] : ca) {
    auto it = cb.find(label);
    if (it != cb.end()) chance += count * it->second;
  }
  r.observed = static_cast<double>(agree) / static_cast<double>(n);
  r.expected = static_cast<double>(chance) / static_cast<double>(n * n);
  if (chance == n * n) {
    r.reason = "both annotators used a single identical class (expected agreement 1)";
    return r;
  }
  r.kappa = static_cast<double>(agree * n - chance) / static_cast<double>(n * n - chance);
  return r;
}

inline json to_json(const AgreementReport& r) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j{{"n", r.n}, {"p_o", opt(r.observed)}, {"p_e", opt(r.expected)}, {"kappa", opt(r.kappa)}};
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

// ---------------------------------------------------------------------------
// Rendering

inline json to_json(const ConfusionMatrix& cm) {
  json rows = json::object();
  for (auto t : kStances) {
    json row = json::object();
    for (auto p : kStances) row[to_string(p)] = cm.at(t, p);
    rows[to_string(t)] = row;
  }
  return {{"classes", {"AntiTrans", "ProTrans", "Neutral"}}, {"counts", rows}, {"total", cm.total()}};
}

inline json to_json(const MetricsReport& r) {
  json classes = json::object();
  for (auto s : kStances) {
    const auto& m = r.of(s);
    classes[to_string(s)] = {{"precision", metric_json(m.precision)},
                             {"recall", metric_json(m.recall)},
                             {"f1", metric_json(m.f1)},
                             {"support", m.support}};
  }
  return {{"classes", classes}, {"accuracy", metric_json(r.accuracy)}, {"total", r.total}};
}

inline json to_json(const SublabelReport& r) {
  json rows = json::object();
  for (const auto& [s, row] : r.rows) {
    rows[to_string(s)] = {{"recall", metric_json(row.recall)},
                          {"support", row.support},
                          {"proportion", metric_json(row.proportion)}};
  }
  return {{"sublabels", rows}, {"notes", r.notes}, {"total", r.total}};
}

/// One table row: a model name with its reports.
struct ModelRow {
  std::string model;
  MetricsReport metrics;
  SublabelReport sublabels;
};

namespace detail {

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

}  // namespace detail

/// Plain-text tables in the layout of a results table: one block of P/R/F1
/// per class plus accuracy, then the recall-by-sublabel grid with the
/// sample proportion row. `support` gives the per-class n shown in headers.
inline std::string render_tables(const std::vector<ModelRow>& rows,
                                 const std::array<std::int64_t, 3>& support,
                                 const SublabelReport& proportions) {
  using detail::pad;
  constexpr std::size_t kName = 24;
  constexpr std::size_t kCell = 7;
  std::ostringstream os;
  os << "Classification Performance Metrics\n";
  os << pad("", kName);
  for (auto s : kStances) {
    os << pad(display_name(s) + " (n=" + std::to_string(support[index_of(s)]) + ")", kCell * 3);
  }
  os << "\n" << pad("Model", kName);
  for (std::size_t i = 0; i < 3; ++i) os << pad("P", kCell) << pad("R", kCell) << pad("F1", kCell);
  os << "Accuracy\n";
  for (const auto& row : rows) {
    os << pad(row.model, kName);
    for (auto s : kStances) {
      const auto& m = row.metrics.of(s);
      os << pad(metric_cell(m.precision), kCell) << pad(metric_cell(m.recall), kCell)
         << pad(metric_cell(m.f1), kCell);
    }
    os << metric_cell(row.metrics.accuracy) << "\n";
  }

  os << "\nRecall by Sublabel\n";
  const auto anti = sublabels_of(Stance::AntiTrans);
  const auto pro = sublabels_of(Stance::ProTrans);
  os << pad("", kName)
     << pad("Anti-Trans (n=" + std::to_string(support[index_of(Stance::AntiTrans)]) + ")",
            kCell * anti.size())
     << "Pro-Trans (n=" << support[index_of(Stance::ProTrans)] << ")\n";
  os << pad("Model", kName);
  for (auto s : anti) os << pad(to_string(s), kCell);
  for (auto s : pro) os << pad(to_string(s), kCell);
  os << "\n";
  const auto grid_row = [&](const std::string& name, const SublabelReport& rep, bool proportion) {
    std::string line = pad(name, kName);
    for (const auto& group : {anti, pro}) {
      for (auto s : group) {
        auto it = rep.rows.find(s);
        const Metric m = it == rep.rows.end()
                             ? Metric{}
                             : (proportion ? it->second.proportion : it->second.recall);
        line += pad(metric_cell(m), kCell);
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    os << line << "\n";
  };
  for (const auto& row : rows) grid_row(row.model, row.sublabels, false);
  grid_row("Proportion of Sample", proportions, true);
  const std::string text = os.str();
  std::string out;
  for (std::string_view line : split_lines(text)) {
    while (!line.empty() && line.back() == ' ') line.remove_suffix(1);
    out.append(line);
    out += '\n';
  }
  return out;
}

}  // namespace stancenet::eval
