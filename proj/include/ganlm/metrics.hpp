#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "ganlm/data.hpp"
#include "ganlm/errors.hpp"

namespace ganlm {

// Confusion counts are one-vs-rest against positive_class. Precision, recall
// and F1 are absent when their denominator is zero, and for k > 2.
struct MetricsReport {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t n_test = 0;
  double accuracy = 0.0;
  std::optional<double> precision, recall, f1;
  std::string positive_class;
};

inline MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> gold, int positive,
                                     const ClassSet& classes) {
  if (predictions.size() != gold.size()) {
    throw ContractError("compute_metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(gold.size()) + " gold labels");
  }
  const int k = static_cast<int>(classes.size());
  if (positive < 0 || positive >= k) throw LabelError("positive class index out of range");
  MetricsReport r;
  r.positive_class = classes.name(static_cast<std::size_t>(positive));
  r.n_test = gold.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= k || predictions[i] < 0 || predictions[i] >= k) {
      throw LabelError("label index outside the class set at position " + std::to_string(i));
    }
    correct += predictions[i] == gold[i];
    const bool pp = predictions[i] == positive, gp = gold[i] == positive;
    if (pp && gp) ++r.tp;
    else if (pp) ++r.fp;
    else if (gp) ++r.fn;
    else ++r.tn;
  }
  r.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  if (k == 2) {
    if (r.tp + r.fp) r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
    if (r.tp + r.fn) r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    if (r.precision && r.recall && *r.precision + *r.recall > 0.0)
      r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
  }
  return r;
}

inline MetricsReport compute_metrics(std::span<const std::string> predictions, std::span<const std::string> gold,
                                     const std::string& positive_class, const ClassSet& classes) {
  if (predictions.size() != gold.size()) throw ContractError("compute_metrics: length mismatch");
  std::vector<int> p, g;
  for (const auto& s : predictions) p.push_back(classes.require(s));
  for (const auto& s : gold) g.push_back(classes.require(s));
  return compute_metrics(p, g, classes.require(positive_class), classes);
}

inline std::string format_metric(std::optional<double> v) {
  if (!v) return "N/A";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5f", *v);
  return buf;
}

struct ResultRow {
  std::string model;
  std::size_t n_labeled = 0;
  MetricsReport metrics;
};

// CSV with header model,n_labeled,accuracy,precision,recall,f1; rows in
// ascending n_labeled order (stable for equal counts).
inline void emit_results_table(std::ostream& out, std::vector<ResultRow> runs) {
  if (runs.empty()) throw ContractError("emit_results_table needs at least one run");
  std::stable_sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.n_labeled < b.n_labeled; });
  out << "model,n_labeled,accuracy,precision,recall,f1\n";
  for (const auto& r : runs) {
    out << r.model << ',' << r.n_labeled << ',' << format_metric(r.metrics.accuracy) << ','
        << format_metric(r.metrics.precision) << ',' << format_metric(r.metrics.recall) << ','
        << format_metric(r.metrics.f1) << '\n';
  }
}

inline void emit_results_table(const std::string& path, std::vector<ResultRow> runs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write results table '" + path + "'");
  emit_results_table(out, std::move(runs));
}

// Inverse of emit_results_table for the printed fields.
inline std::vector<ResultRow> parse_results_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "model,n_labeled,accuracy,precision,recall,f1") {
    throw FormatError("results table header mismatch");
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  auto metric = [&](const std::string& s) -> std::optional<double> {
    if (s == "N/A") return std::nullopt;
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw ParseError("bad metric '" + s + "'", line_no);
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw ParseError("expected 6 fields", line_no);
    ResultRow r;
    r.model = f[0];
    r.n_labeled = static_cast<std::size_t>(std::stoull(f[1]));
    const auto acc = metric(f[2]);
    if (!acc) throw ParseError("accuracy cannot be N/A", line_no);
    r.metrics.accuracy = *acc;
    r.metrics.precision = metric(f[3]);
    r.metrics.recall = metric(f[4]);
    r.metrics.f1 = metric(f[5]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace ganlm
