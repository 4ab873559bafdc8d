#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "ganlm/errors.hpp"
#include "ganlm/metrics.hpp"

namespace ganlm {

struct LossBreakdown {
  double d_supervised = 0.0;
  double d_unsup_real = 0.0;
  double d_unsup_fake = 0.0;
  double g_feature_matching = 0.0;
  double g_unsup = 0.0;

  bool all_finite() const {
    return std::isfinite(d_supervised) && std::isfinite(d_unsup_real) && std::isfinite(d_unsup_fake) &&
           std::isfinite(g_feature_matching) && std::isfinite(g_unsup);
  }

  LossBreakdown& operator+=(const LossBreakdown& o) {
    d_supervised += o.d_supervised;
    d_unsup_real += o.d_unsup_real;
    d_unsup_fake += o.d_unsup_fake;
    g_feature_matching += o.g_feature_matching;
    g_unsup += o.g_unsup;
    return *this;
  }

  LossBreakdown scaled(double s) const {
    return {d_supervised * s, d_unsup_real * s, d_unsup_fake * s, g_feature_matching * s, g_unsup * s};
  }

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;  // from 1
  LossBreakdown losses;   // mean over the epoch's steps
  MetricsReport test;
};

using TrainLog = std::vector<EpochRecord>;

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, LossBreakdown losses, TrainLog partial = {})
      : Error(what), losses_(losses), partial_(std::move(partial)) {}
  const LossBreakdown& losses() const noexcept { return losses_; }
  const TrainLog& partial_log() const noexcept { return partial_; }

 private:
  LossBreakdown losses_;
  TrainLog partial_;
};

inline std::string format_fixed5(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.5f", v);
  return buf;
}

inline void write_train_log(std::ostream& out, const TrainLog& log) {
  out << "epoch,d_sup,d_unsup_real,d_unsup_fake,g_feat,g_unsup,test_accuracy,test_precision,test_recall,test_f1\n";
  for (const auto& e : log) {
    const auto& l = e.losses;
    out << e.epoch << ',' << format_fixed5(l.d_supervised) << ',' << format_fixed5(l.d_unsup_real) << ','
        << format_fixed5(l.d_unsup_fake) << ',' << format_fixed5(l.g_feature_matching) << ','
        << format_fixed5(l.g_unsup) << ',' << format_metric(e.test.accuracy) << ','
        << format_metric(e.test.precision) << ',' << format_metric(e.test.recall) << ',' << format_metric(e.test.f1)
        << '\n';
  }
}

inline void save_train_log(const std::string& path, const TrainLog& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write train log '" + path + "'");
  write_train_log(out, log);
}

// Test accuracy per epoch: header epoch,test_accuracy.
inline void emit_curves(std::ostream& out, const TrainLog& log) {
  if (log.empty()) throw ContractError("emit_curves needs a non-empty train log");
  out << "epoch,test_accuracy\n";
  for (const auto& e : log) out << e.epoch << ',' << format_metric(e.test.accuracy) << '\n';
}

inline std::string curve_file_name(const std::string& model, std::size_t n_labeled) {
  return "curve_" + model + "_" + std::to_string(n_labeled) + ".csv";
}

inline void emit_curves(const std::string& path, const TrainLog& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write curve file '" + path + "'");
  emit_curves(out, log);
}

}  // namespace ganlm
