#pragma once

// Brute-force reference: fill the full k x k confusion matrix, then read
// every statistic from it with plain fractions.

#include <optional>
#include <vector>

namespace oracle {

struct Reference {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  std::optional<double> precision, recall, f1;
};

inline Reference confusion_reference(const std::vector<int>& pred, const std::vector<int>& gold, int positive, int k) {
  std::vector<std::vector<long>> m(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k)));
  for (std::size_t i = 0; i < pred.size(); ++i) ++m[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(pred[i])];
  Reference r;
  long diag = 0, total = 0;
  for (int g = 0; g < k; ++g)
    for (int p = 0; p < k; ++p) {
      const long c = m[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
      total += c;
      if (g == p) diag += c;
      if (g == positive && p == positive) r.tp += c;
      else if (p == positive) r.fp += c;
      else if (g == positive) r.fn += c;
      else r.tn += c;
    }
  r.accuracy = total ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
  if (k == 2) {
    if (r.tp + r.fp > 0) r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
    if (r.tp + r.fn > 0) r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    if (r.precision && r.recall && *r.precision + *r.recall > 0.0)
      r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
  }
  return r;
}

}  // namespace oracle
