#include "rmat/metrics.hpp"

#include <algorithm>
#include <cstdint>

#include "rmat/error.hpp"

namespace rmat {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("roc_auc: length mismatch");
  std::vector<std::pair<double, int>> ranked;
  ranked.reserve(scores.size());
  std::int64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ranked.emplace_back(scores[i], labels[i]);
    (labels[i] ? pos : neg)++;
  }
  if (pos == 0 || neg == 0) {
    throw ValidationError("roc_auc: both classes must be present");
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // num2 counts (positive, negative) comparisons in halves: 2 per win, 1 per
  // tie. Walking tie groups keeps it integral.
  std::int64_t num2 = 0;
  std::int64_t neg_below = 0;
  std::size_t i = 0;
  while (i < ranked.size()) {
    std::size_t j = i;
    std::int64_t pos_g = 0, neg_g = 0;
    while (j < ranked.size() && ranked[j].first == ranked[i].first) {
      (ranked[j].second ? pos_g : neg_g)++;
      ++j;
    }
    num2 += pos_g * (2 * neg_below + neg_g);
    neg_below += neg_g;
    i = j;
  }
  return static_cast<double>(num2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                        double threshold) {
  if (scores.empty()) throw ValidationError("compute_metrics: empty prediction set");
  if (scores.size() != labels.size()) throw ValidationError("compute_metrics: length mismatch");
  Metrics m;
  m.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    if (labels[i]) {
      (pred ? m.tp : m.fn)++;
    } else {
      (pred ? m.fp : m.tn)++;
    }
  }
  m.precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
  bool both = false;
  for (std::size_t i = 1; i < labels.size() && !both; ++i) both = labels[i] != labels[0];
  m.auc = both ? roc_auc(scores, labels) : 0.5;
  return m;
}

}  // namespace rmat
