#pragma once

#include <vector>

namespace rmat {

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double threshold = 0.0;
};

// ROC-AUC as the rank statistic: probability that a random positive
// outscores a random negative, ties counted one half. The numerator is
// assembled in integer halves, so the result matches O(n^2) pair counting
// exactly.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                        double threshold);

}  // namespace rmat
