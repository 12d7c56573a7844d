#pragma once

#include <cstddef>
#include <vector>

namespace merc {

// Confusion rows are true classes, columns predicted classes.
using Confusion = std::vector<std::vector<std::size_t>>;

struct Metrics {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<double> per_class_f1;
  Confusion confusion;
};

// Per-class F1 = 2PR/(P+R), 0 when P+R = 0; weighted by class support.
Metrics metrics_from_confusion(const Confusion& confusion);
Metrics compute_metrics(const std::vector<std::size_t>& truth,
                        const std::vector<std::size_t>& predicted, std::size_t classes);

}  // namespace merc
