#include "merc/metrics.hpp"

#include "merc/error.hpp"

namespace merc {

Metrics metrics_from_confusion(const Confusion& confusion) {
  const std::size_t c = confusion.size();
  for (const auto& row : confusion)
    if (row.size() != c) throw ShapeError("confusion matrix must be square");
  Metrics m;
  m.confusion = confusion;
  m.per_class_f1.assign(c, 0.0);
  std::size_t total = 0, correct = 0;
  std::vector<std::size_t> support(c, 0), predicted(c, 0);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      total += confusion[i][j];
      support[i] += confusion[i][j];
      predicted[j] += confusion[i][j];
      if (i == j) correct += confusion[i][j];
    }
  if (total == 0) return m;
  for (std::size_t k = 0; k < c; ++k) {
    const double tp = static_cast<double>(confusion[k][k]);
    const double p = predicted[k] ? tp / static_cast<double>(predicted[k]) : 0.0;
    const double r = support[k] ? tp / static_cast<double>(support[k]) : 0.0;
    m.per_class_f1[k] = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    m.weighted_f1 += static_cast<double>(support[k]) / static_cast<double>(total) * m.per_class_f1[k];
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return m;
}

Metrics compute_metrics(const std::vector<std::size_t>& truth,
                        const std::vector<std::size_t>& predicted, std::size_t classes) {
  if (truth.size() != predicted.size()) throw ShapeError("truth/prediction length mismatch");
  Confusion conf(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= classes || predicted[i] >= classes) throw Error("class index out of range");
    ++conf[truth[i]][predicted[i]];
  }
  return metrics_from_confusion(conf);
}

}  // namespace merc
