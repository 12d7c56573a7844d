#include "merc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "merc/error.hpp"
#include "merc/rng.hpp"

namespace merc {

GradCheckReport finite_diff_check(ParamStore& params, const LossFn& loss, const GradFn& grad,
                                  const GradCheckOptions& opts) {
  return finite_diff_check(
      params, LossTermsFn([&](const ParamStore& p) { return std::vector<double>{loss(p)}; }), grad,
      opts);
}

GradCheckReport finite_diff_check(ParamStore& params, const LossTermsFn& loss, const GradFn& grad,
                                  const GradCheckOptions& opts) {
  GradCheckReport report;
  const std::size_t total = params.scalar_count();
  if (total == 0) return report;

  const ParamGrads analytic = grad(params);

  // Flat index -> (entry, offset).
  std::vector<std::pair<std::size_t, std::size_t>> all;
  all.reserve(total);
  for (std::size_t e = 0; e < params.entries().size(); ++e)
    for (std::size_t i = 0; i < params.entries()[e].value.size(); ++i) all.emplace_back(e, i);

  std::vector<std::size_t> pick(total);
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  if (opts.samples < total) {
    Rng rng(opts.seed);
    for (std::size_t k = 0; k < opts.samples; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(total - k));
      std::swap(pick[k], pick[j]);
    }
    pick.resize(opts.samples);
    std::sort(pick.begin(), pick.end());
  }

  for (std::size_t flat : pick) {
    auto [e, i] = all[flat];
    auto& entry = params.entries()[e];
    const double orig = entry.value[i];
    entry.value[i] = orig + opts.step;
    const std::vector<double> fp = loss(params);
    entry.value[i] = orig - opts.step;
    const std::vector<double> fm = loss(params);
    entry.value[i] = orig;
    if (fp.size() != fm.size()) throw ShapeError("finite_diff_check: loss term count changed");

    double diff = 0.0;
    for (std::size_t k = 0; k < fp.size(); ++k) diff += fp[k] - fm[k];
    const double numeric = diff / (2.0 * opts.step);
    const double a = analytic.at(entry.name)[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), opts.denom_floor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.checked;
    spdlog::trace("gradcheck {}[{}] analytic={:.6e} numeric={:.6e} rel={:.3e}", entry.name, i, a,
                  numeric, rel);
    if (rel > report.max_rel_error || report.worst_param.empty()) {
      report.max_rel_error = std::max(rel, report.max_rel_error);
      if (rel >= report.max_rel_error) {
        report.worst_param = entry.name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace merc
