#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "merc/params.hpp"

namespace merc {

struct GradCheckOptions {
  double step = 1e-6;
  std::size_t samples = 256;
  std::uint64_t seed = 0;
  double denom_floor = 1e-8;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

using LossFn = std::function<double(const ParamStore&)>;
// Loss returned as addends whose sum is the objective. Differences are taken
// per addend before summing, so addends a parameter does not reach cancel
// exactly instead of contributing rounding noise.
using LossTermsFn = std::function<std::vector<double>(const ParamStore&)>;
using GradFn = std::function<ParamGrads(const ParamStore&)>;

// Compares analytic gradients against central differences on a random subset
// of scalar parameters (all of them when there are fewer than `samples`).
// Relative error uses max(|analytic|, |numeric|, denom_floor) as denominator.
// `params` is perturbed in place and restored before returning.
GradCheckReport finite_diff_check(ParamStore& params, const LossFn& loss, const GradFn& grad,
                                  const GradCheckOptions& opts = {});
GradCheckReport finite_diff_check(ParamStore& params, const LossTermsFn& loss, const GradFn& grad,
                                  const GradCheckOptions& opts = {});

}  // namespace merc
