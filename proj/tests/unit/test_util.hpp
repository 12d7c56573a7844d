#pragma once

#include <functional>
#include <string>
#include <vector>

#include "merc/gradcheck.hpp"
#include "merc/params.hpp"
#include "merc/rng.hpp"
#include "merc/tape.hpp"
#include "merc/tensor.hpp"

namespace merc::test {

inline Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -2.0,
                            double hi = 2.0) {
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

using VarFn = std::function<Var(const std::vector<Var>&)>;

// Finite-difference check of an arbitrary differentiable function of the
// given inputs. Non-scalar outputs are contracted with a fixed random matrix.
inline GradCheckReport check_function(const std::vector<Tensor>& inputs, const VarFn& f,
                                      std::uint64_t seed = 1, double step = 1e-6) {
  ParamStore store;
  for (std::size_t i = 0; i < inputs.size(); ++i) store.add("in" + std::to_string(i), inputs[i]);
  Tensor weights;
  {
    Tape t;
    BoundParams p(t, store, false);
    std::vector<Var> v;
    for (std::size_t i = 0; i < inputs.size(); ++i) v.push_back(p["in" + std::to_string(i)]);
    const Var out = f(v);
    Rng rng(seed);
    weights = random_tensor(out.rows(), out.cols(), rng, -1.0, 1.0);
  }
  auto build = [&](Tape& t, const BoundParams& p) {
    std::vector<Var> v;
    for (std::size_t i = 0; i < inputs.size(); ++i) v.push_back(p["in" + std::to_string(i)]);
    return sum(mul(f(v), t.constant(weights)));
  };
  LossFn loss = [&](const ParamStore& ps) {
    Tape t;
    BoundParams p(t, ps, false);
    return build(t, p).item();
  };
  GradFn grad = [&](const ParamStore& ps) {
    Tape t;
    BoundParams p(t, ps);
    t.backward(build(t, p));
    return p.grads();
  };
  GradCheckOptions opts;
  opts.step = step;
  opts.samples = 400;
  return finite_diff_check(store, loss, grad, opts);
}

// Same as check_function but over an existing named parameter store.
inline GradCheckReport check_store(ParamStore& store,
                                   const std::function<Var(const BoundParams&)>& loss_fn,
                                   std::size_t samples = 300, double step = 1e-6) {
  LossFn loss = [&](const ParamStore& ps) {
    Tape t;
    BoundParams p(t, ps, false);
    return loss_fn(p).item();
  };
  GradFn grad = [&](const ParamStore& ps) {
    Tape t;
    BoundParams p(t, ps);
    t.backward(loss_fn(p));
    return p.grads();
  };
  GradCheckOptions opts;
  opts.samples = samples;
  opts.step = step;
  return finite_diff_check(store, loss, grad, opts);
}

}  // namespace merc::test
