#pragma once

#include <cstddef>
#include <string>

#include "merc/params.hpp"
#include "merc/rng.hpp"
#include "merc/tape.hpp"

namespace merc {

// Row-vector convention throughout: y = x W + b with W in x out, b 1 x out.
struct Linear {
  Var w;
  Var b;  // invalid when the layer has no bias

  Var operator()(const Var& x) const;
  static Linear bind(const BoundParams& p, const std::string& prefix, bool bias = true);
  static void init(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                   Rng& rng, bool bias = true);
};

// in -> hidden -> out with tanh on the hidden layer.
struct TanhMlp {
  Linear first;
  Linear second;

  Var operator()(const Var& x) const;
  static TanhMlp bind(const BoundParams& p, const std::string& prefix);
  static void init(ParamStore& store, const std::string& prefix, std::size_t in,
                   std::size_t hidden, std::size_t out, Rng& rng);
};

}  // namespace merc
