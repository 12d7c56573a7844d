#include "merc/layers.hpp"

namespace merc {

Var Linear::operator()(const Var& x) const {
  Var y = matmul(x, w);
  return b.valid() ? add(y, b) : y;
}

Linear Linear::bind(const BoundParams& p, const std::string& prefix, bool bias) {
  Linear l;
  l.w = p[prefix + ".w"];
  if (bias) l.b = p[prefix + ".b"];
  return l;
}

void Linear::init(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                  Rng& rng, bool bias) {
  store.add_uniform(prefix + ".w", in, out, in, rng);
  if (bias) store.add_uniform(prefix + ".b", 1, out, in, rng);
}

Var TanhMlp::operator()(const Var& x) const { return second(tanh(first(x))); }

TanhMlp TanhMlp::bind(const BoundParams& p, const std::string& prefix) {
  return {Linear::bind(p, prefix + ".l1"), Linear::bind(p, prefix + ".l2")};
}

void TanhMlp::init(ParamStore& store, const std::string& prefix, std::size_t in,
                   std::size_t hidden, std::size_t out, Rng& rng) {
  Linear::init(store, prefix + ".l1", in, hidden, rng);
  Linear::init(store, prefix + ".l2", hidden, out, rng);
}

}  // namespace merc
