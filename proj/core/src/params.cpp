#include "merc/params.hpp"

#include <cmath>

#include "merc/error.hpp"

namespace merc {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({name, std::move(value)});
  return entries_.back().value;
}

Tensor& ParamStore::add_uniform(const std::string& name, std::size_t rows, std::size_t cols,
                                std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  Tensor t(rows, cols);
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return add(name, std::move(t));
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

BoundParams::BoundParams(Tape& tape, const ParamStore& store, bool differentiable)
    : tape_(&tape) {
  for (const auto& e : store.entries()) {
    names_.push_back(e.name);
    vars_.emplace(e.name, differentiable ? tape.leaf(e.value) : tape.constant(e.value));
  }
}

const Var& BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw Error("parameter '" + name + "' is not bound");
  return it->second;
}

ParamGrads BoundParams::grads() const {
  ParamGrads out;
  for (const auto& n : names_) out.emplace(n, vars_.at(n).grad());
  return out;
}

}  // namespace merc
