#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "merc/rng.hpp"
#include "merc/tape.hpp"
#include "merc/tensor.hpp"

namespace merc {

// Named registry of every learnable tensor. Iteration follows insertion order,
// which is stable for a given configuration.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  Tensor& add(const std::string& name, Tensor value);
  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Tensor& add_uniform(const std::string& name, std::size_t rows, std::size_t cols,
                      std::size_t fan_in, Rng& rng);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value))
        return false;
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

using ParamGrads = std::unordered_map<std::string, Tensor>;

// Parameters recorded as leaves of one tape.
class BoundParams {
 public:
  // With `differentiable` false the parameters are recorded as constants.
  BoundParams(Tape& tape, const ParamStore& store, bool differentiable = true);

  const Var& operator[](const std::string& name) const;
  Tape& tape() const { return *tape_; }
  // Gradients after tape.backward(); untouched parameters get zeros.
  ParamGrads grads() const;

 private:
  Tape* tape_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, Var> vars_;
};

}  // namespace merc
