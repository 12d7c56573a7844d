#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "merc/config.hpp"
#include "merc/data.hpp"
#include "merc/model.hpp"
#include "merc/params.hpp"

namespace merc {

// Versioned text container: header, config snapshot, then every parameter as
// name, shape and hex-float values so reload is bit-exact.
struct Checkpoint {
  Config config;
  std::size_t classes = 0;
  std::size_t speakers = 0;
  std::array<std::size_t, kNumModalities> dims{};
  std::size_t step = 0;
  std::string rng_state;
  ParamStore params;

  static Checkpoint from_model(const Model& model, std::size_t step, const std::string& rng_state);
  // Rebuilds the model and checks every parameter name and shape.
  Model to_model() const;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& text);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

}  // namespace merc
