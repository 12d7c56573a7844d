#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace merc {

struct AblationFlags {
  bool disable_decoupler = false;
  bool disable_shared_branch = false;
  bool disable_private_branch = false;
  bool disable_transformer_fusion = false;

  int count() const {
    return int(disable_decoupler) + int(disable_shared_branch) + int(disable_private_branch) +
           int(disable_transformer_fusion);
  }
  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

// Every hyperparameter, read from flat `key=value` text. All keys have defaults.
struct Config {
  // disentangle
  std::size_t latent_dim = 64;
  double alpha = 0.4;
  double gamma1 = 0.3;
  double gamma2 = 0.3;
  std::size_t triplets_per_anchor = 2;

  // shared branch
  std::size_t window_k = 5;
  double tau_low = 1.0;
  double tau_high = 1.0;
  double nce_temperature = 0.5;
  std::size_t proj_dim = 32;

  // private branch
  std::size_t w_same = 3;
  std::size_t w_cross = 1;
  double jacobi_alpha = 0.0;
  double jacobi_beta = 0.0;
  std::size_t jacobi_order_R = 3;
  double beta_cons = 0.5;

  // fusion + classifier
  std::size_t d_fusion = 64;
  std::size_t n_heads = 2;
  std::size_t n_layers = 2;
  double layer_norm_eps = 1e-5;
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  double lambda3 = 1.0;

  // optimization
  std::size_t steps = 300;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // numerics
  std::size_t eig_cap = 1500;
  double cosine_eps = 1e-8;

  // synthetic data (used by --synth)
  std::size_t synth_conversations = 8;
  std::size_t synth_max_len = 6;
  std::size_t synth_classes = 4;
  std::size_t synth_speakers = 2;
  std::array<std::size_t, 3> synth_dims{16, 12, 12};

  AblationFlags ablation;

  // Throws ConfigError on an out-of-range or inconsistent value.
  void validate() const;

  // Sets one key; throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);

  // Canonical text: one `key=value` per line in a fixed order. Doubles are
  // written so that parse(to_text()) reproduces them exactly.
  std::string to_text() const;
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  friend bool operator==(const Config&, const Config&) = default;
};

}  // namespace merc
