#include "merc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <string_view>
#include <utility>
#include <vector>

#include "merc/error.hpp"

namespace merc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': invalid number '" + v + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': invalid non-negative integer '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config key '" + key + "': invalid boolean '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// One accessor per key, used for both parsing and canonical printing.
struct Field {
  std::string key;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

template <typename T>
Field size_field(std::string key, T Config::*m) {
  return {key,
          [key, m](Config& c, const std::string& v) { c.*m = static_cast<T>(parse_uint(key, v)); },
          [m](const Config& c) { return std::to_string(c.*m); }};
}

Field double_field(std::string key, double Config::*m) {
  return {key, [key, m](Config& c, const std::string& v) { c.*m = parse_double(key, v); },
          [m](const Config& c) { return fmt_double(c.*m); }};
}

Field flag_field(std::string key, bool AblationFlags::*m) {
  return {key,
          [key, m](Config& c, const std::string& v) { c.ablation.*m = parse_bool(key, v); },
          [m](const Config& c) { return std::string(c.ablation.*m ? "true" : "false"); }};
}

Field dim_field(std::string key, std::size_t idx) {
  return {key,
          [key, idx](Config& c, const std::string& v) { c.synth_dims[idx] = parse_uint(key, v); },
          [idx](const Config& c) { return std::to_string(c.synth_dims[idx]); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      size_field("latent_dim", &Config::latent_dim),
      double_field("alpha", &Config::alpha),
      double_field("gamma1", &Config::gamma1),
      double_field("gamma2", &Config::gamma2),
      size_field("triplets_per_anchor", &Config::triplets_per_anchor),
      size_field("window_k", &Config::window_k),
      double_field("tau_low", &Config::tau_low),
      double_field("tau_high", &Config::tau_high),
      double_field("nce_temperature", &Config::nce_temperature),
      size_field("proj_dim", &Config::proj_dim),
      size_field("w_same", &Config::w_same),
      size_field("w_cross", &Config::w_cross),
      double_field("jacobi_alpha", &Config::jacobi_alpha),
      double_field("jacobi_beta", &Config::jacobi_beta),
      size_field("jacobi_order_R", &Config::jacobi_order_R),
      double_field("beta_cons", &Config::beta_cons),
      size_field("d_fusion", &Config::d_fusion),
      size_field("n_heads", &Config::n_heads),
      size_field("n_layers", &Config::n_layers),
      double_field("layer_norm_eps", &Config::layer_norm_eps),
      double_field("lambda1", &Config::lambda1),
      double_field("lambda2", &Config::lambda2),
      double_field("lambda3", &Config::lambda3),
      size_field("steps", &Config::steps),
      double_field("lr", &Config::lr),
      size_field("seed", &Config::seed),
      double_field("adam_beta1", &Config::adam_beta1),
      double_field("adam_beta2", &Config::adam_beta2),
      double_field("adam_eps", &Config::adam_eps),
      size_field("eig_cap", &Config::eig_cap),
      double_field("cosine_eps", &Config::cosine_eps),
      size_field("synth_conversations", &Config::synth_conversations),
      size_field("synth_max_len", &Config::synth_max_len),
      size_field("synth_classes", &Config::synth_classes),
      size_field("synth_speakers", &Config::synth_speakers),
      dim_field("synth_dim_t", 0),
      dim_field("synth_dim_a", 1),
      dim_field("synth_dim_v", 2),
      flag_field("disable_decoupler", &AblationFlags::disable_decoupler),
      flag_field("disable_shared_branch", &AblationFlags::disable_shared_branch),
      flag_field("disable_private_branch", &AblationFlags::disable_private_branch),
      flag_field("disable_transformer_fusion", &AblationFlags::disable_transformer_fusion),
  };
  return f;
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void Config::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(latent_dim >= 1, "latent_dim must be >= 1");
  require(alpha > 0.0, "alpha must be > 0");
  require(gamma1 >= 0.0 && gamma2 >= 0.0, "gamma1/gamma2 must be >= 0");
  require(window_k >= 1, "window_k must be >= 1");
  require(tau_low > 0.0 && tau_high > 0.0, "tau_low/tau_high must be > 0");
  require(nce_temperature > 0.0, "nce_temperature must be > 0");
  require(proj_dim >= 1, "proj_dim must be >= 1");
  require(jacobi_alpha > -1.0 && jacobi_beta > -1.0, "jacobi_alpha/jacobi_beta must be > -1");
  require(jacobi_order_R >= 1, "jacobi_order_R must be >= 1");
  require(beta_cons >= 0.0, "beta_cons must be >= 0");
  require(n_heads >= 1 && d_fusion % n_heads == 0, "d_fusion must be divisible by n_heads");
  require(n_layers >= 1, "n_layers must be >= 1");
  require(layer_norm_eps > 0.0, "layer_norm_eps must be > 0");
  require(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0, "lambda1..3 must be >= 0");
  require(lr > 0.0, "lr must be > 0");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "adam betas must be in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be > 0");
  require(cosine_eps > 0.0, "cosine_eps must be > 0");
  require(synth_conversations >= 1 && synth_max_len >= 1 && synth_classes >= 1 &&
              synth_speakers >= 1,
          "synthetic counts must be >= 1");
  require(synth_dims[0] >= 1 && synth_dims[1] >= 1 && synth_dims[2] >= 1,
          "synthetic dims must be >= 1");
  require(ablation.count() < 4, "at most three ablation flags may be set");
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + "=" + f.get(*this) + "\n";
  return out;
}

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    try {
      c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace merc
