#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "toml.hpp"

#include "skglass/disorder.hpp"
#include "skglass/errors.hpp"
#include "skglass/numerics.hpp"

namespace skglass::harness {

enum class ExperimentKind {
  scaling_study,
  free_energy,
  bottleneck_pipeline,
  escape_study,
  restricted_norm_study,
  gapped_study
};

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::scaling_study: return "scaling_study";
    case ExperimentKind::free_energy: return "free_energy";
    case ExperimentKind::bottleneck_pipeline: return "bottleneck_pipeline";
    case ExperimentKind::escape_study: return "escape_study";
    case ExperimentKind::restricted_norm_study: return "restricted_norm_study";
    case ExperimentKind::gapped_study: return "gapped_study";
  }
  return "?";
}

inline ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::scaling_study, ExperimentKind::free_energy, ExperimentKind::bottleneck_pipeline,
                 ExperimentKind::escape_study, ExperimentKind::restricted_norm_study, ExperimentKind::gapped_study})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment kind '" + s + "'");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::scaling_study;
  std::vector<std::int64_t> n_list;
  std::vector<double> beta_list;
  std::vector<double> rho_list;
  std::int64_t instances = 1;
  std::int64_t seed = 0;
  Law law = Law::gaussian;
  double gamma = 0.1;
  double delta = 0.0;
  double rho = 0.25;
  std::int64_t budget = 0;  // search evaluations per instance; 0 means 1000 N
  std::int64_t reps = 100;
  std::int64_t cap = 1000000;
  std::int64_t restarts = 20;
  bool mixing = false;      // scaling_study: also compute exact t_mix (N <= 12)
  std::string output_dir;

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string toml_double(double x) {
  std::string s = format_double(x);
  if (s.find_first_of(".eEni") == std::string::npos) s += ".0";
  return s;
}

inline std::string toml_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

template <typename T, typename F>
std::string toml_list(const std::vector<T>& xs, F&& fmt) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + fmt(xs[i]);
  return out + "]";
}

}  // namespace detail

/// Canonical text: every key, fixed order, shortest round-trip numbers.
inline std::string to_text(const ExperimentConfig& c) {
  auto integer = [](std::int64_t v) { return std::to_string(v); };
  std::ostringstream o;
  o << "kind = " << detail::toml_string(to_string(c.kind)) << '\n'
    << "n_list = " << detail::toml_list(c.n_list, integer) << '\n'
    << "beta_list = " << detail::toml_list(c.beta_list, detail::toml_double) << '\n'
    << "rho_list = " << detail::toml_list(c.rho_list, detail::toml_double) << '\n'
    << "instances = " << c.instances << '\n'
    << "seed = " << c.seed << '\n'
    << "law = " << detail::toml_string(to_string(c.law)) << '\n'
    << "gamma = " << detail::toml_double(c.gamma) << '\n'
    << "delta = " << detail::toml_double(c.delta) << '\n'
    << "rho = " << detail::toml_double(c.rho) << '\n'
    << "budget = " << c.budget << '\n'
    << "reps = " << c.reps << '\n'
    << "cap = " << c.cap << '\n'
    << "restarts = " << c.restarts << '\n'
    << "mixing = " << (c.mixing ? "true" : "false") << '\n'
    << "output_dir = " << detail::toml_string(c.output_dir) << '\n';
  return o.str();
}

/// FNV-1a of the canonical text, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string text = to_text(c);
  const std::uint64_t h = fnv1a(reinterpret_cast<const unsigned char*>(text.data()), text.size());
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[static_cast<std::size_t>(15 - i)] = digits[(h >> (4 * i)) & 0xF];
  return out;
}

/// Parses the TOML subset documented in the README: top-level `key = value`
/// pairs with integers, floats, strings, booleans and flat arrays. Unknown
/// keys, wrong types and TOML syntax errors are ConfigError. Does not
/// validate gates; call validate() for that.
inline ExperimentConfig parse_config(const std::string& text) {
  toml::table t;
  try {
    t = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  static const std::set<std::string> known{"kind",  "n_list", "beta_list", "rho_list", "instances", "seed",
                                           "law",   "gamma",  "delta",     "rho",      "budget",    "reps",
                                           "cap",   "restarts", "mixing",  "output_dir"};
  for (const auto& [key, node] : t)
    if (!known.count(std::string(key.str()))) throw ConfigError("unknown config key '" + std::string(key.str()) + "'");

  ExperimentConfig c;
  auto integer = [&](const char* key, std::int64_t& out) {
    if (auto n = t.get(key)) {
      auto v = n->value_exact<std::int64_t>();
      if (!v) throw ConfigError(std::string("config key '") + key + "' must be an integer");
      out = *v;
    }
  };
  auto real_of = [](const toml::node& n, const std::string& key) {
    if (auto v = n.value_exact<double>()) return *v;
    if (auto v = n.value_exact<std::int64_t>()) return static_cast<double>(*v);
    throw ConfigError("config key '" + key + "' must be a number");
  };
  auto real = [&](const char* key, double& out) {
    if (auto n = t.get(key)) out = real_of(*n, key);
  };
  auto string = [&](const char* key, std::string& out) {
    if (auto n = t.get(key)) {
      auto v = n->value_exact<std::string>();
      if (!v) throw ConfigError(std::string("config key '") + key + "' must be a string");
      out = *v;
    }
  };
  auto array = [&](const char* key) -> const toml::array* {
    auto n = t.get(key);
    if (!n) return nullptr;
    if (!n->is_array()) throw ConfigError(std::string("config key '") + key + "' must be a list");
    return n->as_array();
  };

  std::string kind;
  string("kind", kind);
  if (kind.empty()) throw ConfigError("config is missing 'kind'");
  c.kind = parse_kind(kind);
  if (auto a = array("n_list"))
    for (const auto& e : *a) {
      auto v = e.value_exact<std::int64_t>();
      if (!v) throw ConfigError("n_list entries must be integers");
      c.n_list.push_back(*v);
    }
  if (auto a = array("beta_list"))
    for (const auto& e : *a) c.beta_list.push_back(real_of(e, "beta_list"));
  if (auto a = array("rho_list"))
    for (const auto& e : *a) c.rho_list.push_back(real_of(e, "rho_list"));
  integer("instances", c.instances);
  integer("seed", c.seed);
  std::string law = to_string(c.law);
  string("law", law);
  c.law = parse_law(law);
  real("gamma", c.gamma);
  real("delta", c.delta);
  real("rho", c.rho);
  integer("budget", c.budget);
  integer("reps", c.reps);
  integer("cap", c.cap);
  integer("restarts", c.restarts);
  if (auto n = t.get("mixing")) {
    auto v = n->value_exact<bool>();
    if (!v) throw ConfigError("config key 'mixing' must be true or false");
    c.mixing = *v;
  }
  string("output_dir", c.output_dir);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

/// Parameter checks (ConfigError) and enumeration gates (GateError), all
/// enforced here so that a valid config never trips a gate while running.
inline void validate(const ExperimentConfig& c) {
  require(!c.n_list.empty(), "n_list must not be empty");
  for (auto n : c.n_list) require(n >= 2, "every N must be at least 2");
  require(c.instances >= 1, "instances must be at least 1");
  require(c.seed >= 0, "seed must be non-negative");
  require(c.law != Law::custom, "custom disorder laws are not supported in config files");
  for (double b : c.beta_list) require(std::isfinite(b) && b >= 0.0, "beta values must be finite and non-negative");
  const auto max_n = *std::max_element(c.n_list.begin(), c.n_list.end());
  auto need_betas = [&] { require(!c.beta_list.empty(), "beta_list must not be empty for " + to_string(c.kind)); };
  auto need_rho = [&](double rho) { require(rho > 0.0 && rho < 0.5, "rho must lie in (0, 1/2)"); };
  auto need_gapped = [&] {
    require(std::isfinite(c.gamma) && c.gamma > 0.0, "gamma must be positive");
    require(c.delta >= 0.0 && c.delta < 1.0, "delta must lie in [0, 1)");
    require(c.budget >= 0, "budget must be non-negative");
  };
  switch (c.kind) {
    case ExperimentKind::scaling_study:
      need_betas();
      require_gate(max_n <= 20, "scaling_study: N exceeds the spectral gate 20");
      if (c.mixing) require_gate(max_n <= 12, "scaling_study with mixing: N exceeds the mixing gate 12");
      break;
    case ExperimentKind::free_energy:
      need_betas();
      require_gate(max_n <= 25, "free_energy: N exceeds the enumeration gate 25");
      break;
    case ExperimentKind::bottleneck_pipeline:
      need_betas();
      need_gapped();
      need_rho(c.rho);
      require_gate(max_n <= 20, "bottleneck_pipeline: N exceeds the enumeration gate 20");
      for (auto n : c.n_list)
        require(std::llround(c.rho * static_cast<double>(n)) >= 1, "bottleneck_pipeline: round(rho N) must be >= 1");
      break;
    case ExperimentKind::escape_study:
      need_betas();
      need_gapped();
      need_rho(c.rho);
      require(c.reps >= 1, "reps must be at least 1");
      require(c.cap >= 1, "cap must be at least 1");
      for (auto n : c.n_list) require(c.rho * static_cast<double>(n) + 1e-9 >= 1.0, "escape_study: rho N must be >= 1");
      break;
    case ExperimentKind::restricted_norm_study:
      require(!c.rho_list.empty(), "rho_list must not be empty for restricted_norm_study");
      require(c.restarts >= 1, "restarts must be at least 1");
      for (double r : c.rho_list) {
        need_rho(r);
        for (auto n : c.n_list)
          require(std::floor(r * static_cast<double>(n) + 1e-9) >= 1, "restricted_norm_study: floor(rho N) must be >= 1");
      }
      break;
    case ExperimentKind::gapped_study:
      need_gapped();
      break;
  }
}

}  // namespace skglass::harness
