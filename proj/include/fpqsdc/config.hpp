#pragma once

// JSON run configuration.  See docs/config.md for the schema.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fpqsdc/errors.hpp"
#include "fpqsdc/optimizer.hpp"
#include "fpqsdc/params.hpp"
#include "fpqsdc/security.hpp"

namespace fpqsdc {

struct SweepSpec {
  double from_db = 0;
  double to_db = 8;
  double step_db = 0.5;

  void validate() const {
    detail::require(std::isfinite(from_db) && from_db >= 0, "sweep from_db must be >= 0");
    detail::require(std::isfinite(to_db) && to_db > from_db, "sweep to_db must exceed from_db");
    detail::require(std::isfinite(step_db) && step_db > 0, "sweep step_db must be positive");
  }

  std::vector<double> points() const {
    std::vector<double> out;
    const long n = std::lround(std::floor((to_db - from_db) / step_db + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(from_db + i * step_db);
    return out;
  }
};

struct RunConfig {
  SystemParams params;
  SourceParams source;
  SweepSpec sweep;
  SearchSpace search;
  MatrixMode mode = MatrixMode::full;
  std::uint64_t seed = 1;
  std::string canonical;  // normalized JSON text, used for hashing
};

// Parses an angle given in radians, or as a multiple of pi: "0.049pi",
// "0.049*pi", "pi".
inline double parse_angle(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw ConfigError("empty angle");
  double factor = 1.0;
  if (s.size() >= 2 && s.compare(s.size() - 2, 2, "pi") == 0) {
    factor = kPi;
    s.resize(s.size() - 2);
    if (!s.empty() && s.back() == '*') s.pop_back();
    if (s.empty()) return kPi;
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !std::isfinite(v))
    throw ConfigError("cannot parse angle '" + text + "'");
  return v * factor;
}

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& where,
                           const std::set<std::string>& known) {
  if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("unknown field '" + where + "." + it.key() + "'");
}

inline double get_number(const json& obj, const std::string& where, const std::string& key,
                         double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("field '" + where + "." + key + "' must be a number");
  return v.get<double>();
}

inline double get_angle(const json& obj, const std::string& where, const std::string& key,
                        double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      return parse_angle(v.get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError("field '" + where + "." + key + "': " + e.what());
    }
  }
  throw ConfigError("field '" + where + "." + key + "' must be a number or a string like \"0.05pi\"");
}

inline Bounds get_bounds(const json& obj, const std::string& where, const std::string& key,
                         Bounds fallback, bool angle) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 2)
    throw ConfigError("field '" + where + "." + key + "' must be a two-element array");
  auto one = [&](const json& e) {
    if (e.is_number()) return e.get<double>();
    if (angle && e.is_string()) return parse_angle(e.get<std::string>());
    throw ConfigError("field '" + where + "." + key + "' has a non-numeric entry");
  };
  return {one(v[0]), one(v[1])};
}

}  // namespace detail

// Builds a config from parsed JSON.  Every object rejects unknown fields.
// Invariant violations in values surface as ConfigError naming the problem.
inline RunConfig config_from_json(const nlohmann::json& root) {
  using detail::get_number;
  RunConfig cfg;
  detail::reject_unknown(root, "config", {"params", "source", "sweep", "search", "mode", "seed"});

  if (root.contains("params")) {
    const auto& p = root.at("params");
    detail::reject_unknown(p, "params",
                           {"eta_opt_ba", "eta_opt_bab", "dark_count", "err_opt_a", "err_opt_b",
                            "eta_det", "fiber_loss_db_per_km", "eve_advantage", "n_cut",
                            "pulse_rate_hz"});
    SystemParams& s = cfg.params;
    s.eta_opt_ba = get_number(p, "params", "eta_opt_ba", s.eta_opt_ba);
    s.eta_opt_bab = get_number(p, "params", "eta_opt_bab", s.eta_opt_bab);
    s.dark_count = get_number(p, "params", "dark_count", s.dark_count);
    s.err_opt_a = get_number(p, "params", "err_opt_a", s.err_opt_a);
    s.err_opt_b = get_number(p, "params", "err_opt_b", s.err_opt_b);
    s.eta_det = get_number(p, "params", "eta_det", s.eta_det);
    s.fiber_loss_db_per_km = get_number(p, "params", "fiber_loss_db_per_km", s.fiber_loss_db_per_km);
    s.eve_advantage = get_number(p, "params", "eve_advantage", s.eve_advantage);
    if (p.contains("n_cut")) {
      if (!p.at("n_cut").is_number_integer()) throw ConfigError("field 'params.n_cut' must be an integer");
      s.n_cut = p.at("n_cut").get<int>();
    }
    s.pulse_rate_hz = get_number(p, "params", "pulse_rate_hz", s.pulse_rate_hz);
  }

  if (root.contains("source")) {
    const auto& p = root.at("source");
    detail::reject_unknown(p, "source",
                           {"intensity_max", "i_vac", "i_d", "delta_x", "delta_z", "vt_product"});
    const double imax = get_number(p, "source", "intensity_max", cfg.source.intensity_max);
    SourceParams s = SourceParams::from_point(
        imax, detail::get_angle(p, "source", "delta_x", cfg.source.delta_x),
        detail::get_angle(p, "source", "delta_z", cfg.source.delta_z));
    s.i_vac = get_number(p, "source", "i_vac", s.i_vac);
    s.i_d = get_number(p, "source", "i_d", s.i_d);
    s.vt_product = get_number(p, "source", "vt_product", s.vt_product);
    cfg.source = s;
  }

  if (root.contains("sweep")) {
    const auto& p = root.at("sweep");
    detail::reject_unknown(p, "sweep", {"from_db", "to_db", "step_db"});
    cfg.sweep.from_db = get_number(p, "sweep", "from_db", cfg.sweep.from_db);
    cfg.sweep.to_db = get_number(p, "sweep", "to_db", cfg.sweep.to_db);
    cfg.sweep.step_db = get_number(p, "sweep", "step_db", cfg.sweep.step_db);
  }

  if (root.contains("search")) {
    const auto& p = root.at("search");
    detail::reject_unknown(p, "search",
                           {"intensity", "delta_x", "delta_z", "grid", "refine_iterations"});
    SearchSpace& s = cfg.search;
    s.intensity = detail::get_bounds(p, "search", "intensity", s.intensity, false);
    s.delta_x = detail::get_bounds(p, "search", "delta_x", s.delta_x, true);
    s.delta_z = detail::get_bounds(p, "search", "delta_z", s.delta_z, true);
    if (p.contains("grid")) {
      const auto& g = p.at("grid");
      if (!g.is_array() || g.size() != 3 || !g[0].is_number_integer() ||
          !g[1].is_number_integer() || !g[2].is_number_integer())
        throw ConfigError("field 'search.grid' must be three integers");
      s.grid_intensity = g[0].get<int>();
      s.grid_delta_x = g[1].get<int>();
      s.grid_delta_z = g[2].get<int>();
    }
    if (p.contains("refine_iterations")) {
      if (!p.at("refine_iterations").is_number_integer())
        throw ConfigError("field 'search.refine_iterations' must be an integer");
      s.refine_iterations = p.at("refine_iterations").get<int>();
    }
  }

  if (root.contains("mode")) {
    const auto& m = root.at("mode");
    if (m == "full") cfg.mode = MatrixMode::full;
    else if (m == "paper_diagonal") cfg.mode = MatrixMode::paper_diagonal;
    else throw ConfigError("field 'mode' must be \"full\" or \"paper_diagonal\"");
  }
  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned()) throw ConfigError("field 'seed' must be a non-negative integer");
    cfg.seed = root.at("seed").get<std::uint64_t>();
  }

  try {
    cfg.params.validate();
    cfg.source.validate();
    cfg.sweep.validate();
    cfg.search.validate();
  } catch (const InvariantError& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  cfg.canonical = root.dump();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(root);
}

inline RunConfig default_config() { return config_from_json(nlohmann::json::object()); }

}  // namespace fpqsdc
