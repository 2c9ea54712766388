#include "zimpute/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "zimpute/errors.hpp"

namespace zimpute {
namespace {

using nlohmann::json;

json parse_object(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  return j;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw ValidationError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!j.at(key).is_number_unsigned()) {
      throw ValidationError(std::string("config: key '") + key +
                            "' must be a non-negative integer");
    }
  }
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config: key '") + key + "' has the wrong type");
  }
}

template <std::size_t K>
void take_array(const json& j, const char* key, std::array<double, K>& out) {
  if (!j.contains(key)) return;
  std::vector<double> v;
  take(j, key, v);
  if (v.size() != K) {
    throw ValidationError(std::string("config: key '") + key + "' needs " + std::to_string(K) +
                          " values");
  }
  std::copy(v.begin(), v.end(), out.begin());
}

std::vector<Method> take_methods(const json& j) {
  std::vector<std::string> names;
  take(j, "methods", names);
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  if (out.empty()) throw ValidationError("config: 'methods' is empty");
  return out;
}

}  // namespace

void SimulationPlan::use_full_grid() {
  r_squared = {0.4, 0.5, 0.6};
  phi_bar = {0.6, 0.7, 0.8};
  p_bar = {0.3, 0.5, 0.7};
}

std::vector<ScenarioConfig> SimulationPlan::scenarios() const {
  if (r_squared.empty() || phi_bar.empty() || p_bar.empty()) {
    throw ValidationError("scenario grid has an empty axis");
  }
  std::vector<ScenarioConfig> out;
  for (double r2 : r_squared) {
    for (double phi : phi_bar) {
      for (double p : p_bar) {
        ScenarioConfig c = base;
        c.r_squared = r2;
        c.phi_bar = phi;
        c.p_bar = p;
        c.validate();
        out.push_back(c);
      }
    }
  }
  return out;
}

SimulationPlan parse_simulation_config(const std::string& json_text) {
  const json j = parse_object(json_text);
  reject_unknown(j,
                 {"seed", "replicates", "population_size", "sample_size", "a", "phi_slopes",
                  "response_slopes", "gamma_shape", "gamma_scale", "residual_family",
                  "quantile_levels", "methods", "reg_threshold", "estimate_variance", "threads",
                  "grid"},
                 "config");
  SimulationPlan plan;
  ScenarioConfig& c = plan.base;
  take(j, "seed", c.seed);
  take(j, "replicates", c.replicates);
  take(j, "population_size", c.population_size);
  take(j, "sample_size", c.sample_size);
  take_array(j, "a", c.a);
  take_array(j, "phi_slopes", c.phi_slopes);
  take_array(j, "response_slopes", c.response_slopes);
  take(j, "gamma_shape", c.gamma_shape);
  take(j, "gamma_scale", c.gamma_scale);
  if (j.contains("residual_family")) {
    std::string f;
    take(j, "residual_family", f);
    c.family = parse_family(f);
  }
  take(j, "quantile_levels", c.quantile_levels);
  if (j.contains("methods")) c.methods = take_methods(j);
  if (j.contains("reg_threshold")) {
    const json& a = j.at("reg_threshold");
    if (a.is_string() && a.get<std::string>() == "auto") {
      c.reg_threshold.reset();
    } else if (a.is_number()) {
      c.reg_threshold = a.get<double>();
    } else {
      throw ValidationError("config: 'reg_threshold' must be a number or \"auto\"");
    }
  }
  take(j, "estimate_variance", c.estimate_variance);
  take(j, "threads", c.threads);
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (!g.is_object()) throw ValidationError("config: 'grid' must be an object");
    reject_unknown(g, {"r_squared", "phi_bar", "p_bar"}, "config.grid");
    take(g, "r_squared", plan.r_squared);
    take(g, "phi_bar", plan.phi_bar);
    take(g, "p_bar", plan.p_bar);
  }
  return plan;
}

ApplicationConfig parse_application_config(const std::string& json_text) {
  const json j = parse_object(json_text);
  reject_unknown(j,
                 {"strata", "cells_per_stratum", "domain_rate", "t_grid", "bootstrap",
                  "reg_threshold", "seed", "threads"},
                 "config");
  if (!j.contains("strata")) throw ValidationError("config: missing 'strata'");
  const json& strata = j.at("strata");
  if (!strata.is_array() || strata.empty()) {
    throw ValidationError("config: 'strata' must be a non-empty array");
  }
  ApplicationConfig c;
  c.stratum_population.clear();
  c.stratum_sample.clear();
  c.response_rates.clear();
  for (const json& s : strata) {
    if (!s.is_object()) throw ValidationError("config: each stratum must be an object");
    reject_unknown(s, {"population", "sample", "response_rate"}, "config.strata");
    for (const char* key : {"population", "sample", "response_rate"}) {
      if (!s.contains(key)) {
        throw ValidationError(std::string("config.strata: missing '") + key + "'");
      }
    }
    std::size_t big = 0;
    std::size_t small = 0;
    double rate = 0.0;
    take(s, "population", big);
    take(s, "sample", small);
    take(s, "response_rate", rate);
    c.stratum_population.push_back(big);
    c.stratum_sample.push_back(small);
    c.response_rates.push_back(rate);
  }
  take(j, "cells_per_stratum", c.cells_per_stratum);
  take(j, "domain_rate", c.domain_rate);
  take(j, "t_grid", c.t_grid);
  take(j, "bootstrap", c.bootstrap);
  take(j, "reg_threshold", c.reg_threshold);
  take(j, "seed", c.seed);
  take(j, "threads", c.threads);
  c.validate();
  return c;
}

ImputeSettings parse_impute_config(const std::string& json_text) {
  const json j = parse_object(json_text);
  reject_unknown(j,
                 {"method", "seed", "reg_threshold", "z_intercept", "u_intercept",
                  "population_size", "variance", "bootstrap", "threads"},
                 "config");
  ImputeSettings s;
  if (j.contains("method")) {
    std::string m;
    take(j, "method", m);
    s.method = parse_method(m);
  }
  take(j, "seed", s.seed);
  take(j, "reg_threshold", s.reg_threshold);
  take(j, "z_intercept", s.z_intercept);
  take(j, "u_intercept", s.u_intercept);
  take(j, "population_size", s.population_size);
  take(j, "variance", s.variance);
  take(j, "bootstrap", s.bootstrap);
  take(j, "threads", s.threads);
  return s;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace zimpute
