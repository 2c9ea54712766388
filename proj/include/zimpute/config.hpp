#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zimpute/impute.hpp"
#include "zimpute/simlab.hpp"

namespace zimpute {

/// Scenario grid of the simulation command: every combination of the three
/// lists, all other settings shared.
struct SimulationPlan {
  ScenarioConfig base;
  std::vector<double> r_squared = {0.5};
  std::vector<double> phi_bar = {0.7};
  std::vector<double> p_bar = {0.5};

  /// The nine populations crossed with three response rates.
  void use_full_grid();
  /// Ordered by R^2, then phi_bar, then p_bar. Validates every cell.
  std::vector<ScenarioConfig> scenarios() const;
};

/// Settings of an imputation run on user data.
struct ImputeSettings {
  Method method = Method::BMRR;
  std::uint64_t seed = 20'181'015;
  double reg_threshold = 0.05;
  bool z_intercept = false;
  bool u_intercept = false;
  double population_size = 0.0;  // <= 0: sum of design weights
  std::string variance = "hajek-rosen";  // hajek-rosen | stratified-srs | none
  std::size_t bootstrap = 0;
  std::size_t threads = 0;
};

/// Parsers for the JSON config files. Unknown keys and ill-typed values raise
/// ValidationError; absent keys keep their defaults.
SimulationPlan parse_simulation_config(const std::string& json_text);
ApplicationConfig parse_application_config(const std::string& json_text);
ImputeSettings parse_impute_config(const std::string& json_text);

std::string read_text_file(const std::string& path);

}  // namespace zimpute
