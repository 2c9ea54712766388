#pragma once

#include <string>
#include <vector>

#include "zimpute/simlab.hpp"

namespace zimpute {

/// One row per (method, estimand); numbers at 17 significant digits. Each
/// comment line is written first, prefixed by "# ".
std::string monte_carlo_csv(const MonteCarloTable& table, const std::vector<std::string>& comments);

/// Aligned text at 2 decimals: relative bias and efficiency of the total and
/// of the distribution function, relative bias of the variance estimator and
/// coverage, one line per scenario.
std::string monte_carlo_text(const std::vector<MonteCarloTable>& tables);

/// File stem naming a scenario by its R^2, phi_bar and p_bar.
std::string scenario_stem(const ScenarioConfig& config);

/// Long format: one row per estimand (total, then F(t) over the grid).
std::string application_csv(const ApplicationReport& report,
                            const std::vector<std::string>& comments);

/// Wide text: estimates under both methods and the re row.
std::string application_text(const ApplicationReport& report);

}  // namespace zimpute
