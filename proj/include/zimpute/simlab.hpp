#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "zimpute/frames.hpp"
#include "zimpute/impute.hpp"
#include "zimpute/random.hpp"

namespace zimpute {

enum class ResidualFamily { Normal, Gamma, Lognormal };

std::string_view family_name(ResidualFamily family);
ResidualFamily parse_family(std::string_view name);

/// One cell of the simulation grid.
struct ScenarioConfig {
  std::size_t population_size = 10'000;
  std::size_t sample_size = 500;
  std::size_t replicates = 500;
  std::array<double, 5> a = {30.0, 0.7, 0.7, 0.7, 0.7};  // intercept, slopes
  double r_squared = 0.5;
  double phi_bar = 0.7;
  std::array<double, 4> phi_slopes = {-0.05, -0.05, -0.05, -0.05};
  double p_bar = 0.5;
  std::array<double, 4> response_slopes = {0.02, 0.02, 0.02, 0.02};
  double gamma_shape = 2.0;
  double gamma_scale = 5.0;
  ResidualFamily family = ResidualFamily::Normal;
  std::vector<double> quantile_levels = {0.5, 0.75, 0.9};
  std::vector<Method> methods = {Method::RR, Method::BRR, Method::MRR, Method::BMRR};
  std::uint64_t seed = 20'181'015;
  /// Regularization threshold; unset: half the smallest eigenvalue of the
  /// expected Gram matrices of the design (see `auto_threshold`).
  std::optional<double> reg_threshold;
  bool estimate_variance = true;
  bool keep_replicates = false;
  std::size_t threads = 0;

  void validate() const;
};

/// Population of the simulation study with its generating quantities.
struct SimPopulation {
  PopulationFrame frame;  // z = u = (1, z1..z4), v = 1
  Vector phi;             // P(eta = 1)
  Vector response;        // P(r = 1)
  Vector pi;              // inclusion probabilities
  std::vector<std::uint8_t> eta;
  double sigma2 = 0.0;
  double phi_intercept = 0.0;
  double response_intercept = 0.0;
  std::array<double, 5> beta{};  // regression coefficients of the non-zero part
};

/// Intercept b0 such that the (weighted) mean of expit(b0 + x^T slopes) is
/// within 1e-3 of target. `weights` empty means equal weights.
double calibrate_intercept(double target, const Vector& slopes, const Matrix& covariates,
                           const Vector& weights = {});

/// Residual variance giving the target R^2 on the non-zero units.
double solve_sigma2(const Vector& linear_part, double r_squared);

SimPopulation generate_population(const ScenarioConfig& config, RandomStream& stream);

/// r_i ~ Bernoulli(expit(u_i^T c)); the returned frame carries the pattern.
SampleFrame generate_response(const SampleFrame& sample, const Vector& c, RandomStream& stream);

/// a = min(lambda_min(G_z), lambda_min(G_u)) / 2, with the design expectations
/// G_z = N^-1 sum_U pi p phi z z^T and G_u = N^-1 sum_U pi p phi (1 - phi) u u^T.
double auto_threshold(const SimPopulation& population);

/// Per replicate outcome, stored when `keep_replicates` is set.
struct ReplicateOutcome {
  std::size_t index = 0;
  std::vector<double> total;                 // per method
  std::vector<std::vector<double>> cdf;      // per method, per quantile level
  std::vector<double> variance;              // per method; NaN when not estimated
  double coefficient_error = 0.0;            // ||B_ar - beta||^2
  double response_rate = 0.0;
  double mean_p_hat = 0.0;
  bool regularized = false;
};

struct EstimandRow {
  Method method = Method::BMRR;
  std::string estimand;  // "total" or "F(alpha)"
  double truth = 0.0;
  double mean = 0.0;
  double rb = 0.0;   // percent
  double mse = 0.0;
  double re = std::numeric_limits<double>::quiet_NaN();
  double mean_variance = std::numeric_limits<double>::quiet_NaN();
  double variance_rb = std::numeric_limits<double>::quiet_NaN();  // percent, vs this run's MSE
  double coverage = std::numeric_limits<double>::quiet_NaN();
};

struct MonteCarloTable {
  ScenarioConfig config;
  double reg_threshold = 0.0;
  double sigma2 = 0.0;
  double population_total = 0.0;
  std::vector<double> quantiles;      // t_alpha per level
  std::vector<double> population_cdf;  // F_N(t_alpha)
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::vector<std::string> failures;
  double mean_response_rate = 0.0;
  double mean_p_hat = 0.0;
  double mean_coefficient_error = 0.0;
  double regularized_share = 0.0;
  std::vector<EstimandRow> rows;
  std::vector<ReplicateOutcome> replicates;

  const EstimandRow& row(Method method, const std::string& estimand) const;
};

/// Runs the replicates of one scenario. Replicate k uses child k of stream
/// (seed, 1); the population is drawn from stream (seed, 0). Aborts when more
/// than 1% of the replicates fail.
MonteCarloTable run_monte_carlo(const ScenarioConfig& config);

/// Same, on an already generated population.
MonteCarloTable run_monte_carlo(const ScenarioConfig& config, const SimPopulation& population);

/// Synthetic stratified survey with a zero-inflated domain variable.
struct ApplicationConfig {
  std::vector<std::size_t> stratum_population = {463, 1500, 3000, 6000, 9993};
  std::vector<std::size_t> stratum_sample = {57, 80, 100, 120, 145};
  std::vector<double> response_rates = {0.77, 0.70, 0.63, 0.57, 0.52};
  std::size_t cells_per_stratum = 3;
  double domain_rate = 0.8;
  std::vector<double> t_grid = {300, 700, 1000, 2000, 5000, 8000, 10000};
  std::size_t bootstrap = 1000;
  double reg_threshold = 0.05;
  std::uint64_t seed = 20'181'015;
  std::size_t threads = 0;

  void validate() const;
};

struct ApplicationPopulation {
  PopulationFrame frame;  // z: cell indicators, u = (1, z1, z2, z3), v = 1
  std::vector<int> cell;  // global cell label per unit
  std::vector<std::size_t> stratum_cells_offset;  // first cell column per stratum
};

ApplicationPopulation generate_application_population(const ApplicationConfig& config,
                                                      RandomStream& stream);

struct ApplicationReport {
  ApplicationConfig config;
  double population_total = 0.0;
  std::vector<double> population_cdf;  // over t_grid
  std::vector<std::size_t> respondents;  // per stratum
  bool regularized = false;
  // index 0: BMRR, index 1: MRR
  std::array<double, 2> total{};
  std::array<std::vector<double>, 2> cdf;
  std::array<Vector, 2> bootstrap_variance;  // total, then the cdf grid
  Vector re;  // BMRR over MRR, same layout
};

/// BMRR and MRR estimates on one stratified sample; estimates laid out as
/// [total, F(t_1), ..., F(t_K)] for BMRR followed by the same for MRR.
Vector application_estimates(const SampleFrame& sample, const ApplicationPopulation& population,
                             const ApplicationConfig& config, RandomStream& stream,
                             bool* regularized = nullptr);

ApplicationReport run_application_scenario(const ApplicationConfig& config);

}  // namespace zimpute
