#include "zimpute/simlab.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "zimpute/design.hpp"
#include "zimpute/errors.hpp"
#include "zimpute/model.hpp"
#include "zimpute/parallel.hpp"
#include "zimpute/variance.hpp"

namespace zimpute {
namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double weighted_mean_expit(double b0, const Vector& index, const Vector& weights) {
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < index.size(); ++i) {
    const double w = weights.size() ? weights[i] : 1.0;
    num += w * expit(b0 + index[i]);
    den += w;
  }
  return num / den;
}

double draw_residual(ResidualFamily family, double sigma, RandomStream& stream) {
  switch (family) {
    case ResidualFamily::Normal:
      return stream.normal(0.0, sigma);
    case ResidualFamily::Gamma: {
      const double g = stream.gamma(2.0, 1.0);
      return (g - 2.0) / std::sqrt(2.0) * sigma;
    }
    case ResidualFamily::Lognormal: {
      constexpr double s = 0.5;
      const double mean = std::exp(s * s / 2.0);
      const double sd = std::sqrt((std::exp(s * s) - 1.0) * std::exp(s * s));
      return (stream.lognormal(0.0, s) - mean) / sd * sigma;
    }
  }
  return 0.0;
}

Vector with_intercept(double b0, const std::array<double, 4>& slopes) {
  Vector c(5);
  c << b0, slopes[0], slopes[1], slopes[2], slopes[3];
  return c;
}

double smallest_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Logistic fit of the response indicators on u, as a mean fitted probability.
double mean_response_fit(const SampleFrame& sample) {
  SampleColumns c;
  c.y.resize(static_cast<Eigen::Index>(sample.size()));
  for (std::size_t i = 0; i < sample.size(); ++i) {
    c.y[static_cast<Eigen::Index>(i)] = sample.responded(i) ? 1.0 : 0.0;
  }
  c.z = sample.u();
  c.u = sample.u();
  c.v = sample.v();
  c.pi = sample.pi();
  c.population_size = sample.population_size();
  const PhiModel fit = fit_phi(SampleFrame::build(std::move(c)));
  return fit.phi.mean();
}

}  // namespace

std::string_view family_name(ResidualFamily family) {
  switch (family) {
    case ResidualFamily::Normal: return "normal";
    case ResidualFamily::Gamma: return "gamma";
    case ResidualFamily::Lognormal: return "lognormal";
  }
  return "?";
}

ResidualFamily parse_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (auto f : {ResidualFamily::Normal, ResidualFamily::Gamma, ResidualFamily::Lognormal}) {
    if (lower == family_name(f)) return f;
  }
  throw ValidationError("unknown residual family '" + std::string(name) + "'");
}

void ScenarioConfig::validate() const {
  if (population_size < 2) throw ValidationError("population size must be at least 2");
  if (sample_size < 2 || sample_size > population_size) {
    throw ValidationError("sample size must lie in [2, N]");
  }
  if (replicates < 1) throw ValidationError("replicates must be at least 1");
  if (!(r_squared > 0.0 && r_squared < 1.0)) {
    throw ValidationError("R^2 target must lie in (0, 1)");
  }
  if (!(phi_bar > 0.0 && phi_bar < 1.0)) throw ValidationError("phi target must lie in (0, 1)");
  if (!(p_bar > 0.0 && p_bar <= 1.0)) throw ValidationError("response target must lie in (0, 1]");
  if (!(gamma_shape > 0.0 && gamma_scale > 0.0)) {
    throw ValidationError("gamma shape and scale must be positive");
  }
  for (double alpha : quantile_levels) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("quantile levels must lie in (0, 1)");
  }
  if (methods.empty()) throw ValidationError("no imputation method selected");
  if (reg_threshold && !(*reg_threshold > 0.0)) {
    throw ValidationError("regularization threshold must be positive");
  }
}

double calibrate_intercept(double target, const Vector& slopes, const Matrix& covariates,
                           const Vector& weights) {
  if (!(target > 0.0 && target < 1.0)) throw ValidationError("target must lie in (0, 1)");
  if (covariates.cols() != slopes.size()) {
    throw ValidationError("slopes do not match the covariates");
  }
  if (weights.size() && weights.size() != covariates.rows()) {
    throw ValidationError("weights do not match the covariates");
  }
  const Vector index = covariates * slopes;
  double lo = -60.0 - index.maxCoeff();
  double hi = 60.0 - index.minCoeff();
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (weighted_mean_expit(mid, index, weights) < target ? lo : hi) = mid;
  }
  const double b0 = 0.5 * (lo + hi);
  if (std::abs(weighted_mean_expit(b0, index, weights) - target) > 1e-3) {
    throw ConvergenceError("intercept calibration did not reach the target");
  }
  return b0;
}

double solve_sigma2(const Vector& linear_part, double r_squared) {
  if (!(r_squared > 0.0 && r_squared < 1.0)) {
    throw ValidationError("unreachable R^2 target");
  }
  if (linear_part.size() < 2) throw ValidationError("unreachable R^2 target: too few units");
  const double mean = linear_part.mean();
  const double var = (linear_part.array() - mean).square().sum() /
                     static_cast<double>(linear_part.size());
  if (!(var > 0.0)) throw ValidationError("unreachable R^2 target: constant linear predictor");
  return var * (1.0 - r_squared) / r_squared;
}

SimPopulation generate_population(const ScenarioConfig& config, RandomStream& stream) {
  config.validate();
  const auto n_pop = static_cast<Eigen::Index>(config.population_size);
  Matrix x(n_pop, 4);
  for (Eigen::Index i = 0; i < n_pop; ++i) {
    for (int k = 0; k < 4; ++k) x(i, k) = stream.gamma(config.gamma_shape, config.gamma_scale);
  }
  Vector a_slopes(4);
  a_slopes << config.a[1], config.a[2], config.a[3], config.a[4];
  const Vector lp = (x * a_slopes).array() + config.a[0];

  const Vector b = Eigen::Map<const Vector>(config.phi_slopes.data(), 4);
  const double phi_intercept = calibrate_intercept(config.phi_bar, b, x);
  const Vector phi = ((x * b).array() + phi_intercept).unaryExpr(&expit);

  std::vector<std::uint8_t> eta(config.population_size);
  std::vector<double> nonzero_lp;
  for (Eigen::Index i = 0; i < n_pop; ++i) {
    eta[static_cast<std::size_t>(i)] = stream.bernoulli(phi[i]) ? 1 : 0;
    if (eta[static_cast<std::size_t>(i)]) nonzero_lp.push_back(lp[i]);
  }
  const double sigma2 =
      solve_sigma2(Eigen::Map<const Vector>(nonzero_lp.data(),
                                            static_cast<Eigen::Index>(nonzero_lp.size())),
                   config.r_squared);
  const double sigma = std::sqrt(sigma2);

  PopulationColumns cols;
  cols.y = Vector::Zero(n_pop);
  for (Eigen::Index i = 0; i < n_pop; ++i) {
    if (!eta[static_cast<std::size_t>(i)]) continue;
    cols.y[i] = lp[i] + draw_residual(config.family, sigma, stream);
    // A non-zero draw landing on exact zero would be read as a structural zero.
    if (cols.y[i] == 0.0) cols.y[i] = std::numeric_limits<double>::denorm_min();
  }
  cols.z.resize(n_pop, 5);
  cols.z.col(0).setOnes();
  cols.z.rightCols(4) = x;
  cols.u = cols.z;
  cols.v = Vector::Ones(n_pop);
  SimPopulation pop{PopulationFrame::build(std::move(cols)), phi, {}, {}, std::move(eta),
                    sigma2, phi_intercept, 0.0, config.a};

  pop.pi = capped_proportional(x.col(0), static_cast<double>(config.sample_size));
  const Vector c = Eigen::Map<const Vector>(config.response_slopes.data(), 4);
  if (config.p_bar >= 1.0) {
    pop.response_intercept = std::numeric_limits<double>::infinity();
    pop.response = Vector::Ones(n_pop);
  } else {
    pop.response_intercept = calibrate_intercept(config.p_bar, c, x, pop.pi);
    pop.response = ((x * c).array() + pop.response_intercept).unaryExpr(&expit);
  }
  return pop;
}

SampleFrame generate_response(const SampleFrame& sample, const Vector& c, RandomStream& stream) {
  if (c.size() != sample.u().cols()) {
    throw ValidationError("response coefficients do not match u");
  }
  const Vector index = sample.u() * c;
  std::vector<std::uint8_t> r(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double idx = index[static_cast<Eigen::Index>(i)];
    const double p = std::isinf(idx) ? (idx > 0 ? 1.0 : 0.0) : expit(idx);
    r[i] = stream.bernoulli(p) ? 1 : 0;
  }
  return sample.with_response(std::move(r));
}

double auto_threshold(const SimPopulation& population) {
  const Matrix& z = population.frame.z();
  const Matrix& u = population.frame.u();
  const Vector& v = population.frame.v();
  Matrix gz = Matrix::Zero(z.cols(), z.cols());
  Matrix gu = Matrix::Zero(u.cols(), u.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double base = population.pi[i] * population.response[i] * population.phi[i];
    gz.noalias() += (base / v[i]) * z.row(i).transpose() * z.row(i);
    gu.noalias() += (base * (1.0 - population.phi[i])) * u.row(i).transpose() * u.row(i);
  }
  const double n_pop = static_cast<double>(z.rows());
  return 0.5 * std::min(smallest_eigenvalue(gz / n_pop), smallest_eigenvalue(gu / n_pop));
}

const EstimandRow& MonteCarloTable::row(Method method, const std::string& estimand) const {
  for (const auto& r : rows) {
    if (r.method == method && r.estimand == estimand) return r;
  }
  throw ValidationError("no row for " + std::string(method_name(method)) + " / " + estimand);
}

MonteCarloTable run_monte_carlo(const ScenarioConfig& config) {
  config.validate();
  RandomStream pop_stream(config.seed, 0);
  const SimPopulation population = generate_population(config, pop_stream);
  return run_monte_carlo(config, population);
}

MonteCarloTable run_monte_carlo(const ScenarioConfig& config, const SimPopulation& population) {
  config.validate();
  const PopulationFrame& frame = population.frame;
  const std::size_t n_methods = config.methods.size();
  const std::size_t n_levels = config.quantile_levels.size();

  MonteCarloTable table;
  table.config = config;
  table.sigma2 = population.sigma2;
  table.reg_threshold = config.reg_threshold ? *config.reg_threshold : auto_threshold(population);
  table.population_total = frame.y().sum();
  for (double alpha : config.quantile_levels) {
    const double t = population_quantile(frame.y(), alpha);
    table.quantiles.push_back(t);
    table.population_cdf.push_back(population_cdf(frame.y(), t));
  }
  const Vector c = with_intercept(population.response_intercept, config.response_slopes);
  const double a = table.reg_threshold;

  const ConditionalPoissonSampler sampler(population.pi, config.sample_size);
  const RandomStream base(config.seed, 1);
  std::vector<std::optional<ReplicateOutcome>> outcomes(config.replicates);
  std::vector<std::string> errors(config.replicates);
  parallel_for(config.replicates, thread_count(config.threads), [&](std::size_t k) {
    try {
      RandomStream rs = base.child(k);
      const auto members = sampler.draw(rs);
      Vector pi(static_cast<Eigen::Index>(members.size()));
      for (std::size_t j = 0; j < members.size(); ++j) {
        pi[static_cast<Eigen::Index>(j)] = population.pi[static_cast<Eigen::Index>(members[j])];
      }
      const SampleFrame full = sample_from_population(frame, members, pi);
      const SampleFrame sample =
          std::isinf(population.response_intercept)
              ? full
              : generate_response(full, c, rs);
      const FittedModel model = fit_model(sample, a);

      ReplicateOutcome out;
      out.index = k;
      const Vector beta = Eigen::Map<const Vector>(population.beta.data(), 5);
      out.coefficient_error = (model.regression.b_ar - beta).squaredNorm();
      out.regularized = model.regression.regularization_active;
      out.response_rate =
          static_cast<double>(sample.respondent_count()) / static_cast<double>(sample.size());
      out.mean_p_hat = sample.respondent_count() == sample.size() ? 1.0 : mean_response_fit(sample);
      out.total.resize(n_methods);
      out.cdf.assign(n_methods, std::vector<double>(n_levels));
      out.variance.assign(n_methods, kNaN);
      for (std::size_t m = 0; m < n_methods; ++m) {
        const Method method = config.methods[m];
        RandomStream ms = rs.child(static_cast<std::uint64_t>(method) + 1);
        const ImputationResult result = impute(method, sample, model, ms);
        const Vector values = completed_values(sample, result);
        out.total[m] = sample.d().dot(values);
        for (std::size_t l = 0; l < n_levels; ++l) {
          out.cdf[m][l] = hajek_cdf(sample, values, table.quantiles[l]);
        }
        if (config.estimate_variance) {
          out.variance[m] =
              estimate_variance(method, sample, model, result, VarianceDesign::hajek_rosen()).total;
        }
      }
      outcomes[k] = std::move(out);
    } catch (const Error& e) {
      errors[k] = "replicate " + std::to_string(k) + ": " + e.what();
    }
  });

  std::vector<const ReplicateOutcome*> done;
  for (std::size_t k = 0; k < config.replicates; ++k) {
    if (outcomes[k]) {
      done.push_back(&*outcomes[k]);
    } else {
      table.failures.push_back(errors[k]);
    }
  }
  table.completed = done.size();
  table.failed = table.failures.size();
  if (static_cast<double>(table.failed) > 0.01 * static_cast<double>(config.replicates) ||
      done.empty()) {
    throw Error(std::to_string(table.failed) + " of " + std::to_string(config.replicates) +
                " replicates failed; first: " + table.failures.front());
  }

  const double count = static_cast<double>(done.size());
  for (const auto* o : done) {
    table.mean_response_rate += o->response_rate / count;
    table.mean_p_hat += o->mean_p_hat / count;
    table.mean_coefficient_error += o->coefficient_error / count;
    table.regularized_share += (o->regularized ? 1.0 : 0.0) / count;
  }

  auto summarize = [&](Method method, std::string estimand, double truth, auto value,
                       bool with_variance, std::size_t m) {
    EstimandRow row;
    row.method = method;
    row.estimand = std::move(estimand);
    row.truth = truth;
    double var_sum = 0.0;
    std::size_t covered = 0;
    for (const auto* o : done) {
      const double x = value(*o);
      row.mean += x / count;
      row.rb += 100.0 * (x - truth) / truth / count;
      row.mse += (x - truth) * (x - truth) / count;
      if (with_variance) {
        const double v = o->variance[m];
        var_sum += v;
        if (std::abs(x - truth) <= 1.96 * std::sqrt(std::max(v, 0.0))) ++covered;
      }
    }
    if (with_variance) {
      row.mean_variance = var_sum / count;
      row.variance_rb = 100.0 * (row.mean_variance - row.mse) / row.mse;
      row.coverage = static_cast<double>(covered) / count;
    }
    table.rows.push_back(std::move(row));
  };

  for (std::size_t m = 0; m < n_methods; ++m) {
    summarize(config.methods[m], "total", table.population_total,
              [m](const ReplicateOutcome& o) { return o.total[m]; }, config.estimate_variance, m);
  }
  for (std::size_t l = 0; l < n_levels; ++l) {
    char label[32];
    std::snprintf(label, sizeof label, "F(%g)", config.quantile_levels[l]);
    for (std::size_t m = 0; m < n_methods; ++m) {
      summarize(config.methods[m], label, table.population_cdf[l],
                [m, l](const ReplicateOutcome& o) { return o.cdf[m][l]; }, false, m);
    }
  }
  const auto bmrr = std::find(config.methods.begin(), config.methods.end(), Method::BMRR);
  if (bmrr != config.methods.end()) {
    for (auto& row : table.rows) {
      row.re = row.mse / table.row(Method::BMRR, row.estimand).mse;
    }
  }
  if (config.keep_replicates) {
    for (const auto* o : done) table.replicates.push_back(*o);
  }
  return table;
}

void ApplicationConfig::validate() const {
  const std::size_t h = stratum_population.size();
  if (h == 0) throw ValidationError("no strata configured");
  if (stratum_sample.size() != h || response_rates.size() != h) {
    throw ValidationError("strata configuration lengths differ");
  }
  for (std::size_t k = 0; k < h; ++k) {
    if (stratum_sample[k] < 2 || stratum_sample[k] > stratum_population[k]) {
      throw ValidationError("stratum " + std::to_string(k) + ": sample size must lie in [2, N_h]");
    }
    if (!(response_rates[k] > 0.0 && response_rates[k] <= 1.0)) {
      throw ValidationError("stratum " + std::to_string(k) + ": response rate must lie in (0, 1]");
    }
  }
  if (cells_per_stratum < 1) throw ValidationError("at least one imputation cell per stratum");
  if (!(domain_rate > 0.0 && domain_rate < 1.0)) {
    throw ValidationError("domain rate must lie in (0, 1)");
  }
  if (bootstrap < 2) throw ValidationError("bootstrap needs at least two replicates");
  if (!(reg_threshold > 0.0)) throw ValidationError("regularization threshold must be positive");
}

ApplicationPopulation generate_application_population(const ApplicationConfig& config,
                                                       RandomStream& stream) {
  config.validate();
  const std::size_t n_strata = config.stratum_population.size();
  const std::size_t g = config.cells_per_stratum;
  const std::size_t n_pop = std::accumulate(config.stratum_population.begin(),
                                            config.stratum_population.end(), std::size_t{0});
  const auto n = static_cast<Eigen::Index>(n_pop);
  PopulationColumns cols;
  cols.y = Vector::Zero(n);
  cols.z = Matrix::Zero(n, static_cast<Eigen::Index>(n_strata * g));
  cols.u.resize(n, 4);
  cols.v = Vector::Ones(n);
  cols.stratum.resize(n_pop);
  std::vector<int> cell(n_pop);
  std::vector<std::size_t> offsets;
  const double base_logit = std::log(config.domain_rate / (1.0 - config.domain_rate));

  std::size_t start = 0;
  for (std::size_t h = 0; h < n_strata; ++h) {
    const std::size_t nh = config.stratum_population[h];
    const double log_centre = std::log(2500.0) - 0.55 * static_cast<double>(h);
    std::vector<double> z1(nh);
    for (std::size_t k = 0; k < nh; ++k) {
      const auto i = static_cast<Eigen::Index>(start + k);
      z1[k] = std::exp(stream.normal(log_centre, 0.8));
      const double z2 = z1[k] * std::exp(stream.normal(0.0, 0.25));
      const double z3 = 0.8 * z2 * std::exp(stream.normal(0.0, 0.4));
      const double y0 = z2 * std::exp(stream.normal(0.0, 0.35));
      const double phi = expit(base_logit + 0.4 * (std::log(z1[k]) - log_centre));
      cols.y[i] = stream.bernoulli(phi) ? y0 : 0.0;
      cols.u.row(i) << 1.0, z1[k] / 1000.0, z2 / 1000.0, z3 / 1000.0;
      cols.stratum[start + k] = static_cast<int>(h);
    }
    std::vector<std::size_t> order(nh);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return z1[l] < z1[r]; });
    offsets.push_back(h * g);
    for (std::size_t rank = 0; rank < nh; ++rank) {
      const std::size_t cell_index = std::min(g - 1, rank * g / nh);
      const std::size_t unit = start + order[rank];
      const auto col = static_cast<Eigen::Index>(h * g + cell_index);
      cols.z(static_cast<Eigen::Index>(unit), col) = 1.0;
      cell[unit] = static_cast<int>(h * g + cell_index);
    }
    start += nh;
  }
  return {PopulationFrame::build(std::move(cols)), std::move(cell), std::move(offsets)};
}

Vector application_estimates(const SampleFrame& sample, const ApplicationPopulation& population,
                             const ApplicationConfig& config, RandomStream& stream,
                             bool* regularized) {
  const std::size_t g = config.cells_per_stratum;
  const std::size_t k_grid = config.t_grid.size();
  const PhiModel phi = fit_phi(sample);

  std::map<int, std::vector<std::size_t>> rows_of;
  for (std::size_t i = 0; i < sample.size(); ++i) rows_of[sample.stratum()[i]].push_back(i);

  std::array<Vector, 2> completed = {Vector::Zero(static_cast<Eigen::Index>(sample.size())),
                                     Vector::Zero(static_cast<Eigen::Index>(sample.size()))};
  for (const auto& [h, rows] : rows_of) {
    const auto nh = static_cast<Eigen::Index>(rows.size());
    const auto offset =
        static_cast<Eigen::Index>(population.stratum_cells_offset.at(static_cast<std::size_t>(h)));
    SampleColumns c;
    c.y.resize(nh);
    c.z.resize(nh, static_cast<Eigen::Index>(g));
    c.u.resize(nh, sample.u().cols());
    c.v.resize(nh);
    c.pi.resize(nh);
    c.omega.resize(nh);
    c.responded.resize(rows.size());
    c.stratum.assign(rows.size(), h);
    PhiModel sub_phi = phi;
    sub_phi.phi.resize(nh);
    for (Eigen::Index k = 0; k < nh; ++k) {
      const std::size_t i = rows[static_cast<std::size_t>(k)];
      const auto ii = static_cast<Eigen::Index>(i);
      c.y[k] = sample.responded(i) ? sample.y(i) : 0.0;
      c.z.row(k) = sample.z().row(ii).segment(offset, static_cast<Eigen::Index>(g));
      c.u.row(k) = sample.u().row(ii);
      c.v[k] = sample.v()[ii];
      c.pi[k] = sample.pi()[ii];
      c.omega[k] = sample.omega()[ii];
      c.responded[static_cast<std::size_t>(k)] = sample.responded(i) ? 1 : 0;
      sub_phi.phi[k] = phi.phi[ii];
    }
    const SampleFrame sub = SampleFrame::build(std::move(c));
    const RegularizedFit fit = fit_regression(sub, sub_phi, config.reg_threshold);
    if (regularized && fit.regularization_active) *regularized = true;
    const ResidualPool pool = build_residual_pool(sub, fit);
    RandomStream bs = stream.child(2 * static_cast<std::uint64_t>(h));
    RandomStream rs = stream.child(2 * static_cast<std::uint64_t>(h) + 1);
    const std::array<Vector, 2> values = {
        completed_values(sub, impute_bmrr(sub, sub_phi, fit, pool, bs)),
        completed_values(sub, impute_mrr(sub, sub_phi, fit, pool, rs))};
    for (std::size_t m = 0; m < 2; ++m) {
      for (Eigen::Index k = 0; k < nh; ++k) {
        completed[m][static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)])] = values[m][k];
      }
    }
  }

  const auto width = static_cast<Eigen::Index>(1 + k_grid);
  Vector out(2 * width);
  for (std::size_t m = 0; m < 2; ++m) {
    const Eigen::Index base = static_cast<Eigen::Index>(m) * width;
    out[base] = sample.d().dot(completed[m]);
    for (std::size_t t = 0; t < k_grid; ++t) {
      out[base + 1 + static_cast<Eigen::Index>(t)] =
          hajek_cdf(sample, completed[m], config.t_grid[t]);
    }
  }
  return out;
}

ApplicationReport run_application_scenario(const ApplicationConfig& config) {
  config.validate();
  RandomStream pop_stream(config.seed, 0);
  const ApplicationPopulation population = generate_application_population(config, pop_stream);
  const PopulationFrame& frame = population.frame;

  ApplicationReport report;
  report.config = config;
  report.population_total = frame.y().sum();
  for (double t : config.t_grid) report.population_cdf.push_back(population_cdf(frame.y(), t));

  std::map<int, std::size_t> sizes;
  for (std::size_t h = 0; h < config.stratum_sample.size(); ++h) {
    sizes[static_cast<int>(h)] = config.stratum_sample[h];
  }
  RandomStream sample_stream(config.seed, 1);
  const auto members = draw_stratified_srs(frame.stratum(), sizes, sample_stream);
  Vector pi(static_cast<Eigen::Index>(members.size()));
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto h = static_cast<std::size_t>(frame.stratum()[members[k]]);
    pi[static_cast<Eigen::Index>(k)] = static_cast<double>(config.stratum_sample[h]) /
                                       static_cast<double>(config.stratum_population[h]);
  }
  const SampleFrame drawn = sample_from_population(frame, members, pi);

  // Uniform response within strata: a fixed number of respondents per stratum.
  RandomStream response_stream(config.seed, 2);
  std::vector<std::uint8_t> r(drawn.size(), 0);
  std::map<int, std::vector<std::size_t>> rows_of;
  for (std::size_t i = 0; i < drawn.size(); ++i) rows_of[drawn.stratum()[i]].push_back(i);
  report.respondents.assign(config.stratum_sample.size(), 0);
  for (auto& [h, rows] : rows_of) {
    const auto hh = static_cast<std::size_t>(h);
    const auto nr = static_cast<std::size_t>(
        std::lround(config.response_rates[hh] * static_cast<double>(rows.size())));
    for (std::size_t k = 0; k < nr; ++k) {
      const std::size_t j = k + response_stream.uniform_index(rows.size() - k);
      std::swap(rows[k], rows[j]);
      r[rows[k]] = 1;
    }
    report.respondents[hh] = nr;
  }
  const SampleFrame sample = drawn.with_response(std::move(r)).with_omega(drawn.d());

  RandomStream impute_stream(config.seed, 3);
  const Vector point =
      application_estimates(sample, population, config, impute_stream, &report.regularized);
  const auto width = static_cast<Eigen::Index>(1 + config.t_grid.size());
  for (std::size_t m = 0; m < 2; ++m) {
    const Eigen::Index base = static_cast<Eigen::Index>(m) * width;
    report.total[m] = point[base];
    report.cdf[m].assign(point.data() + base + 1, point.data() + base + width);
  }

  const RandomStream boot_stream(config.seed, 4);
  const BootstrapResult boot = bootstrap_variance(
      sample,
      [&](const SampleFrame& s, RandomStream& rs) {
        return application_estimates(s, population, config, rs);
      },
      config.bootstrap, boot_stream, config.threads);
  report.bootstrap_variance[0] = boot.variance.head(width);
  report.bootstrap_variance[1] = boot.variance.tail(width);
  report.re = (report.bootstrap_variance[0].array() / report.bootstrap_variance[1].array()).matrix();
  return report;
}

}  // namespace zimpute
