#include <doctest.h>

#include "helpers.hpp"
#include "zimpute/design.hpp"
#include "zimpute/errors.hpp"
#include "zimpute/model.hpp"
#include "zimpute/simlab.hpp"

using namespace zimpute;
using namespace testing;

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Bitwise agreement, treating two NaNs as equal.
bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

SampleFrame full_sample(const SimPopulation& pop, std::size_t n, RandomStream& rs) {
  DesignSpec spec;
  spec.target_size = n;
  return draw_sample(pop.frame, spec, pop.pi, rs);
}

}  // namespace

TEST_CASE("population generator: covariate means, non-zero share and R^2") {
  ScenarioConfig c;
  RandomStream rs(c.seed, 0);
  const auto pop = generate_population(c, rs);
  const Matrix& z = pop.frame.z();
  const double sd = std::sqrt(2.0) * 5.0 / std::sqrt(double(z.rows()));
  for (Eigen::Index k = 1; k < 5; ++k) CHECK(std::abs(z.col(k).mean() - 10.0) < 3 * sd);

  const Vector& y = pop.frame.y();
  const double nonzero = (y.array() != 0.0).cast<double>().mean();
  CHECK(std::abs(nonzero - c.phi_bar) <= 0.02);

  // Refit least squares on the non-zero units.
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (pop.eta[static_cast<std::size_t>(i)]) rows.push_back(i);
  }
  Matrix x(static_cast<Eigen::Index>(rows.size()), 5);
  Vector t(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    x.row(static_cast<Eigen::Index>(k)) = z.row(rows[k]);
    t[static_cast<Eigen::Index>(k)] = y[rows[k]];
  }
  const Vector beta = x.colPivHouseholderQr().solve(t);
  const double ss_res = (t - x * beta).squaredNorm();
  const double ss_tot = (t.array() - t.mean()).square().sum();
  CHECK(std::abs(1.0 - ss_res / ss_tot - c.r_squared) <= 0.02);
  CHECK(pop.sigma2 > 0.0);
  CHECK(std::abs(pop.pi.sum() - double(c.sample_size)) <= 1e-6);
}

TEST_CASE("population generator: residual families keep mean 0 and variance sigma^2") {
  for (ResidualFamily f : {ResidualFamily::Gamma, ResidualFamily::Lognormal}) {
    ScenarioConfig c;
    c.family = f;
    RandomStream rs(c.seed, 0);
    const auto pop = generate_population(c, rs);
    Vector eps(pop.frame.size());
    Eigen::Index m = 0;
    for (Eigen::Index i = 0; i < eps.size(); ++i) {
      if (!pop.eta[static_cast<std::size_t>(i)]) continue;
      double mean = 0.0;
      for (int k = 0; k < 5; ++k) mean += pop.beta[static_cast<std::size_t>(k)] * pop.frame.z()(i, k);
      eps[m++] = pop.frame.y()[i] - mean;
    }
    eps.conservativeResize(m);
    const double sd = std::sqrt(pop.sigma2);
    CHECK(std::abs(eps.mean()) < 5 * sd / std::sqrt(double(m)));
    const double var = (eps.array() - eps.mean()).square().mean();
    CHECK(std::abs(var / pop.sigma2 - 1.0) < 0.15);
  }
  CHECK(parse_family("LogNormal") == ResidualFamily::Lognormal);
  CHECK_THROWS_AS(parse_family("cauchy"), ValidationError);
}

TEST_CASE("calibrate intercept: flat slopes and a covariate design") {
  const Matrix x = Matrix::Zero(10, 2);
  CHECK(std::abs(calibrate_intercept(0.5, Vector::Zero(2), x)) <= 1e-3 * 4);
  CHECK(std::abs(calibrate_intercept(0.75, Vector::Zero(2), x) - std::log(3.0)) <= 1e-3 * 6);

  RandomStream rs(3, 0);
  Matrix cov(5000, 4);
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    for (Eigen::Index k = 0; k < 4; ++k) cov(i, k) = rs.gamma(2.0, 5.0);
  }
  const Vector slopes = Vector::Constant(4, -0.05);
  const double b0 = calibrate_intercept(0.7, slopes, cov);
  const double mean = (cov * slopes).unaryExpr([b0](double s) { return expit(b0 + s); }).mean();
  CHECK(std::abs(mean - 0.7) <= 1e-3);
  CHECK_THROWS_AS(calibrate_intercept(1.2, slopes, cov), ValidationError);
}

TEST_CASE("solve sigma^2: identity and unreachable targets") {
  const Vector lp = vec({1, 2, 3, 4});
  const double var = (lp.array() - lp.mean()).square().mean();
  CHECK(solve_sigma2(lp, 0.5) == doctest::Approx(var));
  CHECK_THROWS(solve_sigma2(Vector::Constant(4, 2.0), 0.5));
  CHECK_THROWS(solve_sigma2(lp, 1.0));
}

TEST_CASE("response generator: target share, full and empty response") {
  ScenarioConfig c;
  RandomStream rs(c.seed, 0);
  const auto pop = generate_population(c, rs);
  RandomStream ds(5, 0);
  const auto sample = full_sample(pop, c.sample_size, ds);
  Vector coef(5);
  coef << pop.response_intercept, c.response_slopes[0], c.response_slopes[1],
      c.response_slopes[2], c.response_slopes[3];
  double share = 0.0;
  const int reps = 20;
  for (int k = 0; k < reps; ++k) {
    share += double(generate_response(sample, coef, ds).respondent_count()) / sample.size();
  }
  CHECK(std::abs(share / reps - 0.5) <= 0.03);

  Vector always = Vector::Zero(5);
  always[0] = std::numeric_limits<double>::infinity();
  CHECK(generate_response(sample, always, ds).respondent_count() == sample.size());
  Vector never = Vector::Zero(5);
  never[0] = -std::numeric_limits<double>::infinity();
  const auto none = generate_response(sample, never, ds);
  CHECK(none.respondent_count() == 0);
  CHECK_THROWS_AS(fit_model(none), Error);
}

TEST_CASE("config validation") {
  ScenarioConfig c;
  CHECK_NOTHROW(c.validate());
  c.r_squared = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ScenarioConfig{};
  c.replicates = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ScenarioConfig{};
  c.sample_size = c.population_size + 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("monte carlo: single replicate aggregation") {
  ScenarioConfig c;
  c.population_size = 400;
  c.sample_size = 80;
  c.replicates = 1;
  c.methods = {Method::BMRR};
  c.keep_replicates = true;
  const auto t = run_monte_carlo(c);
  REQUIRE(t.completed == 1);
  const auto& row = t.row(Method::BMRR, "total");
  const double est = t.replicates.at(0).total.at(0);
  CHECK(row.mean == est);
  CHECK(row.mse == doctest::Approx((est - t.population_total) * (est - t.population_total)));
  CHECK(row.rb == doctest::Approx(100.0 * (est - t.population_total) / t.population_total));
  CHECK(row.re == 1.0);
}

TEST_CASE("monte carlo: same seed gives a bit-identical table; RE of BMRR is 1") {
  ScenarioConfig c;
  c.population_size = 1000;
  c.sample_size = 100;
  c.replicates = 8;
  c.keep_replicates = true;
  const auto a = run_monte_carlo(c);
  c.threads = 3;
  const auto b = run_monte_carlo(c);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(a.rows[k].mean == b.rows[k].mean);
    CHECK(a.rows[k].mse == b.rows[k].mse);
    CHECK(same(a.rows[k].mean_variance, b.rows[k].mean_variance));
    CHECK(same(a.rows[k].coverage, b.rows[k].coverage));
    if (a.rows[k].method == Method::BMRR) CHECK(a.rows[k].re == 1.0);
  }
  for (std::size_t k = 0; k < a.replicates.size(); ++k) {
    CHECK(a.replicates[k].total == b.replicates[k].total);
  }
}

TEST_CASE("monte carlo: balanced methods beat their unbalanced versions on the total") {
  for (double r2 : {0.4, 0.5, 0.6}) {
    ScenarioConfig c;
    c.r_squared = r2;
    c.replicates = 300;
    c.estimate_variance = false;
    const auto t = run_monte_carlo(c);
    CHECK(t.row(Method::RR, "total").re >= t.row(Method::BRR, "total").re - 0.03);
    CHECK(t.row(Method::MRR, "total").re >= t.row(Method::BMRR, "total").re - 0.03);
  }
}

TEST_CASE("application: one cell per stratum reduces to stratum means") {
  ApplicationConfig c;
  c.cells_per_stratum = 1;
  RandomStream rs(c.seed, 0);
  const auto pop = generate_application_population(c, rs);
  CHECK(pop.frame.z().cols() == 5);
  // A stratum-level sample with the stratum indicators as u.
  const Matrix& z = pop.frame.z();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < pop.frame.size(); i += 37) rows.push_back(i);
  const auto n = static_cast<Eigen::Index>(rows.size());
  Vector y(n);
  Matrix zs(n, z.cols());
  RandomStream resp(4, 0);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(k)]);
    zs.row(k) = z.row(i);
    y[k] = resp.bernoulli(0.7) ? pop.frame.y()[i] : kNaN;
  }
  const auto s = sample_of(y, zs, zs, Vector::Ones(n), Vector::Constant(n, 0.05));
  // Threshold below every eigenvalue so the ratio form is exact.
  const auto model = fit_model(s, 1e-10);
  REQUIRE_FALSE(model.regression.regularization_active);
  for (Eigen::Index h = 0; h < zs.cols(); ++h) {
    double sum = 0.0;
    double count = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (zs(k, h) == 1.0 && std::isfinite(y[k]) && y[k] != 0.0) {
        sum += y[k];
        count += 1.0;
      }
    }
    CHECK(model.regression.b_ar[h] == doctest::Approx(sum / count).epsilon(1e-8));
  }
}

TEST_CASE("application: balanced and random estimates agree in expectation") {
  ApplicationConfig c;
  c.bootstrap = 30;
  std::vector<double> diff;
  std::vector<double> se;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    c.seed = seed;
    const auto r = run_application_scenario(c);
    diff.push_back(r.total[0] - r.total[1]);
    se.push_back(std::sqrt(r.bootstrap_variance[1][0]));
    CHECK(r.re.size() == static_cast<Eigen::Index>(1 + c.t_grid.size()));
    CHECK(r.respondents.size() == c.stratum_population.size());
  }
  for (std::size_t k = 0; k < diff.size(); ++k) CHECK(std::abs(diff[k]) < 3.0 * se[k]);
  double mean = 0.0;
  double avg_se = 0.0;
  for (std::size_t k = 0; k < diff.size(); ++k) {
    mean += diff[k] / diff.size();
    avg_se += se[k] / se.size();
  }
  CHECK(std::abs(mean) < 3.0 * avg_se / std::sqrt(double(diff.size())));
}

TEST_CASE("application config validation") {
  ApplicationConfig c;
  CHECK_NOTHROW(c.validate());
  c.bootstrap = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ApplicationConfig{};
  c.stratum_sample = {57, 80};
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
