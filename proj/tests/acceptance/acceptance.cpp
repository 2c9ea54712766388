// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Every number printed comes from a fixed seed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "../unit/helpers.hpp"
#include "zimpute/cube.hpp"
#include "zimpute/design.hpp"
#include "zimpute/errors.hpp"
#include "zimpute/impute.hpp"
#include "zimpute/model.hpp"
#include "zimpute/simlab.hpp"
#include "zimpute/variance.hpp"

using namespace zimpute;
using namespace testing;

namespace {

constexpr std::uint64_t kSeed = 20'181'015;

// Collects the sub-checks of one criterion and their details.
struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!ok || detail.size() < 20000) detail += (ok ? "    ok       " : "    not met  ") + what + "\n";
  }
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double variance_of(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

// The baseline scenario shared by criteria 1 to 3.
const MonteCarloTable& baseline_table() {
  static const MonteCarloTable table = [] {
    ScenarioConfig c;
    c.seed = kSeed;
    c.estimate_variance = false;
    return run_monte_carlo(c);
  }();
  return table;
}

const std::vector<Method> kAll = {Method::RR, Method::BRR, Method::MRR, Method::BMRR};

Verdict total_unbiasedness() {
  Verdict v;
  const auto& t = baseline_table();
  v.check(t.completed == 500, fmt("completed replicates %.0f of 500", double(t.completed)));
  for (Method m : kAll) {
    const double rb = t.row(m, "total").rb;
    v.check(std::abs(rb) <= 1.0,
            std::string(method_name(m)) + fmt(": RB(total) = %.3f%% (bound 1.0%%)", rb));
  }
  return v;
}

Verdict distribution_function() {
  Verdict v;
  const auto& t = baseline_table();
  for (Method m : {Method::MRR, Method::BMRR}) {
    const double rb = t.row(m, "F(0.5)").rb;
    v.check(std::abs(rb) <= 3.0,
            std::string(method_name(m)) + fmt(": RB(F(t_0.5)) = %.3f%% (within +-3%%)", rb));
  }
  for (Method m : {Method::RR, Method::BRR}) {
    const double rb = t.row(m, "F(0.5)").rb;
    v.check(rb < -4.0,
            std::string(method_name(m)) + fmt(": RB(F(t_0.5)) = %.3f%% (below -4%%)", rb));
  }
  return v;
}

Verdict balancing_efficiency() {
  Verdict v;
  const auto& t = baseline_table();
  const double re = t.row(Method::MRR, "total").re;
  v.check(re >= 1.05, fmt("RE(MRR) vs BMRR on the total = %.4f (at least 1.05)", re));

  // One fixed sample of the baseline scenario, re-imputed many times.
  ScenarioConfig c;
  c.seed = kSeed;
  RandomStream pop_stream(c.seed, 0);
  const auto pop = generate_population(c, pop_stream);
  RandomStream rs(c.seed, 7);
  DesignSpec spec;
  spec.target_size = c.sample_size;
  const SampleFrame full = draw_sample(pop.frame, spec, pop.pi, rs);
  Vector coef(5);
  coef << pop.response_intercept, c.response_slopes[0], c.response_slopes[1],
      c.response_slopes[2], c.response_slopes[3];
  const SampleFrame sample = generate_response(full, coef, rs);
  const auto model = fit_model(sample, auto_threshold(pop));
  const int reps = 10'000;
  std::vector<double> t_mrr(reps), t_bmrr(reps);
  const RandomStream root(c.seed, 8);
  for (int k = 0; k < reps; ++k) {
    RandomStream a = root.child(2 * static_cast<std::uint64_t>(k));
    RandomStream b = root.child(2 * static_cast<std::uint64_t>(k) + 1);
    t_mrr[k] = imputed_total(sample, impute(Method::MRR, sample, model, a));
    t_bmrr[k] = imputed_total(sample, impute(Method::BMRR, sample, model, b));
  }
  const double ratio = variance_of(t_bmrr) / variance_of(t_mrr);
  v.check(ratio <= 0.05,
          fmt("imputation variance BMRR / MRR over %.0f re-imputations = %.4f (at most 0.05)",
              reps, ratio));
  return v;
}

Verdict variance_calibration() {
  Verdict v;
  for (double r2 : {0.4, 0.5, 0.6}) {
    for (double phi : {0.6, 0.7, 0.8}) {
      ScenarioConfig c;
      c.seed = kSeed;
      c.r_squared = r2;
      c.phi_bar = phi;
      c.p_bar = 0.5;
      c.methods = {Method::MRR, Method::BMRR};
      RandomStream pop_stream(c.seed, 0);
      const auto pop = generate_population(c, pop_stream);

      ScenarioConfig var_run = c;
      var_run.replicates = 1000;
      var_run.estimate_variance = true;
      const auto with_var = run_monte_carlo(var_run, pop);

      // Independent replicate streams for the reference mean square error.
      ScenarioConfig ref_run = c;
      ref_run.seed = kSeed + 1;
      ref_run.replicates = 10'000;
      ref_run.estimate_variance = false;
      const auto reference = run_monte_carlo(ref_run, pop);

      for (Method m : {Method::BMRR, Method::MRR}) {
        const auto& row = with_var.row(m, "total");
        const double mse = reference.row(m, "total").mse;
        const double rb = 100.0 * (row.mean_variance - mse) / mse;
        const double cov = 100.0 * row.coverage;
        const std::string tag = std::string(method_name(m)) + fmt(" R2=%.1f phi=%.1f", r2, phi);
        v.check(rb >= -15.0 && rb <= 10.0, tag + fmt(": RB(V) = %.2f%% (in [-15, 10])", rb));
        v.check(cov >= 91.0 && cov <= 97.0, tag + fmt(": coverage = %.1f%% (in [91, 97])", cov));
      }
    }
  }
  return v;
}

Verdict convergence_rates() {
  Verdict v;
  ScenarioConfig big;
  big.seed = kSeed;
  big.replicates = 2000;
  big.methods = {Method::MRR, Method::BMRR};
  big.estimate_variance = false;
  ScenarioConfig small = big;
  small.sample_size = 250;
  RandomStream s1(kSeed, 0);
  RandomStream s2(kSeed, 0);
  const auto pop_big = generate_population(big, s1);
  const auto pop_small = generate_population(small, s2);
  v.check(pop_big.frame.y() == pop_small.frame.y(), "both sample sizes share one population");
  // The threshold is fixed once so that only n changes.
  big.reg_threshold = auto_threshold(pop_big);
  small.reg_threshold = big.reg_threshold;
  const auto t_big = run_monte_carlo(big, pop_big);
  const auto t_small = run_monte_carlo(small, pop_small);

  const double coef = t_small.mean_coefficient_error / t_big.mean_coefficient_error;
  v.check(coef >= 1.6 && coef <= 2.6,
          fmt("E||B - beta||^2 ratio n=250 / n=500 = %.3f (in [1.6, 2.6])", coef));
  for (Method m : {Method::MRR, Method::BMRR}) {
    const double ratio = t_small.row(m, "total").mse / t_big.row(m, "total").mse;
    v.check(ratio >= 1.6 && ratio <= 2.6,
            std::string(method_name(m)) +
                fmt(": MSE(t/N) ratio n=250 / n=500 = %.3f (in [1.6, 2.6])", ratio));
  }
  return v;
}

bool fractional(double x) { return x > kIntegralTolerance && x < 1.0 - kIntegralTolerance; }

Verdict cube_properties() {
  Verdict v;
  RandomStream gen(kSeed, 20);
  for (int m : {3, 6, 10}) {
    for (int k_rows : {1, 3}) {
      BalancingProblem p;
      p.p0.resize(m);
      p.A.resize(k_rows, m);
      for (int i = 0; i < m; ++i) {
        p.p0[i] = 0.05 + 0.9 * gen.uniform();
        p.A(0, i) = p.p0[i];
        for (int r = 1; r < k_rows; ++r) p.A(r, i) = gen.gamma(2.0, 1.0);
      }
      const Vector target = p.A * p.p0;
      const double scale = p.A.norm();
      RandomStream rs(kSeed, 100 + static_cast<std::uint64_t>(10 * m + k_rows));
      const int reps = 10'000;
      Vector freq = Vector::Zero(m);
      double drift = 0.0;
      bool bounded = true;
      for (int k = 0; k < reps; ++k) {
        FlightTrace trace;
        const Vector partial = flight_phase(p, rs, &trace);
        for (const auto& b : trace.balance) {
          drift = std::max(drift, (b - target).cwiseAbs().maxCoeff());
        }
        drift = std::max(drift, (p.A * partial - target).cwiseAbs().maxCoeff());
        const auto out = landing_phase(partial, p, rs);
        for (int r = 0; r < k_rows; ++r) {
          double bound = 0.0;
          for (int i = 0; i < m; ++i) {
            if (fractional(partial[i])) bound += std::abs(p.A(r, i));
          }
          bounded = bounded && std::abs(out.constraint_residual[r]) <= bound + 1e-9 * scale;
        }
        freq += out.x;
      }
      const std::string tag = fmt("m=%.0f K=%.0f", m, k_rows);
      double worst = 0.0;
      for (int i = 0; i < m; ++i) {
        worst = std::max(worst,
                         std::abs(freq[i] / reps - p.p0[i]) / binomial_sigma(p.p0[i], reps));
      }
      v.check(worst < 3.0, tag + fmt(": largest marginal deviation %.2f binomial sigma", worst));
      v.check(drift <= 1e-9 * scale, tag + fmt(": flight drift %.2e (scale %.2e)", drift, scale));
      v.check(bounded, tag + ": landing residual within the rounded-cell bound");
    }
  }

  // Donor assignment keeps every recipient's donor marginals.
  const Vector w = vec({1.5, 3.0, 2.0, 4.5, 1.0, 2.5});
  const Vector e = vec({-2.0, -0.5, 0.3, 1.1, 2.4});
  const Vector probs = vec({0.1, 0.3, 0.2, 0.25, 0.15});
  RandomStream rs(kSeed, 30);
  const int reps = 10'000;
  Matrix freq = Matrix::Zero(w.size(), e.size());
  for (int k = 0; k < reps; ++k) {
    const auto a = balanced_donor_assignment(w, e, probs, probs.dot(e), rs);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      freq(i, static_cast<Eigen::Index>(a.donor[static_cast<std::size_t>(i)])) += 1.0;
    }
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    for (Eigen::Index j = 0; j < e.size(); ++j) {
      worst = std::max(worst, std::abs(freq(i, j) / reps - probs[j]) /
                                  binomial_sigma(probs[j], reps));
    }
  }
  v.check(worst < 3.0, fmt("donor assignment: largest marginal deviation %.2f binomial sigma",
                           worst));
  return v;
}

// Score of the weighted two-parameter logistic likelihood in coordinate k.
double logit_score(const Matrix& u, const Vector& eta, const Vector& w, double g0, double g1,
                   int k) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    s += w[i] * u(i, k) * (eta[i] - expit(g0 * u(i, 0) + g1 * u(i, 1)));
  }
  return s;
}

template <class F>
double decreasing_root(F f) {
  double lo = -40.0;
  double hi = 40.0;
  for (double x = -40.0; x <= 40.0; x += 0.5) {
    if (f(x) > 0) lo = x;
    if (f(x) < 0) {
      hi = x;
      break;
    }
  }
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Verdict oracle_equivalences() {
  Verdict v;

  // fit_phi against a nested bisection on the profile likelihood.
  RandomStream rs(kSeed, 40);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 40;
    Matrix u(n, 2);
    Vector y(n);
    Vector w(n);
    for (int i = 0; i < n; ++i) {
      u(i, 0) = 1.0;
      u(i, 1) = rs.normal(0.0, 1.0);
      w[i] = 0.5 + rs.uniform();
      y[i] = rs.bernoulli(expit(0.4 - 0.9 * u(i, 1))) ? 1.0 + rs.uniform() : 0.0;
    }
    const auto s = sample_of(y, u, u, Vector::Ones(n), Vector::Ones(n), w);
    const auto m = fit_phi(s);
    Vector eta(n);
    for (int i = 0; i < n; ++i) eta[i] = y[i] != 0.0;
    auto inner = [&](double g1) {
      return decreasing_root([&](double g0) { return logit_score(u, eta, w, g0, g1, 0); });
    };
    const double g1 =
        decreasing_root([&](double g) { return logit_score(u, eta, w, inner(g), g, 1); });
    const double g0 = inner(g1);
    worst = std::max({worst, std::abs(m.gamma[0] - g0), std::abs(m.gamma[1] - g1)});
  }
  v.check(worst <= 1e-4, fmt("fit_phi vs likelihood bisection: max |gamma diff| = %.2e", worst));

  // Four-unit hand instance: z = u = 1, v = 1, unit 3 missing.
  const Vector y = vec({2.0, 0.0, 5.0, kNaN});
  const Vector omega = vec({1.0, 2.0, 1.5, 1.0});
  const Vector pi = vec({0.5, 0.25, 0.4, 0.2});
  const double y_star = 4.4;
  const auto s = sample_of(y, ones(4), ones(4), Vector::Ones(4), pi, omega);
  const auto model = fit_model(s);
  ImputationResult r;
  r.method = Method::MRR;
  r.recipients = {3};
  r.y_star = vec({y_star});
  r.eta_star = {1};
  r.donor = {std::size_t{0}};
  const auto lin = linearized_components(s, model.phi, model.regression, &r);

  double w_resp = 0.0, w_nonzero = 0.0, wy = 0.0;
  for (int i = 0; i < 3; ++i) {
    w_resp += omega[i];
    w_nonzero += omega[i] * (y[i] != 0.0);
    wy += omega[i] * y[i];
  }
  const double phi = w_nonzero / w_resp;
  const double b = wy / (w_resp * phi);
  const double d3 = 1.0 / pi[3];
  const double q = phi * (1.0 - phi);
  const double a_hat = d3 * phi / (w_resp * phi);
  const double b_hat = d3 * q * b / (w_resp * q);
  const double c_hat = a_hat * b;
  Vector xi(4);
  double v2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double d = 1.0 / pi[i];
    xi[i] = d * phi * b;
    if (i < 3) {
      const double resid = y[i] - phi * b;
      const double eta = y[i] != 0.0 ? 1.0 : 0.0;
      xi[i] += (d + omega[i] * a_hat) * resid + omega[i] * (b_hat - c_hat) * (eta - phi);
      const double term = (1.0 + omega[i] * pi[i] * a_hat) * resid +
                          omega[i] * pi[i] * (b_hat - c_hat) * (eta - phi);
      v2 += d * term * term;
    }
  }
  const double v3 = d3 * d3 * (y_star - phi * b) * (y_star - phi * b);
  double cw = 0.0, cx = 0.0;
  for (int i = 0; i < 4; ++i) {
    cw += 1.0 - pi[i];
    cx += (1.0 - pi[i]) * xi[i];
  }
  double hr = 0.0;
  for (int i = 0; i < 4; ++i) hr += (1.0 - pi[i]) * (xi[i] - cx / cw) * (xi[i] - cx / cw);
  hr *= 4.0 / 3.0;
  const auto report = estimate_variance(Method::MRR, s, model, r, VarianceDesign::hajek_rosen());

  double diff = (lin.xi - xi).cwiseAbs().maxCoeff();
  diff = std::max({diff, std::abs(lin.a_hat[0] - a_hat), std::abs(lin.b_hat[0] - b_hat),
                   std::abs(lin.c_hat[0] - c_hat)});
  const double rel = std::max({std::abs(lin.v2 - v2) / v2, std::abs(lin.v3 - v3) / v3,
                               std::abs(report.v1 - hr) / hr,
                               std::abs(report.total - (hr + v2 + v3)) / (hr + v2 + v3)});
  v.check(diff <= 1e-10, fmt("4-unit xi, a, b, c vs direct evaluation: max diff %.2e", diff));
  v.check(rel <= 1e-10, fmt("4-unit V1, V2, V3, total vs direct evaluation: max rel diff %.2e",
                            rel));

  // Bootstrap of the expansion mean under SRS with full response.
  RandomStream g(kSeed, 41);
  const int n = 100;
  Vector yy(n);
  for (int i = 0; i < n; ++i) yy[i] = g.gamma(2.0, 5.0);
  const auto srs = sample_of(yy, ones(n), ones(n), Vector::Ones(n), Vector::Constant(n, 0.1),
                             Vector(), {}, 1000.0);
  const BootstrapPipeline mean = [](const SampleFrame& bs, RandomStream&) {
    return Vector::Constant(1, bs.d().dot(bs.y_values()) / bs.population_size());
  };
  const auto boot = bootstrap_variance(srs, mean, 2000, RandomStream(kSeed, 42));
  const double s2 = (yy.array() - yy.mean()).square().sum() / (n - 1);
  const double ratio = boot.variance[0] / (s2 / n);
  v.check(std::abs(ratio - 1.0) <= 0.10,
          fmt("bootstrap variance / (s^2 / n) = %.4f (within 10%%)", ratio));
  return v;
}

Verdict application_direction() {
  Verdict v;
  ApplicationConfig c;
  c.seed = kSeed;
  const auto r = run_application_scenario(c);
  v.check(r.re[0] < 1.0, fmt("re(total) = Vboot(BMRR) / Vboot(MRR) = %.4f (below 1)", r.re[0]));
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"total unbiasedness", total_unbiasedness},
      {"distribution function preservation", distribution_function},
      {"balancing efficiency", balancing_efficiency},
      {"variance estimator calibration", variance_calibration},
      {"convergence rates", convergence_rates},
      {"cube engine properties", cube_properties},
      {"oracle equivalences", oracle_equivalences},
      {"application direction", application_direction},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %zu (%s): %s  [%.1f s]\n%s", k + 1, criteria[k].first,
                v.pass ? "PASS" : "FAIL", secs, v.detail.c_str());
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
