// zimpute command-line front end: impute, simulate, apply-scenario.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 model fit did
// not converge, 1 anything else. Timing goes to stderr only, so that every
// file written for a given manifest is byte-identical across reruns.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zimpute/config.hpp"
#include "zimpute/design.hpp"
#include "zimpute/errors.hpp"
#include "zimpute/impute.hpp"
#include "zimpute/io.hpp"
#include "zimpute/model.hpp"
#include "zimpute/parallel.hpp"
#include "zimpute/report.hpp"
#include "zimpute/simlab.hpp"
#include "zimpute/variance.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace zimpute;

namespace {

constexpr std::size_t kStableBootstrap = 100;

struct Common {
  std::string output;
  std::string config;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

// Effective settings of one run. The hash covers everything except the
// output directory, so a run repeated elsewhere embeds the same hash.
struct Manifest {
  ordered_json body;
  std::string output;

  std::string hash() const { return fnv1a_hex(body.dump()); }
  std::string stamp() const {
    return "zimpute manifest=" + hash() + " seed=" + std::to_string(body.value("seed", 0ULL));
  }
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

fs::path prepare_output(const Manifest& m) {
  const fs::path dir(m.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ValidationError("output directory '" + m.output + "' is not writable");
  }
  ordered_json j = m.body;
  j["output"] = m.output;
  j["manifest_hash"] = m.hash();
  write_file(dir / "manifest.json", j.dump(2) + "\n");
  return dir;
}

void warn(std::ostringstream& log, const std::string& text) {
  std::cerr << "warning: " << text << '\n';
  log << "warning: " << text << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- impute

struct ImputeFlags {
  std::string input;
  std::string method;
  double reg_threshold = 0.0;
  double population_size = 0.0;
  std::string variance;
  std::size_t bootstrap = 0;
  bool z_intercept = false;
  bool u_intercept = false;
};

int cmd_impute(const Common& common, const ImputeFlags& flags, const CLI::App& sub) {
  const auto t0 = std::chrono::steady_clock::now();
  ImputeSettings s;
  if (!common.config.empty()) s = parse_impute_config(read_text_file(common.config));
  if (sub.count("--seed")) s.seed = common.seed;
  if (sub.count("--threads")) s.threads = common.threads;
  if (sub.count("--method")) s.method = parse_method(flags.method);
  if (sub.count("--reg-threshold")) s.reg_threshold = flags.reg_threshold;
  if (sub.count("--population-size")) s.population_size = flags.population_size;
  if (sub.count("--variance")) s.variance = flags.variance;
  if (sub.count("--bootstrap")) s.bootstrap = flags.bootstrap;
  if (flags.z_intercept) s.z_intercept = true;
  if (flags.u_intercept) s.u_intercept = true;
  if (!(s.reg_threshold > 0.0)) throw ValidationError("regularization threshold must be positive");
  if (s.variance != "hajek-rosen" && s.variance != "stratified-srs" && s.variance != "none") {
    throw ValidationError("variance must be hajek-rosen, stratified-srs or none");
  }
  if (s.bootstrap == 1) throw ValidationError("bootstrap needs at least two replicates");

  const std::string input_text = read_text_file(flags.input);
  std::istringstream input_stream(input_text);
  const SampleData data =
      load_sample_csv(parse_csv(input_stream), {s.z_intercept, s.u_intercept, s.population_size});
  const SampleFrame& sample = data.frame;

  Manifest m;
  m.output = common.output;
  m.body["command"] = "impute";
  m.body["input"] = {{"path", flags.input}, {"fnv1a", fnv1a_hex(input_text)}};
  m.body["config"] = common.config;
  m.body["seed"] = s.seed;
  m.body["method"] = std::string(method_name(s.method));
  m.body["reg_threshold"] = s.reg_threshold;
  m.body["z_intercept"] = s.z_intercept;
  m.body["u_intercept"] = s.u_intercept;
  m.body["population_size"] = s.population_size;
  m.body["variance"] = s.variance;
  m.body["bootstrap"] = s.bootstrap;
  const fs::path dir = prepare_output(m);

  std::ostringstream log;
  log << m.stamp() << '\n';
  log << "method " << method_name(s.method) << "\nreg_threshold " << format_number(s.reg_threshold)
      << "\nunits " << sample.size() << "\nrespondents " << sample.respondent_count() << '\n';

  ordered_json report;
  report["manifest_hash"] = m.hash();
  report["seed"] = s.seed;
  report["method"] = std::string(method_name(s.method));
  const VarianceDesign design = s.variance == "stratified-srs"
                                    ? VarianceDesign::joint_probabilities(
                                          stratified_joint_probabilities(sample))
                                    : VarianceDesign::hajek_rosen();
  auto v1_of = [&](const Vector& xi) {
    return design.kind == V1Kind::HajekRosen ? v1_hajek_rosen(sample, xi)
                                             : v1_joint(sample, xi, design.joint);
  };
  report["v1_form"] = s.variance;

  const RandomStream root(s.seed, 0);
  if (sample.respondent_count() == sample.size()) {
    log << "no imputation performed: every y is observed\n";
    {
      std::ostringstream out;
      write_imputed_csv(out, data, nullptr, m.stamp());
      write_file(dir / "imputed.csv", out.str());
    }
    const Vector xi = (sample.d().array() * sample.y_values().array()).matrix();
    const double estimate = xi.sum();
    report["note"] = "no imputation performed";
    report["estimate"] = estimate;
    if (s.variance != "none") {
      const double v1 = v1_of(xi);
      report["v1"] = v1;
      report["v2"] = 0.0;
      report["v3"] = nullptr;
      report["variance"] = v1;
      report["ci95"] = {estimate - 1.96 * std::sqrt(v1), estimate + 1.96 * std::sqrt(v1)};
    }
  } else {
    const FittedModel model = fit_model(sample, s.reg_threshold);
    log << "phi_converged " << (model.phi.converged ? "true" : "false") << "\nphi_iterations "
        << model.phi.iterations << "\nphi_score_norm " << format_number(model.phi.score_norm)
        << "\nphi_degenerate " << (model.phi.degenerate ? "true" : "false") << '\n';
    log << "gram_min_eigenvalue "
        << format_number(model.regression.eigenvalues.size()
                             ? model.regression.eigenvalues.minCoeff()
                             : 0.0)
        << "\nregularization_active " << (model.regression.regularization_active ? "true" : "false")
        << "\npool_size " << model.pool.size() << '\n';
    if (model.regression.regularization_active) {
      warn(log, "eigenvalue clamp active: some eigenvalue of the Gram matrix is below " +
                    format_number(s.reg_threshold));
    }
    RandomStream stream = root.child(1);
    const ImputationResult result = impute(s.method, sample, model, stream);
    if (is_balanced(s.method)) {
      log << "eta_balance_residual " << format_number(result.eta_balance_residual) << '\n';
      if (adds_residual(s.method)) {
        log << "donor_balance_residual " << format_number(result.donor_balance_residual) << '\n';
      }
    }
    {
      std::ostringstream out;
      write_imputed_csv(out, data, &result, m.stamp());
      write_file(dir / "imputed.csv", out.str());
    }
    const double estimate = imputed_total(sample, result);
    report["estimate"] = estimate;
    if (s.variance != "none") {
      const VarianceReport v = estimate_variance(s.method, sample, model, result, design);
      report["v1"] = v.v1;
      report["v2"] = v.v2;
      report["v3"] = v.includes_v3 ? ordered_json(v.v3) : ordered_json();
      report["variance"] = v.total;
      report["ci95"] = {v.ci_low, v.ci_high};
    }
  }
  if (s.bootstrap >= 2) {
    if (s.bootstrap < kStableBootstrap) {
      warn(log, "bootstrap with " + std::to_string(s.bootstrap) +
                    " replicates gives an unstable variance estimate");
    }
    const Method method = s.method;
    const double a = s.reg_threshold;
    const BootstrapPipeline pipeline = [method, a](const SampleFrame& b, RandomStream& rs) {
      Vector out(1);
      if (b.respondent_count() == b.size()) {
        out[0] = b.d().dot(b.y_values());
        return out;
      }
      const FittedModel fm = fit_model(b, a);
      const ImputationResult r = impute(method, b, fm, rs);
      out[0] = imputed_total(b, r);
      return out;
    };
    const BootstrapResult boot =
        bootstrap_variance(sample, pipeline, s.bootstrap, root.child(2), s.threads);
    report["bootstrap_replicates"] = s.bootstrap;
    report["bootstrap_variance"] = boot.variance[0];
  }
  write_file(dir / "variance.json", report.dump(2) + "\n");
  write_file(dir / "run.log", log.str());
  std::cerr << "impute: " << sample.size() << " units, " << sample.size() - sample.respondent_count()
            << " imputed, " << seconds_since(t0) << " s\n";
  return 0;
}

// -------------------------------------------------------------- simulate

struct SimulateFlags {
  std::size_t replicates = 0;
  bool full_grid = false;
  std::vector<double> r_squared;
  std::vector<double> phi_bar;
  std::vector<double> p_bar;
  std::vector<std::string> methods;
  std::string reg_threshold;
  std::string family;
  bool no_variance = false;
};

int cmd_simulate(const Common& common, const SimulateFlags& flags, const CLI::App& sub) {
  const auto t0 = std::chrono::steady_clock::now();
  SimulationPlan plan;
  if (!common.config.empty()) plan = parse_simulation_config(read_text_file(common.config));
  ScenarioConfig& base = plan.base;
  if (sub.count("--seed")) base.seed = common.seed;
  if (sub.count("--threads")) base.threads = common.threads;
  if (sub.count("--replicates")) base.replicates = flags.replicates;
  if (flags.full_grid) plan.use_full_grid();
  if (!flags.r_squared.empty()) plan.r_squared = flags.r_squared;
  if (!flags.phi_bar.empty()) plan.phi_bar = flags.phi_bar;
  if (!flags.p_bar.empty()) plan.p_bar = flags.p_bar;
  if (!flags.methods.empty()) {
    base.methods.clear();
    for (const auto& name : flags.methods) base.methods.push_back(parse_method(name));
  }
  if (sub.count("--reg-threshold")) {
    if (flags.reg_threshold == "auto") {
      base.reg_threshold.reset();
    } else {
      try {
        std::size_t used = 0;
        base.reg_threshold = std::stod(flags.reg_threshold, &used);
        if (used != flags.reg_threshold.size()) throw std::invalid_argument("trailing");
      } catch (const std::logic_error&) {
        throw ValidationError("--reg-threshold must be a number or 'auto'");
      }
    }
  }
  if (sub.count("--family")) base.family = parse_family(flags.family);
  if (flags.no_variance) base.estimate_variance = false;
  const std::vector<ScenarioConfig> scenarios = plan.scenarios();

  Manifest m;
  m.output = common.output;
  m.body["command"] = "simulate";
  m.body["config"] = common.config;
  m.body["seed"] = base.seed;
  m.body["replicates"] = base.replicates;
  m.body["population_size"] = base.population_size;
  m.body["sample_size"] = base.sample_size;
  m.body["a"] = base.a;
  m.body["phi_slopes"] = base.phi_slopes;
  m.body["response_slopes"] = base.response_slopes;
  m.body["gamma_shape"] = base.gamma_shape;
  m.body["gamma_scale"] = base.gamma_scale;
  m.body["residual_family"] = std::string(family_name(base.family));
  m.body["quantile_levels"] = base.quantile_levels;
  std::vector<std::string> names;
  for (Method x : base.methods) names.emplace_back(method_name(x));
  m.body["methods"] = names;
  m.body["reg_threshold"] =
      base.reg_threshold ? ordered_json(*base.reg_threshold) : ordered_json("auto");
  m.body["estimate_variance"] = base.estimate_variance;
  m.body["grid"] = {{"r_squared", plan.r_squared}, {"phi_bar", plan.phi_bar}, {"p_bar", plan.p_bar}};
  const fs::path dir = prepare_output(m);

  std::ostringstream log;
  log << m.stamp() << '\n' << "scenarios " << scenarios.size() << '\n';
  std::vector<MonteCarloTable> tables;
  for (const ScenarioConfig& c : scenarios) {
    const auto ts = std::chrono::steady_clock::now();
    MonteCarloTable t = run_monte_carlo(c);
    const std::string stem = scenario_stem(c);
    write_file(dir / (stem + ".csv"), monte_carlo_csv(t, {m.stamp()}));
    log << stem << ": completed " << t.completed << " failed " << t.failed << " reg_threshold "
        << format_number(t.reg_threshold) << " regularized_share "
        << format_number(t.regularized_share) << '\n';
    for (const auto& f : t.failures) log << "  failure: " << f << '\n';
    if (t.regularized_share > 0.0) {
      warn(log, stem + ": eigenvalue clamp active in " +
                    format_number(100.0 * t.regularized_share) + "% of replicates");
    }
    std::cerr << stem << ": " << t.completed << " replicates in " << seconds_since(ts) << " s\n";
    tables.push_back(std::move(t));
  }
  write_file(dir / "tables.txt", "# " + m.stamp() + "\n" + monte_carlo_text(tables));
  write_file(dir / "run.log", log.str());
  std::cerr << "simulate: " << scenarios.size() << " scenarios in " << seconds_since(t0)
            << " s\n";
  return 0;
}

// -------------------------------------------------------- apply-scenario

struct ApplyFlags {
  std::size_t bootstrap = 0;
  double reg_threshold = 0.0;
};

int cmd_apply(const Common& common, const ApplyFlags& flags, const CLI::App& sub) {
  const auto t0 = std::chrono::steady_clock::now();
  ApplicationConfig c;
  if (!common.config.empty()) c = parse_application_config(read_text_file(common.config));
  if (sub.count("--seed")) c.seed = common.seed;
  if (sub.count("--threads")) c.threads = common.threads;
  if (sub.count("--bootstrap")) c.bootstrap = flags.bootstrap;
  if (sub.count("--reg-threshold")) c.reg_threshold = flags.reg_threshold;
  c.validate();

  Manifest m;
  m.output = common.output;
  m.body["command"] = "apply-scenario";
  m.body["config"] = common.config;
  m.body["seed"] = c.seed;
  ordered_json strata = ordered_json::array();
  for (std::size_t h = 0; h < c.stratum_population.size(); ++h) {
    strata.push_back({{"population", c.stratum_population[h]},
                      {"sample", c.stratum_sample[h]},
                      {"response_rate", c.response_rates[h]}});
  }
  m.body["strata"] = strata;
  m.body["cells_per_stratum"] = c.cells_per_stratum;
  m.body["domain_rate"] = c.domain_rate;
  m.body["t_grid"] = c.t_grid;
  m.body["bootstrap"] = c.bootstrap;
  m.body["reg_threshold"] = c.reg_threshold;
  const fs::path dir = prepare_output(m);

  std::ostringstream log;
  log << m.stamp() << '\n';
  if (c.bootstrap < kStableBootstrap) {
    warn(log, "bootstrap with " + std::to_string(c.bootstrap) +
                  " replicates gives an unstable variance estimate");
  }
  const ApplicationReport r = run_application_scenario(c);
  if (r.regularized) warn(log, "eigenvalue clamp active in the point estimates");
  write_file(dir / "application.csv", application_csv(r, {m.stamp()}));
  write_file(dir / "application.txt", "# " + m.stamp() + "\n" + application_text(r));
  log << "re_total " << format_number(r.re[0]) << '\n';
  write_file(dir / "run.log", log.str());
  std::cerr << "apply-scenario: B=" << c.bootstrap << " in " << seconds_since(t0) << " s\n";
  return 0;
}

void add_common(CLI::App& sub, Common& common) {
  sub.add_option("-o,--output", common.output, "Output directory")->required();
  sub.add_option("-c,--config", common.config, "JSON config file");
  sub.add_option("--seed", common.seed, "Master seed");
  sub.add_option("--threads", common.threads,
                 "Worker threads (default: ZIMPUTE_THREADS, then hardware)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Imputation of zero-inflated survey variables"};
  app.require_subcommand(1);

  Common common;
  ImputeFlags impute_flags;
  auto* impute_cmd = app.add_subcommand("impute", "Impute the missing y of a sample CSV");
  add_common(*impute_cmd, common);
  impute_cmd->add_option("-i,--input", impute_flags.input, "Sample CSV")->required();
  impute_cmd->add_option("--method", impute_flags.method, "RR, BRR, MRR or BMRR");
  impute_cmd->add_option("--reg-threshold", impute_flags.reg_threshold, "Eigenvalue floor a");
  impute_cmd->add_option("--population-size", impute_flags.population_size,
                         "Population size N (default: sum of design weights)");
  impute_cmd->add_option("--variance", impute_flags.variance,
                         "hajek-rosen, stratified-srs or none");
  impute_cmd->add_option("--bootstrap", impute_flags.bootstrap, "Bootstrap replicates");
  impute_cmd->add_flag("--z-intercept", impute_flags.z_intercept, "Prepend a constant to z");
  impute_cmd->add_flag("--u-intercept", impute_flags.u_intercept, "Prepend a constant to u");

  SimulateFlags sim_flags;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the Monte Carlo scenario grid");
  add_common(*sim_cmd, common);
  sim_cmd->add_option("--replicates", sim_flags.replicates, "Replicates per scenario");
  sim_cmd->add_flag("--full-grid", sim_flags.full_grid,
                    "Nine populations crossed with three response rates");
  sim_cmd->add_option("--r2", sim_flags.r_squared, "R^2 targets");
  sim_cmd->add_option("--phi-bar", sim_flags.phi_bar, "Mean non-zero probability targets");
  sim_cmd->add_option("--p-bar", sim_flags.p_bar, "Mean response probability targets");
  sim_cmd->add_option("--method", sim_flags.methods, "Methods to run");
  sim_cmd->add_option("--reg-threshold", sim_flags.reg_threshold, "Eigenvalue floor a or 'auto'");
  sim_cmd->add_option("--family", sim_flags.family, "normal, gamma or lognormal residuals");
  sim_cmd->add_flag("--no-variance", sim_flags.no_variance, "Skip variance estimation");

  ApplyFlags apply_flags;
  auto* apply_cmd =
      app.add_subcommand("apply-scenario", "Run the synthetic stratified survey scenario");
  add_common(*apply_cmd, common);
  apply_cmd->add_option("--bootstrap", apply_flags.bootstrap, "Bootstrap replicates");
  apply_cmd->add_option("--reg-threshold", apply_flags.reg_threshold, "Eigenvalue floor a");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*impute_cmd) return cmd_impute(common, impute_flags, *impute_cmd);
    if (*sim_cmd) return cmd_simulate(common, sim_flags, *sim_cmd);
    if (*apply_cmd) return cmd_apply(common, apply_flags, *apply_cmd);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const EmptyPoolError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DesignError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: model did not converge: " << e.what() << '\n';
    return 3;
  } catch (const SingularMatrixError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
