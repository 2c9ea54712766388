#include "zimpute/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "zimpute/io.hpp"

namespace zimpute {
namespace {

std::string fixed2(double x) {
  if (std::isnan(x)) return "-";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string num(double x) { return std::isnan(x) ? "" : format_number(x); }

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

void write_comments(std::ostringstream& out, const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
}

// One text block: a line per scenario, a column per method.
template <class Cell>
void block(std::ostringstream& out, const std::string& title,
           const std::vector<MonteCarloTable>& tables, const std::string& estimand, Cell cell) {
  if (tables.empty()) return;
  const auto& methods = tables.front().config.methods;
  out << title << '\n';
  out << pad("R2", 5) << pad("phi", 6) << pad("p", 6);
  for (Method m : methods) out << pad(std::string(method_name(m)), 9);
  out << '\n';
  for (const auto& t : tables) {
    out << pad(fixed2(t.config.r_squared), 5) << pad(fixed2(t.config.phi_bar), 6)
        << pad(fixed2(t.config.p_bar), 6);
    for (Method m : methods) out << pad(fixed2(cell(t.row(m, estimand))), 9);
    out << '\n';
  }
  out << '\n';
}

}  // namespace

std::string scenario_stem(const ScenarioConfig& config) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "mc_r2-%g_phi-%g_p-%g", config.r_squared, config.phi_bar,
                config.p_bar);
  return buf;
}

std::string monte_carlo_csv(const MonteCarloTable& table,
                            const std::vector<std::string>& comments) {
  std::ostringstream out;
  write_comments(out, comments);
  const auto& c = table.config;
  out << "# r_squared=" << format_number(c.r_squared) << " phi_bar=" << format_number(c.phi_bar)
      << " p_bar=" << format_number(c.p_bar) << " sigma2=" << format_number(table.sigma2)
      << " reg_threshold=" << format_number(table.reg_threshold) << '\n';
  out << "# replicates_completed=" << table.completed << " replicates_failed=" << table.failed
      << " mean_response_rate=" << format_number(table.mean_response_rate)
      << " mean_p_hat=" << format_number(table.mean_p_hat)
      << " mean_coefficient_error=" << format_number(table.mean_coefficient_error)
      << " regularized_share=" << format_number(table.regularized_share) << '\n';
  out << "method,estimand,truth,mean,rb_percent,mse,re,mean_variance,variance_rb_percent,"
         "coverage\n";
  for (const auto& r : table.rows) {
    out << method_name(r.method) << ',' << r.estimand << ',' << num(r.truth) << ','
        << num(r.mean) << ',' << num(r.rb) << ',' << num(r.mse) << ',' << num(r.re) << ','
        << num(r.mean_variance) << ',' << num(r.variance_rb) << ',' << num(r.coverage) << '\n';
  }
  return out.str();
}

std::string monte_carlo_text(const std::vector<MonteCarloTable>& tables) {
  std::ostringstream out;
  if (tables.empty()) return "";
  block(out, "Relative bias (%) of the imputed total", tables, "total",
        [](const EstimandRow& r) { return r.rb; });
  block(out, "Relative efficiency of the imputed total (vs BMRR)", tables, "total",
        [](const EstimandRow& r) { return r.re; });
  for (double alpha : tables.front().config.quantile_levels) {
    char label[32];
    std::snprintf(label, sizeof label, "F(%g)", alpha);
    block(out, std::string("Relative bias (%) of ") + label + " at the " + fixed2(alpha) +
                   " quantile",
          tables, label, [](const EstimandRow& r) { return r.rb; });
    block(out, std::string("Relative efficiency of ") + label + " (vs BMRR)", tables, label,
          [](const EstimandRow& r) { return r.re; });
  }
  if (tables.front().config.estimate_variance) {
    block(out, "Relative bias (%) of the variance estimator", tables, "total",
          [](const EstimandRow& r) { return r.variance_rb; });
    block(out, "Coverage (%) of the 95% interval", tables, "total",
          [](const EstimandRow& r) { return 100.0 * r.coverage; });
  }
  return out.str();
}

std::string application_csv(const ApplicationReport& report,
                            const std::vector<std::string>& comments) {
  std::ostringstream out;
  write_comments(out, comments);
  out << "# bootstrap=" << report.config.bootstrap
      << " regularized=" << (report.regularized ? "true" : "false") << " respondents=";
  for (std::size_t h = 0; h < report.respondents.size(); ++h) {
    out << (h ? "/" : "") << report.respondents[h];
  }
  out << '\n';
  out << "estimand,t,truth,bmrr,mrr,v_boot_bmrr,v_boot_mrr,re\n";
  const std::size_t k = report.config.t_grid.size();
  for (std::size_t e = 0; e <= k; ++e) {
    const auto ee = static_cast<Eigen::Index>(e);
    if (e == 0) {
      out << "total,," << num(report.population_total) << ',' << num(report.total[0]) << ','
          << num(report.total[1]);
    } else {
      out << "F," << num(report.config.t_grid[e - 1]) << ','
          << num(report.population_cdf[e - 1]) << ',' << num(report.cdf[0][e - 1]) << ','
          << num(report.cdf[1][e - 1]);
    }
    out << ',' << num(report.bootstrap_variance[0][ee]) << ','
        << num(report.bootstrap_variance[1][ee]) << ',' << num(report.re[ee]) << '\n';
  }
  return out.str();
}

std::string application_text(const ApplicationReport& report) {
  std::ostringstream out;
  const auto& grid = report.config.t_grid;
  const std::size_t w = 14;
  out << pad("", 8) << pad("total", w);
  for (double t : grid) {
    char label[40];
    std::snprintf(label, sizeof label, "F(%g)", t);
    out << pad(label, 9);
  }
  out << '\n';
  auto line = [&](const std::string& name, double total, const std::vector<double>& cdf) {
    out << name << std::string(8 - std::min<std::size_t>(8, name.size()), ' ')
        << pad(fixed2(total), w);
    for (double f : cdf) out << pad(fixed2(f), 9);
    out << '\n';
  };
  line("truth", report.population_total, report.population_cdf);
  line("BMRR", report.total[0], report.cdf[0]);
  line("MRR", report.total[1], report.cdf[1]);
  std::vector<double> re(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) re[k] = report.re[static_cast<Eigen::Index>(k + 1)];
  line("re", report.re[0], re);
  return out.str();
}

}  // namespace zimpute
