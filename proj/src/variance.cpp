#include "zimpute/variance.hpp"

#include <cmath>
#include <map>
#include <string>

#include "zimpute/errors.hpp"
#include "zimpute/parallel.hpp"

namespace zimpute {
namespace {

Vector clamped_inverse_times(const Matrix& gram, const Vector& rhs, double n_pop, double a,
                             const char* name) {
  const Matrix scaled = gram / n_pop;
  try {
    const ClampedMatrix c = clamp_eigenvalues(scaled, a);
    return clamped_solve(scaled, c, rhs / n_pop);
  } catch (const SingularMatrixError&) {
    throw SingularMatrixError(std::string("matrix of ") + name + " is singular after clamping");
  }
}

}  // namespace

LinearizedComponents linearized_components(const SampleFrame& sample, const PhiModel& phi,
                                           const RegularizedFit& fit,
                                           const ImputationResult* result, XiForm form) {
  const auto n = static_cast<Eigen::Index>(sample.size());
  const Matrix& z = sample.z();
  const Matrix& u = sample.u();
  const Vector& d = sample.d();
  const Vector& w = sample.omega();
  const Vector& v = sample.v();
  const Vector& pi = sample.pi();
  const Vector& p = phi.phi;
  if (p.size() != n) throw ValidationError("zero model does not match the sample");
  const Vector pred = linear_predictor(sample, fit);
  const double n_pop = sample.population_size();

  Matrix gz = Matrix::Zero(z.cols(), z.cols());
  Matrix gu = Matrix::Zero(u.cols(), u.cols());
  Vector a_rhs = Vector::Zero(z.cols());
  Vector b_rhs = Vector::Zero(u.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double q = p[i] * (1.0 - p[i]);
    if (sample.responded(static_cast<std::size_t>(i))) {
      gz.noalias() += (w[i] * p[i] / v[i]) * z.row(i).transpose() * z.row(i);
      gu.noalias() += (w[i] * q) * u.row(i).transpose() * u.row(i);
    } else {
      a_rhs.noalias() += (d[i] * p[i]) * z.row(i).transpose();
      b_rhs.noalias() += (d[i] * q * pred[i]) * u.row(i).transpose();
    }
  }

  LinearizedComponents out;
  out.a_hat = clamped_inverse_times(gz, a_rhs, n_pop, fit.a, "a");
  const Vector za = z * out.a_hat;
  Vector c_rhs = Vector::Zero(u.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!sample.responded(static_cast<std::size_t>(i))) continue;
    c_rhs.noalias() +=
        (w[i] / v[i] * p[i] * (1.0 - p[i]) * za[i] * pred[i]) * u.row(i).transpose();
  }
  out.b_hat = clamped_inverse_times(gu, b_rhs, n_pop, fit.a, "b");
  out.c_hat = clamped_inverse_times(gu, c_rhs, n_pop, fit.a, "c");
  const Vector ub = u * (out.b_hat - out.c_hat);

  out.xi.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double xi = d[i] * p[i] * pred[i];
    const auto k = static_cast<std::size_t>(i);
    if (sample.responded(k)) {
      const double resid = sample.y(k) - p[i] * pred[i];
      const double eta_dev = sample.eta(k) - p[i];
      const double lever = form == XiForm::AsPrinted ? p[i] : 1.0;
      xi += (d[i] + w[i] * lever / v[i] * za[i]) * resid + w[i] * ub[i] * eta_dev;
      const double term =
          (1.0 + w[i] * pi[i] / v[i] * za[i]) * resid + w[i] * pi[i] * ub[i] * eta_dev;
      out.v2 += d[i] * term * term;
    }
    out.xi[i] = xi;
  }

  if (result != nullptr) {
    out.has_v3 = true;
    for (std::size_t k = 0; k < result->size(); ++k) {
      const auto i = static_cast<Eigen::Index>(result->recipients[k]);
      const double dev = result->y_star[static_cast<Eigen::Index>(k)] - p[i] * pred[i];
      out.v3 += d[i] * d[i] * dev * dev;
    }
  }
  return out;
}

double v1_joint(const SampleFrame& sample, const Vector& xi, const Matrix& joint) {
  const auto n = static_cast<Eigen::Index>(sample.size());
  if (xi.size() != n || joint.rows() != n || joint.cols() != n) {
    throw ValidationError("joint inclusion probabilities do not match the sample");
  }
  const Vector& pi = sample.pi();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double pij = joint(i, j);
      if (!(pij > 0.0)) {
        throw ValidationError("joint inclusion probability of units " + std::to_string(i) +
                              " and " + std::to_string(j) + " is zero");
      }
      total += (pij - pi[i] * pi[j]) / pij * xi[i] * xi[j];
    }
  }
  return total;
}

double v1_hajek_rosen(const SampleFrame& sample, const Vector& xi) {
  const auto n = static_cast<Eigen::Index>(sample.size());
  if (n < 2) throw ValidationError("Hajek-Rosen estimator needs at least two units");
  if (xi.size() != n) throw ValidationError("xi does not match the sample");
  const Vector c = Vector::Ones(n) - sample.pi();
  const double weight = c.sum();
  if (weight <= 0.0) return 0.0;
  const double r_hat = c.dot(xi) / weight;
  const double ss = (c.array() * (xi.array() - r_hat).square()).sum();
  return static_cast<double>(n) / static_cast<double>(n - 1) * ss;
}

VarianceReport total_variance(Method method, const SampleFrame& sample,
                              const LinearizedComponents& components,
                              const VarianceDesign& design, double estimate) {
  VarianceReport r;
  r.method = method;
  r.v1_kind = design.kind;
  r.estimate = estimate;
  r.v1 = design.kind == V1Kind::HajekRosen ? v1_hajek_rosen(sample, components.xi)
                                           : v1_joint(sample, components.xi, design.joint);
  r.v2 = components.v2;
  r.total = r.v1 + r.v2;
  if (!is_balanced(method)) {
    if (!components.has_v3) {
      throw ValidationError("random imputation variance needs the imputed values");
    }
    r.v3 = components.v3;
    r.includes_v3 = true;
    r.total += r.v3;
  }
  const double half = 1.96 * std::sqrt(std::max(r.total, 0.0));
  r.ci_low = estimate - half;
  r.ci_high = estimate + half;
  return r;
}

VarianceReport estimate_variance(Method method, const SampleFrame& sample,
                                 const FittedModel& model, const ImputationResult& result,
                                 const VarianceDesign& design) {
  const auto comp = linearized_components(sample, model.phi, model.regression, &result);
  return total_variance(method, sample, comp, design, imputed_total(sample, result));
}

std::vector<std::size_t> bootstrap_rows(const SampleFrame& sample, RandomStream& stream) {
  std::map<int, std::vector<std::size_t>> by_stratum;
  for (std::size_t i = 0; i < sample.size(); ++i) by_stratum[sample.stratum()[i]].push_back(i);
  std::vector<std::size_t> rows;
  rows.reserve(sample.size());
  for (const auto& [label, units] : by_stratum) {
    if (units.size() < 2) {
      throw ValidationError("stratum " + std::to_string(label) +
                            " has fewer than two sampled units");
    }
    for (std::size_t k = 0; k < units.size(); ++k) {
      rows.push_back(units[stream.uniform_index(units.size())]);
    }
  }
  return rows;
}

BootstrapResult bootstrap_variance(const SampleFrame& sample, const BootstrapPipeline& pipeline,
                                   std::size_t replicates, const RandomStream& stream,
                                   std::size_t threads) {
  if (replicates < 2) throw ValidationError("bootstrap needs at least two replicates");
  {
    RandomStream probe = stream.child(0);
    bootstrap_rows(sample, probe);  // validates strata before spawning work
  }
  std::vector<Vector> values(replicates);
  parallel_for(replicates, thread_count(threads), [&](std::size_t b) {
    RandomStream rs = stream.child(b);
    const auto rows = bootstrap_rows(sample, rs);
    const SampleFrame resample = sample.subset(rows, sample.population_size());
    values[b] = pipeline(resample, rs);
  });
  const auto k = values.front().size();
  BootstrapResult out;
  out.replicates.resize(static_cast<Eigen::Index>(replicates), k);
  for (std::size_t b = 0; b < replicates; ++b) {
    if (values[b].size() != k) throw ValidationError("bootstrap pipeline output length varies");
    out.replicates.row(static_cast<Eigen::Index>(b)) = values[b].transpose();
  }
  const Eigen::RowVectorXd mean = out.replicates.colwise().mean();
  out.variance = ((out.replicates.rowwise() - mean).array().square().colwise().sum() /
                  static_cast<double>(replicates - 1))
                     .transpose();
  return out;
}

}  // namespace zimpute
