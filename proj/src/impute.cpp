#include "zimpute/impute.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "zimpute/cube.hpp"
#include "zimpute/errors.hpp"

namespace zimpute {
namespace {

std::vector<std::size_t> non_respondents(const SampleFrame& sample) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!sample.responded(i)) out.push_back(i);
  }
  return out;
}

ImputationResult start(Method method, const SampleFrame& sample, const PhiModel& phi,
                       const RegularizedFit& fit, const RandomStream& stream) {
  if (phi.phi.size() != static_cast<Eigen::Index>(sample.size())) {
    throw ValidationError("zero model does not match the sample");
  }
  if (fit.b_ar.size() != sample.z().cols()) {
    throw ValidationError("regression fit does not match the sample covariates");
  }
  ImputationResult r;
  r.method = method;
  r.recipients = non_respondents(sample);
  r.y_star = Vector::Zero(static_cast<Eigen::Index>(r.recipients.size()));
  r.eta_star.assign(r.recipients.size(), 0);
  r.donor.assign(r.recipients.size(), std::nullopt);
  r.seed = stream.seed();
  r.stream_id = stream.stream_id();
  return r;
}

void independent_eta(ImputationResult& r, const PhiModel& phi, RandomStream& stream) {
  for (std::size_t k = 0; k < r.size(); ++k) {
    r.eta_star[k] = stream.bernoulli(phi.phi[static_cast<Eigen::Index>(r.recipients[k])]) ? 1 : 0;
  }
}

void balanced_eta(ImputationResult& r, const SampleFrame& sample, const PhiModel& phi,
                  const Vector& prediction, RandomStream& stream) {
  const auto m = static_cast<Eigen::Index>(r.size());
  Vector probs(m);
  Matrix balance(m, 1);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto i = static_cast<Eigen::Index>(r.recipients[static_cast<std::size_t>(k)]);
    probs[k] = phi.phi[i];
    balance(k, 0) = sample.d()[i] * prediction[i];
  }
  CubeOutcome outcome;
  r.eta_star = balanced_bernoulli(probs, balance, stream, &outcome);
  r.eta_balance_residual = outcome.constraint_residual.size() ? outcome.constraint_residual[0] : 0.0;
}

void eta_residual(ImputationResult& r, const SampleFrame& sample, const PhiModel& phi,
                  const Vector& prediction) {
  double s = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(r.recipients[k]);
    s += sample.d()[i] * (r.eta_star[k] - phi.phi[i]) * prediction[i];
  }
  r.eta_balance_residual = s;
}

void fill_regression_only(ImputationResult& r, const Vector& prediction) {
  for (std::size_t k = 0; k < r.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(r.recipients[k]);
    r.y_star[static_cast<Eigen::Index>(k)] = r.eta_star[k] ? prediction[i] : 0.0;
  }
}

}  // namespace

std::string_view method_name(Method method) {
  switch (method) {
    case Method::RR: return "RR";
    case Method::BRR: return "BRR";
    case Method::MRR: return "MRR";
    case Method::BMRR: return "BMRR";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (Method m : kAllMethods) {
    if (upper == method_name(m)) return m;
  }
  throw ValidationError("unknown imputation method '" + std::string(name) + "'");
}

bool is_balanced(Method method) { return method == Method::BRR || method == Method::BMRR; }
bool adds_residual(Method method) { return method == Method::MRR || method == Method::BMRR; }

ImputationResult impute_rr(const SampleFrame& sample, const PhiModel& phi,
                           const RegularizedFit& fit, RandomStream& stream) {
  auto r = start(Method::RR, sample, phi, fit, stream);
  const Vector prediction = linear_predictor(sample, fit);
  independent_eta(r, phi, stream);
  eta_residual(r, sample, phi, prediction);
  fill_regression_only(r, prediction);
  return r;
}

ImputationResult impute_brr(const SampleFrame& sample, const PhiModel& phi,
                            const RegularizedFit& fit, RandomStream& stream) {
  auto r = start(Method::BRR, sample, phi, fit, stream);
  const Vector prediction = linear_predictor(sample, fit);
  if (r.size() > 0) balanced_eta(r, sample, phi, prediction, stream);
  fill_regression_only(r, prediction);
  return r;
}

ImputationResult impute_mrr(const SampleFrame& sample, const PhiModel& phi,
                            const RegularizedFit& fit, const ResidualPool& pool,
                            RandomStream& stream) {
  auto r = start(Method::MRR, sample, phi, fit, stream);
  if (r.size() == 0) return r;
  if (pool.size() == 0) throw EmptyPoolError("empty donor pool");
  const Vector prediction = linear_predictor(sample, fit);
  independent_eta(r, phi, stream);
  eta_residual(r, sample, phi, prediction);
  std::discrete_distribution<std::size_t> pick(pool.probabilities.data(),
                                               pool.probabilities.data() + pool.probabilities.size());
  double donor_residual = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (!r.eta_star[k]) continue;
    const auto i = static_cast<Eigen::Index>(r.recipients[k]);
    const std::size_t j = pick(stream.engine());
    const double root_v = std::sqrt(sample.v()[i]);
    const double e = pool.residuals[static_cast<Eigen::Index>(j)];
    r.donor[k] = pool.donors[j];
    r.y_star[static_cast<Eigen::Index>(k)] = prediction[i] + root_v * e;
    donor_residual += sample.d()[i] * root_v * (e - pool.mean);
  }
  r.donor_balance_residual = donor_residual;
  return r;
}

ImputationResult impute_bmrr(const SampleFrame& sample, const PhiModel& phi,
                             const RegularizedFit& fit, const ResidualPool& pool,
                             RandomStream& stream) {
  auto r = start(Method::BMRR, sample, phi, fit, stream);
  if (r.size() == 0) return r;
  if (pool.size() == 0) throw EmptyPoolError("empty donor pool");
  const Vector prediction = linear_predictor(sample, fit);
  balanced_eta(r, sample, phi, prediction, stream);

  std::vector<std::size_t> takers;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r.eta_star[k]) takers.push_back(k);
  }
  Vector weights(static_cast<Eigen::Index>(takers.size()));
  for (std::size_t t = 0; t < takers.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(r.recipients[takers[t]]);
    weights[static_cast<Eigen::Index>(t)] = sample.d()[i] * std::sqrt(sample.v()[i]);
  }
  const DonorAssignment assignment = balanced_donor_assignment(weights, pool, stream);
  for (std::size_t t = 0; t < takers.size(); ++t) {
    const std::size_t k = takers[t];
    const auto i = static_cast<Eigen::Index>(r.recipients[k]);
    const std::size_t j = assignment.donor[t];
    r.donor[k] = pool.donors[j];
    r.y_star[static_cast<Eigen::Index>(k)] =
        prediction[i] + std::sqrt(sample.v()[i]) * pool.residuals[static_cast<Eigen::Index>(j)];
  }
  r.donor_balance_residual = assignment.balance_residual;
  return r;
}

ImputationResult impute(Method method, const SampleFrame& sample, const FittedModel& model,
                        RandomStream& stream) {
  switch (method) {
    case Method::RR: return impute_rr(sample, model.phi, model.regression, stream);
    case Method::BRR: return impute_brr(sample, model.phi, model.regression, stream);
    case Method::MRR: return impute_mrr(sample, model.phi, model.regression, model.pool, stream);
    case Method::BMRR:
      return impute_bmrr(sample, model.phi, model.regression, model.pool, stream);
  }
  throw ValidationError("unknown imputation method");
}

Vector completed_values(const SampleFrame& sample, const ImputationResult& result) {
  Vector values = sample.y_values();
  for (std::size_t k = 0; k < result.size(); ++k) {
    values[static_cast<Eigen::Index>(result.recipients[k])] =
        result.y_star[static_cast<Eigen::Index>(k)];
  }
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!std::isfinite(values[static_cast<Eigen::Index>(i)])) {
      throw ValidationError("imputation result does not cover non-respondent " + std::to_string(i));
    }
  }
  return values;
}

double imputed_total(const SampleFrame& sample, const ImputationResult& result) {
  return sample.d().dot(completed_values(sample, result));
}

double imputed_cdf(const SampleFrame& sample, const ImputationResult& result, double t) {
  const Vector values = completed_values(sample, result);
  double below = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] <= t) below += sample.d()[i];
  }
  return below / sample.d().sum();
}

}  // namespace zimpute
