#include "zimpute/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "zimpute/errors.hpp"

namespace zimpute {
namespace {

double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Linear index beyond which a fitted probability is numerically saturated.
constexpr double kSaturatedIndex = 30.0;

}  // namespace

double phi_log_likelihood(const SampleFrame& sample, const Vector& gamma) {
  double ll = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!sample.responded(i)) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const double x = sample.u().row(ii).dot(gamma);
    // eta log f + (1 - eta) log(1 - f)
    ll -= sample.omega()[ii] * (sample.eta(i) ? softplus(-x) : softplus(x));
  }
  return ll;
}

PhiModel fit_phi(const SampleFrame& sample, const NewtonOptions& options) {
  const auto q = sample.u().cols();
  std::size_t ones = 0;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!sample.responded(i)) continue;
    (sample.eta(i) ? ones : zeros) += 1;
  }
  if (ones + zeros == 0) throw ValidationError("no responding units to fit the zero model");

  PhiModel model;
  const auto n = static_cast<Eigen::Index>(sample.size());
  if (ones == 0 || zeros == 0) {
    // Boundary solution: every respondent shares the same eta.
    model.phi = Vector::Constant(n, ones > 0 ? 1.0 : 0.0);
    model.converged = true;
    model.degenerate = true;
    return model;
  }

  Vector gamma = Vector::Zero(q);
  double ll = phi_log_likelihood(sample, gamma);
  auto saturated = [&](const Vector& g) {
    if (g.lpNorm<Eigen::Infinity>() > options.gamma_cap) return true;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      if (sample.responded(i) &&
          std::abs(sample.u().row(static_cast<Eigen::Index>(i)).dot(g)) > kSaturatedIndex) {
        return true;
      }
    }
    return false;
  };

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    Vector score = Vector::Zero(q);
    Matrix hessian = Matrix::Zero(q, q);
    for (std::size_t i = 0; i < sample.size(); ++i) {
      if (!sample.responded(i)) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      const auto ui = sample.u().row(ii).transpose();
      const double f = logistic(ui.dot(gamma));
      const double w = sample.omega()[ii];
      score += w * (sample.eta(i) - f) * ui;
      hessian.selfadjointView<Eigen::Lower>().rankUpdate(ui, w * f * (1.0 - f));
    }
    hessian = hessian.selfadjointView<Eigen::Lower>();
    model.iterations = iter;
    model.score_norm = score.norm();
    if (model.score_norm <= options.tolerance) {
      model.converged = true;
      break;
    }
    if (iter == options.max_iterations) break;

    Eigen::LDLT<Matrix> ldlt(hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      if (saturated(gamma)) break;
      throw ConvergenceError("singular information matrix in the zero-model fit");
    }
    const Vector step = ldlt.solve(score);
    double t = 1.0;
    Vector candidate = gamma + step;
    double ll_new = phi_log_likelihood(sample, candidate);
    for (int half = 0; half < 40 && !(ll_new >= ll - 1e-12 * std::abs(ll)); ++half) {
      t *= 0.5;
      candidate = gamma + t * step;
      ll_new = phi_log_likelihood(sample, candidate);
    }
    gamma = candidate;
    ll = ll_new;
    if (gamma.lpNorm<Eigen::Infinity>() > options.gamma_cap) break;
  }

  auto separation = [&] {
    return SeparationError(
        "separation detected in the zero model: fitted coefficients diverge (|gamma| = " +
        std::to_string(gamma.lpNorm<Eigen::Infinity>()) + ")");
  };
  if (gamma.lpNorm<Eigen::Infinity>() > options.gamma_cap) throw separation();
  if (model.converged) {
    // A finite optimum that classifies every respondent perfectly is the
    // numerical shadow of a diverging fit.
    bool perfect = true;
    for (std::size_t i = 0; i < sample.size() && perfect; ++i) {
      if (!sample.responded(i)) continue;
      const double f = logistic(sample.u().row(static_cast<Eigen::Index>(i)).dot(gamma));
      perfect = std::abs(sample.eta(i) - f) < 1e-6;
    }
    if (perfect) throw separation();
  } else {
    if (saturated(gamma)) throw separation();
    throw ConvergenceError("zero-model Newton-Raphson did not converge in " +
                           std::to_string(options.max_iterations) +
                           " iterations (score norm " + std::to_string(model.score_norm) + ")");
  }
  model.gamma = gamma;
  model.phi.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) model.phi[i] = logistic(sample.u().row(i).dot(gamma));
  return model;
}

ClampedMatrix clamp_eigenvalues(const Matrix& symmetric, double a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric);
  if (eig.info() != Eigen::Success) throw SingularMatrixError("eigendecomposition failed");
  const auto p = symmetric.rows();
  ClampedMatrix out;
  out.a = a;
  out.eigenvalues.resize(p);
  out.eigenvectors.resize(p, p);
  // Eigen returns ascending order; store descending.
  for (Eigen::Index j = 0; j < p; ++j) {
    double alpha = eig.eigenvalues()[p - 1 - j];
    if (alpha < kEigenZero) alpha = 0.0;
    out.eigenvalues[j] = alpha;
    out.eigenvectors.col(j) = eig.eigenvectors().col(p - 1 - j);
  }
  out.active = (out.eigenvalues.array() < a).any();
  if (!out.active) {
    out.clamped = symmetric;
  } else {
    const Vector raised = out.eigenvalues.cwiseMax(a);
    out.clamped = out.eigenvectors * raised.asDiagonal() * out.eigenvectors.transpose();
  }
  return out;
}

Vector clamped_solve(const Matrix& symmetric, const ClampedMatrix& clamped, const Vector& rhs) {
  if (!clamped.active) {
    Eigen::LDLT<Matrix> ldlt(symmetric);
    if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
      return ldlt.solve(rhs);
    }
  }
  Vector coeffs = clamped.eigenvectors.transpose() * rhs;
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    const double lambda = std::max(clamped.eigenvalues[j], clamped.a);
    if (!(lambda > 0.0)) throw SingularMatrixError("matrix is singular after clamping");
    coeffs[j] /= lambda;
  }
  return clamped.eigenvectors * coeffs;
}

RegularizedFit fit_regression(const SampleFrame& sample, const PhiModel& phi, double a) {
  const auto p = sample.z().cols();
  const double big_n = sample.population_size();
  if (phi.phi.size() != static_cast<Eigen::Index>(sample.size())) {
    throw ValidationError("zero model does not match the sample");
  }
  RegularizedFit fit;
  fit.a = a;
  fit.g_hat = Matrix::Zero(p, p);
  fit.rhs = Vector::Zero(p);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!sample.responded(i)) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const auto zi = sample.z().row(ii).transpose();
    const double w = sample.omega()[ii] / sample.v()[ii];
    fit.g_hat.selfadjointView<Eigen::Lower>().rankUpdate(zi, w * phi.phi[ii]);
    fit.rhs += w * sample.y(i) * zi;
  }
  fit.g_hat = Matrix(fit.g_hat.selfadjointView<Eigen::Lower>()) / big_n;
  fit.rhs /= big_n;

  const ClampedMatrix clamped = clamp_eigenvalues(fit.g_hat, a);
  fit.eigenvalues = clamped.eigenvalues;
  fit.eigenvectors = clamped.eigenvectors;
  fit.g_ar = clamped.clamped;
  fit.regularization_active = clamped.active;
  fit.b_ar = clamped_solve(fit.g_hat, clamped, fit.rhs);
  return fit;
}

ResidualPool build_residual_pool(const SampleFrame& sample, const RegularizedFit& fit) {
  ResidualPool pool;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (sample.responded(i) && sample.eta(i) == 1) {
      pool.donors.push_back(i);
      weight_sum += sample.omega()[static_cast<Eigen::Index>(i)];
    }
  }
  if (pool.donors.empty()) {
    throw EmptyPoolError("empty donor pool: no responding unit with a non-zero value");
  }
  const auto m = static_cast<Eigen::Index>(pool.donors.size());
  pool.residuals.resize(m);
  pool.probabilities.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto j = pool.donors[static_cast<std::size_t>(k)];
    const auto jj = static_cast<Eigen::Index>(j);
    pool.residuals[k] =
        (sample.y(j) - sample.z().row(jj).dot(fit.b_ar)) / std::sqrt(sample.v()[jj]);
    pool.probabilities[k] = sample.omega()[jj] / weight_sum;
  }
  pool.mean = pool.probabilities.dot(pool.residuals);
  pool.variance =
      pool.probabilities.dot((pool.residuals.array() - pool.mean).square().matrix());
  return pool;
}

FittedModel fit_model(const SampleFrame& sample, double a, const NewtonOptions& options) {
  FittedModel m;
  m.phi = fit_phi(sample, options);
  m.regression = fit_regression(sample, m.phi, a);
  m.pool = build_residual_pool(sample, m.regression);
  return m;
}

Vector linear_predictor(const SampleFrame& sample, const RegularizedFit& fit) {
  return sample.z() * fit.b_ar;
}

}  // namespace zimpute
