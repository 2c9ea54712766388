#pragma once

#include <cstddef>
#include <vector>

#include "zimpute/frames.hpp"

namespace zimpute {

/// Default regularization threshold a.
inline constexpr double kDefaultRegThreshold = 0.05;

/// Eigenvalues below this are treated as exact zeros before clamping.
inline constexpr double kEigenZero = 1e-12;

struct NewtonOptions {
  double tolerance = 1e-8;  // on the score norm
  int max_iterations = 50;
  double gamma_cap = 50.0;  // larger |gamma| components signal separation
};

/// Logistic model for the probability of a non-zero value.
struct PhiModel {
  Vector gamma;  // estimated coefficients; empty when degenerate
  Vector phi;    // fitted probability for every sampled unit
  bool converged = false;
  bool degenerate = false;  // all respondents zero, or all non-zero
  int iterations = 0;
  double score_norm = 0.0;
};

/// Solves sum_s omega_i r_i u_i (eta_i - f(u_i, gamma)) = 0 with logit f by
/// damped Newton-Raphson from gamma = 0.
PhiModel fit_phi(const SampleFrame& sample, const NewtonOptions& options = {});

/// Weighted logistic log-likelihood of the respondents at gamma.
double phi_log_likelihood(const SampleFrame& sample, const Vector& gamma);

/// Symmetric matrix with eigenvalues clamped from below.
struct ClampedMatrix {
  Vector eigenvalues;   // descending, after zeroing values below kEigenZero
  Matrix eigenvectors;  // orthonormal, columns matched to eigenvalues
  Matrix clamped;       // sum_j max(alpha_j, a) v_j v_j^T
  double a = 0.0;
  bool active = false;  // some eigenvalue was raised to a
};

ClampedMatrix clamp_eigenvalues(const Matrix& symmetric, double a);

/// Solves clamped * x = rhs. With nothing clamped, solves the original matrix
/// directly so the unregularized solution is reproduced bit for bit.
Vector clamped_solve(const Matrix& symmetric, const ClampedMatrix& clamped,
                     const Vector& rhs);

/// Regularized regression coefficient of the non-zero part.
struct RegularizedFit {
  Matrix g_hat;          // N^-1 sum omega r phi v^-1 z z^T
  Vector eigenvalues;    // descending
  Matrix eigenvectors;
  double a = kDefaultRegThreshold;
  Matrix g_ar;
  Vector rhs;            // N^-1 sum omega r v^-1 z y
  Vector b_ar;
  bool regularization_active = false;
};

RegularizedFit fit_regression(const SampleFrame& sample, const PhiModel& phi,
                              double a = kDefaultRegThreshold);

/// Standardized residuals of responding non-zero units, resampled by the
/// random imputation methods.
struct ResidualPool {
  std::vector<std::size_t> donors;  // sample indices
  Vector residuals;                 // e_j
  Vector probabilities;             // normalized omega over the pool
  double mean = 0.0;                // sum p_j e_j
  double variance = 0.0;            // sum p_j (e_j - mean)^2

  std::size_t size() const noexcept { return donors.size(); }
};

ResidualPool build_residual_pool(const SampleFrame& sample, const RegularizedFit& fit);

/// Everything the imputation methods need from the respondents.
struct FittedModel {
  PhiModel phi;
  RegularizedFit regression;
  ResidualPool pool;
};

FittedModel fit_model(const SampleFrame& sample, double a = kDefaultRegThreshold,
                      const NewtonOptions& options = {});

/// z_i^T B for every sampled unit.
Vector linear_predictor(const SampleFrame& sample, const RegularizedFit& fit);

}  // namespace zimpute
