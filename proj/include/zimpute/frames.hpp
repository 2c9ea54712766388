#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace zimpute {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raw population columns as handed over by a reader or generator.
struct PopulationColumns {
  Vector y;
  Matrix z;  // N x p model covariates
  Matrix u;  // N x q covariates of the zero/non-zero model
  Vector v;  // known heteroscedasticity constants, > 0
  std::vector<int> stratum;  // empty: single stratum 0
};

struct IntakeOptions {
  bool z_intercept = false;  // prepend a constant column to z
  bool u_intercept = false;  // prepend a constant column to u
};

/// Validated, immutable finite population.
class PopulationFrame {
 public:
  static PopulationFrame build(PopulationColumns columns, IntakeOptions options = {});

  std::size_t size() const noexcept { return static_cast<std::size_t>(y_.size()); }
  const Vector& y() const noexcept { return y_; }
  const Matrix& z() const noexcept { return z_; }
  const Matrix& u() const noexcept { return u_; }
  const Vector& v() const noexcept { return v_; }
  const std::vector<int>& stratum() const noexcept { return stratum_; }
  std::vector<int> strata() const;  // sorted distinct labels

 private:
  PopulationFrame() = default;
  Vector y_;
  Matrix z_;
  Matrix u_;
  Vector v_;
  std::vector<int> stratum_;
};

/// Raw sample columns. Entries of y for non-respondents are ignored.
struct SampleColumns {
  Vector y;
  Matrix z;
  Matrix u;
  Vector v;
  Vector pi;
  Vector omega;                         // empty: all ones
  std::vector<std::uint8_t> responded;  // empty: full response
  std::vector<int> stratum;             // empty: single stratum 0
  std::vector<std::size_t> members;     // population indices; empty: 0..n-1
  double population_size = 0.0;         // N; <= 0: estimated by sum of d
};

/// Validated, immutable sample with response indicators and observed
/// zero indicators. Value semantics; derived frames are returned by copy.
class SampleFrame {
 public:
  static SampleFrame build(SampleColumns columns);

  std::size_t size() const noexcept { return static_cast<std::size_t>(pi_.size()); }
  std::size_t respondent_count() const noexcept;

  /// Observed y; throws NotObservedError when r_i = 0.
  double y(std::size_t i) const;
  /// y with NaN at non-respondents.
  const Vector& y_values() const noexcept { return y_; }

  const Matrix& z() const noexcept { return z_; }
  const Matrix& u() const noexcept { return u_; }
  const Vector& v() const noexcept { return v_; }
  const Vector& pi() const noexcept { return pi_; }
  const Vector& d() const noexcept { return d_; }
  const Vector& omega() const noexcept { return omega_; }
  const std::vector<int>& stratum() const noexcept { return stratum_; }
  const std::vector<std::size_t>& members() const noexcept { return members_; }
  double population_size() const noexcept { return population_size_; }

  bool responded(std::size_t i) const { return r_.at(i) != 0; }
  const std::vector<std::uint8_t>& r() const noexcept { return r_; }

  bool eta_observed(std::size_t i) const { return eta_.at(i) >= 0; }
  /// 1(y_i != 0) for respondents; throws NotObservedError otherwise.
  int eta(std::size_t i) const;

  std::vector<int> strata() const;

  /// Same units with a new response pattern; y of new non-respondents is dropped.
  SampleFrame with_response(std::vector<std::uint8_t> r) const;
  SampleFrame with_omega(Vector omega) const;
  /// Rows in the given order (repetitions allowed), with a new population size.
  SampleFrame subset(std::span<const std::size_t> rows, double population_size) const;

  friend SampleFrame derive_eta(const SampleFrame& sample);

 private:
  SampleFrame() = default;
  void validate() const;

  Vector y_;
  Matrix z_;
  Matrix u_;
  Vector v_;
  Vector pi_;
  Vector d_;
  Vector omega_;
  std::vector<std::uint8_t> r_;
  std::vector<std::int8_t> eta_;  // -1 where unobserved
  std::vector<int> stratum_;
  std::vector<std::size_t> members_;
  double population_size_ = 0.0;
};

/// Recomputes the observed zero indicators: eta_i = 1 iff y_i != 0 for
/// respondents, undefined elsewhere.
SampleFrame derive_eta(const SampleFrame& sample);

/// Sample drawn from a population (all units responding, y fully observed).
SampleFrame sample_from_population(const PopulationFrame& population,
                                   std::span<const std::size_t> members,
                                   const Vector& pi);

}  // namespace zimpute
