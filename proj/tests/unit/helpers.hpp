#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "zimpute/frames.hpp"
#include "zimpute/random.hpp"

namespace testing {

using zimpute::Matrix;
using zimpute::Vector;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Matrix column(const Vector& v) { return v; }

inline Matrix ones(Eigen::Index n) { return Matrix::Ones(n, 1); }

// NaN in y marks a non-respondent.
inline zimpute::SampleFrame sample_of(const Vector& y, const Matrix& z, const Matrix& u,
                                      const Vector& v, const Vector& pi,
                                      const Vector& omega = Vector(),
                                      std::vector<int> stratum = {},
                                      double population_size = 0.0) {
  zimpute::SampleColumns c;
  c.y = y;
  c.z = z;
  c.u = u;
  c.v = v;
  c.pi = pi;
  c.omega = omega;
  c.stratum = std::move(stratum);
  c.population_size = population_size;
  c.responded.resize(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    c.responded[static_cast<std::size_t>(i)] = std::isfinite(y[i]) ? 1 : 0;
  }
  return zimpute::SampleFrame::build(std::move(c));
}

// Two-covariate zero-inflated sample in the style of the simulation study.
inline zimpute::SampleFrame synthetic_sample(std::size_t n, double response, std::uint64_t seed,
                                             double pi = 0.05) {
  zimpute::RandomStream rs(seed, 99);
  Vector y(static_cast<Eigen::Index>(n));
  Matrix z(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double x = rs.gamma(2.0, 5.0);
    z(i, 0) = 1.0;
    z(i, 1) = x;
    const double phi = 1.0 / (1.0 + std::exp(-(1.5 - 0.05 * x)));
    const bool eta = rs.bernoulli(phi);
    const double value = eta ? 30.0 + 0.7 * x + rs.normal(0.0, 3.0) : 0.0;
    y[i] = rs.bernoulli(response) ? value : kNaN;
  }
  return sample_of(y, z, z, Vector::Ones(y.size()), Vector::Constant(y.size(), pi));
}

inline double binomial_sigma(double p, double reps) { return std::sqrt(p * (1.0 - p) / reps); }

}  // namespace testing
