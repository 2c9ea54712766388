#include "zimpute/frames.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "zimpute/errors.hpp"

namespace zimpute {
namespace {

void require_finite(const Eigen::Ref<const Matrix>& m, const char* name) {
  if (!m.allFinite()) {
    throw ValidationError(std::string("non-finite value in column '") + name + "'");
  }
}

Matrix prepend_ones(const Matrix& m) {
  Matrix out(m.rows(), m.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(m.cols()) = m;
  return out;
}

std::vector<int> distinct(const std::vector<int>& labels) {
  std::set<int> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

}  // namespace

PopulationFrame PopulationFrame::build(PopulationColumns c, IntakeOptions options) {
  const auto n = c.y.size();
  if (n == 0) throw ValidationError("empty population");
  if (c.z.rows() != n || c.u.rows() != n || c.v.size() != n) {
    throw ValidationError("dimension mismatch: y has " + std::to_string(n) +
                          " rows, z " + std::to_string(c.z.rows()) + ", u " +
                          std::to_string(c.u.rows()) + ", v " +
                          std::to_string(c.v.size()));
  }
  if (!c.stratum.empty() && c.stratum.size() != static_cast<std::size_t>(n)) {
    throw ValidationError("dimension mismatch: stratum has " +
                          std::to_string(c.stratum.size()) + " rows, y " +
                          std::to_string(n));
  }
  require_finite(c.y, "y");
  require_finite(c.z, "z");
  require_finite(c.u, "u");
  require_finite(c.v, "v");
  if ((c.v.array() <= 0.0).any()) throw ValidationError("non-positive v");

  PopulationFrame f;
  f.y_ = std::move(c.y);
  f.z_ = options.z_intercept ? prepend_ones(c.z) : std::move(c.z);
  f.u_ = options.u_intercept ? prepend_ones(c.u) : std::move(c.u);
  f.v_ = std::move(c.v);
  f.stratum_ = c.stratum.empty() ? std::vector<int>(n, 0) : std::move(c.stratum);
  return f;
}

std::vector<int> PopulationFrame::strata() const { return distinct(stratum_); }

SampleFrame SampleFrame::build(SampleColumns c) {
  const auto n = c.pi.size();
  if (n == 0) throw ValidationError("empty sample");
  auto mismatch = [&](const char* name, Eigen::Index got) {
    throw ValidationError(std::string("dimension mismatch: column '") + name +
                          "' has " + std::to_string(got) + " rows, expected " +
                          std::to_string(n));
  };
  if (c.y.size() != n) mismatch("y", c.y.size());
  if (c.z.rows() != n) mismatch("z", c.z.rows());
  if (c.u.rows() != n) mismatch("u", c.u.rows());
  if (c.v.size() != n) mismatch("v", c.v.size());
  if (c.omega.size() != 0 && c.omega.size() != n) mismatch("omega", c.omega.size());
  if (!c.responded.empty() && c.responded.size() != static_cast<std::size_t>(n))
    mismatch("r", static_cast<Eigen::Index>(c.responded.size()));
  if (!c.stratum.empty() && c.stratum.size() != static_cast<std::size_t>(n))
    mismatch("stratum", static_cast<Eigen::Index>(c.stratum.size()));
  if (!c.members.empty() && c.members.size() != static_cast<std::size_t>(n))
    mismatch("members", static_cast<Eigen::Index>(c.members.size()));

  SampleFrame f;
  f.r_ = c.responded.empty() ? std::vector<std::uint8_t>(n, 1) : std::move(c.responded);
  for (auto& r : f.r_) {
    if (r > 1) throw ValidationError("response indicator must be 0 or 1");
  }
  f.y_ = std::move(c.y);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!f.r_[i]) f.y_[i] = std::numeric_limits<double>::quiet_NaN();
  }
  f.z_ = std::move(c.z);
  f.u_ = std::move(c.u);
  f.v_ = std::move(c.v);
  f.pi_ = std::move(c.pi);
  f.d_ = f.pi_.cwiseInverse();
  f.omega_ = c.omega.size() == 0 ? Vector::Ones(n) : std::move(c.omega);
  f.stratum_ = c.stratum.empty() ? std::vector<int>(n, 0) : std::move(c.stratum);
  if (c.members.empty()) {
    f.members_.resize(n);
    std::iota(f.members_.begin(), f.members_.end(), std::size_t{0});
  } else {
    f.members_ = std::move(c.members);
  }
  f.population_size_ = c.population_size > 0.0 ? c.population_size : f.d_.sum();
  f.validate();
  return derive_eta(f);
}

void SampleFrame::validate() const {
  require_finite(z_, "z");
  require_finite(u_, "u");
  require_finite(v_, "v");
  require_finite(pi_, "pi");
  require_finite(omega_, "omega");
  if ((v_.array() <= 0.0).any()) throw ValidationError("non-positive v");
  if ((pi_.array() <= 0.0).any() || (pi_.array() > 1.0).any()) {
    throw ValidationError("inclusion probability outside (0, 1]");
  }
  if ((omega_.array() <= 0.0).any()) throw ValidationError("non-positive omega");
  for (std::size_t i = 0; i < r_.size(); ++i) {
    if (r_[i] && !std::isfinite(y_[static_cast<Eigen::Index>(i)])) {
      throw ValidationError("non-finite y for responding unit " + std::to_string(i));
    }
  }
}

std::size_t SampleFrame::respondent_count() const noexcept {
  return static_cast<std::size_t>(std::count(r_.begin(), r_.end(), std::uint8_t{1}));
}

double SampleFrame::y(std::size_t i) const {
  if (!responded(i)) throw NotObservedError("y not observed for unit " + std::to_string(i));
  return y_[static_cast<Eigen::Index>(i)];
}

int SampleFrame::eta(std::size_t i) const {
  const auto e = eta_.at(i);
  if (e < 0) throw NotObservedError("eta not observed for unit " + std::to_string(i));
  return e;
}

std::vector<int> SampleFrame::strata() const { return distinct(stratum_); }

SampleFrame SampleFrame::with_response(std::vector<std::uint8_t> r) const {
  if (r.size() != size()) throw ValidationError("response vector length mismatch");
  SampleFrame f = *this;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] > 1) throw ValidationError("response indicator must be 0 or 1");
    if (r[i] && !r_[i]) throw ValidationError("cannot reveal y of a non-respondent");
    if (!r[i]) f.y_[static_cast<Eigen::Index>(i)] = std::numeric_limits<double>::quiet_NaN();
  }
  f.r_ = std::move(r);
  return derive_eta(f);
}

SampleFrame SampleFrame::with_omega(Vector omega) const {
  if (omega.size() != static_cast<Eigen::Index>(size())) {
    throw ValidationError("omega length mismatch");
  }
  SampleFrame f = *this;
  f.omega_ = std::move(omega);
  f.validate();
  return f;
}

SampleFrame SampleFrame::subset(std::span<const std::size_t> rows,
                                double population_size) const {
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (m == 0) throw ValidationError("empty subset");
  SampleFrame f;
  f.y_.resize(m);
  f.z_.resize(m, z_.cols());
  f.u_.resize(m, u_.cols());
  f.v_.resize(m);
  f.pi_.resize(m);
  f.d_.resize(m);
  f.omega_.resize(m);
  f.r_.resize(rows.size());
  f.eta_.resize(rows.size());
  f.stratum_.resize(rows.size());
  f.members_.resize(rows.size());
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto i = rows[static_cast<std::size_t>(k)];
    if (i >= size()) throw ValidationError("subset row out of range");
    const auto ii = static_cast<Eigen::Index>(i);
    f.y_[k] = y_[ii];
    f.z_.row(k) = z_.row(ii);
    f.u_.row(k) = u_.row(ii);
    f.v_[k] = v_[ii];
    f.pi_[k] = pi_[ii];
    f.d_[k] = d_[ii];
    f.omega_[k] = omega_[ii];
    f.r_[k] = r_[i];
    f.eta_[k] = eta_[i];
    f.stratum_[k] = stratum_[i];
    f.members_[k] = members_[i];
  }
  f.population_size_ = population_size > 0.0 ? population_size : f.d_.sum();
  return f;
}

SampleFrame derive_eta(const SampleFrame& sample) {
  SampleFrame f = sample;
  f.eta_.assign(f.size(), -1);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.r_[i]) f.eta_[i] = f.y_[static_cast<Eigen::Index>(i)] != 0.0 ? 1 : 0;
  }
  return f;
}

SampleFrame sample_from_population(const PopulationFrame& population,
                                   std::span<const std::size_t> members,
                                   const Vector& pi) {
  const auto n = static_cast<Eigen::Index>(members.size());
  if (pi.size() != n) throw ValidationError("pi length must equal the number of members");
  SampleColumns c;
  c.y.resize(n);
  c.z.resize(n, population.z().cols());
  c.u.resize(n, population.u().cols());
  c.v.resize(n);
  c.stratum.resize(members.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = members[static_cast<std::size_t>(k)];
    const auto ii = static_cast<Eigen::Index>(i);
    c.y[k] = population.y()[ii];
    c.z.row(k) = population.z().row(ii);
    c.u.row(k) = population.u().row(ii);
    c.v[k] = population.v()[ii];
    c.stratum[static_cast<std::size_t>(k)] = population.stratum()[i];
  }
  c.pi = pi;
  c.members.assign(members.begin(), members.end());
  c.population_size = static_cast<double>(population.size());
  return SampleFrame::build(std::move(c));
}

}  // namespace zimpute
