#include "zimpute/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "zimpute/errors.hpp"

namespace zimpute {
namespace {

double capped_sum(const Vector& m, double c) {
  return (c * m.array()).min(1.0).sum();
}

}  // namespace

Vector capped_proportional(const Vector& measure, double n) {
  const auto big_n = static_cast<double>(measure.size());
  if (n > big_n) throw DesignError("sample size exceeds population size");
  if (n <= 0.0) throw DesignError("sample size must be positive");
  if (!measure.allFinite() || (measure.array() < 0.0).any()) {
    throw DesignError("size measure must be finite and non-negative");
  }
  if (measure.maxCoeff() <= 0.0) throw DesignError("all-zero size measure");
  if ((measure.array() <= 0.0).any()) {
    throw DesignError("size measure must be strictly positive");
  }
  if (n == big_n) return Vector::Ones(measure.size());

  // sum(min(1, c m)) is continuous and non-decreasing in c.
  double lo = 0.0;
  double hi = 1.0 / measure.minCoeff();
  for (int it = 0; it < 400 && hi - lo > 1e-300; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double s = capped_sum(measure, mid);
    if (std::abs(s - n) <= 1e-12) {
      lo = hi = mid;
      break;
    }
    (s < n ? lo : hi) = mid;
  }
  const double c = 0.5 * (lo + hi);

  // Exact solve on the uncapped set identified by the bisection.
  double capped = 0.0;
  double free_mass = 0.0;
  for (Eigen::Index i = 0; i < measure.size(); ++i) {
    if (c * measure[i] >= 1.0) {
      capped += 1.0;
    } else {
      free_mass += measure[i];
    }
  }
  Vector pi(measure.size());
  const double c_exact = free_mass > 0.0 ? (n - capped) / free_mass : c;
  for (Eigen::Index i = 0; i < measure.size(); ++i) {
    pi[i] = c * measure[i] >= 1.0 ? 1.0 : std::min(1.0, c_exact * measure[i]);
  }
  if (std::abs(pi.sum() - n) > 1e-9) {
    throw DesignError("capped-proportional solver did not reach the target size");
  }
  return pi;
}

Vector inclusion_probabilities(const PopulationFrame& population, const DesignSpec& spec) {
  const auto big_n = population.size();
  if (spec.kind == DesignKind::PoissonRejective) {
    if (spec.target_size > big_n) throw DesignError("sample size exceeds population size");
    const Vector measure = spec.size_measure.size() == 0
                               ? Vector::Ones(static_cast<Eigen::Index>(big_n))
                               : spec.size_measure;
    if (measure.size() != static_cast<Eigen::Index>(big_n)) {
      throw DesignError("size measure length differs from population size");
    }
    return capped_proportional(measure, static_cast<double>(spec.target_size));
  }

  std::map<int, std::size_t> counts;
  for (int h : population.stratum()) ++counts[h];
  std::map<int, double> rate;
  for (const auto& [h, big_nh] : counts) {
    const auto it = spec.stratum_sizes.find(h);
    if (it == spec.stratum_sizes.end()) {
      throw DesignError("no sample size given for stratum " + std::to_string(h));
    }
    if (it->second > big_nh) {
      throw DesignError("sample size exceeds population size in stratum " + std::to_string(h));
    }
    if (it->second == 0) {
      throw DesignError("zero sample size in stratum " + std::to_string(h));
    }
    rate[h] = static_cast<double>(it->second) / static_cast<double>(big_nh);
  }
  Vector pi(static_cast<Eigen::Index>(big_n));
  for (std::size_t i = 0; i < big_n; ++i) {
    pi[static_cast<Eigen::Index>(i)] = rate[population.stratum()[i]];
  }
  return pi;
}

std::vector<std::size_t> draw_rejective(const Vector& pi, std::size_t n, RandomStream& stream,
                                        std::size_t max_attempts) {
  std::vector<std::size_t> certain;
  std::vector<std::size_t> random_units;
  for (Eigen::Index i = 0; i < pi.size(); ++i) {
    if (pi[i] >= 1.0) {
      certain.push_back(static_cast<std::size_t>(i));
    } else if (pi[i] > 0.0) {
      random_units.push_back(static_cast<std::size_t>(i));
    }
  }
  if (certain.size() > n) throw DesignError("more certainty units than the sample size");
  const std::size_t wanted = n - certain.size();
  if (wanted > random_units.size()) throw DesignError("sample size exceeds population size");

  std::vector<std::size_t> picked;
  picked.reserve(wanted + 1);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    picked.clear();
    std::size_t remaining = random_units.size();
    bool overflow = false;
    for (std::size_t i : random_units) {
      --remaining;
      if (stream.uniform() < pi[static_cast<Eigen::Index>(i)]) {
        picked.push_back(i);
        if (picked.size() > wanted) {
          overflow = true;
          break;
        }
      }
      if (picked.size() + remaining < wanted) break;
    }
    if (!overflow && picked.size() == wanted) {
      std::vector<std::size_t> out;
      out.reserve(n);
      std::merge(certain.begin(), certain.end(), picked.begin(), picked.end(),
                 std::back_inserter(out));
      return out;
    }
  }
  throw DesignError("rejective sampling exceeded " + std::to_string(max_attempts) +
                    " attempts; infeasible design");
}

ConditionalPoissonSampler::ConditionalPoissonSampler(const Vector& pi, std::size_t n) : pi_(pi) {
  for (Eigen::Index i = 0; i < pi.size(); ++i) {
    if (!(pi[i] >= 0.0 && pi[i] <= 1.0)) throw DesignError("inclusion probabilities must lie in [0, 1]");
    if (pi[i] >= 1.0) {
      certain_.push_back(static_cast<std::size_t>(i));
    } else if (pi[i] > 0.0) {
      random_units_.push_back(static_cast<std::size_t>(i));
    }
  }
  if (certain_.size() > n) throw DesignError("more certainty units than the sample size");
  wanted_ = n - certain_.size();
  if (wanted_ > random_units_.size()) throw DesignError("sample size exceeds population size");

  const std::size_t k_units = random_units_.size();
  const std::size_t width = wanted_ + 1;
  table_.assign((k_units + 1) * width, 0.0);
  log_scale_.assign(k_units + 1, 0.0);
  table_[k_units * width] = 1.0;
  for (std::size_t k = k_units; k-- > 0;) {
    const double p = pi_[static_cast<Eigen::Index>(random_units_[k])];
    const double* next = &table_[(k + 1) * width];
    double* row = &table_[k * width];
    double top = 0.0;
    for (std::size_t m = 0; m < width; ++m) {
      row[m] = (1.0 - p) * next[m] + (m > 0 ? p * next[m - 1] : 0.0);
      top = std::max(top, row[m]);
    }
    for (std::size_t m = 0; m < width; ++m) row[m] /= top;
    log_scale_[k] = log_scale_[k + 1] + std::log(top);
  }
  if (!(table_[wanted_] > 0.0)) throw DesignError("rejective design cannot reach the sample size");
}

std::vector<std::size_t> ConditionalPoissonSampler::draw(RandomStream& stream) const {
  const std::size_t width = wanted_ + 1;
  std::vector<std::size_t> picked;
  picked.reserve(wanted_);
  std::size_t m = wanted_;
  for (std::size_t k = 0; k < random_units_.size() && m > 0; ++k) {
    const double p = pi_[static_cast<Eigen::Index>(random_units_[k])];
    const double here = table_[k * width + m];
    const double take = p * table_[(k + 1) * width + m - 1] *
                        std::exp(log_scale_[k + 1] - log_scale_[k]) / here;
    if (stream.uniform() < take) {
      picked.push_back(random_units_[k]);
      --m;
    }
  }
  if (m != 0) throw DesignError("sequential rejective draw did not reach the sample size");
  std::vector<std::size_t> out;
  out.reserve(sample_size());
  std::merge(certain_.begin(), certain_.end(), picked.begin(), picked.end(),
             std::back_inserter(out));
  return out;
}

std::vector<std::size_t> draw_stratified_srs(const std::vector<int>& stratum,
                                             const std::map<int, std::size_t>& sizes,
                                             RandomStream& stream) {
  std::map<int, std::vector<std::size_t>> units;
  for (std::size_t i = 0; i < stratum.size(); ++i) units[stratum[i]].push_back(i);
  std::vector<std::size_t> out;
  for (auto& [h, idx] : units) {
    const auto it = sizes.find(h);
    if (it == sizes.end()) throw DesignError("no sample size given for stratum " + std::to_string(h));
    const std::size_t nh = it->second;
    if (nh > idx.size()) {
      throw DesignError("sample size exceeds population size in stratum " + std::to_string(h));
    }
    // Partial Fisher-Yates.
    for (std::size_t k = 0; k < nh; ++k) {
      const std::size_t j = k + stream.uniform_index(idx.size() - k);
      std::swap(idx[k], idx[j]);
    }
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(nh));
  }
  std::sort(out.begin(), out.end());
  return out;
}

SampleFrame draw_sample(const PopulationFrame& population, const DesignSpec& spec,
                        RandomStream& stream) {
  return draw_sample(population, spec, inclusion_probabilities(population, spec), stream);
}

SampleFrame draw_sample(const PopulationFrame& population, const DesignSpec& spec,
                        const Vector& pi, RandomStream& stream) {
  if (pi.size() != static_cast<Eigen::Index>(population.size())) {
    throw DesignError("inclusion probability vector length differs from population size");
  }
  std::vector<std::size_t> members =
      spec.kind == DesignKind::PoissonRejective
          ? draw_rejective(pi, spec.target_size, stream, spec.max_attempts)
          : draw_stratified_srs(population.stratum(), spec.stratum_sizes, stream);
  Vector pi_s(static_cast<Eigen::Index>(members.size()));
  for (std::size_t k = 0; k < members.size(); ++k) {
    pi_s[static_cast<Eigen::Index>(k)] = pi[static_cast<Eigen::Index>(members[k])];
  }
  return sample_from_population(population, members, pi_s);
}

Matrix stratified_joint_probabilities(const SampleFrame& sample) {
  const auto n = static_cast<Eigen::Index>(sample.size());
  std::map<int, double> nh;
  for (int h : sample.stratum()) nh[h] += 1.0;
  Matrix joint(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int hi = sample.stratum()[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      const int hj = sample.stratum()[static_cast<std::size_t>(j)];
      if (i == j) {
        joint(i, j) = sample.pi()[i];
      } else if (hi != hj) {
        joint(i, j) = sample.pi()[i] * sample.pi()[j];
      } else {
        const double n_h = nh[hi];
        const double big_nh = std::round(n_h / sample.pi()[i]);
        joint(i, j) = big_nh > 1.0 ? n_h * (n_h - 1.0) / (big_nh * (big_nh - 1.0)) : 0.0;
      }
    }
  }
  return joint;
}

double ht_total(const SampleFrame& sample, const Vector& values) {
  if (values.size() != static_cast<Eigen::Index>(sample.size())) {
    throw ValidationError("values length differs from sample size");
  }
  return sample.d().dot(values);
}

double hajek_cdf(const SampleFrame& sample, const Vector& values, double t) {
  if (values.size() != static_cast<Eigen::Index>(sample.size())) {
    throw ValidationError("values length differs from sample size");
  }
  double below = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] <= t) below += sample.d()[i];
  }
  return below / sample.d().sum();
}

double population_cdf(const Vector& y, double t) {
  if (y.size() == 0) throw ValidationError("empty population");
  return static_cast<double>((y.array() <= t).count()) / static_cast<double>(y.size());
}

double population_quantile(const Vector& y, double alpha) {
  if (y.size() == 0) throw ValidationError("empty population");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
  std::vector<double> sorted(y.data(), y.data() + y.size());
  std::sort(sorted.begin(), sorted.end());
  // Smallest order statistic with k/N >= alpha.
  const auto big_n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(alpha * big_n - 1e-12));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

}  // namespace zimpute
