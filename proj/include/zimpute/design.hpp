#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "zimpute/frames.hpp"
#include "zimpute/random.hpp"

namespace zimpute {

enum class DesignKind { PoissonRejective, StratifiedSrs };

struct DesignSpec {
  DesignKind kind = DesignKind::PoissonRejective;
  /// Rejective: fixed sample size n.
  std::size_t target_size = 0;
  /// Stratified SRS: n_h per stratum label.
  std::map<int, std::size_t> stratum_sizes;
  /// Rejective: inclusion probabilities proportional to this measure. Empty
  /// means equal probabilities.
  Vector size_measure;
  /// Cap on Poisson draws before the design is declared infeasible.
  std::size_t max_attempts = 1'000'000;
};

/// pi_i = min(1, c * measure_i) with c chosen so that sum(pi) = n. Units are
/// capped at 1 iteratively; c is located by bisection and then solved exactly
/// on the uncapped set.
Vector capped_proportional(const Vector& measure, double n);

Vector inclusion_probabilities(const PopulationFrame& population, const DesignSpec& spec);

/// Rejective (conditional Poisson) sampling: Poisson draws with working
/// probabilities pi, repeated until exactly n units are selected. Returns
/// sorted population indices.
std::vector<std::size_t> draw_rejective(const Vector& pi, std::size_t n,
                                        RandomStream& stream,
                                        std::size_t max_attempts = 1'000'000);

/// Exact sequential sampler for the same rejective design. Precomputes the
/// probabilities of every remaining-count state once (O(N n) memory), after
/// which each draw costs one uniform per unit.
class ConditionalPoissonSampler {
 public:
  ConditionalPoissonSampler(const Vector& pi, std::size_t n);

  std::vector<std::size_t> draw(RandomStream& stream) const;
  std::size_t sample_size() const noexcept { return certain_.size() + wanted_; }

 private:
  Vector pi_;
  std::vector<std::size_t> certain_;
  std::vector<std::size_t> random_units_;
  std::size_t wanted_ = 0;
  std::vector<double> table_;      // row k: P(units k.. give m selections), rescaled
  std::vector<double> log_scale_;  // log of the row scale
};

/// Without-replacement SRS of n_h units in every stratum. Sorted indices.
std::vector<std::size_t> draw_stratified_srs(const std::vector<int>& stratum,
                                             const std::map<int, std::size_t>& sizes,
                                             RandomStream& stream);

SampleFrame draw_sample(const PopulationFrame& population, const DesignSpec& spec,
                        RandomStream& stream);
/// Same, reusing inclusion probabilities computed once for the population.
SampleFrame draw_sample(const PopulationFrame& population, const DesignSpec& spec,
                        const Vector& pi, RandomStream& stream);

/// Closed-form joint inclusion probabilities of stratified SRS for the sampled
/// units, with N_h recovered as n_h / pi_i.
Matrix stratified_joint_probabilities(const SampleFrame& sample);

/// Horvitz-Thompson total sum_s d_i x_i.
double ht_total(const SampleFrame& sample, const Vector& values);

/// Plug-in (Hajek) distribution function sum_s d_i 1(x_i <= t) / sum_s d_i.
double hajek_cdf(const SampleFrame& sample, const Vector& values, double t);

/// F_N(t) over a finite population.
double population_cdf(const Vector& y, double t);

/// inf{t : F_N(t) >= alpha}.
double population_quantile(const Vector& y, double alpha);

}  // namespace zimpute
