#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zimpute/frames.hpp"
#include "zimpute/model.hpp"
#include "zimpute/random.hpp"

namespace zimpute {

/// RR: random phi-regression (no residual). BRR: its balanced version.
/// MRR: random phi-regression with a resampled residual. BMRR: its balanced
/// version.
enum class Method { RR, BRR, MRR, BMRR };

inline constexpr Method kAllMethods[] = {Method::RR, Method::BRR, Method::MRR, Method::BMRR};

std::string_view method_name(Method method);
/// Case-insensitive; throws ValidationError on unknown names.
Method parse_method(std::string_view name);
bool is_balanced(Method method);
bool adds_residual(Method method);

struct ImputationResult {
  Method method = Method::MRR;
  std::vector<std::size_t> recipients;  // sample indices of non-respondents
  Vector y_star;                        // aligned with recipients
  std::vector<std::uint8_t> eta_star;
  std::vector<std::optional<std::size_t>> donor;  // sample index of the residual donor
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  double eta_balance_residual = 0.0;    // sum d (eta* - phi) z'B over recipients
  double donor_balance_residual = 0.0;  // sum d sqrt(v) eta* (e* - mean e)

  std::size_t size() const noexcept { return recipients.size(); }
};

ImputationResult impute_rr(const SampleFrame& sample, const PhiModel& phi,
                           const RegularizedFit& fit, RandomStream& stream);
ImputationResult impute_brr(const SampleFrame& sample, const PhiModel& phi,
                            const RegularizedFit& fit, RandomStream& stream);
ImputationResult impute_mrr(const SampleFrame& sample, const PhiModel& phi,
                            const RegularizedFit& fit, const ResidualPool& pool,
                            RandomStream& stream);
ImputationResult impute_bmrr(const SampleFrame& sample, const PhiModel& phi,
                             const RegularizedFit& fit, const ResidualPool& pool,
                             RandomStream& stream);

ImputationResult impute(Method method, const SampleFrame& sample, const FittedModel& model,
                        RandomStream& stream);

/// Observed y for respondents, imputed y* for non-respondents.
Vector completed_values(const SampleFrame& sample, const ImputationResult& result);

/// sum d r y + sum d (1 - r) y*.
double imputed_total(const SampleFrame& sample, const ImputationResult& result);

/// {sum d r 1(y <= t) + sum d (1 - r) 1(y* <= t)} / sum d.
double imputed_cdf(const SampleFrame& sample, const ImputationResult& result, double t);

}  // namespace zimpute
