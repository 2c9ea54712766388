#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "zimpute/frames.hpp"
#include "zimpute/impute.hpp"
#include "zimpute/model.hpp"
#include "zimpute/random.hpp"

namespace zimpute {

/// Linearization pieces of the imputed total.
struct LinearizedComponents {
  Vector xi;      // per sampled unit
  Vector a_hat;   // length p
  Vector b_hat;   // length q
  Vector c_hat;   // length q
  double v2 = 0.0;
  double v3 = 0.0;
  bool has_v3 = false;  // an imputation result was supplied
};

/// Weight of a respondent's residual in xi. Linearized: d_i + omega_i v_i^-1
/// a^T z_i, the derivative of the imputed total with respect to y_i.
/// AsPrinted: d_i + omega_i phi_i v_i^-1 a^T z_i, the published variant, which
/// understates the variance when phi is well below 1.
enum class XiForm { Linearized, AsPrinted };

/// Computes xi, a, b, c, V2 and (given an imputation result) V3. Gram
/// matrices are inverted through the eigenvalue clamp of the regression fit,
/// applied to their N^-1 scaled versions.
LinearizedComponents linearized_components(const SampleFrame& sample, const PhiModel& phi,
                                           const RegularizedFit& fit,
                                           const ImputationResult* result = nullptr,
                                           XiForm form = XiForm::Linearized);

/// sum_{i,j} ((pi_ij - pi_i pi_j) / pi_ij) xi_i xi_j. The diagonal of `joint`
/// must hold pi_i.
double v1_joint(const SampleFrame& sample, const Vector& xi, const Matrix& joint);

/// Hajek-Rosen approximation for rejective designs.
double v1_hajek_rosen(const SampleFrame& sample, const Vector& xi);

enum class V1Kind { HajekRosen, JointProbabilities };

struct VarianceDesign {
  V1Kind kind = V1Kind::HajekRosen;
  Matrix joint;  // used with JointProbabilities

  static VarianceDesign hajek_rosen() { return {}; }
  static VarianceDesign joint_probabilities(Matrix pij) {
    return {V1Kind::JointProbabilities, std::move(pij)};
  }
};

struct VarianceReport {
  Method method = Method::BMRR;
  V1Kind v1_kind = V1Kind::HajekRosen;
  double estimate = 0.0;  // imputed total
  double v1 = 0.0;
  double v2 = 0.0;
  double v3 = 0.0;
  bool includes_v3 = false;
  double total = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Balanced methods: V1 + V2. Random methods: V1 + V2 + V3. Interval:
/// estimate +- 1.96 sqrt(total).
VarianceReport total_variance(Method method, const SampleFrame& sample,
                              const LinearizedComponents& components,
                              const VarianceDesign& design, double estimate);

/// Components and report for one imputed sample.
VarianceReport estimate_variance(Method method, const SampleFrame& sample,
                                 const FittedModel& model, const ImputationResult& result,
                                 const VarianceDesign& design);

/// Maps a (resampled) sample to one or more estimates.
using BootstrapPipeline = std::function<Vector(const SampleFrame&, RandomStream&)>;

struct BootstrapResult {
  Matrix replicates;  // B x k
  Vector variance;    // length k, divisor B - 1
};

/// With-replacement bootstrap: n_h units are redrawn within each stratum, each
/// copy keeping its design weight, and the pipeline is rerun on every
/// replicate with child stream b of `stream`. Replicates run in parallel and
/// are stored in replicate order.
BootstrapResult bootstrap_variance(const SampleFrame& sample, const BootstrapPipeline& pipeline,
                                   std::size_t replicates, const RandomStream& stream,
                                   std::size_t threads = 0);

/// Rows of one bootstrap resample, in stratum order.
std::vector<std::size_t> bootstrap_rows(const SampleFrame& sample, RandomStream& stream);

}  // namespace zimpute
