#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "zimpute/frames.hpp"
#include "zimpute/model.hpp"
#include "zimpute/random.hpp"

namespace zimpute {

/// Values within this distance of 0 or 1 count as integral.
inline constexpr double kIntegralTolerance = 1e-9;

/// Random rounding of p0 to a 0/1 vector with A x ~= A p0.
struct BalancingProblem {
  Vector p0;               // m starting probabilities in [0, 1]
  Matrix A;                // K x m balancing constraints
  double tolerance = 0.0;  // largest acceptable |A (x - p0)| entry after landing
};

struct CubeOutcome {
  Vector x;                    // 0/1
  Vector constraint_residual;  // A (x - p0)
  std::size_t rounded_cells = 0;  // cells still fractional when landing started
  bool within_tolerance = true;
};

/// Records A p after every flight step.
struct FlightTrace {
  std::vector<Vector> balance;
};

/// Martingale walk keeping A p constant. Each step moves along a null-space
/// direction of A restricted to at most K + 1 fractional cells (the first
/// ones in index order), taken from a column-pivoted QR. Stops when A
/// restricted to the remaining fractional cells has full column rank, which
/// leaves at most K of them.
Vector flight_phase(const BalancingProblem& problem, RandomStream& stream,
                    FlightTrace* trace = nullptr);

/// Resolves the cells left fractional by the flight phase: constraints are
/// dropped last row first and the flight re-run on the survivors; with no
/// constraint left every fractional cell is an independent Bernoulli draw.
CubeOutcome landing_phase(const Vector& partial, const BalancingProblem& problem,
                          RandomStream& stream);

/// Flight followed by landing.
CubeOutcome cube_sample(const BalancingProblem& problem, RandomStream& stream);

/// 0/1 vector with E[x_i] = probs_i and sum_i (x_i - probs_i) balance_ik ~= 0
/// for every column k of balance (m x K).
std::vector<std::uint8_t> balanced_bernoulli(const Vector& probs, const Matrix& balance,
                                             RandomStream& stream,
                                             CubeOutcome* outcome = nullptr);

struct DonorAssignment {
  std::vector<std::size_t> donor;  // position in the pool, per recipient
  double balance_residual = 0.0;   // sum_i w_i (e_donor(i) - center)
  std::size_t landing_rows = 0;    // recipients resolved by the landing step
};

/// Balanced with-replacement donor selection. Decision cells psi_ij start at
/// the donor probabilities; every flight move shifts mass between two donors
/// of the same recipient, so each recipient keeps exactly one unit of donor
/// mass, and pairs of moves are combined so that
/// sum_i w_i sum_j psi_ij (e_j - center) stays constant. Marginally,
/// Pr(donor(i) = j) = probabilities_j.
DonorAssignment balanced_donor_assignment(const Vector& weights, const Vector& residuals,
                                          const Vector& probabilities, double center,
                                          RandomStream& stream);

DonorAssignment balanced_donor_assignment(const Vector& weights, const ResidualPool& pool,
                                          RandomStream& stream);

}  // namespace zimpute
