#include "zimpute/cube.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "zimpute/errors.hpp"

namespace zimpute {
namespace {

bool fractional(double p) { return p > kIntegralTolerance && p < 1.0 - kIntegralTolerance; }

double snap(double p) {
  if (p <= kIntegralTolerance) return 0.0;
  if (p >= 1.0 - kIntegralTolerance) return 1.0;
  return p;
}

Matrix drop_zero_rows(const Matrix& a) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    if (a.row(k).cwiseAbs().maxCoeff() > 0.0) keep.push_back(k);
  }
  Matrix out(static_cast<Eigen::Index>(keep.size()), a.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = a.row(keep[k]);
  }
  return out;
}

// First null vector of b (rows: constraints, cols: cells), if any.
std::optional<Vector> null_direction(const Matrix& b) {
  const auto cells = b.cols();
  if (cells == 0) return std::nullopt;
  if (b.rows() == 0) {
    Vector e = Vector::Zero(cells);
    e[0] = 1.0;
    return e;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr;
  qr.setThreshold(1e-10);
  qr.compute(b.transpose());
  const auto rank = qr.rank();
  if (rank >= cells) return std::nullopt;
  Matrix q = qr.householderQ();
  return Vector(q.col(rank));
}

// One martingale step along +/- direction restricted to the given cells.
template <typename Direction, typename Get, typename Set>
void martingale_step(std::size_t count, const Direction& direction, Get get, Set set,
                     RandomStream& stream) {
  double up = std::numeric_limits<double>::infinity();    // largest step along +u
  double down = std::numeric_limits<double>::infinity();  // largest step along -u
  for (std::size_t k = 0; k < count; ++k) {
    const double u = direction[static_cast<Eigen::Index>(k)];
    const double p = get(k);
    if (u > 0.0) {
      up = std::min(up, (1.0 - p) / u);
      down = std::min(down, p / u);
    } else if (u < 0.0) {
      up = std::min(up, p / -u);
      down = std::min(down, (1.0 - p) / -u);
    }
  }
  const double step = stream.uniform() < down / (up + down) ? up : -down;
  for (std::size_t k = 0; k < count; ++k) {
    set(k, snap(get(k) + step * direction[static_cast<Eigen::Index>(k)]));
  }
}

Vector run_flight(Vector p, const Matrix& a, RandomStream& stream, FlightTrace* trace) {
  const auto k_rows = static_cast<std::size_t>(a.rows());
  std::vector<Eigen::Index> frac;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    p[i] = snap(p[i]);
    if (fractional(p[i])) frac.push_back(i);
  }
  std::vector<Eigen::Index> cells;
  while (!frac.empty()) {
    const std::size_t take = std::min(frac.size(), k_rows + 1);
    cells.assign(frac.begin(), frac.begin() + static_cast<std::ptrdiff_t>(take));
    Matrix b(a.rows(), static_cast<Eigen::Index>(take));
    for (std::size_t c = 0; c < take; ++c) b.col(static_cast<Eigen::Index>(c)) = a.col(cells[c]);
    const auto direction = null_direction(b);
    if (!direction) break;  // full column rank on every remaining fractional cell
    martingale_step(
        take, *direction, [&](std::size_t c) { return p[cells[c]]; },
        [&](std::size_t c, double value) { p[cells[c]] = value; }, stream);
    frac.erase(std::remove_if(frac.begin(), frac.end(),
                              [&](Eigen::Index i) { return !fractional(p[i]); }),
               frac.end());
    if (trace) trace->balance.push_back(a * p);
  }
  return p;
}

void validate(const BalancingProblem& problem) {
  if (problem.A.cols() != problem.p0.size()) {
    throw ValidationError("balancing matrix has " + std::to_string(problem.A.cols()) +
                          " columns for " + std::to_string(problem.p0.size()) + " cells");
  }
  if (!problem.p0.allFinite() || (problem.p0.array() < 0.0).any() ||
      (problem.p0.array() > 1.0).any()) {
    throw ValidationError("starting probabilities must lie in [0, 1]");
  }
  if (!problem.A.allFinite()) throw ValidationError("non-finite balancing matrix");
}

}  // namespace

Vector flight_phase(const BalancingProblem& problem, RandomStream& stream, FlightTrace* trace) {
  validate(problem);
  return run_flight(problem.p0, drop_zero_rows(problem.A), stream, trace);
}

CubeOutcome landing_phase(const Vector& partial, const BalancingProblem& problem,
                          RandomStream& stream) {
  validate(problem);
  if (partial.size() != problem.p0.size()) {
    throw ValidationError("partial vector length differs from the problem size");
  }
  CubeOutcome out;
  Vector p = partial;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    p[i] = snap(p[i]);
    if (fractional(p[i])) ++out.rounded_cells;
  }
  Matrix a = drop_zero_rows(problem.A);
  p = run_flight(p, a, stream, nullptr);
  while ((p.array() > 0.0 && p.array() < 1.0).any()) {
    if (a.rows() == 0) {
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (fractional(p[i])) p[i] = stream.bernoulli(p[i]) ? 1.0 : 0.0;
      }
      break;
    }
    a.conservativeResize(a.rows() - 1, Eigen::NoChange);
    p = run_flight(p, a, stream, nullptr);
  }
  out.x = p;
  out.constraint_residual = problem.A * (p - problem.p0);
  out.within_tolerance = problem.tolerance <= 0.0 ||
                         out.constraint_residual.cwiseAbs().maxCoeff() <= problem.tolerance;
  return out;
}

CubeOutcome cube_sample(const BalancingProblem& problem, RandomStream& stream) {
  const Vector partial = flight_phase(problem, stream);
  return landing_phase(partial, problem, stream);
}

std::vector<std::uint8_t> balanced_bernoulli(const Vector& probs, const Matrix& balance,
                                             RandomStream& stream, CubeOutcome* outcome) {
  if (balance.rows() != probs.size()) {
    throw ValidationError("balance matrix must have one row per cell");
  }
  BalancingProblem problem{probs, balance.transpose(), 0.0};
  CubeOutcome result = cube_sample(problem, stream);
  std::vector<std::uint8_t> x(static_cast<std::size_t>(probs.size()));
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    x[static_cast<std::size_t>(i)] = result.x[i] > 0.5 ? 1 : 0;
  }
  if (outcome) *outcome = std::move(result);
  return x;
}

DonorAssignment balanced_donor_assignment(const Vector& weights, const Vector& residuals,
                                          const Vector& probabilities, double center,
                                          RandomStream& stream) {
  const auto n_rec = static_cast<std::size_t>(weights.size());
  const auto m = static_cast<std::size_t>(residuals.size());
  if (m == 0) throw EmptyPoolError("empty donor pool");
  if (probabilities.size() != residuals.size()) {
    throw ValidationError("donor probabilities and residuals differ in length");
  }
  DonorAssignment out;
  out.donor.assign(n_rec, 0);
  if (n_rec == 0) return out;

  // psi is row-major: recipient i, donor j.
  std::vector<double> psi(n_rec * m);
  std::vector<std::vector<std::size_t>> frac(n_rec);
  // Fractional donors of each row, stored in reverse so that the leading
  // cells sit at the back and can be dropped cheaply.
  for (std::size_t i = 0; i < n_rec; ++i) {
    for (std::size_t j = m; j-- > 0;) {
      const double p = snap(probabilities[static_cast<Eigen::Index>(j)]);
      psi[i * m + j] = p;
      if (fractional(p)) frac[i].push_back(j);
    }
  }
  auto lead = [](const std::vector<std::size_t>& f, std::size_t t) { return f[f.size() - 1 - t]; };
  const double spread = residuals.maxCoeff() - residuals.minCoeff();
  const double tie = 1e-12 * std::max(1.0, weights.cwiseAbs().maxCoeff() * spread);
  auto effect = [&](std::size_t i, std::size_t from, std::size_t to) {
    return weights[static_cast<Eigen::Index>(i)] *
           (residuals[static_cast<Eigen::Index>(to)] - residuals[static_cast<Eigen::Index>(from)]);
  };

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n_rec; ++i) {
    if (frac[i].size() >= 2) active.push_back(i);
  }

  struct Cell {
    std::size_t row;
    std::size_t col;
  };
  std::vector<Cell> cells;
  Eigen::Vector4d direction;
  std::size_t head = 0;
  while (true) {
    while (head < active.size() && frac[active[head]].size() < 2) ++head;
    if (head >= active.size()) break;
    const std::size_t i = active[head];
    const auto& fi = frac[i];
    cells.clear();
    const double c1 = effect(i, lead(fi, 0), lead(fi, 1));
    if (std::abs(c1) <= tie) {
      cells = {{i, lead(fi, 0)}, {i, lead(fi, 1)}};
      direction << -1.0, 1.0, 0.0, 0.0;
    } else if (fi.size() >= 3) {
      const double c2 = effect(i, lead(fi, 0), lead(fi, 2));
      if (std::abs(c2) <= tie) {
        cells = {{i, lead(fi, 0)}, {i, lead(fi, 2)}};
        direction << -1.0, 1.0, 0.0, 0.0;
      } else {
        // c2 * (e_f1 - e_f0) - c1 * (e_f2 - e_f0)
        cells = {{i, lead(fi, 0)}, {i, lead(fi, 1)}, {i, lead(fi, 2)}};
        direction << c1 - c2, c2, -c1, 0.0;
      }
    } else {
      std::size_t second = head + 1;
      while (second < active.size() && frac[active[second]].size() < 2) {
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(second));
      }
      if (second >= active.size()) break;  // one degree of freedom left: landing
      const std::size_t k = active[second];
      const auto& fk = frac[k];
      const double c2 = effect(k, lead(fk, 0), lead(fk, 1));
      if (std::abs(c2) <= tie) {
        cells = {{k, lead(fk, 0)}, {k, lead(fk, 1)}};
        direction << -1.0, 1.0, 0.0, 0.0;
      } else {
        cells = {{i, lead(fi, 0)}, {i, lead(fi, 1)}, {k, lead(fk, 0)}, {k, lead(fk, 1)}};
        direction << -c2, c2, c1, -c1;
      }
    }
    // Normalize to keep the step lengths well scaled.
    direction /= direction.cwiseAbs().maxCoeff();
    martingale_step(
        cells.size(), direction,
        [&](std::size_t c) { return psi[cells[c].row * m + cells[c].col]; },
        [&](std::size_t c, double value) { psi[cells[c].row * m + cells[c].col] = value; },
        stream);
    for (const auto& cell : cells) {
      if (fractional(psi[cell.row * m + cell.col])) continue;
      auto& f = frac[cell.row];
      const auto pos = std::find(f.rbegin(), f.rend(), cell.col);
      if (pos != f.rend()) f.erase(std::next(pos).base());
    }
  }

  // Landing: the remaining fractional recipient draws one donor among its
  // fractional cells with probability psi_ij.
  for (std::size_t i = 0; i < n_rec; ++i) {
    std::size_t chosen = m;
    if (!frac[i].empty()) {
      ++out.landing_rows;
      double total = 0.0;
      for (std::size_t j : frac[i]) total += psi[i * m + j];
      double target = stream.uniform() * total;
      chosen = frac[i].back();
      for (std::size_t j : frac[i]) {
        target -= psi[i * m + j];
        if (target < 0.0) {
          chosen = j;
          break;
        }
      }
    } else {
      for (std::size_t j = 0; j < m; ++j) {
        if (psi[i * m + j] == 1.0) {
          chosen = j;
          break;
        }
      }
    }
    if (chosen == m) throw Error("donor assignment lost the unit mass of a recipient");
    out.donor[i] = chosen;
    out.balance_residual += weights[static_cast<Eigen::Index>(i)] *
                            (residuals[static_cast<Eigen::Index>(chosen)] - center);
  }
  return out;
}

DonorAssignment balanced_donor_assignment(const Vector& weights, const ResidualPool& pool,
                                          RandomStream& stream) {
  return balanced_donor_assignment(weights, pool.residuals, pool.probabilities, pool.mean,
                                   stream);
}

}  // namespace zimpute
