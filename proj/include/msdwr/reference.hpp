#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "msdwr/systems.hpp"

namespace msdwr {

struct ResolvedOptions {
  int newton_max = 20;
  double fast_tol = 1e-14;  ///< fast residual, relative to 1 + |u|
  double slow_tol = 1e-13;  ///< slow residual, relative to the slow increment
  double precycle_tol = 1e-13;
  int precycle_max = 2000;
};

/// Trapezoidal (Crank-Nicolson) integration of the full coupled system.
struct ResolvedRun {
  double k = 0.0;
  std::int64_t steps = 0;
  Vec y;  ///< terminal slow state
  Vec u;  ///< terminal fast state
  double j = 0.0;
  double seconds = 0.0;
  double max_fast_norm = 0.0;  ///< running max of |u|_inf
  int precycles = 0;           ///< periods used to put u(0) on the orbit at y0
};

/// Marches T/k steps from y0 and u(0) = u_{y0}(0), the trapezoidal periodic
/// orbit at frozen y0 obtained by cycling. 1/k must be an integer so the
/// forcing phase is taken exactly as (n mod M)/M.
ResolvedRun solve_resolved(const SlowFastSystem& system, double k, const GoalFunctional& goal,
                           const ResolvedOptions& options = {});

struct Extrapolation {
  double order = 0.0;  ///< p = log2((J_k - J_k/2) / (J_k/2 - J_k/4))
  double limit = 0.0;  ///< J_k/4 + (J_k/4 - J_k/2) / (2^p - 1)
  bool reliable = false;  ///< false for non-monotone or vanishing differences
};

Extrapolation extrapolate(double j_k, double j_half, double j_quarter);

struct ReferenceResult {
  std::vector<ResolvedRun> runs;  ///< k, k/2, k/4
  Extrapolation extrapolation;
  /// |L1 - L2| for the order-2 Richardson values of the two finest pairs.
  double richardson_gap = 0.0;
  bool stable = false;  ///< richardson_gap <= 1e-6
};

/// Runs the resolved solver on {k, k/2, k/4} (in parallel up to [jobs]) and
/// extrapolates.
ReferenceResult compute_reference(const SlowFastSystem& system, double k_coarse,
                                  const GoalFunctional& goal, int jobs = 1,
                                  const ResolvedOptions& options = {});

/// Rows (k, J, p, limit); p and limit are filled on the row that completes a
/// triple.
void write_reference_csv(std::ostream& os, const ReferenceResult& result);

}  // namespace msdwr
