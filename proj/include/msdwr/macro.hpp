#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "msdwr/discretization.hpp"
#include "msdwr/micro.hpp"
#include "msdwr/systems.hpp"

namespace msdwr {

struct MacroOptions {
  OrbitOptions orbit;
  double newton_tol = 1e-12;  ///< absolute, max norm of the step residual
  int newton_max = 20;
  /// Cycle the Gauss-point orbits below tol_P inside Newton so that orbit
  /// noise stays under the step tolerance. Accepted orbits always meet tol_P.
  bool tighten_orbits = true;
};

struct NewtonRecord {
  int iterations = 0;
  std::vector<double> residuals;
};

/// Hints carried from one macro step to the next.
struct StepWarmStart {
  std::optional<Vec> predictor;        ///< initial guess for Y_n
  std::array<std::optional<Vec>, 2> fast_start;  ///< cycling start per Gauss point
};

struct MacroStepResult {
  Vec y;
  std::array<PeriodicOrbit, 2> orbits;  ///< converged orbits at the Gauss points
  std::array<Vec, 2> transfers;         ///< F_k at the Gauss points
  std::array<Mat, 2> grads_partial;     ///< approximate-Newton Jacobian pieces
  NewtonRecord newton;
  std::int64_t micro_steps = 0;  ///< micro steps actually integrated (all cycles)
  std::int64_t cycles = 0;
};

/// Orbit tolerance used inside the macro Newton loop on interval n.
double inner_orbit_tolerance(const SlowFastSystem& system, const MacroMesh& mesh, std::size_t n,
                             const MacroOptions& options);

/// One cG(1)/dG(0) step on interval n (0-based) from Y_{n} = y_prev.
MacroStepResult macro_step(const SlowFastSystem& system, const Vec& y_prev, std::size_t n,
                           const MacroMesh& mesh, const MacroOptions& options = {},
                           const StepWarmStart& warm = {});

struct MacroSolution {
  MacroMesh mesh;
  PiecewiseLinearFn y;
  std::vector<std::array<PeriodicOrbit, 2>> orbits;
  std::vector<std::array<Vec, 2>> transfers;
  std::vector<NewtonRecord> newton;
  std::int64_t micro_steps = 0;
  std::int64_t cycles = 0;
  double max_defect = 0.0;

  /// Effort measure E = sum_n (1 + 1/k_n).
  double effort() const;
  double goal(const GoalFunctional& goal) const { return goal.value(y.values().back()); }
  const PeriodicOrbit& orbit(std::size_t n, int q) const;
  const Vec& transfer_at(std::size_t n, int q) const;
  /// Slow state at Gauss point q of interval n.
  Vec gauss_state(std::size_t n, int q) const;
};

MacroSolution solve_macro(const SlowFastSystem& system, const MacroMesh& mesh,
                          const MacroOptions& options = {});

/// Step residuals Y_n - Y_{n-1} - eps K_n/2 sum_q F_k(Y(chi_nq)) from the cached
/// transfers, i.e. A_k(Y, Phi) for the dG(0) basis functions.
std::vector<Vec> galerkin_residuals(const SlowFastSystem& system, const MacroSolution& solution);

/// Rows (T_n, Y_1, ..., Y_c).
void write_trajectory_csv(std::ostream& os, const MacroSolution& solution);

}  // namespace msdwr
