#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "msdwr/discretization.hpp"
#include "msdwr/systems.hpp"
#include "msdwr/types.hpp"

namespace msdwr {

struct OrbitOptions {
  double tol_p = 1e-9;   ///< periodicity defect accepted by cycling
  int max_cycles = 200;
  double newton_tol = 1e-14;  ///< per micro step, relative to 1 + |u|
  int newton_max = 20;
};

/// Discrete periodic micro solution u_{k;Y}: cG(1) nodal values on [0, 1]
/// from the last integrated cycle.
struct PeriodicOrbit {
  Vec anchor;
  MicroGrid grid{2};
  Mat values;  ///< d x (M+1), column m is u(t_m)
  double defect = 0.0;
  int cycles_used = 0;
  std::vector<double> defect_history;

  PiecewiseLinearFn function() const;
  /// Linear interpolation at s in [0, 1].
  Vec at(double s) const;
};

/// D_Y u_Y on the micro grid: nodal d x c matrices, exactly periodic.
struct TangentOrbit {
  Vec anchor;
  MicroGrid grid{2};
  std::vector<Mat> values;  ///< M+1 entries
};

/// Micro adjoint z_{k;Y}: one d x c matrix per micro interval; column i is
/// the weight for slow component i.
struct MicroAdjoint {
  Vec anchor;
  MicroGrid grid{2};
  std::vector<Mat> values;  ///< M entries
};

/// Periodic solution by cycling from the zero state.
PeriodicOrbit solve_periodic(const SlowFastSystem& system, const Vec& anchor, const MicroGrid& grid,
                             const OrbitOptions& options = {});
/// Periodic solution by cycling from a given initial fast state.
PeriodicOrbit solve_periodic(const SlowFastSystem& system, const Vec& anchor, const MicroGrid& grid,
                             const OrbitOptions& options, const Vec& start);

/// One period of the micro scheme from u(0) = start; returns the d x (M+1)
/// nodal values.
Mat integrate_period(const SlowFastSystem& system, const Vec& anchor, const MicroGrid& grid,
                     const Vec& start, const OrbitOptions& options = {});

/// F_k(Y) = J^pi(u_{k;Y}): Gauss quadrature of f(Y, u(s)) over the period.
Vec transfer(const SlowFastSystem& system, const Vec& anchor, const PeriodicOrbit& orbit);
/// Quadrature of grad_y f only (approximate Newton Jacobian).
Mat transfer_grad_partial(const SlowFastSystem& system, const Vec& anchor,
                          const PeriodicOrbit& orbit);
/// Quadrature of grad_y f + grad_u f * D_Y u.
Mat transfer_grad_full(const SlowFastSystem& system, const Vec& anchor, const PeriodicOrbit& orbit,
                       const TangentOrbit& tangent);

/// Tangent orbit by shooting on the linearized periodic problem.
TangentOrbit solve_tangent(const SlowFastSystem& system, const Vec& anchor,
                           const PeriodicOrbit& orbit);

/// dG(0) adjoint of the discrete micro problem with the J^pi derivative as
/// right-hand side, by backward shooting.
MicroAdjoint solve_micro_adjoint(const SlowFastSystem& system, const Vec& anchor,
                                 const PeriodicOrbit& orbit);

/// Pairing (k/2) sum_{m,q} z_m^T dg(chi_mq) of the adjoint with a fast source
/// perturbation; the first-order change of J^pi. Returns a c-vector.
Vec adjoint_pairing(const MicroAdjoint& adjoint,
                    const std::function<Vec(double)>& perturbation);

struct EtaPiDetail {
  Vec primal;         ///< -(1/2) B(u_k, z~ - z_k) per slow component
  Vec dual;           ///< (1/2)[J'(u~ - u_k) - B'(u_k)(u~ - u_k, z_k)]
  double defect = 0;  ///< periodicity budget; not added to the value
  int cycles_used = 0;
};

struct EtaPi {
  Vec value;  ///< primal + dual
  EtaPiDetail detail;
};

/// Micro estimator from a converged orbit and its adjoint.
EtaPi eta_pi(const SlowFastSystem& system, const Vec& anchor, const PeriodicOrbit& orbit,
             const MicroAdjoint& adjoint);
/// Solves orbit and adjoint on [grid] and evaluates the micro estimator.
EtaPi eta_pi(const SlowFastSystem& system, const Vec& anchor, const MicroGrid& grid,
             const OrbitOptions& options = {});

/// Rows (s, u_1, ..., u_d).
void write_orbit_csv(std::ostream& os, const PeriodicOrbit& orbit);

}  // namespace msdwr
