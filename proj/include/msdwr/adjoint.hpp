#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "msdwr/discretization.hpp"
#include "msdwr/macro.hpp"
#include "msdwr/micro.hpp"
#include "msdwr/systems.hpp"

namespace msdwr {

/// Discrete macro adjoint Z_{K,k} in dG(0), with the full transfer gradients
/// it was assembled from.
struct MacroAdjoint {
  MacroMesh mesh;
  PiecewiseConstantFn z;
  std::vector<std::array<TangentOrbit, 2>> tangents;
  std::vector<std::array<Mat, 2>> grads;  ///< grad F_k at the Gauss points

  const Mat& grad(std::size_t n, int q) const;
  /// dJ/dy0 = Q_0^T Z_0: sensitivity of the goal to the initial slow state.
  Vec initial_sensitivity(double epsilon) const;
};

/// Backward recursion P_{N-1}^T Z_{N-1} = J', P_n^T Z_n = Q_{n+1}^T Z_{n+1} with
/// P_n = I - eps K_n/2 sum_q s_q grad F_nq, Q_n = I + eps K_n/2 sum_q (1 - s_q) grad F_nq.
MacroAdjoint solve_macro_adjoint(const SlowFastSystem& system, const MacroSolution& solution,
                                 const GoalFunctional& goal);

/// A'(Y)(phi_j, Z) - J'(phi_j) for every nodal hat phi_j, j = 1..N, assembled
/// by quadrature of the hat functions. Entry j-1 is a c-vector.
std::vector<Vec> adjoint_residuals(const SlowFastSystem& system, const MacroAdjoint& adjoint,
                                   const GoalFunctional& goal);

/// Rows (n, T_mid, Z_1, ..., Z_c) with 1-based n.
void write_adjoint_csv(std::ostream& os, const MacroAdjoint& adjoint);

}  // namespace msdwr
