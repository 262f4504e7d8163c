#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "msdwr/adjoint.hpp"
#include "msdwr/macro.hpp"
#include "msdwr/micro.hpp"

namespace msdwr {

struct EstimatorOptions {
  bool adjoint_conformity = true;  ///< evaluate eta_EF' (needs k/2 orbits)
  double richardson_tol = 1e-12;   ///< orbit tolerance on the k/2 grids
};

/// Work measure E = sum_n (1 + 1/k_n), the multiplied total E * adjoint * cycles
/// and the micro steps actually integrated.
struct EffortCount {
  double steps = 0.0;
  double total = 0.0;
  std::int64_t recorded_micro_steps = 0;
  std::int64_t recorded_cycles = 0;
};

EffortCount effort(const MacroMesh& mesh, int multiplier_adjoint = 2, int multiplier_cycles = 5);
EffortCount effort(const MacroSolution& solution, int multiplier_adjoint = 2,
                   int multiplier_cycles = 5);

struct EstimatorBreakdown {
  std::vector<double> eta_eg;   ///< per interval
  std::vector<double> eta_ef;   ///< per interval
  std::vector<double> eta_efp_local;  ///< per-interval pieces of eta_EF'
  double eta_efp = 0.0;
  double eta_total = 0.0;
  double sum_eg = 0.0;
  double sum_ef = 0.0;
  EffortCount work;
  double periodicity_budget = 0.0;  ///< max accepted orbit defect

  // Gauss-point data reused by the global assembly.
  std::vector<std::array<EtaPi, 2>> micro;
  std::vector<std::array<Mat, 2>> grad_correction;  ///< grad F_* - grad F_k
};

/// Localized estimator: per-interval eta_EG^n, eta_EF^n and eta_EF'.
EstimatorBreakdown estimate(const SlowFastSystem& system, const MacroSolution& solution,
                            const MacroAdjoint& adjoint, const GoalFunctional& goal,
                            const EstimatorOptions& options = {});

/// eta_EF' alone, with grad F_* = (4 grad F_{k/2} - grad F_k) / 3.
double estimate_adjoint_conformity(const SlowFastSystem& system, const MacroSolution& solution,
                                   const MacroAdjoint& adjoint,
                                   const EstimatorOptions& options = {});

struct GlobalEstimate {
  double eta_eg = 0.0;
  double eta_ef = 0.0;
  double eta_efp = 0.0;
  double total = 0.0;
};

/// The same estimator assembled as global integrals of the reconstructed weight
/// functions, from the Gauss-point data stored in [breakdown].
GlobalEstimate assemble_global(const SlowFastSystem& system, const MacroSolution& solution,
                               const MacroAdjoint& adjoint, const GoalFunctional& goal,
                               const EstimatorBreakdown& breakdown);

/// 100 * eta_total / (J_ref - J); empty when the true error vanishes.
std::optional<double> effectivity(const EstimatorBreakdown& breakdown, double j_ref,
                                  double j_computed);
/// sum_n (|eta_EG^n| + |eta_EF^n|) / |J_ref - J|; empty when the true error vanishes.
std::optional<double> indicator_index(const EstimatorBreakdown& breakdown, double j_ref,
                                      double j_computed);

/// Rows (n, T_start, T_end, k, eta_EG, eta_EF) with 1-based n.
void write_breakdown_csv(std::ostream& os, const MacroMesh& mesh,
                         const EstimatorBreakdown& breakdown);

/// One line of the convergence table.
struct SummaryRow {
  double k = 0.0;
  double big_k = 0.0;
  double err = 0.0;
  double eta = 0.0;
  double eta_eg = 0.0;
  double eta_ef = 0.0;
  double eta_efp = 0.0;
  std::optional<double> eff;
};

/// Header k,K,err,eta,eta_EG,eta_EF,eta_EFp,eff; missing values are empty cells.
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

}  // namespace msdwr
