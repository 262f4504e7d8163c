#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msdwr/adaptivity.hpp"
#include "msdwr/estimator.hpp"
#include "msdwr/macro.hpp"
#include "msdwr/systems.hpp"

namespace msdwr {

/// Macro steps of the convergence table.
std::vector<double> table_macro_steps();
/// Micro steps 0.1 * 2^-j, j = 0..5.
std::vector<double> table_micro_steps();

struct ConvergenceConfig {
  ProblemId problem = ProblemId::osc1;
  Damping damping = Damping::half;
  std::vector<double> macro_steps = table_macro_steps();
  std::vector<double> micro_steps = table_micro_steps();
  std::optional<double> j_ref;
  int jobs = 1;
  MacroOptions macro;
  EstimatorOptions estimator;
};

struct CellResult {
  SummaryRow row;
  bool ok = false;
  std::string failure;
  double j = 0.0;
  double localization_gap = 0.0;  ///< |local - global| / |global|
  std::optional<double> indicator_index;
  double max_defect = 0.0;
  int max_cycles = 0;  ///< largest cycle count of any accepted orbit
  double seconds = 0.0;
};

/// All (K, k) pairs, run in a worker pool; per-cell failures are recorded.
/// Rows are ordered by k (outer) and K (inner) as in the table.
std::vector<CellResult> run_convergence(const ConvergenceConfig& config);

/// Single (K, k) cell; never throws for solver failures.
CellResult run_cell(const SlowFastSystem& system, double big_k, double k,
                    std::optional<double> j_ref, const MacroOptions& macro = {},
                    const EstimatorOptions& estimator = {});

void write_convergence_csv(std::ostream& os, const std::vector<CellResult>& cells);

struct CompareConfig {
  ProblemId problem = ProblemId::osc2;
  Damping damping = Damping::half;
  double j_ref = 0.0;
  double target_error = 5e-5;
  double start_macro = 50000.0;
  double start_micro = 0.05;
  double beta = 1.2;
  int max_adaptive_iterations = 30;
  int max_uniform_levels = 16;
  std::optional<double> resolved_step;  ///< adds a resolved row when set
  MacroOptions macro;
  EstimatorOptions estimator;
};

struct UniformLevel {
  double big_k = 0.0;
  double k = 0.0;
  double j = 0.0;
  double error = 0.0;
  double effort = 0.0;
  double cumulative_effort = 0.0;
};

struct EffortRow {
  std::string approach;
  double error = 0.0;
  double k = 0.0;
  double big_k = 0.0;
  double micro_steps = 0.0;
  double recorded_micro_steps = 0.0;  ///< actually integrated, all cycles
};

struct CompareResult {
  std::vector<EffortRow> rows;
  std::vector<UniformLevel> uniform;
  AdaptTrace adaptive;
  bool uniform_reached = false;
  bool adaptive_reached = false;
};

/// Uniform sequence (alternately halving K and k, starting with K) and the
/// adaptive loop, both run until the true error is below the target; effort is
/// cumulative E times 2 (adjoint) times 5 (cycles).
CompareResult run_compare_effort(const CompareConfig& config);

/// Rows (approach, error, k, K, micro_steps, recorded_micro_steps).
void write_compare_csv(std::ostream& os, const CompareResult& result);

}  // namespace msdwr
