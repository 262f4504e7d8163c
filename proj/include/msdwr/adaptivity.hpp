#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msdwr/estimator.hpp"
#include "msdwr/macro.hpp"

namespace msdwr {

struct AdaptConfig {
  double beta = 1.2;
  int max_iterations = 10;
  std::optional<double> target_error;  ///< stop once |eta_total| falls below
  std::optional<double> j_ref;         ///< used to report true errors
  /// stop once |J_ref - J| falls below; needs j_ref
  std::optional<double> target_true_error;

  /// Throws ConfigError for beta < 1 or a non-positive iteration cap.
  void validate() const;
};

enum class Decision { none, macro, micro, both };
std::string to_string(Decision d);

struct AdaptStep {
  MacroMesh mesh;
  std::vector<Decision> decisions;  ///< one per interval of the input mesh
  double mean_indicator = 0.0;      ///< eta-bar
};

/// One marking and refinement pass: interval n is flagged if
/// |eta_EG^n| + |eta_EF^n| > beta * mean; flagged intervals are split if the
/// macro part dominates by beta, get k halved if the micro part does, else both.
AdaptStep adapt_step(const MacroMesh& mesh, const EstimatorBreakdown& breakdown,
                     const AdaptConfig& config);

struct AdaptIteration {
  AdaptIteration(int l, MacroMesh m, EstimatorBreakdown b)
      : level(l), mesh(std::move(m)), breakdown(std::move(b)) {}

  int level = 0;  ///< l, 1-based
  MacroMesh mesh;
  EstimatorBreakdown breakdown;
  double j = 0.0;
  std::optional<double> error;  ///< J_ref - J when a reference is known
  std::optional<double> indicator_index;
  double effort = 0.0;             ///< E of this mesh
  double cumulative_effort = 0.0;  ///< sum of E up to this level
  std::vector<Decision> decisions;  ///< refinement applied after this level

  /// sum |eta_EF^n| / sum |eta_EG^n|
  double balance() const;
};

struct AdaptTrace {
  std::vector<AdaptIteration> iterations;
  std::string stop_reason;
};

AdaptTrace adapt_loop(const SlowFastSystem& system, const MacroMesh& initial,
                      const AdaptConfig& config, const GoalFunctional& goal,
                      const MacroOptions& macro_options = {},
                      const EstimatorOptions& estimator_options = {});

/// Rows (l, N, J, eta_total, effort, cumulative_effort).
void write_adapt_summary_csv(std::ostream& os, const AdaptTrace& trace);

}  // namespace msdwr
