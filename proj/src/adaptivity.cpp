#include "msdwr/adaptivity.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "msdwr/adjoint.hpp"
#include "msdwr/csv.hpp"
#include "msdwr/errors.hpp"

namespace msdwr {

void AdaptConfig::validate() const {
  if (!(beta >= 1.0)) throw ConfigError("beta must be at least 1");
  if (max_iterations < 1) throw ConfigError("iteration cap must be positive");
  if (target_error && !(*target_error > 0.0)) throw ConfigError("target error must be positive");
  if (target_true_error && !j_ref)
    throw ConfigError("a true-error target needs a reference value");
}

std::string to_string(Decision d) {
  switch (d) {
    case Decision::none: return "none";
    case Decision::macro: return "macro";
    case Decision::micro: return "micro";
    case Decision::both: return "both";
  }
  return "none";
}

AdaptStep adapt_step(const MacroMesh& mesh, const EstimatorBreakdown& breakdown,
                     const AdaptConfig& config) {
  config.validate();
  const std::size_t big_n = mesh.size();
  if (breakdown.eta_eg.size() != big_n || breakdown.eta_ef.size() != big_n)
    throw ConsistencyError("breakdown does not match the mesh");

  AdaptStep out{mesh, std::vector<Decision>(big_n, Decision::none), 0.0};
  for (std::size_t n = 0; n < big_n; ++n)
    out.mean_indicator += std::abs(breakdown.eta_eg[n]) + std::abs(breakdown.eta_ef[n]);
  out.mean_indicator /= static_cast<double>(big_n);

  std::vector<bool> split(big_n, false), halve(big_n, false);
  bool any = false;
  for (std::size_t n = 0; n < big_n; ++n) {
    const double eg = std::abs(breakdown.eta_eg[n]);
    const double ef = std::abs(breakdown.eta_ef[n]);
    if (!(eg + ef > config.beta * out.mean_indicator)) continue;
    any = true;
    if (eg > config.beta * ef) {
      out.decisions[n] = Decision::macro;
      split[n] = true;
    } else if (ef > config.beta * eg) {
      out.decisions[n] = Decision::micro;
      halve[n] = true;
    } else {
      out.decisions[n] = Decision::both;
      split[n] = halve[n] = true;
    }
  }
  if (any) out.mesh = refine(mesh, split, halve);
  return out;
}

double AdaptIteration::balance() const {
  double eg = 0.0, ef = 0.0;
  for (std::size_t n = 0; n < breakdown.eta_eg.size(); ++n) {
    eg += std::abs(breakdown.eta_eg[n]);
    ef += std::abs(breakdown.eta_ef[n]);
  }
  return eg > 0.0 ? ef / eg : std::numeric_limits<double>::infinity();
}

AdaptTrace adapt_loop(const SlowFastSystem& system, const MacroMesh& initial,
                      const AdaptConfig& config, const GoalFunctional& goal,
                      const MacroOptions& macro_options,
                      const EstimatorOptions& estimator_options) {
  config.validate();
  initial.require_patch_structure();
  AdaptTrace trace;
  MacroMesh mesh = initial;
  double cumulative = 0.0;
  for (int l = 1; l <= config.max_iterations; ++l) {
    const MacroSolution sol = solve_macro(system, mesh, macro_options);
    const MacroAdjoint adj = solve_macro_adjoint(system, sol, goal);
    AdaptIteration it(l, mesh, estimate(system, sol, adj, goal, estimator_options));
    it.j = sol.goal(goal);
    if (config.j_ref) {
      it.error = *config.j_ref - it.j;
      it.indicator_index = indicator_index(it.breakdown, *config.j_ref, it.j);
    }
    it.effort = it.breakdown.work.steps;
    cumulative += it.effort;
    it.cumulative_effort = cumulative;

    if (config.target_error && std::abs(it.breakdown.eta_total) <= *config.target_error) {
      trace.iterations.push_back(std::move(it));
      trace.stop_reason = "target error reached";
      return trace;
    }
    if (config.target_true_error && std::abs(*it.error) <= *config.target_true_error) {
      trace.iterations.push_back(std::move(it));
      trace.stop_reason = "true error target reached";
      return trace;
    }
    AdaptStep step = adapt_step(mesh, it.breakdown, config);
    it.decisions = std::move(step.decisions);
    trace.iterations.push_back(std::move(it));
    if (step.mesh == mesh) {
      trace.stop_reason = "mesh unchanged";
      return trace;
    }
    mesh = std::move(step.mesh);
  }
  trace.stop_reason = "iteration cap";
  return trace;
}

void write_adapt_summary_csv(std::ostream& os, const AdaptTrace& trace) {
  CsvWriter csv(os);
  csv.header({"l", "N", "J", "eta_total", "effort", "cumulative_effort"});
  for (const auto& it : trace.iterations)
    csv.row(it.level, it.mesh.size(), it.j, it.breakdown.eta_total, it.effort,
            it.cumulative_effort);
}

}  // namespace msdwr
