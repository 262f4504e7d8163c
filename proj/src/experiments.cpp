#include "msdwr/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

#include "msdwr/adjoint.hpp"
#include "msdwr/csv.hpp"
#include "msdwr/errors.hpp"
#include "msdwr/reference.hpp"

namespace msdwr {

std::vector<double> table_macro_steps() { return {100000.0, 50000.0, 20000.0, 10000.0, 5000.0, 2500.0}; }

std::vector<double> table_micro_steps() {
  std::vector<double> out;
  for (int j = 0; j <= 5; ++j) out.push_back(0.1 / (1 << j));
  return out;
}

CellResult run_cell(const SlowFastSystem& system, double big_k, double k,
                    std::optional<double> j_ref, const MacroOptions& macro,
                    const EstimatorOptions& estimator) {
  const auto t0 = std::chrono::steady_clock::now();
  CellResult cell;
  cell.row.k = k;
  cell.row.big_k = big_k;
  cell.row.err = cell.row.eta = cell.row.eta_eg = cell.row.eta_ef = cell.row.eta_efp =
      std::nan("");
  try {
    const GoalFunctional goal(0);
    const MacroMesh mesh = MacroMesh::uniform(system.horizon(), big_k, k);
    const MacroSolution sol = solve_macro(system, mesh, macro);
    const MacroAdjoint adj = solve_macro_adjoint(system, sol, goal);
    const EstimatorBreakdown est = estimate(system, sol, adj, goal, estimator);
    const GlobalEstimate global = assemble_global(system, sol, adj, goal, est);
    cell.j = sol.goal(goal);
    cell.row.eta = est.eta_total;
    cell.row.eta_eg = est.sum_eg;
    cell.row.eta_ef = est.sum_ef;
    cell.row.eta_efp = est.eta_efp;
    cell.localization_gap = std::abs(est.eta_total - global.total) /
                            std::max(std::abs(global.total), 1e-300);
    if (j_ref) {
      cell.row.err = *j_ref - cell.j;
      cell.row.eff = effectivity(est, *j_ref, cell.j);
      cell.indicator_index = indicator_index(est, *j_ref, cell.j);
    }
    cell.max_defect = sol.max_defect;
    for (const auto& pair : sol.orbits)
      for (const auto& orb : pair) cell.max_cycles = std::max(cell.max_cycles, orb.cycles_used);
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.failure = e.what();
  }
  cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cell;
}

std::vector<CellResult> run_convergence(const ConvergenceConfig& config) {
  const auto system = make_benchmark(config.problem, config.damping);
  struct Job {
    double big_k, k;
  };
  std::vector<Job> jobs;
  for (double k : config.micro_steps)
    for (double big_k : config.macro_steps) jobs.push_back({big_k, k});

  std::vector<CellResult> out(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      out[i] = run_cell(system, jobs[i].big_k, jobs[i].k, config.j_ref, config.macro,
                        config.estimator);
  };
  const int width = std::max(1, std::min<int>(config.jobs, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < width; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

void write_convergence_csv(std::ostream& os, const std::vector<CellResult>& cells) {
  std::vector<SummaryRow> rows;
  rows.reserve(cells.size());
  for (const auto& c : cells) rows.push_back(c.row);
  write_summary_csv(os, rows);
}

CompareResult run_compare_effort(const CompareConfig& config) {
  const auto system = make_benchmark(config.problem, config.damping);
  const GoalFunctional goal(0);
  CompareResult out;

  if (config.resolved_step) {
    const ResolvedRun run = solve_resolved(system, *config.resolved_step, goal);
    out.rows.push_back({"resolved", config.j_ref - run.j, run.k, 0.0,
                        static_cast<double>(run.steps), static_cast<double>(run.steps)});
  }

  double big_k = config.start_macro, k = config.start_micro;
  double cumulative = 0.0;
  double recorded = 0.0;
  for (int level = 0; level < config.max_uniform_levels; ++level) {
    const MacroMesh mesh = MacroMesh::uniform(system.horizon(), big_k, k);
    const MacroSolution sol = solve_macro(system, mesh, config.macro);
    UniformLevel lv{big_k, k, sol.goal(goal), config.j_ref - sol.goal(goal), sol.effort(), 0.0};
    cumulative += lv.effort;
    recorded += static_cast<double>(sol.micro_steps);
    lv.cumulative_effort = cumulative;
    out.uniform.push_back(lv);
    if (std::abs(lv.error) <= config.target_error) {
      out.uniform_reached = true;
      break;
    }
    if (level % 2 == 0)
      big_k /= 2.0;
    else
      k /= 2.0;
  }
  const UniformLevel& last = out.uniform.back();
  out.rows.push_back({"uniform", last.error, last.k, last.big_k, last.cumulative_effort * 2 * 5,
                      recorded});

  AdaptConfig acfg;
  acfg.beta = config.beta;
  acfg.max_iterations = config.max_adaptive_iterations;
  acfg.j_ref = config.j_ref;
  acfg.target_true_error = config.target_error;
  out.adaptive = adapt_loop(system, MacroMesh::uniform(system.horizon(), config.start_macro,
                                                       config.start_micro),
                            acfg, goal, config.macro, config.estimator);
  const AdaptIteration& fin = out.adaptive.iterations.back();
  out.adaptive_reached = std::abs(*fin.error) <= config.target_error;
  double min_k = 1.0, min_big_k = fin.mesh.horizon();
  double adaptive_recorded = 0.0;
  for (std::size_t n = 0; n < fin.mesh.size(); ++n) {
    min_k = std::min(min_k, fin.mesh.micro_step(n));
    min_big_k = std::min(min_big_k, fin.mesh.length(n));
  }
  for (const auto& it : out.adaptive.iterations)
    adaptive_recorded += static_cast<double>(it.breakdown.work.recorded_micro_steps);
  out.rows.push_back({"adaptive", *fin.error, min_k, min_big_k, fin.cumulative_effort * 2 * 5,
                      adaptive_recorded});
  return out;
}

void write_compare_csv(std::ostream& os, const CompareResult& result) {
  CsvWriter csv(os);
  csv.header({"approach", "error", "k", "K", "micro_steps", "recorded_micro_steps"});
  for (const auto& r : result.rows) {
    csv.cell(r.approach).cell(r.error).cell(r.k);
    if (r.big_k > 0.0)
      csv.cell(r.big_k);
    else
      csv.cell("");
    csv.cell(r.micro_steps).cell(r.recorded_micro_steps);
    csv.end_row();
  }
}

}  // namespace msdwr
