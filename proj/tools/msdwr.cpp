// Command line driver for the multiscale solver and its error estimator.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "msdwr/adaptivity.hpp"
#include "msdwr/adjoint.hpp"
#include "msdwr/errors.hpp"
#include "msdwr/estimator.hpp"
#include "msdwr/experiments.hpp"
#include "msdwr/macro.hpp"
#include "msdwr/reference.hpp"

namespace {

using namespace msdwr;

enum Exit { ok = 0, solver_failure = 1, config_error = 2 };

struct Options {
  std::string problem = "osc1";
  std::string damping = "half";
  std::optional<double> big_k;
  std::optional<double> k;
  double tol_p = 1e-9;
  double beta = 1.2;
  int iters = 10;
  std::optional<double> target_error;
  std::optional<double> j_ref;
  double ref_k = 0.01;
  std::optional<double> resolved_k;
  std::string out;
  int jobs = 1;
};

// Writes to --out when given, else to stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ConfigError("cannot open output file " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

MacroOptions macro_options(const Options& o) {
  if (!(o.tol_p > 0.0)) throw ConfigError("--tolp must be positive");
  MacroOptions m;
  m.orbit.tol_p = o.tol_p;
  return m;
}

std::pair<double, double> uniform_steps(const Options& o) {
  if (!o.big_k || !o.k) throw ConfigError("this command needs --K and --k");
  return {*o.big_k, *o.k};
}

double reference_value(const Options& o, const SlowFastSystem& sys) {
  if (o.j_ref) return *o.j_ref;
  std::cerr << "no --jref given, computing the resolved reference\n";
  const auto ref = compute_reference(sys, o.ref_k, GoalFunctional(0), o.jobs);
  if (!ref.extrapolation.reliable) throw SolverError("reference extrapolation is unreliable");
  std::cerr << "reference " << ref.extrapolation.limit << " (order " << ref.extrapolation.order
            << ")\n";
  return ref.extrapolation.limit;
}

int cmd_reference(const Options& o, const OscillatorSystem& sys) {
  const auto ref = compute_reference(sys, o.ref_k, GoalFunctional(0), o.jobs);
  Sink sink(o.out);
  write_reference_csv(sink.stream(), ref);
  std::cerr << "limit " << ref.extrapolation.limit << " order " << ref.extrapolation.order
            << (ref.stable ? "" : " (Richardson values differ by more than 1e-6)") << "\n";
  return ok;
}

int cmd_multiscale(const Options& o, const OscillatorSystem& sys) {
  const auto [big_k, k] = uniform_steps(o);
  const auto sol = solve_macro(sys, MacroMesh::uniform(sys.horizon(), big_k, k), macro_options(o));
  Sink sink(o.out);
  write_trajectory_csv(sink.stream(), sol);
  std::cerr << "J " << sol.goal(GoalFunctional(0)) << " effort " << sol.effort() << "\n";
  return ok;
}

int cmd_estimate(const Options& o, const OscillatorSystem& sys) {
  const auto [big_k, k] = uniform_steps(o);
  const GoalFunctional goal(0);
  const auto sol = solve_macro(sys, MacroMesh::uniform(sys.horizon(), big_k, k), macro_options(o));
  const auto adj = solve_macro_adjoint(sys, sol, goal);
  const auto est = estimate(sys, sol, adj, goal);
  Sink sink(o.out);
  write_breakdown_csv(sink.stream(), sol.mesh, est);
  SummaryRow row{k, big_k, std::nan(""), est.eta_total, est.sum_eg, est.sum_ef, est.eta_efp, {}};
  if (o.j_ref) {
    row.err = *o.j_ref - sol.goal(goal);
    row.eff = effectivity(est, *o.j_ref, sol.goal(goal));
  }
  write_summary_csv(std::cerr, {row});
  return ok;
}

int cmd_convergence(const Options& o, const OscillatorSystem& sys) {
  ConvergenceConfig cfg;
  cfg.problem = sys.id();
  cfg.damping = sys.damping();
  cfg.jobs = o.jobs;
  cfg.macro = macro_options(o);
  if (o.big_k) cfg.macro_steps = {*o.big_k};
  if (o.k) cfg.micro_steps = {*o.k};
  cfg.j_ref = reference_value(o, sys);
  const auto cells = run_convergence(cfg);
  Sink sink(o.out);
  write_convergence_csv(sink.stream(), cells);
  int failed = 0;
  for (const auto& c : cells) {
    if (!c.ok) {
      ++failed;
      std::cerr << "cell k=" << c.row.k << " K=" << c.row.big_k << " failed: " << c.failure << "\n";
    }
  }
  return failed ? solver_failure : ok;
}

int cmd_adapt(const Options& o, const OscillatorSystem& sys) {
  AdaptConfig cfg;
  cfg.beta = o.beta;
  cfg.max_iterations = o.iters;
  cfg.target_error = o.target_error;
  cfg.j_ref = o.j_ref;
  cfg.validate();
  const double big_k = o.big_k.value_or(50000.0);
  const double k = o.k.value_or(0.05);
  const auto trace = adapt_loop(sys, MacroMesh::uniform(sys.horizon(), big_k, k), cfg,
                                GoalFunctional(0), macro_options(o));
  const std::filesystem::path dir = o.out.empty() ? "adapt_out" : o.out;
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "summary.csv");
    write_adapt_summary_csv(os, trace);
  }
  for (const auto& it : trace.iterations) {
    const std::string l = std::to_string(it.level);
    std::ofstream mesh_os(dir / ("mesh_" + l + ".csv"));
    write_mesh_csv(mesh_os, it.mesh);
    std::ofstream est_os(dir / ("breakdown_" + l + ".csv"));
    write_breakdown_csv(est_os, it.mesh, it.breakdown);
  }
  std::cerr << trace.stop_reason << " after " << trace.iterations.size() << " iterations\n";
  return ok;
}

int cmd_compare(const Options& o, const OscillatorSystem& sys) {
  CompareConfig cfg;
  cfg.problem = sys.id();
  cfg.damping = sys.damping();
  cfg.j_ref = reference_value(o, sys);
  cfg.target_error = o.target_error.value_or(5e-5);
  cfg.beta = o.beta;
  cfg.max_adaptive_iterations = std::max(o.iters, 1);
  cfg.resolved_step = o.resolved_k;
  cfg.macro = macro_options(o);
  if (o.big_k) cfg.start_macro = *o.big_k;
  if (o.k) cfg.start_micro = *o.k;
  const auto result = run_compare_effort(cfg);
  Sink sink(o.out);
  write_compare_csv(sink.stream(), result);
  if (!result.uniform_reached || !result.adaptive_reached)
    std::cerr << "target error not reached by every approach\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale slow/fast ODE solver with goal-oriented error estimation"};
  app.fallthrough();
  app.set_config("--config", "", "key=value configuration file; flags override it");
  Options o;
  app.add_option("--problem", o.problem, "osc1 or osc2")->capture_default_str();
  app.add_option("--damping", o.damping, "half or threefifths")->capture_default_str();
  app.add_option("--K", o.big_k, "uniform macro step");
  app.add_option("--k", o.k, "uniform micro step");
  app.add_option("--tolp", o.tol_p, "periodicity tolerance")->capture_default_str();
  app.add_option("--beta", o.beta, "refinement threshold factor")->capture_default_str();
  app.add_option("--iters", o.iters, "adaptive iteration cap")->capture_default_str();
  app.add_option("--target-error", o.target_error, "stop threshold");
  app.add_option("--jref", o.j_ref, "reference goal value");
  app.add_option("--ref-k", o.ref_k, "coarsest resolved step")->capture_default_str();
  app.add_option("--resolved-k", o.resolved_k, "compare-effort: add a resolved run");
  app.add_option("--out", o.out, "output file (directory for adapt)");
  app.add_option("--jobs", o.jobs, "worker threads")->capture_default_str();

  using Handler = int (*)(const Options&, const OscillatorSystem&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands{
      {"reference", "resolved reference and extrapolation", cmd_reference},
      {"multiscale", "uniform multiscale run, trajectory CSV", cmd_multiscale},
      {"estimate", "estimator breakdown for one uniform run", cmd_estimate},
      {"convergence", "full (K, k) convergence table", cmd_convergence},
      {"adapt", "adaptive refinement loop", cmd_adapt},
      {"compare-effort", "uniform vs adaptive (vs resolved) effort", cmd_compare},
  };
  Handler chosen = nullptr;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->callback([&chosen, f = fn] { chosen = f; });
  }
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return config_error;
  }

  try {
    if (o.jobs < 1) throw ConfigError("--jobs must be at least 1");
    const auto sys = make_benchmark(parse_problem(o.problem), parse_damping(o.damping));
    return chosen(o, sys);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return config_error;
  } catch (const StructureError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return config_error;
  } catch (const UsageError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return solver_failure;
  }
}
