#include "msdwr/macro.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "msdwr/csv.hpp"
#include "msdwr/errors.hpp"

namespace msdwr {

namespace {

using gauss2::fraction;

// Floor for the tightened orbit tolerance; cycling stalls in round-off below.
constexpr double orbit_tol_floor = 5e-15;

}  // namespace

double inner_orbit_tolerance(const SlowFastSystem& system, const MacroMesh& mesh, std::size_t n,
                             const MacroOptions& options) {
  const double tol_p = options.orbit.tol_p;
  if (!options.tighten_orbits) return tol_p;
  const double scale = system.epsilon() * mesh.length(n);
  if (scale <= 0.0) return tol_p;
  return std::min(tol_p, std::max(orbit_tol_floor, 1e-3 * options.newton_tol / scale));
}

MacroStepResult macro_step(const SlowFastSystem& system, const Vec& y_prev, std::size_t n,
                           const MacroMesh& mesh, const MacroOptions& options,
                           const StepWarmStart& warm) {
  if (!y_prev.allFinite()) throw UsageError("macro step started from a non-finite state");
  if (n >= mesh.size()) throw UsageError("macro interval out of range");
  const int c = system.slow_dim();
  const double eps = system.epsilon();
  const double big_k = mesh.length(n);
  const MicroGrid grid = mesh.micro_grid(n);

  OrbitOptions inner = options.orbit;
  inner.tol_p = inner_orbit_tolerance(system, mesh, n, options);

  MacroStepResult out;
  out.y = warm.predictor.value_or(y_prev);
  std::array<Vec, 2> start;
  for (int q = 0; q < 2; ++q)
    start[static_cast<std::size_t>(q)] =
        warm.fast_start[static_cast<std::size_t>(q)].value_or(Vec::Zero(system.fast_dim()));

  // Approximate Jacobian I - eps K/2 sum_q s_q grad~F at the first iterate,
  // then Broyden rank-one updates from the observed residual changes.
  Mat jac;
  Vec last_residual, last_update;
  for (int it = 0; it <= options.newton_max; ++it) {
    for (int q = 0; q < 2; ++q) {
      const auto qq = static_cast<std::size_t>(q);
      const double s = fraction[qq];
      const Vec yq = (1.0 - s) * y_prev + s * out.y;
      out.orbits[qq] = solve_periodic(system, yq, grid, inner, start[qq]);
      out.micro_steps += static_cast<std::int64_t>(out.orbits[qq].cycles_used) * grid.intervals();
      out.cycles += out.orbits[qq].cycles_used;
      start[qq] = out.orbits[qq].values.col(grid.intervals());
      out.transfers[qq] = transfer(system, yq, out.orbits[qq]);
    }
    const Vec residual =
        out.y - y_prev - 0.5 * eps * big_k * (out.transfers[0] + out.transfers[1]);
    const double rnorm = residual.lpNorm<Eigen::Infinity>();
    out.newton.residuals.push_back(rnorm);
    if (!std::isfinite(rnorm))
      throw NewtonError("macro Newton produced a non-finite residual", n, out.newton.residuals);
    if (rnorm <= options.newton_tol) {
      out.newton.iterations = it;
      for (int q = 0; q < 2; ++q) {
        const auto qq = static_cast<std::size_t>(q);
        out.grads_partial[qq] =
            transfer_grad_partial(system, out.orbits[qq].anchor, out.orbits[qq]);
      }
      return out;
    }
    if (it == options.newton_max) break;
    if (it == 0) {
      jac = Mat::Identity(c, c);
      for (int q = 0; q < 2; ++q) {
        const auto qq = static_cast<std::size_t>(q);
        jac -= 0.5 * eps * big_k * fraction[qq] *
               transfer_grad_partial(system, out.orbits[qq].anchor, out.orbits[qq]);
      }
    } else {
      const double dd = last_update.squaredNorm();
      if (dd > 0.0)
        jac += ((residual - last_residual) - jac * last_update) * last_update.transpose() / dd;
    }
    last_update = -jac.partialPivLu().solve(residual);
    last_residual = residual;
    out.y += last_update;
  }
  throw NewtonError("macro Newton did not reach " + std::to_string(options.newton_tol) +
                        " on interval " + std::to_string(n + 1),
                    n, out.newton.residuals);
}

double MacroSolution::effort() const {
  double e = 0.0;
  for (int m : mesh.micro_interval_counts()) e += 1.0 + m;
  return e;
}

const PeriodicOrbit& MacroSolution::orbit(std::size_t n, int q) const {
  if (n >= orbits.size() || q < 0 || q > 1)
    throw ConsistencyError("no cached orbit for interval " + std::to_string(n + 1));
  return orbits[n][static_cast<std::size_t>(q)];
}

const Vec& MacroSolution::transfer_at(std::size_t n, int q) const {
  if (n >= transfers.size() || q < 0 || q > 1)
    throw ConsistencyError("no cached transfer value for interval " + std::to_string(n + 1));
  return transfers[n][static_cast<std::size_t>(q)];
}

Vec MacroSolution::gauss_state(std::size_t n, int q) const {
  const double s = fraction[static_cast<std::size_t>(q)];
  return (1.0 - s) * y.value(n) + s * y.value(n + 1);
}

MacroSolution solve_macro(const SlowFastSystem& system, const MacroMesh& mesh,
                          const MacroOptions& options) {
  if (std::abs(mesh.horizon() - system.horizon()) > 1e-9 * system.horizon())
    throw ConfigError("mesh horizon does not match the problem horizon");
  const std::size_t big_n = mesh.size();
  std::vector<Vec> values;
  values.reserve(big_n + 1);
  values.push_back(system.initial_slow());

  MacroSolution sol{mesh, PiecewiseLinearFn({0.0, 1.0}, {Vec::Zero(1), Vec::Zero(1)}), {}, {}, {},
                    0, 0, 0.0};
  sol.orbits.reserve(big_n);
  sol.transfers.reserve(big_n);
  sol.newton.reserve(big_n);

  StepWarmStart warm;
  for (std::size_t n = 0; n < big_n; ++n) {
    const Vec& prev = values.back();
    MacroStepResult step = macro_step(system, prev, n, mesh, options, warm);

    // Next step: extrapolate with the mean transfer, restart cycling from the
    // converged states (interpolated if the micro grid changes).
    const Vec mean_f = 0.5 * (step.transfers[0] + step.transfers[1]);
    if (n + 1 < big_n) {
      warm.predictor = step.y + system.epsilon() * mesh.length(n + 1) * mean_f;
      for (int q = 0; q < 2; ++q) {
        const auto qq = static_cast<std::size_t>(q);
        const auto& orb = step.orbits[qq];
        warm.fast_start[qq] = orb.values.col(orb.grid.intervals());
      }
    }
    for (const auto& orb : step.orbits) sol.max_defect = std::max(sol.max_defect, orb.defect);
    sol.micro_steps += step.micro_steps;
    sol.cycles += step.cycles;
    values.push_back(step.y);
    sol.orbits.push_back(std::move(step.orbits));
    sol.transfers.push_back(std::move(step.transfers));
    sol.newton.push_back(std::move(step.newton));
  }
  std::vector<double> nodes(mesh.nodes().begin(), mesh.nodes().end());
  sol.y = PiecewiseLinearFn(std::move(nodes), std::move(values));
  return sol;
}

std::vector<Vec> galerkin_residuals(const SlowFastSystem& system, const MacroSolution& solution) {
  std::vector<Vec> out;
  out.reserve(solution.mesh.size());
  for (std::size_t n = 0; n < solution.mesh.size(); ++n) {
    out.push_back(solution.y.value(n + 1) - solution.y.value(n) -
                  0.5 * system.epsilon() * solution.mesh.length(n) *
                      (solution.transfer_at(n, 0) + solution.transfer_at(n, 1)));
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const MacroSolution& solution) {
  CsvWriter csv(os);
  csv.cell("T");
  for (Eigen::Index i = 0; i < solution.y.dim(); ++i) csv.cell("Y_" + std::to_string(i + 1));
  csv.end_row();
  for (std::size_t n = 0; n <= solution.mesh.size(); ++n) {
    csv.cell(solution.mesh.node(n));
    for (Eigen::Index i = 0; i < solution.y.dim(); ++i) csv.cell(solution.y.value(n)[i]);
    csv.end_row();
  }
}

}  // namespace msdwr
