#include "msdwr/estimator.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "msdwr/csv.hpp"
#include "msdwr/errors.hpp"

namespace msdwr {

namespace {

using gauss2::fraction;

double frac(int q) { return fraction[static_cast<std::size_t>(q)]; }

// Second difference of the nodal values over the patch of interval n, as a
// difference of exact neighbour differences.
Vec patch_second_difference(const MacroSolution& sol, std::size_t n) {
  const std::size_t a = n & ~std::size_t{1};
  return (sol.y.value(a + 2) - sol.y.value(a + 1)) - (sol.y.value(a + 1) - sol.y.value(a));
}

// Z~ - Z at Gauss point q of interval n.
Vec adjoint_weight(const MacroAdjoint& adj, std::size_t n, int q) {
  const std::size_t a = n & ~std::size_t{1};
  const MacroMesh& mesh = adj.mesh;
  const double spacing = mesh.midpoint(a + 1) - mesh.midpoint(a);
  const double t = mesh.gauss_point(n, q);
  return (adj.z.value(a + 1) - adj.z.value(a)) * ((t - mesh.midpoint(n)) / spacing);
}

Mat richardson_correction(const SlowFastSystem& system, const PeriodicOrbit& orbit,
                          const Mat& grad_k, const EstimatorOptions& options) {
  OrbitOptions fine_opts;
  fine_opts.tol_p = options.richardson_tol;
  const PeriodicOrbit fine =
      solve_periodic(system, orbit.anchor, orbit.grid.refined(), fine_opts, orbit.values.col(0));
  const TangentOrbit tangent = solve_tangent(system, orbit.anchor, fine);
  const Mat grad_half = transfer_grad_full(system, orbit.anchor, fine, tangent);
  return (4.0 * grad_half - grad_k) / 3.0 - grad_k;
}

void check_inputs(const MacroSolution& sol, const MacroAdjoint& adj) {
  sol.mesh.require_patch_structure();
  if (!(adj.mesh == sol.mesh)) throw ConsistencyError("primal and adjoint live on different meshes");
  if (adj.grads.size() != sol.mesh.size() || sol.orbits.size() != sol.mesh.size())
    throw ConsistencyError("missing cached orbits or gradients");
}

// Local eta_EF' contribution of interval n.
double efp_local(const SlowFastSystem& system, const MacroSolution& sol, const MacroAdjoint& adj,
                 std::size_t n, const std::array<Mat, 2>& correction) {
  const double big_k = sol.mesh.length(n);
  const Vec psi = -patch_second_difference(sol, n) / 12.0;
  double acc = 0.0;
  for (int q = 0; q < 2; ++q)
    acc += 0.5 * big_k * adj.z.value(n).dot(correction[static_cast<std::size_t>(q)] * psi);
  return 0.5 * system.epsilon() * acc;
}

}  // namespace

EffortCount effort(const MacroMesh& mesh, int multiplier_adjoint, int multiplier_cycles) {
  EffortCount out;
  for (int m : mesh.micro_interval_counts()) out.steps += 1.0 + m;
  out.total = out.steps * multiplier_adjoint * multiplier_cycles;
  return out;
}

EffortCount effort(const MacroSolution& solution, int multiplier_adjoint, int multiplier_cycles) {
  EffortCount out = effort(solution.mesh, multiplier_adjoint, multiplier_cycles);
  out.recorded_micro_steps = solution.micro_steps;
  out.recorded_cycles = solution.cycles;
  return out;
}

double estimate_adjoint_conformity(const SlowFastSystem& system, const MacroSolution& solution,
                                   const MacroAdjoint& adjoint, const EstimatorOptions& options) {
  check_inputs(solution, adjoint);
  double sum = 0.0;
  for (std::size_t n = 0; n < solution.mesh.size(); ++n) {
    std::array<Mat, 2> corr;
    for (int q = 0; q < 2; ++q)
      corr[static_cast<std::size_t>(q)] =
          richardson_correction(system, solution.orbit(n, q), adjoint.grad(n, q), options);
    sum += efp_local(system, solution, adjoint, n, corr);
  }
  return sum;
}

EstimatorBreakdown estimate(const SlowFastSystem& system, const MacroSolution& solution,
                            const MacroAdjoint& adjoint, const GoalFunctional& /*goal*/,
                            const EstimatorOptions& options) {
  check_inputs(solution, adjoint);
  const MacroMesh& mesh = solution.mesh;
  const std::size_t big_n = mesh.size();
  const double eps = system.epsilon();
  const int c = system.slow_dim();

  EstimatorBreakdown out;
  out.eta_eg.resize(big_n);
  out.eta_ef.resize(big_n);
  out.eta_efp_local.assign(big_n, 0.0);
  out.micro.resize(big_n);
  out.grad_correction.resize(big_n);
  out.work = effort(solution);
  out.periodicity_budget = solution.max_defect;

  for (std::size_t n = 0; n < big_n; ++n) {
    const double big_k = mesh.length(n);
    const Vec& zn = adjoint.z.value(n);
    const Vec second = patch_second_difference(solution, n);
    const Vec psi = -second / 12.0;
    const Vec slope = (solution.y.value(n + 1) - solution.y.value(n)) / big_k;

    double primal = 0.0, dual = 0.0, micro = 0.0;
    for (int q = 0; q < 2; ++q) {
      const auto qq = static_cast<std::size_t>(q);
      const double s = frac(q);
      const Vec w = adjoint_weight(adjoint, n, q);
      primal += 0.5 * big_k * (slope - eps * solution.transfer_at(n, q)).dot(w);
      const Vec dpsi = second * ((2.0 * s - 1.0) / (2.0 * big_k));
      dual += 0.5 * big_k * (dpsi - eps * adjoint.grad(n, q) * psi).dot(zn);

      const PeriodicOrbit& orbit = solution.orbit(n, q);
      const MicroAdjoint z_micro = solve_micro_adjoint(system, orbit.anchor, orbit);
      out.micro[n][qq] = eta_pi(system, orbit.anchor, orbit, z_micro);
      micro += 0.5 * big_k * out.micro[n][qq].value.dot(2.0 * zn + w);

      out.grad_correction[n][qq] =
          options.adjoint_conformity
              ? richardson_correction(system, orbit, adjoint.grad(n, q), options)
              : Mat::Zero(c, c);
    }
    // J'(Y~ - Y) restricted to I_n: only the last interval sees T, where the
    // quadratic interpolates Y.
    out.eta_eg[n] = -0.5 * primal - 0.5 * dual;
    out.eta_ef[n] = 0.5 * eps * micro;
    if (options.adjoint_conformity)
      out.eta_efp_local[n] = efp_local(system, solution, adjoint, n, out.grad_correction[n]);
  }

  for (std::size_t n = 0; n < big_n; ++n) {
    out.sum_eg += out.eta_eg[n];
    out.sum_ef += out.eta_ef[n];
    out.eta_efp += out.eta_efp_local[n];
  }
  out.eta_total = out.sum_eg + out.sum_ef + out.eta_efp;
  return out;
}

GlobalEstimate assemble_global(const SlowFastSystem& system, const MacroSolution& solution,
                               const MacroAdjoint& adjoint, const GoalFunctional& goal,
                               const EstimatorBreakdown& breakdown) {
  check_inputs(solution, adjoint);
  const MacroMesh& mesh = solution.mesh;
  const double eps = system.epsilon();
  const int c = system.slow_dim();
  const PatchQuadratic y_rec = reconstruct_quadratic(solution.y);
  const PatchLinear z_rec = reconstruct_linear(adjoint.z);

  auto gauss_index = [&](std::size_t n, double t) { return t < mesh.midpoint(n) ? 0 : 1; };

  // A(Y)(Z~ - Z) and A'(Y)(Y~ - Y, Z)
  const double a_primal = gauss2_integrate(
      [&](std::size_t n, double t) {
        const int q = gauss_index(n, t);
        return (solution.y.slope(n) - eps * solution.transfer_at(n, q)).dot(z_rec.weight(n, t));
      },
      mesh);
  const double a_dual = gauss2_integrate(
      [&](std::size_t n, double t) {
        const int q = gauss_index(n, t);
        const Vec e = y_rec.weight(n, t);
        const Vec de = y_rec.weight_derivative(n, t);
        return (de - eps * adjoint.grad(n, q) * e).dot(adjoint.z.value(n));
      },
      mesh);
  const double j_part =
      goal.derivative(c).dot(y_rec.weight(mesh.size() - 1, mesh.horizon()));

  GlobalEstimate out;
  out.eta_eg = -0.5 * a_primal + 0.5 * (j_part - a_dual);
  out.eta_ef = 0.5 * eps *
               gauss2_integrate(
                   [&](std::size_t n, double t) {
                     const auto q = static_cast<std::size_t>(gauss_index(n, t));
                     return breakdown.micro[n][q].value.dot(z_rec(t) + adjoint.z.value(n));
                   },
                   mesh);
  out.eta_efp = 0.5 * eps *
                gauss2_integrate(
                    [&](std::size_t n, double t) {
                      const auto q = static_cast<std::size_t>(gauss_index(n, t));
                      return (breakdown.grad_correction[n][q] * y_rec.weight(n, t))
                          .dot(adjoint.z.value(n));
                    },
                    mesh);
  out.total = out.eta_eg + out.eta_ef + out.eta_efp;
  return out;
}

std::optional<double> effectivity(const EstimatorBreakdown& breakdown, double j_ref,
                                  double j_computed) {
  const double err = j_ref - j_computed;
  if (err == 0.0 || !std::isfinite(err)) return std::nullopt;
  return 100.0 * breakdown.eta_total / err;
}

std::optional<double> indicator_index(const EstimatorBreakdown& breakdown, double j_ref,
                                      double j_computed) {
  const double err = j_ref - j_computed;
  if (err == 0.0 || !std::isfinite(err)) return std::nullopt;
  double sum = 0.0;
  for (std::size_t n = 0; n < breakdown.eta_eg.size(); ++n)
    sum += std::abs(breakdown.eta_eg[n]) + std::abs(breakdown.eta_ef[n]);
  return sum / std::abs(err);
}

void write_breakdown_csv(std::ostream& os, const MacroMesh& mesh,
                         const EstimatorBreakdown& breakdown) {
  if (breakdown.eta_eg.size() != mesh.size())
    throw ConsistencyError("breakdown does not match the mesh");
  CsvWriter csv(os);
  csv.header({"n", "T_start", "T_end", "k", "eta_EG", "eta_EF"});
  for (std::size_t n = 0; n < mesh.size(); ++n)
    csv.row(n + 1, mesh.start(n), mesh.end(n), mesh.micro_step(n), breakdown.eta_eg[n],
            breakdown.eta_ef[n]);
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  CsvWriter csv(os);
  csv.header({"k", "K", "err", "eta", "eta_EG", "eta_EF", "eta_EFp", "eff"});
  auto put = [&](double v) {
    if (std::isfinite(v))
      csv.cell(v);
    else
      csv.cell("");
  };
  for (const auto& r : rows) {
    csv.cell(r.k).cell(r.big_k);
    for (double v : {r.err, r.eta, r.eta_eg, r.eta_ef, r.eta_efp}) put(v);
    put(r.eff.value_or(std::nan("")));
    csv.end_row();
  }
}

}  // namespace msdwr
