#include "msdwr/adjoint.hpp"

#include <ostream>
#include <string>

#include "msdwr/csv.hpp"
#include "msdwr/errors.hpp"

namespace msdwr {

namespace {

using gauss2::fraction;

// Hat-weighted block (I -+ eps K/2 sum_q w_q grad F_q) of interval n.
Mat block(const MacroAdjoint& adj, double eps, std::size_t n, bool left) {
  const int c = static_cast<int>(adj.grad(n, 0).rows());
  Mat out = Mat::Identity(c, c);
  const double h = 0.5 * eps * adj.mesh.length(n);
  for (int q = 0; q < 2; ++q) {
    const double w = left ? 1.0 - fraction[static_cast<std::size_t>(q)]
                          : fraction[static_cast<std::size_t>(q)];
    if (left)
      out += h * w * adj.grad(n, q);
    else
      out -= h * w * adj.grad(n, q);
  }
  return out;
}

}  // namespace

const Mat& MacroAdjoint::grad(std::size_t n, int q) const {
  if (n >= grads.size() || q < 0 || q > 1)
    throw ConsistencyError("no cached transfer gradient for interval " + std::to_string(n + 1));
  return grads[n][static_cast<std::size_t>(q)];
}

Vec MacroAdjoint::initial_sensitivity(double epsilon) const {
  return block(*this, epsilon, 0, true).transpose() * z.value(0);
}

MacroAdjoint solve_macro_adjoint(const SlowFastSystem& system, const MacroSolution& solution,
                                 const GoalFunctional& goal) {
  const std::size_t big_n = solution.mesh.size();
  if (solution.orbits.size() != big_n)
    throw ConsistencyError("primal solution has no orbit cache for every interval");
  const int c = system.slow_dim();

  MacroAdjoint adj{solution.mesh, PiecewiseConstantFn({0.0, 1.0}, {Vec::Zero(c)}), {}, {}};
  adj.tangents.resize(big_n);
  adj.grads.resize(big_n);
  for (std::size_t n = 0; n < big_n; ++n) {
    for (int q = 0; q < 2; ++q) {
      const auto qq = static_cast<std::size_t>(q);
      const PeriodicOrbit& orbit = solution.orbit(n, q);
      adj.tangents[n][qq] = solve_tangent(system, orbit.anchor, orbit);
      adj.grads[n][qq] = transfer_grad_full(system, orbit.anchor, orbit, adj.tangents[n][qq]);
    }
  }

  const double eps = system.epsilon();
  std::vector<Vec> zs(big_n);
  Vec rhs = goal.derivative(c);
  for (std::size_t i = big_n; i-- > 0;) {
    if (i + 1 < big_n) rhs = block(adj, eps, i + 1, true).transpose() * zs[i + 1];
    const Mat p = block(adj, eps, i, false).transpose();
    Eigen::FullPivLU<Mat> lu(p);
    if (!lu.isInvertible() || lu.rcond() < 1e-14)
      throw SolverError("adjoint assembly: singular block on interval " + std::to_string(i + 1));
    zs[i] = lu.solve(rhs);
  }
  std::vector<double> nodes(solution.mesh.nodes().begin(), solution.mesh.nodes().end());
  adj.z = PiecewiseConstantFn(std::move(nodes), std::move(zs));
  return adj;
}

std::vector<Vec> adjoint_residuals(const SlowFastSystem& system, const MacroAdjoint& adjoint,
                                   const GoalFunctional& goal) {
  const MacroMesh& mesh = adjoint.mesh;
  const std::size_t big_n = mesh.size();
  const int c = system.slow_dim();
  const double eps = system.epsilon();
  const Vec jprime = goal.derivative(c);

  std::vector<Vec> out;
  out.reserve(big_n);
  for (std::size_t j = 1; j <= big_n; ++j) {
    // Hat at T_j: rises on interval j-1, falls on interval j.
    Vec acc = Vec::Zero(c);
    for (std::size_t n : {j - 1, j}) {
      if (n >= big_n) continue;
      const double a = mesh.start(n);
      const double h = mesh.length(n);
      const bool rising = n + 1 == j;
      const double slope = rising ? 1.0 / h : -1.0 / h;
      const Vec& zn = adjoint.z.value(n);
      for (int q = 0; q < 2; ++q) {
        const double t = a + h * fraction[static_cast<std::size_t>(q)];
        const double hat = rising ? (t - a) / h : (mesh.end(n) - t) / h;
        // Component-wise: direction phi = hat * e_i, tested against Z_n.
        acc += 0.5 * h * (slope * zn - eps * hat * adjoint.grad(n, q).transpose() * zn);
      }
    }
    if (j == big_n) acc -= jprime;
    out.push_back(std::move(acc));
  }
  return out;
}

void write_adjoint_csv(std::ostream& os, const MacroAdjoint& adjoint) {
  CsvWriter csv(os);
  csv.cell("n").cell("T_mid");
  const Eigen::Index c = adjoint.z.value(0).size();
  for (Eigen::Index i = 0; i < c; ++i) csv.cell("Z_" + std::to_string(i + 1));
  csv.end_row();
  for (std::size_t n = 0; n < adjoint.mesh.size(); ++n) {
    csv.cell(n + 1).cell(adjoint.mesh.midpoint(n));
    for (Eigen::Index i = 0; i < c; ++i) csv.cell(adjoint.z.value(n)[i]);
    csv.end_row();
  }
}

}  // namespace msdwr
