#include "msdwr/micro.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <utility>

#include "msdwr/csv.hpp"
#include "msdwr/errors.hpp"

namespace msdwr {

namespace {

using gauss2::fraction;

constexpr double min_rcond = 1e-10;

void check_anchor(const Vec& stored, const Vec& anchor) {
  if (stored.size() != anchor.size() ||
      (stored - anchor).lpNorm<Eigen::Infinity>() > 1e-14 * (1.0 + anchor.lpNorm<Eigen::Infinity>()))
    throw UsageError("micro object is anchored at a different slow state");
}

// cG(1) step with 2-point Gauss quadrature:
//   u_m - u_{m-1} - k/2 sum_q g(chi_q, (1-s_q) u_{m-1} + s_q u_m) = 0.
// Buffers are owned so a full period runs without allocation.
class MicroStepper {
 public:
  MicroStepper(const SlowFastSystem& system, const Vec& anchor, double k,
               const OrbitOptions& options)
      : sys_(system), y_(anchor), k_(k), opt_(options), affine_(system.fast_affine_in_u()),
        d_(system.fast_dim()), gq_(d_), x_(d_), r_(d_), dx_(d_), g_(d_, d_), jac_(d_, d_),
        lu_(d_) {}

  void step(int m, double t0, const CVecRef& prev, VecRef next) {
    next = prev;
    for (int it = 0; it < opt_.newton_max; ++it) {
      r_ = next - prev;
      jac_.setIdentity();
      for (int q = 0; q < gauss2::points; ++q) {
        const double s = fraction[q];
        const double t = t0 + k_ * s;
        x_ = (1.0 - s) * prev + s * next;
        sys_.g(t, y_, x_, gq_);
        r_ -= 0.5 * k_ * gq_;
        sys_.grad_u_g(t, y_, x_, g_);
        jac_ -= (0.5 * k_ * s) * g_;
      }
      lu_.compute(jac_);
      dx_ = lu_.solve(r_);
      next -= dx_;
      if (affine_) return;
      if (dx_.norm() <= opt_.newton_tol * (1.0 + next.norm())) return;
    }
    throw NewtonError("micro step did not converge", static_cast<std::size_t>(m), {});
  }

 private:
  const SlowFastSystem& sys_;
  const Vec& y_;
  double k_;
  const OrbitOptions& opt_;
  bool affine_;
  int d_;
  Vec gq_, x_, r_, dx_;
  Mat g_, jac_;
  Eigen::PartialPivLU<Mat> lu_;
};

void run_period(MicroStepper& stepper, const MicroGrid& grid, Mat& values) {
  for (int m = 0; m < grid.intervals(); ++m)
    stepper.step(m, grid.node(m), values.col(m), values.col(m + 1));
}

// Linearized step matrices of interval m:
//   P = I - k/2 sum_q s_q G_q,   Q = I + k/2 sum_q (1 - s_q) G_q.
struct StepMatrices {
  Mat p, q;
};

StepMatrices step_matrices(const SlowFastSystem& sys, const Vec& y, const PeriodicOrbit& orbit,
                           int m, Vec& x, Mat& g) {
  const int d = sys.fast_dim();
  const double k = orbit.grid.step();
  StepMatrices out{Mat::Identity(d, d), Mat::Identity(d, d)};
  for (int q = 0; q < gauss2::points; ++q) {
    const double s = fraction[q];
    x = (1.0 - s) * orbit.values.col(m) + s * orbit.values.col(m + 1);
    sys.grad_u_g(orbit.grid.node(m) + k * s, y, x, g);
    out.p -= (0.5 * k * s) * g;
    out.q += (0.5 * k * (1.0 - s)) * g;
  }
  return out;
}

}  // namespace

PiecewiseLinearFn PeriodicOrbit::function() const {
  std::vector<Vec> vals;
  vals.reserve(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index m = 0; m < values.cols(); ++m) vals.emplace_back(values.col(m));
  return PiecewiseLinearFn(grid.nodes(), std::move(vals));
}

Vec PeriodicOrbit::at(double s) const {
  const int big_m = grid.intervals();
  int m = static_cast<int>(std::floor(s * big_m));
  m = std::clamp(m, 0, big_m - 1);
  const double frac = s * big_m - m;
  return (1.0 - frac) * values.col(m) + frac * values.col(m + 1);
}

Mat integrate_period(const SlowFastSystem& system, const Vec& anchor, const MicroGrid& grid,
                     const Vec& start, const OrbitOptions& options) {
  if (start.size() != system.fast_dim()) throw UsageError("fast start state has wrong dimension");
  MicroStepper stepper(system, anchor, grid.step(), options);
  Mat values(system.fast_dim(), grid.intervals() + 1);
  values.col(0) = start;
  run_period(stepper, grid, values);
  return values;
}

PeriodicOrbit solve_periodic(const SlowFastSystem& system, const Vec& anchor, const MicroGrid& grid,
                             const OrbitOptions& options) {
  return solve_periodic(system, anchor, grid, options, Vec::Zero(system.fast_dim()));
}

PeriodicOrbit solve_periodic(const SlowFastSystem& system, const Vec& anchor, const MicroGrid& grid,
                             const OrbitOptions& options, const Vec& start) {
  if (!(options.tol_p > 0.0)) throw ConfigError("periodicity tolerance must be positive");
  if (anchor.size() != system.slow_dim()) throw UsageError("slow state has wrong dimension");
  if (start.size() != system.fast_dim()) throw UsageError("fast start state has wrong dimension");

  const int big_m = grid.intervals();
  MicroStepper stepper(system, anchor, grid.step(), options);
  PeriodicOrbit orbit;
  orbit.anchor = anchor;
  orbit.grid = grid;
  orbit.values.resize(system.fast_dim(), big_m + 1);
  orbit.values.col(0) = start;

  for (int cycle = 1; cycle <= options.max_cycles; ++cycle) {
    if (cycle > 1) orbit.values.col(0) = orbit.values.col(big_m);
    run_period(stepper, grid, orbit.values);
    orbit.defect = (orbit.values.col(big_m) - orbit.values.col(0)).norm();
    orbit.cycles_used = cycle;
    orbit.defect_history.push_back(orbit.defect);
    if (!std::isfinite(orbit.defect))
      throw PeriodicConvergenceError("periodic cycling diverged", orbit.defect, cycle);
    if (orbit.defect <= options.tol_p) return orbit;
  }
  throw PeriodicConvergenceError("periodic cycling did not reach tol_P = " +
                                     std::to_string(options.tol_p) + " in " +
                                     std::to_string(options.max_cycles) + " cycles (defect " +
                                     std::to_string(orbit.defect) + ")",
                                 orbit.defect, options.max_cycles);
}

Vec transfer(const SlowFastSystem& system, const Vec& anchor, const PeriodicOrbit& orbit) {
  check_anchor(orbit.anchor, anchor);
  const double k = orbit.grid.step();
  Vec sum = Vec::Zero(system.slow_dim());
  Vec fq(system.slow_dim());
  Vec x(system.fast_dim());
  for (int m = 0; m < orbit.grid.intervals(); ++m) {
    for (int q = 0; q < gauss2::points; ++q) {
      const double s = fraction[q];
      x = (1.0 - s) * orbit.values.col(m) + s * orbit.values.col(m + 1);
      system.f(anchor, x, fq);
      sum += 0.5 * k * fq;
    }
  }
  return sum;
}

Mat transfer_grad_partial(const SlowFastSystem& system, const Vec& anchor,
                          const PeriodicOrbit& orbit) {
  check_anchor(orbit.anchor, anchor);
  const int c = system.slow_dim();
  const double k = orbit.grid.step();
  Mat sum = Mat::Zero(c, c);
  Mat fy(c, c);
  Vec x(system.fast_dim());
  for (int m = 0; m < orbit.grid.intervals(); ++m) {
    for (int q = 0; q < gauss2::points; ++q) {
      const double s = fraction[q];
      x = (1.0 - s) * orbit.values.col(m) + s * orbit.values.col(m + 1);
      system.grad_y_f(anchor, x, fy);
      sum += 0.5 * k * fy;
    }
  }
  return sum;
}

Mat transfer_grad_full(const SlowFastSystem& system, const Vec& anchor, const PeriodicOrbit& orbit,
                       const TangentOrbit& tangent) {
  check_anchor(orbit.anchor, anchor);
  check_anchor(tangent.anchor, anchor);
  if (!(tangent.grid == orbit.grid)) throw UsageError("tangent and orbit grids differ");
  const int c = system.slow_dim();
  const int d = system.fast_dim();
  const double k = orbit.grid.step();
  Mat sum = Mat::Zero(c, c);
  Mat fy(c, c), fu(c, d);
  Vec x(d);
  for (int m = 0; m < orbit.grid.intervals(); ++m) {
    const auto mm = static_cast<std::size_t>(m);
    for (int q = 0; q < gauss2::points; ++q) {
      const double s = fraction[q];
      x = (1.0 - s) * orbit.values.col(m) + s * orbit.values.col(m + 1);
      system.grad_y_f(anchor, x, fy);
      system.grad_u_f(anchor, x, fu);
      sum += 0.5 * k * (fy + fu * ((1.0 - s) * tangent.values[mm] + s * tangent.values[mm + 1]));
    }
  }
  return sum;
}

TangentOrbit solve_tangent(const SlowFastSystem& system, const Vec& anchor,
                           const PeriodicOrbit& orbit) {
  check_anchor(orbit.anchor, anchor);
  const int c = system.slow_dim();
  const int d = system.fast_dim();
  const int big_m = orbit.grid.intervals();
  const double k = orbit.grid.step();
  Vec x(d);
  Mat g(d, d), gy(d, c);

  // Du_m = Phi_m Du_0 + B_m.
  std::vector<Mat> phi(static_cast<std::size_t>(big_m) + 1);
  std::vector<Mat> b(static_cast<std::size_t>(big_m) + 1);
  phi[0] = Mat::Identity(d, d);
  b[0] = Mat::Zero(d, c);
  Eigen::PartialPivLU<Mat> lu(d);
  for (int m = 0; m < big_m; ++m) {
    const auto mm = static_cast<std::size_t>(m);
    const StepMatrices pq = step_matrices(system, anchor, orbit, m, x, g);
    Mat h = Mat::Zero(d, c);
    for (int q = 0; q < gauss2::points; ++q) {
      const double s = fraction[q];
      x = (1.0 - s) * orbit.values.col(m) + s * orbit.values.col(m + 1);
      system.grad_y_g(orbit.grid.node(m) + k * s, anchor, x, gy);
      h += 0.5 * k * gy;
    }
    lu.compute(pq.p);
    phi[mm + 1] = lu.solve(pq.q * phi[mm]);
    b[mm + 1] = lu.solve(pq.q * b[mm] + h);
  }

  const Mat shoot = Mat::Identity(d, d) - phi.back();
  lu.compute(shoot);
  if (!(lu.rcond() > min_rcond))
    throw DegenerateMonodromyError("tangent problem: I - monodromy is singular");
  const Mat du0 = lu.solve(b.back());

  TangentOrbit out{anchor, orbit.grid, {}};
  out.values.reserve(phi.size());
  for (std::size_t m = 0; m < phi.size(); ++m) out.values.push_back(phi[m] * du0 + b[m]);
  return out;
}

MicroAdjoint solve_micro_adjoint(const SlowFastSystem& system, const Vec& anchor,
                                 const PeriodicOrbit& orbit) {
  check_anchor(orbit.anchor, anchor);
  const int c = system.slow_dim();
  const int d = system.fast_dim();
  const int big_m = orbit.grid.intervals();
  const auto mcount = static_cast<std::size_t>(big_m);
  const double k = orbit.grid.step();
  Vec x(d);
  Mat g(d, d), fu(c, d);

  // Per interval: P, Q and the two halves of the J^pi derivative load.
  std::vector<Mat> p(mcount), q(mcount), load_right(mcount), load_left(mcount);
  for (int m = 0; m < big_m; ++m) {
    const auto mm = static_cast<std::size_t>(m);
    StepMatrices pq = step_matrices(system, anchor, orbit, m, x, g);
    p[mm] = std::move(pq.p);
    q[mm] = std::move(pq.q);
    load_right[mm] = Mat::Zero(d, c);
    load_left[mm] = Mat::Zero(d, c);
    for (int qq = 0; qq < gauss2::points; ++qq) {
      const double s = fraction[qq];
      x = (1.0 - s) * orbit.values.col(m) + s * orbit.values.col(m + 1);
      system.grad_u_f(anchor, x, fu);
      load_right[mm] += (0.5 * k * s) * fu.transpose();
      load_left[mm] += (0.5 * k * (1.0 - s)) * fu.transpose();
    }
  }

  // Hat test at node m+1: P_m^T z_m - Q_{m+1}^T z_{m+1} = r_m (periodic wrap),
  // swept backwards as z_m = Phi_m z_0 + b_m.
  std::vector<Mat> phi(mcount), b(mcount);
  Eigen::PartialPivLU<Mat> lu(d);
  for (int m = big_m - 1; m >= 0; --m) {
    const auto mm = static_cast<std::size_t>(m);
    const std::size_t next = (mm + 1) % mcount;
    const Mat r = load_right[mm] + load_left[next];
    lu.compute(p[mm].transpose());
    const Mat qt = q[next].transpose();
    if (mm + 1 == mcount) {
      phi[mm] = lu.solve(qt);
      b[mm] = lu.solve(r);
    } else {
      phi[mm] = lu.solve(qt * phi[mm + 1]);
      b[mm] = lu.solve(qt * b[mm + 1] + r);
    }
  }
  const Mat shoot = Mat::Identity(d, d) - phi[0];
  lu.compute(shoot);
  if (!(lu.rcond() > min_rcond))
    throw DegenerateMonodromyError("micro adjoint: I - monodromy is singular");
  const Mat z0 = lu.solve(b[0]);

  MicroAdjoint out{anchor, orbit.grid, {}};
  out.values.reserve(mcount);
  for (std::size_t m = 0; m < mcount; ++m) out.values.push_back(phi[m] * z0 + b[m]);
  return out;
}

Vec adjoint_pairing(const MicroAdjoint& adjoint, const std::function<Vec(double)>& perturbation) {
  const double k = adjoint.grid.step();
  Vec sum = Vec::Zero(adjoint.values.front().cols());
  for (int m = 0; m < adjoint.grid.intervals(); ++m) {
    for (int q = 0; q < gauss2::points; ++q) {
      const Vec dg = perturbation(adjoint.grid.node(m) + k * fraction[q]);
      sum += 0.5 * k * adjoint.values[static_cast<std::size_t>(m)].transpose() * dg;
    }
  }
  return sum;
}

EtaPi eta_pi(const SlowFastSystem& system, const Vec& anchor, const PeriodicOrbit& orbit,
             const MicroAdjoint& adjoint) {
  check_anchor(orbit.anchor, anchor);
  check_anchor(adjoint.anchor, anchor);
  if (!(adjoint.grid == orbit.grid)) throw UsageError("adjoint and orbit grids differ");
  const int c = system.slow_dim();
  const int d = system.fast_dim();
  const int big_m = orbit.grid.intervals();
  const double k = orbit.grid.step();
  const Mat& u = orbit.values;

  Vec primal = Vec::Zero(c);
  Vec dual = Vec::Zero(c);
  Vec x(d), gq(d), slope(d), phi(d);
  Mat gu(d, d), fu(c, d);
  for (int m = 0; m < big_m; ++m) {
    const int a = m & ~1;
    const Mat& zm = adjoint.values[static_cast<std::size_t>(m)];
    // Linear patch reconstruction minus z_m is (z_{a+1} - z_a)(s - 1/2) at fraction s.
    const Mat dz = adjoint.values[static_cast<std::size_t>(a + 1)] -
                   adjoint.values[static_cast<std::size_t>(a)];
    // Quadratic patch reconstruction minus u_k takes this value at both Gauss points.
    phi = -(u.col(a) - 2.0 * u.col(a + 1) + u.col(a + 2)) / 12.0;
    slope = (u.col(m + 1) - u.col(m)) / k;
    for (int q = 0; q < gauss2::points; ++q) {
      const double s = fraction[q];
      const double t = orbit.grid.node(m) + k * s;
      x = (1.0 - s) * u.col(m) + s * u.col(m + 1);
      system.g(t, anchor, x, gq);
      system.grad_u_g(t, anchor, x, gu);
      system.grad_u_f(anchor, x, fu);
      primal -= 0.5 * k * (s - 0.5) * (dz.transpose() * (slope - gq));
      dual += 0.5 * k * (fu * phi + zm.transpose() * (gu * phi));
    }
  }
  EtaPi out;
  out.detail.primal = 0.5 * primal;
  out.detail.dual = 0.5 * dual;
  out.detail.defect = orbit.defect;
  out.detail.cycles_used = orbit.cycles_used;
  out.value = out.detail.primal + out.detail.dual;
  return out;
}

EtaPi eta_pi(const SlowFastSystem& system, const Vec& anchor, const MicroGrid& grid,
             const OrbitOptions& options) {
  const PeriodicOrbit orbit = solve_periodic(system, anchor, grid, options);
  const MicroAdjoint adjoint = solve_micro_adjoint(system, anchor, orbit);
  return eta_pi(system, anchor, orbit, adjoint);
}

void write_orbit_csv(std::ostream& os, const PeriodicOrbit& orbit) {
  CsvWriter csv(os);
  csv.cell("s");
  for (Eigen::Index i = 0; i < orbit.values.rows(); ++i) csv.cell("u_" + std::to_string(i + 1));
  csv.end_row();
  for (int m = 0; m <= orbit.grid.intervals(); ++m) {
    csv.cell(orbit.grid.node(m));
    for (Eigen::Index i = 0; i < orbit.values.rows(); ++i) csv.cell(orbit.values(i, m));
    csv.end_row();
  }
}

}  // namespace msdwr
