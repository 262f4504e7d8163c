#include "msdwr/reference.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <future>
#include <ostream>
#include <string>

#include "msdwr/csv.hpp"
#include "msdwr/errors.hpp"

namespace msdwr {

namespace {

template <int C, int D>
struct Resolved {
  static constexpr int S = (C == Eigen::Dynamic || D == Eigen::Dynamic) ? Eigen::Dynamic : C + D;
  using VC = Eigen::Matrix<double, C, 1>;
  using VD = Eigen::Matrix<double, D, 1>;
  using VS = Eigen::Matrix<double, S, 1>;
  using MS = Eigen::Matrix<double, S, S>;
  using MCC = Eigen::Matrix<double, C, C>;
  using MCD = Eigen::Matrix<double, C, D>;
  using MDC = Eigen::Matrix<double, D, C>;
  using MDD = Eigen::Matrix<double, D, D>;

  const SlowFastSystem& sys;
  const ResolvedOptions& opt;
  int c, d, s;
  double eps;
  VC f1, dy;
  VD g1, du;
  MCC fy;
  MCD fu;
  MDC gy;
  MDD gu;
  MS jac;
  VS res, delta;

  Resolved(const SlowFastSystem& system, const ResolvedOptions& options)
      : sys(system), opt(options), c(system.slow_dim()), d(system.fast_dim()), s(c + d),
        eps(system.epsilon()), f1(c), dy(c), g1(d), du(d), fy(c, c), fu(c, d), gy(d, c),
        gu(d, d), jac(s, s), res(s), delta(s) {}

  // One trapezoidal step. f0, g0 hold the right-hand side at the old state on
  // entry and at the new state on exit. With [slow] false y is frozen.
  void step(double k, double t1, VC& y, VC& comp, VD& u, VC& f0, VD& g0, bool slow,
            std::int64_t index) {
    dy = slow ? VC(k * eps * f0) : VC(VC::Zero(c));
    du = k * g0;
    Eigen::PartialPivLU<MS> lu(s);
    for (int it = 0;; ++it) {
      const VC y1 = y + dy;
      const VD u1 = u + du;
      sys.g(t1, y1, u1, g1);
      res.tail(d) = du - 0.5 * k * (g0 + g1);
      double rs = 0.0;
      if (slow) {
        sys.f(y1, u1, f1);
        res.head(c) = dy - 0.5 * k * eps * (f0 + f1);
        rs = res.head(c).template lpNorm<Eigen::Infinity>() /
             std::max(dy.template lpNorm<Eigen::Infinity>(), 1e-300);
      }
      const double ru =
          res.tail(d).template lpNorm<Eigen::Infinity>() / (1.0 + u1.template lpNorm<Eigen::Infinity>());
      if (ru <= opt.fast_tol && rs <= opt.slow_tol) break;
      if (!std::isfinite(ru) || !std::isfinite(rs) || it == opt.newton_max)
        throw NewtonError("resolved Newton failed at step " + std::to_string(index),
                          static_cast<std::size_t>(index), {std::max(ru, rs)});
      if (it == 0) {
        // simplified Newton: one Jacobian per step, at the predictor
        sys.grad_u_g(t1, y1, u1, gu);
        jac.setIdentity();
        jac.bottomRightCorner(d, d) -= 0.5 * k * gu;
        if (slow) {
          sys.grad_y_g(t1, y1, u1, gy);
          sys.grad_y_f(y1, u1, fy);
          sys.grad_u_f(y1, u1, fu);
          jac.topLeftCorner(c, c) -= 0.5 * k * eps * fy;
          jac.topRightCorner(c, d) -= 0.5 * k * eps * fu;
          jac.bottomLeftCorner(d, c) -= 0.5 * k * gy;
        }
        lu.compute(jac);
      }
      if (slow) {
        delta = lu.solve(res);
      } else {
        res.head(c).setZero();
        delta = lu.solve(res);
      }
      dy -= delta.head(c);
      du -= delta.tail(d);
    }
    if (slow) {
      // Kahan-compensated accumulation of the small slow increments.
      const VC yk = dy - comp;
      const VC tmp = y + yk;
      comp = (tmp - y) - yk;
      y = tmp;
      f0 = f1;
    }
    u += du;
    g0 = g1;
  }

  ResolvedRun run(double k, int period_steps, std::int64_t steps, const GoalFunctional& goal) {
    ResolvedRun out;
    out.k = k;
    out.steps = steps;
    VC y = sys.initial_slow();
    VC comp = VC::Zero(c);
    VD u = VD::Zero(d);
    VC f0(c);
    VD g0(d);

    // Pre-cycle with y frozen until u(1) = u(0).
    sys.g(0.0, y, u, g0);
    for (out.precycles = 1;; ++out.precycles) {
      const VD start = u;
      for (int m = 0; m < period_steps; ++m)
        step(k, static_cast<double>((m + 1) % period_steps) / period_steps, y, comp, u, f0, g0,
             false, m);
      if ((u - start).template lpNorm<Eigen::Infinity>() <= opt.precycle_tol) break;
      if (out.precycles == opt.precycle_max)
        throw PeriodicConvergenceError("resolved pre-cycling did not converge",
                                       (u - start).template lpNorm<Eigen::Infinity>(),
                                       out.precycles);
    }

    sys.f(y, u, f0);
    sys.g(0.0, y, u, g0);
    for (std::int64_t n = 0; n < steps; ++n) {
      const double t1 = static_cast<double>((n + 1) % period_steps) / period_steps;
      step(k, t1, y, comp, u, f0, g0, true, n);
      out.max_fast_norm = std::max(out.max_fast_norm, u.template lpNorm<Eigen::Infinity>());
    }
    out.y = y;
    out.u = u;
    out.j = goal.value(out.y);
    return out;
  }
};

}  // namespace

ResolvedRun solve_resolved(const SlowFastSystem& system, double k, const GoalFunctional& goal,
                           const ResolvedOptions& options) {
  if (!(k > 0.0 && k <= 1.0)) throw ConfigError("resolved step must lie in (0, 1]");
  const double m_real = 1.0 / k;
  const long m_int = std::lround(m_real);
  if (std::abs(m_real - static_cast<double>(m_int)) > 1e-9 * m_real)
    throw ConfigError("resolved step must divide the period");
  const double steps_real = system.horizon() * static_cast<double>(m_int);
  const auto steps = static_cast<std::int64_t>(std::llround(steps_real));
  if (std::abs(steps_real - static_cast<double>(steps)) > 1e-6)
    throw ConfigError("resolved step must divide the horizon");

  const auto t0 = std::chrono::steady_clock::now();
  ResolvedRun out;
  if (system.slow_dim() == 1 && system.fast_dim() == 2) {
    Resolved<1, 2> r(system, options);
    out = r.run(1.0 / m_int, static_cast<int>(m_int), steps, goal);
  } else {
    Resolved<Eigen::Dynamic, Eigen::Dynamic> r(system, options);
    out = r.run(1.0 / m_int, static_cast<int>(m_int), steps, goal);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

Extrapolation extrapolate(double j_k, double j_half, double j_quarter) {
  Extrapolation out;
  const double d1 = j_k - j_half;
  const double d2 = j_half - j_quarter;
  if (d1 == 0.0 || d2 == 0.0 || (d1 > 0.0) != (d2 > 0.0)) {
    out.order = std::nan("");
    out.limit = j_quarter;
    return out;
  }
  out.order = std::log2(d1 / d2);
  const double factor = std::exp2(out.order) - 1.0;
  out.reliable = std::isfinite(out.order) && factor > 0.0;
  out.limit = out.reliable ? j_quarter - d2 / factor : j_quarter;
  return out;
}

ReferenceResult compute_reference(const SlowFastSystem& system, double k_coarse,
                                  const GoalFunctional& goal, int jobs,
                                  const ResolvedOptions& options) {
  const std::array<double, 3> ks{k_coarse, k_coarse / 2, k_coarse / 4};
  ReferenceResult out;
  out.runs.resize(3);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < 3; ++i) out.runs[i] = solve_resolved(system, ks[i], goal, options);
  } else {
    // finest first: it dominates the wall time
    std::size_t next = 3;
    std::array<std::future<ResolvedRun>, 3> futures;
    auto launch = [&](std::size_t i) {
      futures[i] = std::async(std::launch::async, [&, i] {
        return solve_resolved(system, ks[i], goal, options);
      });
    };
    const std::size_t width = std::min<std::size_t>(3, static_cast<std::size_t>(jobs));
    for (std::size_t i = 0; i < width; ++i) launch(--next);
    for (std::size_t i = 3; i-- > 0;) {
      out.runs[i] = futures[i].get();
      if (next > 0) launch(--next);
    }
  }
  const double j0 = out.runs[0].j, j1 = out.runs[1].j, j2 = out.runs[2].j;
  out.extrapolation = extrapolate(j0, j1, j2);
  const double l1 = j1 + (j1 - j0) / 3.0;
  const double l2 = j2 + (j2 - j1) / 3.0;
  out.richardson_gap = std::abs(l1 - l2);
  out.stable = out.richardson_gap <= 1e-6;
  return out;
}

void write_reference_csv(std::ostream& os, const ReferenceResult& result) {
  CsvWriter csv(os);
  csv.header({"k", "J", "p", "limit"});
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    csv.cell(result.runs[i].k).cell(result.runs[i].j);
    if (i + 1 == result.runs.size() && result.runs.size() == 3) {
      csv.cell(result.extrapolation.order).cell(result.extrapolation.limit);
    } else {
      csv.cell("").cell("");
    }
    csv.end_row();
  }
}

}  // namespace msdwr
