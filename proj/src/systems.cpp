#include "msdwr/systems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "msdwr/errors.hpp"

namespace msdwr {

SlowFastSystem::SlowFastSystem(int slow_dim, int fast_dim, double epsilon, double horizon, Vec y0)
    : slow_dim_(slow_dim), fast_dim_(fast_dim), epsilon_(epsilon), horizon_(horizon),
      y0_(std::move(y0)) {
  if (slow_dim_ <= 0 || fast_dim_ <= 0) throw ConfigError("system dimensions must be positive");
  if (y0_.size() != slow_dim_) throw ConfigError("initial slow state has wrong dimension");
  if (!(horizon_ > 0.0)) throw ConfigError("horizon must be positive");
  if (epsilon_ < 0.0) throw ConfigError("epsilon must be non-negative");
}

Vec SlowFastSystem::f(const CVecRef& y, const CVecRef& u) const {
  Vec out(slow_dim_);
  do_f(y, u, out);
  return out;
}

Mat SlowFastSystem::grad_y_f(const CVecRef& y, const CVecRef& u) const {
  Mat out(slow_dim_, slow_dim_);
  do_grad_y_f(y, u, out);
  return out;
}

Mat SlowFastSystem::grad_u_f(const CVecRef& y, const CVecRef& u) const {
  Mat out(slow_dim_, fast_dim_);
  do_grad_u_f(y, u, out);
  return out;
}

Vec SlowFastSystem::g(double t, const CVecRef& y, const CVecRef& u) const {
  Vec out(fast_dim_);
  do_g(t, y, u, out);
  return out;
}

Mat SlowFastSystem::grad_y_g(double t, const CVecRef& y, const CVecRef& u) const {
  Mat out(fast_dim_, slow_dim_);
  do_grad_y_g(t, y, u, out);
  return out;
}

Mat SlowFastSystem::grad_u_g(double t, const CVecRef& y, const CVecRef& u) const {
  Mat out(fast_dim_, fast_dim_);
  do_grad_u_g(t, y, u, out);
  return out;
}

double GoalFunctional::value(const CVecRef& terminal) const {
  if (component_ < 0 || component_ >= terminal.size())
    throw UsageError("goal component out of range");
  return terminal[component_];
}

Vec GoalFunctional::derivative(int slow_dim) const {
  if (component_ < 0 || component_ >= slow_dim) throw UsageError("goal component out of range");
  Vec e = Vec::Zero(slow_dim);
  e[component_] = 1.0;
  return e;
}

ProblemId parse_problem(std::string_view text) {
  if (text == "osc1") return ProblemId::osc1;
  if (text == "osc2") return ProblemId::osc2;
  throw ConfigError("unknown problem id '" + std::string(text) + "' (expected osc1 or osc2)");
}

Damping parse_damping(std::string_view text) {
  if (text == "half") return Damping::half;
  if (text == "threefifths" || text == "three_fifths") return Damping::three_fifths;
  throw ConfigError("unknown damping variant '" + std::string(text) +
                    "' (expected half or threefifths)");
}

std::string to_string(ProblemId id) { return id == ProblemId::osc1 ? "osc1" : "osc2"; }

std::string to_string(Damping damping) {
  return damping == Damping::half ? "half" : "threefifths";
}

double damping_coefficient(Damping damping) { return damping == Damping::half ? 0.5 : 0.6; }

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double sech2(double x) {
  const double c = std::cosh(x);
  return 1.0 / (c * c);
}

}  // namespace

OscillatorSystem::OscillatorSystem(ProblemId id, Damping damping)
    : SlowFastSystem(1, 2, 1e-6, id == ProblemId::osc1 ? 6e5 : 1e6, Vec::Zero(1)),
      id_(id), damping_(damping), delta_(damping_coefficient(damping)) {}

std::string OscillatorSystem::name() const { return to_string(id_) + "/" + to_string(damping_); }

double OscillatorSystem::gamma(double y) const {
  if (id_ == ProblemId::osc1) return 4.0 * std::numbers::pi * std::numbers::pi + 32.0 * (y - 1.0);
  return 20.0 * std::tanh(-10.0 * y + 6.0) + 21.0;
}

double OscillatorSystem::gamma_prime(double y) const {
  if (id_ == ProblemId::osc1) return 32.0;
  return -200.0 * sech2(-10.0 * y + 6.0);
}

void OscillatorSystem::do_f(const CVecRef& y, const CVecRef& u, VecRef out) const {
  const double yy = y[0];
  const double u1 = u[0];
  if (id_ == ProblemId::osc1) {
    out[0] = 1.0 / ((1.0 + yy) * (1.0 + 64.0 * u1 * u1));
  } else {
    out[0] = (std::tanh(500.0 * u1 * u1 - 5.0) + 1.01) / (1.0 + yy);
  }
}

void OscillatorSystem::do_grad_y_f(const CVecRef& y, const CVecRef& u, MatRef out) const {
  const double yy = y[0];
  const double u1 = u[0];
  if (id_ == ProblemId::osc1) {
    out(0, 0) = -1.0 / ((1.0 + yy) * (1.0 + yy) * (1.0 + 64.0 * u1 * u1));
  } else {
    out(0, 0) = -(std::tanh(500.0 * u1 * u1 - 5.0) + 1.01) / ((1.0 + yy) * (1.0 + yy));
  }
}

void OscillatorSystem::do_grad_u_f(const CVecRef& y, const CVecRef& u, MatRef out) const {
  const double yy = y[0];
  const double u1 = u[0];
  if (id_ == ProblemId::osc1) {
    const double q = 1.0 + 64.0 * u1 * u1;
    out(0, 0) = -128.0 * u1 / ((1.0 + yy) * q * q);
  } else {
    out(0, 0) = 1000.0 * u1 * sech2(500.0 * u1 * u1 - 5.0) / (1.0 + yy);
  }
  out(0, 1) = 0.0;
}

void OscillatorSystem::do_g(double t, const CVecRef& y, const CVecRef& u, VecRef out) const {
  out[0] = u[1];
  out[1] = -gamma(y[0]) * u[0] - delta_ * u[1] + std::sin(two_pi * t);
}

void OscillatorSystem::do_grad_y_g(double, const CVecRef& y, const CVecRef& u, MatRef out) const {
  out(0, 0) = 0.0;
  out(1, 0) = -gamma_prime(y[0]) * u[0];
}

void OscillatorSystem::do_grad_u_g(double, const CVecRef& y, const CVecRef&, MatRef out) const {
  out(0, 0) = 0.0;
  out(0, 1) = 1.0;
  out(1, 0) = -gamma(y[0]);
  out(1, 1) = -delta_;
}

OscillatorSystem make_benchmark(ProblemId id, Damping damping) {
  return OscillatorSystem(id, damping);
}

std::shared_ptr<const SlowFastSystem> make_benchmark_shared(ProblemId id, Damping damping) {
  return std::make_shared<const OscillatorSystem>(id, damping);
}

CallbackSystem::CallbackSystem(std::string name, int slow_dim, int fast_dim, double epsilon,
                               double horizon, Vec y0, Callbacks callbacks, bool affine_in_u)
    : SlowFastSystem(slow_dim, fast_dim, epsilon, horizon, std::move(y0)),
      name_(std::move(name)), cb_(std::move(callbacks)), affine_(affine_in_u) {
  if (!cb_.f || !cb_.grad_y_f || !cb_.grad_u_f || !cb_.g || !cb_.grad_y_g || !cb_.grad_u_g)
    throw ConfigError("callback system '" + name_ + "' is missing a callback");
}

void CallbackSystem::do_f(const CVecRef& y, const CVecRef& u, VecRef out) const {
  out = cb_.f(y, u);
}
void CallbackSystem::do_grad_y_f(const CVecRef& y, const CVecRef& u, MatRef out) const {
  out = cb_.grad_y_f(y, u);
}
void CallbackSystem::do_grad_u_f(const CVecRef& y, const CVecRef& u, MatRef out) const {
  out = cb_.grad_u_f(y, u);
}
void CallbackSystem::do_g(double t, const CVecRef& y, const CVecRef& u, VecRef out) const {
  out = cb_.g(t, y, u);
}
void CallbackSystem::do_grad_y_g(double t, const CVecRef& y, const CVecRef& u, MatRef out) const {
  out = cb_.grad_y_g(t, y, u);
}
void CallbackSystem::do_grad_u_g(double t, const CVecRef& y, const CVecRef& u, MatRef out) const {
  out = cb_.grad_u_g(t, y, u);
}

AssumptionReport check_assumptions(const SlowFastSystem& system, const std::vector<Vec>& y_samples,
                                   const std::vector<Vec>& u_samples) {
  if (y_samples.empty() || u_samples.empty())
    throw UsageError("check_assumptions needs nonempty sample sets");

  constexpr int phases = 16;
  AssumptionReport rep;
  rep.max_real_eigenvalue = -std::numeric_limits<double>::infinity();

  for (const auto& y : y_samples) {
    for (const auto& u : u_samples) {
      rep.max_f_norm = std::max(rep.max_f_norm, system.f(y, u).norm());
      for (int p = 0; p < phases; ++p) {
        const double t = static_cast<double>(p) / phases;
        const Eigen::EigenSolver<Mat> es(system.grad_u_g(t, y, u), false);
        rep.max_real_eigenvalue =
            std::max(rep.max_real_eigenvalue, es.eigenvalues().real().maxCoeff());
        const Vec g0 = system.g(t, y, u);
        const Vec g1 = system.g(t + SlowFastSystem::period, y, u);
        rep.periodicity_defect =
            std::max(rep.periodicity_defect, (g0 - g1).norm() / (1.0 + g0.norm()));
      }
    }
  }

  for (std::size_t a = 0; a < y_samples.size(); ++a) {
    for (std::size_t b = a + 1; b < y_samples.size(); ++b) {
      const double dy = (y_samples[a] - y_samples[b]).norm();
      if (dy == 0.0) continue;
      for (const auto& u : u_samples) {
        const double df = (system.f(y_samples[a], u) - system.f(y_samples[b], u)).norm();
        rep.lipschitz_f_y = std::max(rep.lipschitz_f_y, df / dy);
      }
    }
  }
  for (std::size_t a = 0; a < u_samples.size(); ++a) {
    for (std::size_t b = a + 1; b < u_samples.size(); ++b) {
      const double du = (u_samples[a] - u_samples[b]).norm();
      if (du == 0.0) continue;
      for (const auto& y : y_samples) {
        const double df = (system.f(y, u_samples[a]) - system.f(y, u_samples[b])).norm();
        rep.lipschitz_f_u = std::max(rep.lipschitz_f_u, df / du);
      }
    }
  }

  if (!(rep.max_real_eigenvalue < 0.0))
    rep.violations.push_back("grad_u g has an eigenvalue with non-negative real part");
  if (rep.periodicity_defect > 1e-14) rep.violations.push_back("g is not 1-periodic in t");
  if (!std::isfinite(rep.max_f_norm)) rep.violations.push_back("f is unbounded on the samples");
  return rep;
}

}  // namespace msdwr
