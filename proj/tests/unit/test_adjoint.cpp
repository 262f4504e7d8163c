#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "msdwr/adjoint.hpp"
#include "msdwr/errors.hpp"
#include "oracles.hpp"

using namespace msdwr;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

CallbackSystem decay_system(double eps, double horizon, Vec y0, CallbackSystem::SlowFn f,
                            CallbackSystem::SlowJac fy) {
  CallbackSystem::Callbacks cb;
  cb.f = std::move(f);
  cb.grad_y_f = std::move(fy);
  cb.grad_u_f = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.g = [](double t, const Vec&, const Vec& u) {
    Vec out(1);
    out[0] = -u[0] + std::sin(two_pi * t);
    return out;
  };
  cb.grad_y_g = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.grad_u_g = [](double, const Vec&, const Vec&) { return Mat(-Mat::Identity(1, 1)); };
  return CallbackSystem("decay", 1, 1, eps, horizon, std::move(y0), cb, true);
}

CallbackSystem inverse_feedback(double y0) {
  return decay_system(
      1e-3, 2000.0, Vec::Constant(1, y0),
      [](const Vec& y, const Vec&) { return Vec::Constant(1, 1.0 / (1.0 + y[0])); },
      [](const Vec& y, const Vec&) {
        return Mat::Constant(1, 1, -1.0 / ((1.0 + y[0]) * (1.0 + y[0])));
      });
}

}  // namespace

TEST_CASE("adjoint of a state-independent feedback is constant one") {
  const auto sys = decay_system(
      1e-3, 1000.0, Vec::Zero(1), [](const Vec&, const Vec&) { return Vec::Ones(1); },
      [](const Vec&, const Vec&) { return Mat::Zero(1, 1); });
  const auto sol = solve_macro(sys, MacroMesh::uniform(1000.0, 125.0, 0.25));
  const auto adj = solve_macro_adjoint(sys, sol, GoalFunctional(0));
  for (const auto& z : adj.z.values()) CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("adjoint predicts the sensitivity to the initial state") {
  const double y0 = 0.3;
  const auto mesh = MacroMesh::uniform(2000.0, 250.0, 0.5);
  const auto sys = inverse_feedback(y0);
  const auto sol = solve_macro(sys, mesh);
  const auto adj = solve_macro_adjoint(sys, sol, GoalFunctional(0));
  const double predicted = adj.initial_sensitivity(sys.epsilon())[0];
  std::vector<double> errs;
  for (double d : {1e-2, 5e-3}) {
    const double jp = solve_macro(inverse_feedback(y0 + d), mesh).goal(GoalFunctional(0));
    const double j0 = sol.goal(GoalFunctional(0));
    errs.push_back(std::abs((jp - j0) / d - predicted));
  }
  // one-sided difference: error O(delta)
  CHECK(errs[0] / errs[1] == doctest::Approx(2.0).epsilon(0.05));
  // exact sensitivity of sqrt((1 + y0)^2 + 2 eps t) - 1
  const double exact = (1.0 + y0) / std::sqrt((1.0 + y0) * (1.0 + y0) + 2e-3 * 2000.0);
  CHECK(predicted == doctest::Approx(exact).epsilon(1e-3));
}

TEST_CASE("osc1 adjoint matches the directional derivative for a slow source") {
  const auto base = make_benchmark(ProblemId::osc1);
  const auto mesh = MacroMesh::uniform(base.horizon(), 50000.0, 0.05);
  const auto sol = solve_macro(base, mesh);
  const auto adj = solve_macro_adjoint(base, sol, GoalFunctional(0));
  // Residual perturbation -eps K_n tau a on each interval; dJ/dtau = sum_n eps K_n Z_n a.
  double predicted = 0.0;
  for (std::size_t n = 0; n < mesh.size(); ++n)
    predicted += base.epsilon() * mesh.length(n) * adj.z.value(n)[0];
  const double tau = 1e-3;
  const oracle::SlowSourceSystem plus(base, Vec::Constant(1, tau));
  const oracle::SlowSourceSystem minus(base, Vec::Constant(1, -tau));
  const double fd = (solve_macro(plus, mesh).goal(GoalFunctional(0)) -
                     solve_macro(minus, mesh).goal(GoalFunctional(0))) /
                    (2 * tau);
  CHECK(fd == doctest::Approx(predicted).epsilon(1e-5));
}

TEST_CASE("adjoint identity holds for every hat test function") {
  for (auto id : {ProblemId::osc1, ProblemId::osc2}) {
    const auto sys = make_benchmark(id);
    const auto sol = solve_macro(sys, MacroMesh::uniform(sys.horizon(), 25000.0, 0.05));
    const auto adj = solve_macro_adjoint(sys, sol, GoalFunctional(0));
    double scale = 1.0;
    for (const auto& z : adj.z.values()) scale = std::max(scale, z.lpNorm<Eigen::Infinity>());
    for (const auto& r : adjoint_residuals(sys, adj, GoalFunctional(0)))
      CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-12 * scale);
  }
}

TEST_CASE("adjoint is bounded by exp(eps T max |grad F|)") {
  for (auto id : {ProblemId::osc1, ProblemId::osc2}) {
    const auto sys = make_benchmark(id);
    const auto sol = solve_macro(sys, MacroMesh::uniform(sys.horizon(), 50000.0, 0.05));
    const auto adj = solve_macro_adjoint(sys, sol, GoalFunctional(0));
    double gmax = 0.0;
    for (const auto& g : adj.grads)
      for (const auto& m : g) gmax = std::max(gmax, m.lpNorm<Eigen::Infinity>());
    const double bound = std::exp(sys.epsilon() * sys.horizon() * gmax);
    for (const auto& z : adj.z.values()) CHECK(z.lpNorm<Eigen::Infinity>() <= bound);
  }
}

TEST_CASE("singular adjoint block is reported") {
  // grad F = 2 / (eps K s_2) makes the last block P singular.
  const double eps = 1e-3, big_k = 1000.0;
  const double slope = 1.0 / (0.5 * eps * big_k * gauss2::fraction[1] + 0.5 * eps * big_k * gauss2::fraction[0]);
  auto sys = decay_system(
      eps, 1000.0, Vec::Zero(1), [=](const Vec& y, const Vec&) { return Vec::Constant(1, slope * y[0]); },
      [=](const Vec&, const Vec&) { return Mat::Constant(1, 1, slope); });
  MacroSolution sol = solve_macro(sys, MacroMesh::uniform(1000.0, big_k, 0.5));
  CHECK_THROWS_AS(solve_macro_adjoint(sys, sol, GoalFunctional(0)), SolverError);
}

TEST_CASE("adjoint csv") {
  const auto sys = decay_system(
      1e-3, 1000.0, Vec::Zero(1), [](const Vec&, const Vec&) { return Vec::Ones(1); },
      [](const Vec&, const Vec&) { return Mat::Zero(1, 1); });
  const auto sol = solve_macro(sys, MacroMesh::uniform(1000.0, 500.0, 0.5));
  std::ostringstream os;
  write_adjoint_csv(os, solve_macro_adjoint(sys, sol, GoalFunctional(0)));
  const std::string text = os.str();
  CHECK(text == "n,T_mid,Z_1\n1,250,1\n2,750,1\n");
}
