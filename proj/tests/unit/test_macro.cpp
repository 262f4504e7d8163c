#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "msdwr/errors.hpp"
#include "msdwr/macro.hpp"
#include "oracles.hpp"

using namespace msdwr;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

/// u' = -u + sin(2 pi t) with a user supplied slow feedback.
CallbackSystem decay_system(double eps, double horizon, CallbackSystem::SlowFn f,
                            CallbackSystem::SlowJac fy, CallbackSystem::SlowJac fu) {
  CallbackSystem::Callbacks cb;
  cb.f = std::move(f);
  cb.grad_y_f = std::move(fy);
  cb.grad_u_f = std::move(fu);
  cb.g = [](double t, const Vec&, const Vec& u) {
    Vec out(1);
    out[0] = -u[0] + std::sin(two_pi * t);
    return out;
  };
  cb.grad_y_g = [](double, const Vec& y, const Vec&) { return Mat::Zero(1, y.size()); };
  cb.grad_u_g = [](double, const Vec&, const Vec&) { return Mat(-Mat::Identity(1, 1)); };
  return CallbackSystem("decay", 1, 1, eps, horizon, Vec::Zero(1), cb, true);
}

CallbackSystem constant_feedback(double eps) {
  return decay_system(
      eps, 1000.0, [](const Vec&, const Vec&) { return Vec::Ones(1); },
      [](const Vec&, const Vec&) { return Mat::Zero(1, 1); },
      [](const Vec&, const Vec&) { return Mat::Zero(1, 1); });
}

CallbackSystem inverse_feedback() {
  return decay_system(
      1e-3, 2000.0, [](const Vec& y, const Vec&) { return Vec::Constant(1, 1.0 / (1.0 + y[0])); },
      [](const Vec& y, const Vec&) {
        return Mat::Constant(1, 1, -1.0 / ((1.0 + y[0]) * (1.0 + y[0])));
      },
      [](const Vec&, const Vec&) { return Mat::Zero(1, 1); });
}

}  // namespace

TEST_CASE("constant feedback is integrated exactly in one Newton update") {
  const auto sys = constant_feedback(1e-3);
  const auto sol = solve_macro(sys, MacroMesh::uniform(1000.0, 250.0, 0.25));
  for (std::size_t n = 0; n <= 4; ++n)
    CHECK(sol.y.value(n)[0] == doctest::Approx(1e-3 * 250.0 * n).epsilon(1e-14));
  for (const auto& rec : sol.newton) CHECK(rec.iterations <= 1);
}

TEST_CASE("zero epsilon leaves the slow state at its initial value") {
  const auto sys = constant_feedback(0.0);
  const auto sol = solve_macro(sys, MacroMesh::uniform(1000.0, 100.0, 0.5));
  for (const auto& v : sol.y.values()) CHECK(v[0] == 0.0);
}

TEST_CASE("nonlinear slow feedback converges at second order to the exact solution") {
  const auto sys = inverse_feedback();
  auto exact = [](double t) { return std::sqrt(1.0 + 2e-3 * t) - 1.0; };
  std::vector<double> errs;
  for (double big_k : {500.0, 250.0, 125.0, 62.5}) {
    const auto sol = solve_macro(sys, MacroMesh::uniform(2000.0, big_k, 0.5));
    double e = 0.0;
    for (std::size_t n = 0; n < sol.y.values().size(); ++n)
      e = std::max(e, std::abs(sol.y.value(n)[0] - exact(sol.mesh.node(n))));
    errs.push_back(e);
  }
  for (std::size_t i = 1; i < errs.size(); ++i) {
    const double ratio = errs[i - 1] / errs[i];
    CHECK(ratio > 3.6);
    CHECK(ratio < 4.4);
  }
}

TEST_CASE("quadratic feedback of a decaying orbit matches the averaged constant") {
  // Periodic response of u' = -u + sin(2 pi t) has mean square 1 / (2 (1 + 4 pi^2)).
  const auto sys = decay_system(
      1e-3, 1000.0, [](const Vec&, const Vec& u) { return Vec::Constant(1, u[0] * u[0]); },
      [](const Vec&, const Vec&) { return Mat::Zero(1, 1); },
      [](const Vec&, const Vec& u) { return Mat::Constant(1, 1, 2.0 * u[0]); });
  const double mean_sq = 1.0 / (2.0 * (1.0 + two_pi * two_pi));
  std::vector<double> errs;
  for (double k : {0.05, 0.025, 0.0125}) {
    const auto sol = solve_macro(sys, MacroMesh::uniform(1000.0, 500.0, k));
    errs.push_back(std::abs(sol.y.values().back()[0] - 1.0 * mean_sq));
  }
  CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.1));
  CHECK(errs[1] / errs[2] == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("osc1 terminal value approaches the averaged model") {
  const auto sys = make_benchmark(ProblemId::osc1);
  const double oracle = oracle::averaged_terminal(sys, 400);
  const auto coarse = solve_macro(sys, MacroMesh::uniform(sys.horizon(), 50000.0, 0.025));
  const auto fine = solve_macro(sys, MacroMesh::uniform(sys.horizon(), 25000.0, 0.0125));
  const double e_coarse = std::abs(coarse.y.values().back()[0] - oracle);
  const double e_fine = std::abs(fine.y.values().back()[0] - oracle);
  CHECK(e_fine < e_coarse);
  CHECK(e_coarse / e_fine > 3.0);
  CHECK(e_fine < 5e-3);
}

TEST_CASE("step residuals vanish (Galerkin orthogonality for dG(0) tests)") {
  for (auto id : {ProblemId::osc1, ProblemId::osc2}) {
    const auto sys = make_benchmark(id);
    const auto sol = solve_macro(sys, MacroMesh::uniform(sys.horizon(), 50000.0, 0.05));
    for (const auto& r : galerkin_residuals(sys, sol)) CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(sol.max_defect <= 1e-9);
  }
}

TEST_CASE("effort counts one macro solve plus 1/k micro steps per interval") {
  const auto sys = make_benchmark(ProblemId::osc1);
  const auto mesh = MacroMesh::uniform(sys.horizon(), 100000.0, 0.1);
  const auto sol = solve_macro(sys, mesh);
  CHECK(sol.effort() == 6.0 * 11.0);
  CHECK(sol.micro_steps >= 6 * 2 * 10);
  const auto finer = refine(mesh, std::vector<bool>(6, true), std::vector<bool>(6, false));
  CHECK(solve_macro(sys, finer).effort() > sol.effort());
}

TEST_CASE("Newton failure is reported with its residual history") {
  const auto sys = inverse_feedback();
  MacroOptions opts;
  opts.newton_max = 0;
  try {
    solve_macro(sys, MacroMesh::uniform(2000.0, 1000.0, 0.5), opts);
    FAIL("expected a Newton error");
  } catch (const NewtonError& e) {
    CHECK(e.residual_history().size() == 1);
    CHECK(e.location() == 0);
  }
}

TEST_CASE("mesh horizon must match the problem") {
  const auto sys = constant_feedback(1e-3);
  CHECK_THROWS_AS(solve_macro(sys, MacroMesh::uniform(500.0, 250.0, 0.5)), ConfigError);
}

TEST_CASE("trajectory csv") {
  const auto sys = constant_feedback(1e-3);
  const auto sol = solve_macro(sys, MacroMesh::uniform(1000.0, 500.0, 0.5));
  std::ostringstream os;
  write_trajectory_csv(os, sol);
  const std::string text = os.str();
  CHECK(text.rfind("T,Y_1\n0,0\n500,0.5", 0) == 0);
}
