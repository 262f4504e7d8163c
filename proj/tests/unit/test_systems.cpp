#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "msdwr/errors.hpp"
#include "msdwr/systems.hpp"

using namespace msdwr;

namespace {

constexpr double pi = std::numbers::pi;

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double rel_err(const Mat& a, const Mat& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("oscillator right-hand side at rest is the forcing") {
  const auto sys = make_benchmark(ProblemId::osc1);
  const Vec g = sys.g(0.25, vec({0.0}), vec({0.0, 0.0}));
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(1.0));
}

TEST_CASE("stiffness of osc1 at y = 0") {
  const auto sys = make_benchmark(ProblemId::osc1);
  CHECK(sys.gamma(0.0) == doctest::Approx(4 * pi * pi - 32.0).epsilon(1e-14));
  CHECK(sys.gamma(0.0) == doctest::Approx(7.4784).epsilon(1e-4));
}

TEST_CASE("three-fifths damping eigenvalues") {
  const auto sys = make_benchmark(ProblemId::osc1, Damping::three_fifths);
  for (double y : {0.0, 0.3, 1.1}) {
    const Mat gu = sys.grad_u_g(0.1, vec({y}), vec({0.2, -0.1}));
    Eigen::EigenSolver<Mat> es(gu);
    const std::complex<double> root = std::sqrt(std::complex<double>(9.0 - 100.0 * sys.gamma(y)));
    const std::complex<double> l1 = -0.3 + root / 10.0;
    const std::complex<double> l2 = -0.3 - root / 10.0;
    const auto e0 = es.eigenvalues()[0];
    const auto e1 = es.eigenvalues()[1];
    const bool direct = std::abs(e0 - l1) < 1e-12 && std::abs(e1 - l2) < 1e-12;
    const bool swapped = std::abs(e0 - l2) < 1e-12 && std::abs(e1 - l1) < 1e-12;
    CHECK((direct || swapped));
  }
}

TEST_CASE("assumption report for osc1") {
  const auto sys = make_benchmark(ProblemId::osc1, Damping::three_fifths);
  std::vector<Vec> ys, us;
  for (int i = 0; i <= 12; ++i) ys.push_back(vec({0.1 * i}));
  for (double a : {-0.3, -0.05, 0.0, 0.1, 0.4})
    for (double b : {-1.0, 0.0, 0.7}) us.push_back(vec({a, b}));
  const auto rep = check_assumptions(sys, ys, us);
  CHECK(rep.max_real_eigenvalue == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK(rep.max_f_norm <= 1.0);
  CHECK(rep.lipschitz_f_y <= 1.0);
  CHECK(rep.lipschitz_f_u <= 8.0);
  CHECK(rep.periodicity_defect <= 1e-14);
  CHECK(rep.ok());
}

TEST_CASE("assumption report for a linear decay system") {
  CallbackSystem::Callbacks cb;
  cb.f = [](const Vec&, const Vec&) { return Vec::Zero(1); };
  cb.grad_y_f = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.grad_u_f = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.g = [](double, const Vec&, const Vec& u) { return Vec(-u); };
  cb.grad_y_g = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.grad_u_g = [](double, const Vec&, const Vec&) { return Mat(-Mat::Identity(1, 1)); };
  const CallbackSystem sys("decay", 1, 1, 1e-3, 1.0, Vec::Zero(1), cb, true);
  const auto rep = check_assumptions(sys, {vec({0.0}), vec({1.0})}, {vec({-1.0}), vec({2.0})});
  CHECK(rep.lipschitz_f_y == 0.0);
  CHECK(rep.lipschitz_f_u == 0.0);
  CHECK(rep.max_real_eigenvalue == doctest::Approx(-1.0));
  CHECK(rep.ok());
}

TEST_CASE("assumption report flags a growing mode") {
  CallbackSystem::Callbacks cb;
  cb.f = [](const Vec&, const Vec&) { return Vec::Zero(1); };
  cb.grad_y_f = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.grad_u_f = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.g = [](double, const Vec&, const Vec& u) { return Vec(u); };
  cb.grad_y_g = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.grad_u_g = [](double, const Vec&, const Vec&) { return Mat(Mat::Identity(1, 1)); };
  const CallbackSystem sys("growth", 1, 1, 1e-3, 1.0, Vec::Zero(1), cb, true);
  CHECK_FALSE(check_assumptions(sys, {vec({0.0})}, {vec({1.0})}).ok());
}

TEST_CASE("analytic Jacobians match central differences") {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> ty(0.0, 1.0), yy(0.0, 1.2), uu(-0.12, 0.12),
      vv(-1.0, 1.0);
  const double h = 1e-5;
  for (auto id : {ProblemId::osc1, ProblemId::osc2}) {
    for (auto damp : {Damping::half, Damping::three_fifths}) {
      const auto sys = make_benchmark(id, damp);
      for (int draw = 0; draw < 100; ++draw) {
        const double t = ty(rng);
        const Vec y = vec({yy(rng)});
        const Vec u = vec({uu(rng), vv(rng)});
        Mat fy(1, 1), fu(1, 2), gy(2, 1), gu(2, 2);
        for (int j = 0; j < 1; ++j) {
          Vec yp = y, ym = y;
          yp[j] += h;
          ym[j] -= h;
          fy.col(j) = (sys.f(yp, u) - sys.f(ym, u)) / (2 * h);
          gy.col(j) = (sys.g(t, yp, u) - sys.g(t, ym, u)) / (2 * h);
        }
        for (int j = 0; j < 2; ++j) {
          Vec up = u, um = u;
          up[j] += h;
          um[j] -= h;
          fu.col(j) = (sys.f(y, up) - sys.f(y, um)) / (2 * h);
          gu.col(j) = (sys.g(t, y, up) - sys.g(t, y, um)) / (2 * h);
        }
        CHECK(rel_err(sys.grad_y_f(y, u), fy) <= 1e-6);
        CHECK(rel_err(sys.grad_u_f(y, u), fu) <= 1e-6);
        CHECK(rel_err(sys.grad_y_g(t, y, u), gy) <= 1e-6);
        CHECK(rel_err(sys.grad_u_g(t, y, u), gu) <= 1e-6);
      }
    }
  }
}

TEST_CASE("benchmarks are one-periodic and osc1 feedback is bounded") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> tt(-3.0, 3.0), yy(0.0, 2.0), uu(-1.0, 1.0);
  for (auto id : {ProblemId::osc1, ProblemId::osc2}) {
    const auto sys = make_benchmark(id);
    for (int i = 0; i < 200; ++i) {
      const double t = tt(rng);
      const Vec y = vec({yy(rng)});
      const Vec u = vec({uu(rng), uu(rng)});
      const Vec g0 = sys.g(t, y, u);
      CHECK((g0 - sys.g(t + 1.0, y, u)).norm() <= 1e-14 * (1.0 + g0.norm()));
      if (id == ProblemId::osc1) {
        const double f = sys.f(y, u)[0];
        CHECK(f > 0.0);
        CHECK(f <= 1.0);
      }
    }
  }
}

TEST_CASE("benchmark constants") {
  const auto a = make_benchmark(ProblemId::osc1);
  const auto b = make_benchmark(ProblemId::osc2);
  CHECK(a.slow_dim() == 1);
  CHECK(a.fast_dim() == 2);
  CHECK(a.epsilon() == 1e-6);
  CHECK(a.horizon() == 6e5);
  CHECK(b.horizon() == 1e6);
  CHECK(a.delta() == 0.5);
  CHECK(make_benchmark(ProblemId::osc1, Damping::three_fifths).delta() == 0.6);
  CHECK(a.initial_slow()[0] == 0.0);
}

TEST_CASE("parsing of problem and damping names") {
  CHECK(parse_problem("osc1") == ProblemId::osc1);
  CHECK(parse_problem("osc2") == ProblemId::osc2);
  CHECK(parse_damping("half") == Damping::half);
  CHECK(parse_damping("threefifths") == Damping::three_fifths);
  CHECK_THROWS_AS(parse_problem("osc3"), ConfigError);
  CHECK_THROWS_AS(parse_damping("quarter"), ConfigError);
}

TEST_CASE("goal functional picks a terminal component") {
  GoalFunctional goal(1);
  CHECK(goal.value(vec({3.0, 5.0})) == 5.0);
  const Vec d = goal.derivative(2);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 1.0);
  CHECK_THROWS_AS(goal.value(vec({1.0})), UsageError);
}
