#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "msdwr/errors.hpp"
#include "msdwr/reference.hpp"
#include "oracles.hpp"

using namespace msdwr;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// u'' + delta u' + gamma u = sin(2 pi t) with slow feedback f = u^2.
CallbackSystem forced_oscillator(double gamma, double delta, double eps, double horizon) {
  CallbackSystem::Callbacks cb;
  cb.f = [](const Vec&, const Vec& u) { return Vec::Constant(1, u[0] * u[0]); };
  cb.grad_y_f = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.grad_u_f = [](const Vec&, const Vec& u) {
    Mat m(1, 2);
    m << 2.0 * u[0], 0.0;
    return m;
  };
  cb.g = [=](double t, const Vec&, const Vec& u) {
    Vec out(2);
    out << u[1], -gamma * u[0] - delta * u[1] + std::sin(two_pi * t);
    return out;
  };
  cb.grad_y_g = [](double, const Vec&, const Vec&) { return Mat::Zero(2, 1); };
  cb.grad_u_g = [=](double, const Vec&, const Vec&) {
    Mat m(2, 2);
    m << 0.0, 1.0, -gamma, -delta;
    return m;
  };
  return CallbackSystem("forced", 1, 2, eps, horizon, Vec::Zero(1), cb, true);
}

}  // namespace

TEST_CASE("constant slow rate is integrated exactly") {
  CallbackSystem::Callbacks cb;
  cb.f = [](const Vec&, const Vec&) { return Vec::Ones(1); };
  cb.grad_y_f = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.grad_u_f = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.g = [](double t, const Vec&, const Vec& u) {
    return Vec::Constant(1, -u[0] + std::sin(two_pi * t));
  };
  cb.grad_y_g = [](double, const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  cb.grad_u_g = [](double, const Vec&, const Vec&) { return Mat(-Mat::Identity(1, 1)); };
  const CallbackSystem sys("rate", 1, 1, 1e-6, 6e3, Vec::Zero(1), cb, true);
  for (double k : {0.1, 0.02}) {
    const auto run = solve_resolved(sys, k, GoalFunctional(0));
    CHECK(run.j == doctest::Approx(6e-3).epsilon(1e-13));
    CHECK(run.steps == std::llround(6e3 / k));
  }
}

TEST_CASE("trapezoidal order on the forced linear oscillator") {
  const double gamma = 10.0, delta = 0.5, eps = 1e-3, horizon = 20.0;
  const auto sys = forced_oscillator(gamma, delta, eps, horizon);
  const oracle::OscillatorOrbit orbit(gamma, delta);
  const double mean_sq = oracle::simpson([&](double s) {
    const double u = orbit.state(s)[0];
    return u * u;
  });
  const double exact = eps * horizon * mean_sq;
  std::vector<double> logk, loge;
  for (int j = 0; j < 4; ++j) {
    const double k = 0.01 * std::pow(2.0, -j);
    const auto run = solve_resolved(sys, k, GoalFunctional(0));
    logk.push_back(std::log(k));
    loge.push_back(std::log(std::abs(run.j - exact)));
    CHECK(run.max_fast_norm < 1.0);
  }
  for (std::size_t i = 1; i < logk.size(); ++i) {
    const double slope = (loge[i] - loge[i - 1]) / (logk[i] - logk[i - 1]);
    CHECK(slope == doctest::Approx(2.0).epsilon(0.025));
  }
}

TEST_CASE("fast state starts on the periodic orbit") {
  const double gamma = 10.0, delta = 0.5;
  const auto sys = forced_oscillator(gamma, delta, 1e-3, 1.0);
  const auto run = solve_resolved(sys, 0.001, GoalFunctional(0));
  const Vec exact = oracle::OscillatorOrbit(gamma, delta).state(0.0);
  // one period later the state is back at u(0), which is O(k^2) from the exact orbit
  CHECK((run.u - exact).norm() <= 1e-5);
  CHECK(run.precycles > 1);
}

TEST_CASE("extrapolation of a synthetic second-order sequence") {
  const double c = 0.37;
  auto jk = [&](double k) { return 1.0 + c * k * k; };
  const auto ex = extrapolate(jk(0.01), jk(0.005), jk(0.0025));
  CHECK(ex.reliable);
  CHECK(ex.order == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(ex.limit == doctest::Approx(1.0).epsilon(1e-14));

  const auto third = extrapolate(1.0 + 0.008, 1.0 + 0.001, 1.0 + 0.000125);
  CHECK(third.order == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(third.limit == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("non-monotone sequences are flagged") {
  CHECK_FALSE(extrapolate(1.0, 1.1, 1.05).reliable);
  CHECK_FALSE(extrapolate(1.0, 1.0, 1.0).reliable);
}

TEST_CASE("invalid resolved steps") {
  const auto sys = forced_oscillator(10.0, 0.5, 1e-3, 1.0);
  CHECK_THROWS_AS(solve_resolved(sys, 0.3, GoalFunctional(0)), ConfigError);
  CHECK_THROWS_AS(solve_resolved(sys, 0.0, GoalFunctional(0)), ConfigError);
}

TEST_CASE("reference csv and stability flag") {
  const auto sys = forced_oscillator(10.0, 0.5, 1e-3, 2.0);
  const auto ref = compute_reference(sys, 0.01, GoalFunctional(0), 2);
  REQUIRE(ref.runs.size() == 3);
  CHECK(ref.runs[2].k == 0.0025);
  CHECK(ref.stable);
  CHECK(ref.extrapolation.order == doctest::Approx(2.0).epsilon(0.05));
  std::ostringstream os;
  write_reference_csv(os, ref);
  const std::string text = os.str();
  CHECK(text.rfind("k,J,p,limit\n0.01,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
