#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "msdwr/types.hpp"

namespace msdwr {

/// Coupled slow/fast ODE system
///
///   y' = eps * f(y, u),   u' = g(t, y, u),   y(0) = y0,
///
/// with y of dimension c (slow) and u of dimension d (fast). g is 1-periodic
/// in t. The public evaluation functions are non-virtual; concrete problems
/// override the do_* hooks and write into caller-sized outputs so that inner
/// loops never allocate.
class SlowFastSystem {
 public:
  static constexpr double period = 1.0;

  SlowFastSystem(int slow_dim, int fast_dim, double epsilon, double horizon, Vec y0);
  virtual ~SlowFastSystem() = default;

  virtual std::string name() const = 0;

  int slow_dim() const noexcept { return slow_dim_; }
  int fast_dim() const noexcept { return fast_dim_; }
  double epsilon() const noexcept { return epsilon_; }
  double horizon() const noexcept { return horizon_; }
  const Vec& initial_slow() const noexcept { return y0_; }

  /// True if g is affine in u, so one Newton step solves each implicit step.
  virtual bool fast_affine_in_u() const { return false; }

  void f(const CVecRef& y, const CVecRef& u, VecRef out) const { do_f(y, u, out); }
  void grad_y_f(const CVecRef& y, const CVecRef& u, MatRef out) const { do_grad_y_f(y, u, out); }
  void grad_u_f(const CVecRef& y, const CVecRef& u, MatRef out) const { do_grad_u_f(y, u, out); }
  void g(double t, const CVecRef& y, const CVecRef& u, VecRef out) const { do_g(t, y, u, out); }
  void grad_y_g(double t, const CVecRef& y, const CVecRef& u, MatRef out) const {
    do_grad_y_g(t, y, u, out);
  }
  void grad_u_g(double t, const CVecRef& y, const CVecRef& u, MatRef out) const {
    do_grad_u_g(t, y, u, out);
  }

  // Allocating conveniences for tests and diagnostics.
  Vec f(const CVecRef& y, const CVecRef& u) const;
  Mat grad_y_f(const CVecRef& y, const CVecRef& u) const;
  Mat grad_u_f(const CVecRef& y, const CVecRef& u) const;
  Vec g(double t, const CVecRef& y, const CVecRef& u) const;
  Mat grad_y_g(double t, const CVecRef& y, const CVecRef& u) const;
  Mat grad_u_g(double t, const CVecRef& y, const CVecRef& u) const;

 protected:
  virtual void do_f(const CVecRef& y, const CVecRef& u, VecRef out) const = 0;
  virtual void do_grad_y_f(const CVecRef& y, const CVecRef& u, MatRef out) const = 0;
  virtual void do_grad_u_f(const CVecRef& y, const CVecRef& u, MatRef out) const = 0;
  virtual void do_g(double t, const CVecRef& y, const CVecRef& u, VecRef out) const = 0;
  virtual void do_grad_y_g(double t, const CVecRef& y, const CVecRef& u, MatRef out) const = 0;
  virtual void do_grad_u_g(double t, const CVecRef& y, const CVecRef& u, MatRef out) const = 0;

 private:
  int slow_dim_;
  int fast_dim_;
  double epsilon_;
  double horizon_;
  Vec y0_;
};

/// Goal functional J(Y) = Y_i(T): a terminal value of one slow component.
class GoalFunctional {
 public:
  explicit GoalFunctional(int component = 0) : component_(component) {}
  int component() const noexcept { return component_; }
  double value(const CVecRef& terminal) const;
  /// Gradient of J with respect to the terminal slow state.
  Vec derivative(int slow_dim) const;

 private:
  int component_;
};

enum class ProblemId { osc1, osc2 };
enum class Damping { half, three_fifths };

ProblemId parse_problem(std::string_view text);
Damping parse_damping(std::string_view text);
std::string to_string(ProblemId id);
std::string to_string(Damping damping);
double damping_coefficient(Damping damping);

/// Forced damped oscillator benchmarks, written as first-order fast systems
/// (u1, u2) = (u, u'):
///
///   u1' = u2,  u2' = -gamma(y) u1 - delta u2 + sin(2 pi t),
///
/// with slow right-hand side f reading u1 only.
class OscillatorSystem final : public SlowFastSystem {
 public:
  OscillatorSystem(ProblemId id, Damping damping);

  std::string name() const override;
  bool fast_affine_in_u() const override { return true; }

  ProblemId id() const noexcept { return id_; }
  Damping damping() const noexcept { return damping_; }
  double delta() const noexcept { return delta_; }
  double gamma(double y) const;
  double gamma_prime(double y) const;

 protected:
  void do_f(const CVecRef& y, const CVecRef& u, VecRef out) const override;
  void do_grad_y_f(const CVecRef& y, const CVecRef& u, MatRef out) const override;
  void do_grad_u_f(const CVecRef& y, const CVecRef& u, MatRef out) const override;
  void do_g(double t, const CVecRef& y, const CVecRef& u, VecRef out) const override;
  void do_grad_y_g(double t, const CVecRef& y, const CVecRef& u, MatRef out) const override;
  void do_grad_u_g(double t, const CVecRef& y, const CVecRef& u, MatRef out) const override;

 private:
  ProblemId id_;
  Damping damping_;
  double delta_;
};

/// Builds one of the two benchmark problems. osc1: T = 6e5, osc2: T = 1e6,
/// both with eps = 1e-6 and y0 = 0.
OscillatorSystem make_benchmark(ProblemId id, Damping damping = Damping::half);
std::shared_ptr<const SlowFastSystem> make_benchmark_shared(ProblemId id,
                                                            Damping damping = Damping::half);

/// System assembled from callables. Used for small analytic test problems.
class CallbackSystem final : public SlowFastSystem {
 public:
  using SlowFn = std::function<Vec(const Vec& y, const Vec& u)>;
  using SlowJac = std::function<Mat(const Vec& y, const Vec& u)>;
  using FastFn = std::function<Vec(double t, const Vec& y, const Vec& u)>;
  using FastJac = std::function<Mat(double t, const Vec& y, const Vec& u)>;

  struct Callbacks {
    SlowFn f;
    SlowJac grad_y_f;
    SlowJac grad_u_f;
    FastFn g;
    FastJac grad_y_g;
    FastJac grad_u_g;
  };

  CallbackSystem(std::string name, int slow_dim, int fast_dim, double epsilon, double horizon,
                 Vec y0, Callbacks callbacks, bool affine_in_u = false);

  std::string name() const override { return name_; }
  bool fast_affine_in_u() const override { return affine_; }

 protected:
  void do_f(const CVecRef& y, const CVecRef& u, VecRef out) const override;
  void do_grad_y_f(const CVecRef& y, const CVecRef& u, MatRef out) const override;
  void do_grad_u_f(const CVecRef& y, const CVecRef& u, MatRef out) const override;
  void do_g(double t, const CVecRef& y, const CVecRef& u, VecRef out) const override;
  void do_grad_y_g(double t, const CVecRef& y, const CVecRef& u, MatRef out) const override;
  void do_grad_u_g(double t, const CVecRef& y, const CVecRef& u, MatRef out) const override;

 private:
  std::string name_;
  Callbacks cb_;
  bool affine_;
};

/// Sampled check of the standing assumptions on a system.
struct AssumptionReport {
  double max_f_norm = 0.0;
  double lipschitz_f_y = 0.0;  ///< max |f(y1,u)-f(y2,u)| / |y1-y2| over sample pairs
  double lipschitz_f_u = 0.0;  ///< max |f(y,u1)-f(y,u2)| / |u1-u2| over sample pairs
  double max_real_eigenvalue = 0.0;  ///< of grad_u g, over samples and phases
  double periodicity_defect = 0.0;   ///< max |g(t)-g(t+1)| / (1+|g|)
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

AssumptionReport check_assumptions(const SlowFastSystem& system, const std::vector<Vec>& y_samples,
                                   const std::vector<Vec>& u_samples);

}  // namespace msdwr
