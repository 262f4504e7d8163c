#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <numbers>
#include <span>
#include <type_traits>
#include <vector>

#include "msdwr/types.hpp"

namespace msdwr {

/// Two-point Gauss rule on an interval [a, a + h]: nodes a + h * fraction[q],
/// both with weight h / 2. A linear function on the interval takes the value
/// (1 - fraction[q]) * left + fraction[q] * right at node q.
namespace gauss2 {
inline constexpr double half_offset = 0.5 / std::numbers::sqrt3;
inline constexpr std::array<double, 2> fraction = {0.5 - half_offset, 0.5 + half_offset};
inline constexpr int points = 2;
}  // namespace gauss2

/// Uniform partition of the unit period into M intervals of length k = 1/M.
/// M is even, so consecutive interval pairs form micro patches.
class MicroGrid {
 public:
  explicit MicroGrid(int intervals);
  /// Grid with step k; 1/k must be an even integer.
  static MicroGrid from_step(double step);

  int intervals() const noexcept { return intervals_; }
  double step() const noexcept { return step_; }
  double node(int m) const noexcept { return m == intervals_ ? 1.0 : m * step_; }
  std::vector<double> nodes() const;
  MicroGrid refined() const { return MicroGrid(2 * intervals_); }

  friend bool operator==(const MicroGrid& a, const MicroGrid& b) {
    return a.intervals_ == b.intervals_;
  }

 private:
  int intervals_;
  double step_;
};

/// Macro partition 0 = T_0 < ... < T_N = T of the slow horizon. Interval n
/// (0-based) is (T_n, T_{n+1}] and carries its own micro grid. Intervals 2p
/// and 2p+1 form patch p when the mesh has patch structure.
class MacroMesh {
 public:
  MacroMesh(std::vector<double> nodes, std::vector<int> micro_intervals);
  /// N = T/K equal intervals, each with micro step k.
  static MacroMesh uniform(double horizon, double macro_step, double micro_step);

  std::size_t size() const noexcept { return micro_.size(); }
  std::span<const double> nodes() const noexcept { return nodes_; }
  double node(std::size_t i) const { return nodes_[i]; }
  double start(std::size_t n) const { return nodes_[n]; }
  double end(std::size_t n) const { return nodes_[n + 1]; }
  double length(std::size_t n) const { return nodes_[n + 1] - nodes_[n]; }
  double midpoint(std::size_t n) const { return 0.5 * (nodes_[n] + nodes_[n + 1]); }
  double horizon() const { return nodes_.back(); }
  /// Gauss node q of interval n.
  double gauss_point(std::size_t n, int q) const {
    return nodes_[n] + length(n) * gauss2::fraction[q];
  }

  int micro_intervals(std::size_t n) const { return micro_[n]; }
  double micro_step(std::size_t n) const { return 1.0 / micro_[n]; }
  MicroGrid micro_grid(std::size_t n) const { return MicroGrid(micro_[n]); }
  const std::vector<int>& micro_interval_counts() const noexcept { return micro_; }

  bool has_patch_structure() const;
  /// Throws StructureError unless the mesh has patch structure.
  void require_patch_structure() const;
  static std::size_t patch_partner(std::size_t n) { return n ^ 1U; }

  /// Interval containing t, using the half-open convention (T_n, T_{n+1}];
  /// t = 0 maps to the first interval.
  std::size_t locate(double t) const;

  friend bool operator==(const MacroMesh& a, const MacroMesh& b) {
    return a.nodes_ == b.nodes_ && a.micro_ == b.micro_;
  }

 private:
  std::vector<double> nodes_;
  std::vector<int> micro_;
};

/// Checks that [nodes] can carry patchwise reconstructions.
bool nodes_have_patch_structure(std::span<const double> nodes);

/// Continuous piecewise linear function on a node sequence (cG(1) trial space).
class PiecewiseLinearFn {
 public:
  PiecewiseLinearFn(std::vector<double> nodes, std::vector<Vec> values);
  template <class Fn>
  static PiecewiseLinearFn interpolate(std::vector<double> nodes, const Fn& fn) {
    std::vector<Vec> vals;
    vals.reserve(nodes.size());
    for (double t : nodes) vals.emplace_back(fn(t));
    return PiecewiseLinearFn(std::move(nodes), std::move(vals));
  }

  std::size_t intervals() const noexcept { return nodes_.size() - 1; }
  Eigen::Index dim() const { return values_.front().size(); }
  std::span<const double> nodes() const noexcept { return nodes_; }
  const Vec& value(std::size_t i) const { return values_[i]; }
  const std::vector<Vec>& values() const noexcept { return values_; }

  Vec operator()(double t) const;
  /// Evaluation with a known interval (avoids the search).
  Vec evaluate(std::size_t interval, double t) const;
  /// Constant slope on an interval.
  Vec slope(std::size_t interval) const;
  std::size_t locate(double t) const;

 private:
  std::vector<double> nodes_;
  std::vector<Vec> values_;
};

/// Piecewise constant function (dG(0) test / adjoint space). The value on
/// (T_n, T_{n+1}] is values[n]; evaluation at T_{n+1} returns values[n].
class PiecewiseConstantFn {
 public:
  PiecewiseConstantFn(std::vector<double> nodes, std::vector<Vec> values);

  std::size_t intervals() const noexcept { return values_.size(); }
  std::span<const double> nodes() const noexcept { return nodes_; }
  const Vec& value(std::size_t n) const { return values_[n]; }
  const std::vector<Vec>& values() const noexcept { return values_; }
  const Vec& operator()(double t) const;
  std::size_t locate(double t) const;

 private:
  std::vector<double> nodes_;
  std::vector<Vec> values_;
};

/// Patchwise quadratic reconstruction of a piecewise linear function: on patch
/// p the quadratic through the nodal values at T_{2p}, T_{2p+1}, T_{2p+2}.
class PatchQuadratic {
 public:
  explicit PatchQuadratic(const PiecewiseLinearFn& fn);

  Vec operator()(double t) const;
  Vec evaluate(std::size_t interval, double t) const;
  Vec derivative(std::size_t interval, double t) const;
  /// reconstruction minus the original function; vanishes at every node.
  Vec weight(std::size_t interval, double t) const;
  Vec weight_derivative(std::size_t interval, double t) const;
  /// f[T_2p, T_2p+1, T_2p+2] of the patch containing the interval.
  Vec second_divided_difference(std::size_t interval) const;

 private:
  PiecewiseLinearFn fn_;
};

/// Patchwise linear reconstruction of a piecewise constant function: on patch
/// p the line through (midpoint of I_2p, v_2p) and (midpoint of I_2p+1, v_2p+1).
class PatchLinear {
 public:
  explicit PatchLinear(const PiecewiseConstantFn& fn);

  Vec operator()(double t) const;
  Vec evaluate(std::size_t interval, double t) const;
  /// reconstruction minus the original function.
  Vec weight(std::size_t interval, double t) const;

 private:
  PiecewiseConstantFn fn_;
};

PatchQuadratic reconstruct_quadratic(const PiecewiseLinearFn& fn);
PatchLinear reconstruct_linear(const PiecewiseConstantFn& fn);

/// Summed two-point Gauss quadrature over a node sequence. [fn] is called
/// either as fn(t) or as fn(interval, t); it may return a scalar or a vector.
template <class Fn>
auto gauss2_integrate(const Fn& fn, std::span<const double> nodes) {
  auto call = [&](std::size_t n, double t) {
    if constexpr (std::is_invocable_v<const Fn&, std::size_t, double>) {
      return fn(n, t);
    } else {
      return fn(t);
    }
  };
  using R = std::decay_t<decltype(call(0, 0.0))>;
  using Acc = std::conditional_t<std::is_arithmetic_v<R>, double, Vec>;
  Acc sum{};
  bool first = true;
  for (std::size_t n = 0; n + 1 < nodes.size(); ++n) {
    const double a = nodes[n];
    const double h = nodes[n + 1] - a;
    for (int q = 0; q < gauss2::points; ++q) {
      Acc term = 0.5 * h * Acc(call(n, a + h * gauss2::fraction[q]));
      if (first) {
        sum = std::move(term);
        first = false;
      } else {
        sum += term;
      }
    }
  }
  return sum;
}

template <class Fn>
auto gauss2_integrate(const Fn& fn, const MacroMesh& mesh) {
  return gauss2_integrate(fn, mesh.nodes());
}

template <class Fn>
auto gauss2_integrate(const Fn& fn, const MicroGrid& grid) {
  const std::vector<double> nodes = grid.nodes();
  return gauss2_integrate(fn, std::span<const double>(nodes));
}

enum class RefineMode { macro, micro };

/// Macro mode splits interval n (0-based) at its midpoint together with its
/// patch partner; children keep their parent's micro step. Micro mode halves
/// k_n. Returns a new mesh.
MacroMesh refine_interval(const MacroMesh& mesh, std::size_t n, RefineMode mode);

/// Simultaneous refinement: split[n] bisects interval n, halve[n] halves k_n.
/// Patch partners of split intervals are split as well.
MacroMesh refine(const MacroMesh& mesh, const std::vector<bool>& split,
                 const std::vector<bool>& halve);

/// Rows (n, T_start, T_end, k) with 1-based n.
void write_mesh_csv(std::ostream& os, const MacroMesh& mesh);

}  // namespace msdwr
