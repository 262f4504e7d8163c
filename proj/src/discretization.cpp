#include "msdwr/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "msdwr/csv.hpp"
#include "msdwr/errors.hpp"

namespace msdwr {

namespace {

constexpr double patch_tolerance = 1e-12;

std::size_t locate_in(std::span<const double> nodes, double t) {
  // First node >= t closes the interval (T_{n-1}, T_n].
  auto it = std::lower_bound(nodes.begin() + 1, nodes.end(), t);
  if (it == nodes.end()) return nodes.size() - 2;
  return static_cast<std::size_t>(it - nodes.begin()) - 1;
}

void check_nodes(std::span<const double> nodes) {
  if (nodes.size() < 2) throw StructureError("a mesh needs at least one interval");
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (!(nodes[i] > nodes[i - 1])) throw StructureError("mesh nodes must increase strictly");
}

}  // namespace

MicroGrid::MicroGrid(int intervals) : intervals_(intervals), step_(1.0 / intervals) {
  if (intervals < 2 || intervals % 2 != 0)
    throw StructureError("micro grid needs a positive even number of intervals, got " +
                         std::to_string(intervals));
}

MicroGrid MicroGrid::from_step(double step) {
  if (!(step > 0.0) || step > 1.0) throw ConfigError("micro step must lie in (0, 1]");
  const double m = 1.0 / step;
  const double rounded = std::round(m);
  if (std::abs(m - rounded) > 1e-9 * rounded)
    throw ConfigError("micro step " + std::to_string(step) + " does not divide the period");
  return MicroGrid(static_cast<int>(rounded));
}

std::vector<double> MicroGrid::nodes() const {
  std::vector<double> out(static_cast<std::size_t>(intervals_) + 1);
  for (int m = 0; m <= intervals_; ++m) out[static_cast<std::size_t>(m)] = node(m);
  return out;
}

MacroMesh::MacroMesh(std::vector<double> nodes, std::vector<int> micro_intervals)
    : nodes_(std::move(nodes)), micro_(std::move(micro_intervals)) {
  check_nodes(nodes_);
  if (micro_.size() + 1 != nodes_.size())
    throw StructureError("one micro grid per macro interval is required");
  if (nodes_.front() != 0.0) throw StructureError("macro mesh must start at t = 0");
  for (int m : micro_) (void)MicroGrid(m);
}

MacroMesh MacroMesh::uniform(double horizon, double macro_step, double micro_step) {
  if (!(macro_step > 0.0) || !(horizon > 0.0)) throw ConfigError("steps must be positive");
  const double ratio = horizon / macro_step;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * n)
    throw ConfigError("macro step " + std::to_string(macro_step) + " does not divide T = " +
                      std::to_string(horizon));
  const auto count = static_cast<std::size_t>(n);
  std::vector<double> nodes(count + 1);
  for (std::size_t i = 0; i <= count; ++i)
    nodes[i] = horizon * static_cast<double>(i) / static_cast<double>(count);
  nodes.back() = horizon;
  const int m = MicroGrid::from_step(micro_step).intervals();
  return MacroMesh(std::move(nodes), std::vector<int>(count, m));
}

bool nodes_have_patch_structure(std::span<const double> nodes) {
  const std::size_t n = nodes.size() - 1;
  if (n == 0 || n % 2 != 0) return false;
  for (std::size_t p = 0; p < n; p += 2) {
    const double a = nodes[p + 1] - nodes[p];
    const double b = nodes[p + 2] - nodes[p + 1];
    if (std::abs(a - b) > patch_tolerance * std::max(a, b)) return false;
  }
  return true;
}

bool MacroMesh::has_patch_structure() const { return nodes_have_patch_structure(nodes_); }

void MacroMesh::require_patch_structure() const {
  if (!has_patch_structure())
    throw StructureError("macro mesh has no patch structure (N even, K_2p = K_2p+1)");
}

std::size_t MacroMesh::locate(double t) const { return locate_in(nodes_, t); }

// --- piecewise functions -----------------------------------------------------

PiecewiseLinearFn::PiecewiseLinearFn(std::vector<double> nodes, std::vector<Vec> values)
    : nodes_(std::move(nodes)), values_(std::move(values)) {
  check_nodes(nodes_);
  if (values_.size() != nodes_.size())
    throw UsageError("piecewise linear function needs one value per node");
}

std::size_t PiecewiseLinearFn::locate(double t) const { return locate_in(nodes_, t); }

Vec PiecewiseLinearFn::evaluate(std::size_t n, double t) const {
  const double a = nodes_[n];
  const double b = nodes_[n + 1];
  if (t == b) return values_[n + 1];
  if (t == a) return values_[n];
  const double s = (t - a) / (b - a);
  return (1.0 - s) * values_[n] + s * values_[n + 1];
}

Vec PiecewiseLinearFn::operator()(double t) const { return evaluate(locate(t), t); }

Vec PiecewiseLinearFn::slope(std::size_t n) const {
  return (values_[n + 1] - values_[n]) / (nodes_[n + 1] - nodes_[n]);
}

PiecewiseConstantFn::PiecewiseConstantFn(std::vector<double> nodes, std::vector<Vec> values)
    : nodes_(std::move(nodes)), values_(std::move(values)) {
  check_nodes(nodes_);
  if (values_.size() + 1 != nodes_.size())
    throw UsageError("piecewise constant function needs one value per interval");
}

std::size_t PiecewiseConstantFn::locate(double t) const { return locate_in(nodes_, t); }

const Vec& PiecewiseConstantFn::operator()(double t) const { return values_[locate(t)]; }

// --- reconstructions -----------------------------------------------------------

PatchQuadratic::PatchQuadratic(const PiecewiseLinearFn& fn) : fn_(fn) {
  if (!nodes_have_patch_structure(fn_.nodes()))
    throw StructureError("quadratic reconstruction needs a mesh with patch structure");
}

Vec PatchQuadratic::evaluate(std::size_t n, double t) const {
  const std::size_t p0 = n & ~std::size_t{1};
  const auto nodes = fn_.nodes();
  const double t0 = nodes[p0], t1 = nodes[p0 + 1], t2 = nodes[p0 + 2];
  const double l0 = (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2));
  const double l1 = (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2));
  const double l2 = (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1));
  return l0 * fn_.value(p0) + l1 * fn_.value(p0 + 1) + l2 * fn_.value(p0 + 2);
}

Vec PatchQuadratic::derivative(std::size_t n, double t) const {
  const std::size_t p0 = n & ~std::size_t{1};
  const auto nodes = fn_.nodes();
  const double t0 = nodes[p0], t1 = nodes[p0 + 1], t2 = nodes[p0 + 2];
  const double d0 = (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2));
  const double d1 = (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2));
  const double d2 = (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1));
  return d0 * fn_.value(p0) + d1 * fn_.value(p0 + 1) + d2 * fn_.value(p0 + 2);
}

Vec PatchQuadratic::operator()(double t) const { return evaluate(fn_.locate(t), t); }

// Newton form: quadratic minus the chord on I_n is f[t0,t1,t2] (t - T_n)(t - T_n+1).
// Differences of neighbouring values are exact, so the weight does not cancel.
Vec PatchQuadratic::second_divided_difference(std::size_t n) const {
  const std::size_t p0 = n & ~std::size_t{1};
  const auto nodes = fn_.nodes();
  const double t0 = nodes[p0], t1 = nodes[p0 + 1], t2 = nodes[p0 + 2];
  const Vec d1 = (fn_.value(p0 + 1) - fn_.value(p0)) / (t1 - t0);
  const Vec d2 = (fn_.value(p0 + 2) - fn_.value(p0 + 1)) / (t2 - t1);
  return (d2 - d1) / (t2 - t0);
}

Vec PatchQuadratic::weight(std::size_t n, double t) const {
  const auto nodes = fn_.nodes();
  return second_divided_difference(n) * ((t - nodes[n]) * (t - nodes[n + 1]));
}

Vec PatchQuadratic::weight_derivative(std::size_t n, double t) const {
  const auto nodes = fn_.nodes();
  return second_divided_difference(n) * (2.0 * t - nodes[n] - nodes[n + 1]);
}

PatchLinear::PatchLinear(const PiecewiseConstantFn& fn) : fn_(fn) {
  if (!nodes_have_patch_structure(fn_.nodes()))
    throw StructureError("linear reconstruction needs a mesh with patch structure");
}

Vec PatchLinear::evaluate(std::size_t n, double t) const {
  const std::size_t p0 = n & ~std::size_t{1};
  const auto nodes = fn_.nodes();
  const double m0 = 0.5 * (nodes[p0] + nodes[p0 + 1]);
  const double m1 = 0.5 * (nodes[p0 + 1] + nodes[p0 + 2]);
  const double s = (t - m0) / (m1 - m0);
  return (1.0 - s) * fn_.value(p0) + s * fn_.value(p0 + 1);
}

Vec PatchLinear::operator()(double t) const { return evaluate(fn_.locate(t), t); }

Vec PatchLinear::weight(std::size_t n, double t) const {
  const std::size_t p0 = n & ~std::size_t{1};
  const auto nodes = fn_.nodes();
  const double m0 = 0.5 * (nodes[p0] + nodes[p0 + 1]);
  const double m1 = 0.5 * (nodes[p0 + 1] + nodes[p0 + 2]);
  const double mn = 0.5 * (nodes[n] + nodes[n + 1]);
  return (fn_.value(p0 + 1) - fn_.value(p0)) * ((t - mn) / (m1 - m0));
}

PatchQuadratic reconstruct_quadratic(const PiecewiseLinearFn& fn) { return PatchQuadratic(fn); }
PatchLinear reconstruct_linear(const PiecewiseConstantFn& fn) { return PatchLinear(fn); }

// --- refinement ----------------------------------------------------------------

MacroMesh refine(const MacroMesh& mesh, const std::vector<bool>& split,
                 const std::vector<bool>& halve) {
  const std::size_t n = mesh.size();
  if (split.size() != n || halve.size() != n)
    throw UsageError("refinement flags must match the mesh size");
  std::vector<bool> cut = split;
  if (mesh.has_patch_structure()) {
    for (std::size_t i = 0; i < n; ++i)
      if (split[i]) cut[MacroMesh::patch_partner(i)] = true;
  }
  std::vector<double> nodes{mesh.node(0)};
  std::vector<int> micro;
  for (std::size_t i = 0; i < n; ++i) {
    const int m = halve[i] ? 2 * mesh.micro_intervals(i) : mesh.micro_intervals(i);
    if (cut[i]) {
      nodes.push_back(mesh.midpoint(i));
      micro.push_back(m);
    }
    nodes.push_back(mesh.end(i));
    micro.push_back(m);
  }
  return MacroMesh(std::move(nodes), std::move(micro));
}

MacroMesh refine_interval(const MacroMesh& mesh, std::size_t n, RefineMode mode) {
  if (n >= mesh.size()) throw UsageError("interval index out of range");
  std::vector<bool> split(mesh.size(), false);
  std::vector<bool> halve(mesh.size(), false);
  (mode == RefineMode::macro ? split : halve)[n] = true;
  return refine(mesh, split, halve);
}

void write_mesh_csv(std::ostream& os, const MacroMesh& mesh) {
  CsvWriter csv(os);
  csv.header({"n", "T_start", "T_end", "k"});
  for (std::size_t n = 0; n < mesh.size(); ++n)
    csv.row(n + 1, mesh.start(n), mesh.end(n), mesh.micro_step(n));
}

}  // namespace msdwr
