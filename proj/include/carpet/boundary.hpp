#pragma once

// Discrete Gauss-Green identity, boundary decay fits along edges and at
// corners, and the exploratory boundary functional.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "carpet/error.hpp"
#include "carpet/fit.hpp"
#include "carpet/geometry.hpp"
#include "carpet/harmonic.hpp"
#include "carpet/operators.hpp"

namespace carpet {

struct GaussGreen {
  double lhs = 0.0;       ///< r^{-m} sum over real edges
  double interior = 0.0;  ///< -sum_x 8^{-m} v(x) rho^m Delta_full u(x)
  double boundary = 0.0;  ///< r^{-m} sum over (x, x*) of v(x)(u(x*) - u(x))
  double residual = 0.0;  ///< |lhs - interior - boundary|
  double scale() const { return std::max({1.0, std::abs(lhs), std::abs(interior), std::abs(boundary)}); }
};

namespace detail {

inline void check_gauss_green_args(const CarpetGraph& g, const Field& u, const Eigen::VectorXd& uv,
                                   const Field& v) {
  const auto n = static_cast<Eigen::Index>(g.size());
  if (u.size() != n || v.size() != n) throw ConfigError("gauss_green: field dimension mismatch");
  if (uv.size() != static_cast<Eigen::Index>(g.num_virtual()))
    throw ConfigError("gauss_green: u needs one value per virtual cell");
}

}  // namespace detail

/// Evaluates both sides of 𝓔_m(u, v) = interior + boundary. v is even-extended
/// to the virtual cells, so only u's virtual values enter.
inline GaussGreen gauss_green_residual(const Field& u, const Eigen::VectorXd& u_virtual,
                                       const Field& v, const CarpetGraph& g, double r_inv = 1.25) {
  detail::check_gauss_green_args(g, u, u_virtual, v);
  const int m = g.level();
  const double rm = std::pow(r_inv, m);
  const double rho = 8.0 * r_inv;
  GaussGreen out;
  double e = 0.0;
  Eigen::VectorXd lap = Eigen::VectorXd::Zero(u.size());
  for (auto [a, b] : g.edges()) {
    e += (u[a] - u[b]) * (v[a] - v[b]);
    lap[a] += u[b] - u[a];
    lap[b] += u[a] - u[b];
  }
  double bsum = 0.0;
  const auto vcs = g.virtual_cells();
  for (std::size_t k = 0; k < vcs.size(); ++k) {
    const auto o = static_cast<Eigen::Index>(vcs[k].owner);
    const double jump = u_virtual[static_cast<Eigen::Index>(k)] - u[o];
    lap[o] += jump;
    bsum += v[o] * jump;
  }
  out.lhs = rm * e;
  out.interior = -std::pow(8.0, -m) * std::pow(rho, m) * v.dot(lap);
  out.boundary = rm * bsum;
  out.residual = std::abs(out.lhs - out.interior - out.boundary);
  return out;
}

inline GaussGreen gauss_green_residual(const HarmonicSolution& u, const Field& v, const CarpetGraph& g,
                                       double r_inv = 1.25) {
  return gauss_green_residual(u.cells, u.virtuals, v, g, r_inv);
}

struct BoundaryFunctional {
  double value = 0.0;              ///< boundary term of the Gauss-Green identity
  Eigen::VectorXd densities;       ///< r^{-m}(u(x*) - u(x)) 3^m per virtual cell
};

inline BoundaryFunctional boundary_functional(const Field& u, const Eigen::VectorXd& u_virtual,
                                              const Field& v, const CarpetGraph& g,
                                              double r_inv = 1.25) {
  detail::check_gauss_green_args(g, u, u_virtual, v);
  const double rm = std::pow(r_inv, g.level());
  const double side = static_cast<double>(g.side_cells());
  BoundaryFunctional out;
  out.densities.resize(static_cast<Eigen::Index>(g.num_virtual()));
  const auto vcs = g.virtual_cells();
  for (std::size_t k = 0; k < vcs.size(); ++k) {
    const auto o = static_cast<Eigen::Index>(vcs[k].owner);
    const double jump = u_virtual[static_cast<Eigen::Index>(k)] - u[o];
    out.value += rm * v[o] * jump;
    out.densities[static_cast<Eigen::Index>(k)] = rm * jump * side;
  }
  return out;
}

inline BoundaryFunctional boundary_functional(const HarmonicSolution& u, const Field& v,
                                              const CarpetGraph& g, double r_inv = 1.25) {
  return boundary_functional(u.cells, u.virtuals, v, g, r_inv);
}

/// Three cells in a line perpendicular to an edge, x1 touching the edge.
struct DecayStack {
  Side side = Side::bottom;
  std::size_t position = 0;
  std::array<std::size_t, 3> cells{};
};

/// The corner cell and, for j = 2, 3, the two cells j - 1 steps away along
/// each incident edge.
struct CornerStack {
  Corner corner = Corner::top_left;
  std::size_t x1 = 0;
  std::array<std::array<std::size_t, 2>, 2> pairs{};
};

struct DecayFit {
  double A = 0.0;
  double alpha = 0.0;
  double r2 = 0.0;
};

namespace detail {

/// Grid step pointing from the edge into the square.
inline std::array<long, 2> inward_step(Side s) {
  switch (s) {
    case Side::top: return {0, 1};
    case Side::bottom: return {0, -1};
    case Side::left: return {1, 0};
    case Side::right: return {-1, 0};
  }
  return {0, 0};
}

inline std::array<long, 2> edge_start(const CarpetGraph& g, Side s, std::size_t position) {
  const long last = static_cast<long>(g.side_cells()) - 1;
  const long p = static_cast<long>(position);
  switch (s) {
    case Side::top: return {p, 0};
    case Side::bottom: return {p, last};
    case Side::left: return {0, p};
    case Side::right: return {last, p};
  }
  return {0, 0};
}

inline DecayFit fit_three(const std::array<double, 3>& values, int level) {
  std::array<double, 3> d{};
  for (int j = 0; j < 3; ++j) {
    if (values[static_cast<std::size_t>(j)] == 0.0) throw ConfigError("decay fit: degenerate (u = 0 at a stack cell)");
    d[static_cast<std::size_t>(j)] = (j + 0.5) / std::pow(3.0, level);
  }
  const std::array<double, 3> a{std::abs(values[0]), std::abs(values[1]), std::abs(values[2])};
  const auto f = fit_loglog(d, a);
  return {std::copysign(std::exp(f.intercept), values[0]), f.slope, f.r2};
}

}  // namespace detail

/// The stack at a boundary position, or nullopt if a hole interrupts it.
inline std::optional<DecayStack> decay_stack(const CarpetGraph& g, Side side, std::size_t position) {
  if (position >= g.side_cells()) throw ConfigError("decay_stack: position out of range");
  const auto [c0, r0] = detail::edge_start(g, side, position);
  const auto [dc, dr] = detail::inward_step(side);
  DecayStack s{side, position, {}};
  for (long j = 0; j < 3; ++j) {
    const auto c = g.cell_at(c0 + j * dc, r0 + j * dr);
    if (!c) return std::nullopt;
    s.cells[static_cast<std::size_t>(j)] = *c;
  }
  return s;
}

/// All eligible stacks along one edge, ordered by position.
inline std::vector<DecayStack> decay_stacks(const CarpetGraph& g, Side side) {
  std::vector<DecayStack> out;
  for (std::size_t p = 0; p < g.side_cells(); ++p)
    if (auto s = decay_stack(g, side, p)) out.push_back(*s);
  return out;
}

inline CornerStack corner_stack(const CarpetGraph& g, Corner c) {
  if (g.level() < 2) throw ConfigError("corner stacks need level >= 2");
  const long last = static_cast<long>(g.side_cells()) - 1;
  long col = 0, row = 0, dc = 1, dr = 1;
  switch (c) {
    case Corner::top_left: break;
    case Corner::top_right: col = last; dc = -1; break;
    case Corner::bottom_right: col = last; row = last; dc = -1; dr = -1; break;
    case Corner::bottom_left: row = last; dr = -1; break;
  }
  CornerStack s;
  s.corner = c;
  s.x1 = *g.cell_at(col, row);
  for (long j = 1; j <= 2; ++j) {
    const auto along_row = g.cell_at(col + j * dc, row);
    const auto along_col = g.cell_at(col, row + j * dr);
    if (!along_row || !along_col) throw ConfigError("corner stack interrupted by a hole");
    s.pairs[static_cast<std::size_t>(j - 1)] = {*along_row, *along_col};
  }
  return s;
}

/// Fits |u(x_j)| = |A| d_j^alpha with d_j = (j - 1/2)/3^m; A takes the sign of u(x1).
inline DecayFit fit_decay(const Field& u, const DecayStack& s, int level) {
  std::array<double, 3> vals{};
  for (std::size_t j = 0; j < 3; ++j) vals[j] = u[static_cast<Eigen::Index>(s.cells[j])];
  return detail::fit_three(vals, level);
}

/// Values at roundoff level relative to max |u| count as zero, so a field odd
/// under the diagonal reflection through the corner gives a degenerate fit.
inline DecayFit fit_corner_decay(const Field& u, const CornerStack& s, int level) {
  auto at = [&](std::size_t c) { return u[static_cast<Eigen::Index>(c)]; };
  const double scale = u.size() ? u.cwiseAbs().maxCoeff() : 0.0;
  auto clean = [&](double x) { return std::abs(x) <= 1e-12 * scale ? 0.0 : x; };
  const std::array<double, 3> vals{clean(at(s.x1)), clean(0.5 * (at(s.pairs[0][0]) + at(s.pairs[0][1]))),
                                   clean(0.5 * (at(s.pairs[1][0]) + at(s.pairs[1][1])))};
  return detail::fit_three(vals, level);
}

struct DecayRow {
  std::size_t position = 0;
  DecayFit fit;
};

struct DecayProfile {
  Side side = Side::bottom;
  std::vector<DecayRow> rows;
  std::size_t degenerate = 0;  ///< eligible stacks skipped because u vanished
  double mean_alpha = 0.0;
  double min_alpha = 0.0;
  double max_alpha = 0.0;
};

inline DecayProfile decay_profile(const Field& u, const CarpetGraph& g, Side side) {
  DecayProfile p;
  p.side = side;
  for (const auto& s : decay_stacks(g, side)) {
    try {
      p.rows.push_back({s.position, fit_decay(u, s, g.level())});
    } catch (const ConfigError&) {
      ++p.degenerate;
    }
  }
  if (!p.rows.empty()) {
    p.min_alpha = p.max_alpha = p.rows.front().fit.alpha;
    for (const auto& r : p.rows) {
      p.mean_alpha += r.fit.alpha;
      p.min_alpha = std::min(p.min_alpha, r.fit.alpha);
      p.max_alpha = std::max(p.max_alpha, r.fit.alpha);
    }
    p.mean_alpha /= static_cast<double>(p.rows.size());
  }
  return p;
}

}  // namespace carpet
