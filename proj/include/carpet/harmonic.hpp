#pragma once

// Harmonic boundary-value problems, Poisson kernels and effective resistance.
//
// A harmonic field h satisfies sum_{y ~ x} (h(y) - h(x)) = 0 at every cell,
// the sum running over real and virtual neighbors. Boundary data prescribes
// the average (h(x) + h(x*)) / 2 on a segment (Dirichlet type), or marks it
// as an even extension h(x*) = h(x) (Neumann type). Eliminating the virtual
// unknowns leaves a symmetric positive definite system on the real cells.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "carpet/error.hpp"
#include "carpet/geometry.hpp"
#include "carpet/linalg.hpp"
#include "carpet/operators.hpp"

namespace carpet {

inline constexpr int kMaxHarmonicLevel = 6;
inline constexpr int kMaxResistanceFieldLevel = 5;

/// One entry per virtual cell, in CarpetGraph::virtual_cells() order.
/// nullopt marks an even-extension (Neumann) segment.
struct BoundaryData {
  std::vector<std::optional<double>> values;

  static BoundaryData zero(const CarpetGraph& g) { return constant(g, 0.0); }
  static BoundaryData constant(const CarpetGraph& g, double c) {
    return {std::vector<std::optional<double>>(g.num_virtual(), c)};
  }
  static BoundaryData neumann(const CarpetGraph& g) {
    return {std::vector<std::optional<double>>(g.num_virtual(), std::nullopt)};
  }

  void set(const CarpetGraph& g, Side side, std::size_t position, std::optional<double> v) {
    values.at(g.virtual_index(side, position)) = v;
  }

  std::vector<bool> dirichlet_mask() const {
    std::vector<bool> m(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m[i] = values[i].has_value();
    return m;
  }
};

struct HarmonicSolution {
  Field cells;
  Eigen::VectorXd virtuals;  ///< h(x*) per virtual cell
  double residual = 0.0;     ///< max over harmonic and boundary rows
  int level = 0;
};

enum class LinearSolverKind { direct, pcg };

/// Mean value of sin(pi k t) over segment j of an edge cut into n segments.
inline double sin_segment_average(int k, std::size_t j, std::size_t n) {
  const double pk = std::numbers::pi * k;
  const double nd = static_cast<double>(n);
  return nd / pk *
         (std::cos(pk * static_cast<double>(j) / nd) - std::cos(pk * static_cast<double>(j + 1) / nd));
}

/// Exact segment averages of sin(pi k t) on one edge, zero on the others.
inline BoundaryData sin_boundary_data(const CarpetGraph& g, int k, Side edge = Side::top) {
  if (k < 1) throw ConfigError("sin_boundary_data: k must be >= 1");
  auto d = BoundaryData::zero(g);
  for (std::size_t j = 0; j < g.side_cells(); ++j)
    d.set(g, edge, j, sin_segment_average(k, j, g.side_cells()));
  return d;
}

/// Factors the reduced system for one Dirichlet/Neumann segment pattern and
/// solves it for any data with that pattern.
class HarmonicSolver {
 public:
  HarmonicSolver(const CarpetGraph& g, std::vector<bool> dirichlet_mask,
                 LinearSolverKind kind = LinearSolverKind::direct,
                 int max_level = kMaxHarmonicLevel)
      : g_(&g), mask_(std::move(dirichlet_mask)), kind_(kind) {
    if (g.level() > max_level)
      throw ResourceError("harmonic solves limited to level " + std::to_string(max_level));
    if (mask_.size() != g.num_virtual())
      throw ConfigError("boundary data must have one entry per virtual cell");
    if (std::none_of(mask_.begin(), mask_.end(), [](bool b) { return b; }))
      throw ConfigError("all-Neumann boundary data has no unique harmonic extension");
    auto op = assemble_real(g, BoundarySpec::neumann());
    matrix_ = op.matrix;
    for (std::size_t v = 0; v < mask_.size(); ++v)
      if (mask_[v]) {
        const auto o = static_cast<int>(g.virtual_cells()[v].owner);
        matrix_.coeffRef(o, o) += 2.0;
      }
    if (kind_ == LinearSolverKind::direct) ldlt_.factor(matrix_);
  }

  explicit HarmonicSolver(const CarpetGraph& g, LinearSolverKind kind = LinearSolverKind::direct)
      : HarmonicSolver(g, std::vector<bool>(g.num_virtual(), true), kind) {}

  const CarpetGraph& graph() const { return *g_; }

  HarmonicSolution solve(const BoundaryData& data) const {
    const auto& g = *g_;
    if (data.values.size() != g.num_virtual())
      throw ConfigError("boundary data must have one entry per virtual cell");
    for (std::size_t v = 0; v < mask_.size(); ++v)
      if (data.values[v].has_value() != mask_[v])
        throw ConfigError("boundary data pattern differs from the factored pattern");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
    for (std::size_t v = 0; v < mask_.size(); ++v)
      if (mask_[v]) rhs[static_cast<Eigen::Index>(g.virtual_cells()[v].owner)] += 2.0 * *data.values[v];

    HarmonicSolution out;
    out.level = g.level();
    if (kind_ == LinearSolverKind::direct) {
      out.cells = ldlt_.solve(rhs);
      // One step of iterative refinement.
      Eigen::VectorXd r = rhs - matrix_ * out.cells;
      out.cells += ldlt_.solve(r);
    } else {
      out.cells = pcg_solve(matrix_, rhs, 1e-12).x;
    }
    out.virtuals = extend(out.cells, data);
    out.residual = residual(g, out.cells, out.virtuals, data);
    return out;
  }

  /// Virtual values implied by the data: 2f - h(x) or h(x).
  Eigen::VectorXd extend(const Field& cells, const BoundaryData& data) const {
    const auto& vcs = g_->virtual_cells();
    Eigen::VectorXd out(static_cast<Eigen::Index>(vcs.size()));
    for (std::size_t v = 0; v < vcs.size(); ++v) {
      const double hx = cells[static_cast<Eigen::Index>(vcs[v].owner)];
      out[static_cast<Eigen::Index>(v)] = data.values[v] ? 2.0 * *data.values[v] - hx : hx;
    }
    return out;
  }

  /// Max violation over all harmonic rows and boundary-average rows.
  static double residual(const CarpetGraph& g, const Field& cells, const Eigen::VectorXd& virt,
                         const BoundaryData& data) {
    Eigen::VectorXd lap = Eigen::VectorXd::Zero(cells.size());
    for (auto [a, b] : g.edges()) {
      lap[a] += cells[b] - cells[a];
      lap[b] += cells[a] - cells[b];
    }
    const auto& vcs = g.virtual_cells();
    double worst = 0.0;
    for (std::size_t v = 0; v < vcs.size(); ++v) {
      const auto o = static_cast<Eigen::Index>(vcs[v].owner);
      lap[o] += virt[static_cast<Eigen::Index>(v)] - cells[o];
      if (data.values[v])
        worst = std::max(worst, std::abs(0.5 * (cells[o] + virt[static_cast<Eigen::Index>(v)]) -
                                         *data.values[v]));
      else
        worst = std::max(worst, std::abs(virt[static_cast<Eigen::Index>(v)] - cells[o]));
    }
    return std::max(worst, lap.cwiseAbs().maxCoeff());
  }

 private:
  const CarpetGraph* g_;
  std::vector<bool> mask_;
  LinearSolverKind kind_;
  SparseMatrix<double> matrix_;
  SparseLDLT<double> ldlt_;
};

inline HarmonicSolution solve_bvp(const CarpetGraph& g, const BoundaryData& data,
                                  LinearSolverKind kind = LinearSolverKind::direct) {
  return HarmonicSolver(g, data.dirichlet_mask(), kind).solve(data);
}

/// A point on the outer boundary: a side and an edge parameter t in [0, 1]
/// (left-to-right on top/bottom, top-to-bottom on left/right).
struct BoundaryPoint {
  Side side = Side::top;
  double t = 0.5;
};

namespace detail {

inline Side corner_partner_side(Side s, bool at_start) {
  // The side meeting `s` at its t=0 end (at_start) or t=1 end.
  switch (s) {
    case Side::top: return at_start ? Side::left : Side::right;
    case Side::bottom: return at_start ? Side::left : Side::right;
    case Side::left: return at_start ? Side::top : Side::bottom;
    case Side::right: return at_start ? Side::top : Side::bottom;
  }
  return s;
}

}  // namespace detail

/// Delta data concentrated at a boundary point: 3^m on the segment containing
/// it, or 3^m / 2 on each of the two segments meeting there (segment
/// junctions and corners).
inline BoundaryData stimulus_data(const CarpetGraph& g, BoundaryPoint p) {
  if (!(p.t >= 0.0 && p.t <= 1.0)) throw ConfigError("stimulus must lie on the boundary (t in [0,1])");
  const std::size_t n = g.side_cells();
  const double nd = static_cast<double>(n);
  const double s = p.t * nd;
  const double nearest = std::round(s);
  auto d = BoundaryData::zero(g);
  if (std::abs(s - nearest) > 1e-9) {
    d.set(g, p.side, static_cast<std::size_t>(std::floor(s)), nd);
    return d;
  }
  const auto j = static_cast<std::size_t>(nearest);
  if (j > 0 && j < n) {
    d.set(g, p.side, j - 1, 0.5 * nd);
    d.set(g, p.side, j, 0.5 * nd);
    return d;
  }
  // Corner: the end segment of this side and of the side meeting it there.
  const bool at_start = j == 0;
  d.set(g, p.side, at_start ? 0 : n - 1, 0.5 * nd);
  const Side other = detail::corner_partner_side(p.side, at_start);
  // Position of the same corner along the other side.
  const bool other_start = p.side == Side::top || p.side == Side::left;
  d.set(g, other, other_start ? 0 : n - 1, 0.5 * nd);
  return d;
}

inline HarmonicSolution poisson_kernel(const HarmonicSolver& solver, BoundaryPoint p) {
  return solver.solve(stimulus_data(solver.graph(), p));
}

inline HarmonicSolution poisson_kernel(const CarpetGraph& g, BoundaryPoint p) {
  return poisson_kernel(HarmonicSolver(g), p);
}

/// Kernels P(., t_b) for the midpoint t_b of every boundary segment, in
/// virtual-cell order. One factorization serves all of them.
inline std::vector<Field> segment_kernels(const HarmonicSolver& solver) {
  const auto& g = solver.graph();
  std::vector<Field> out;
  out.reserve(g.num_virtual());
  const double nd = static_cast<double>(g.side_cells());
  for (const auto& vc : g.virtual_cells())
    out.push_back(
        poisson_kernel(solver, {vc.side, (static_cast<double>(vc.position) + 0.5) / nd}).cells);
  return out;
}

/// h(x) = sum_b 3^{-m} P(x, t_b) f(b), with all segments of Dirichlet type.
inline Field poisson_integral(const std::vector<Field>& kernels, const CarpetGraph& g,
                              const BoundaryData& data) {
  if (kernels.size() != g.num_virtual())
    throw ConfigError("poisson_integral: need one kernel per boundary segment");
  if (data.values.size() != g.num_virtual())
    throw ConfigError("boundary data must have one entry per virtual cell");
  Field h = Field::Zero(static_cast<Eigen::Index>(g.size()));
  const double w = 1.0 / static_cast<double>(g.side_cells());
  for (std::size_t b = 0; b < kernels.size(); ++b) {
    if (!data.values[b])
      throw ConfigError("poisson_integral: Neumann segments are not covered by the kernels");
    if (*data.values[b] != 0.0) h += (w * *data.values[b]) * kernels[b];
  }
  return h;
}

/// Neumann Laplacian grounded at cell y (L + e_y e_y^T), which is SPD and
/// whose solutions for zero-sum right-hand sides vanish at y.
class GroundedLaplacian {
 public:
  GroundedLaplacian(const CarpetGraph& g, std::size_t y) : g_(&g), y_(y) {
    g.check_cell(y);
    auto op = assemble_real(g, BoundarySpec::neumann());
    op.matrix.coeffRef(static_cast<int>(y), static_cast<int>(y)) += 1.0;
    ldlt_.factor(op.matrix);
  }

  /// Unrenormalized effective resistance between x and the ground.
  double graph_resistance(std::size_t x) const {
    g_->check_cell(x);
    if (x == y_) return 0.0;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g_->size()));
    rhs[static_cast<Eigen::Index>(x)] = 1.0;
    rhs[static_cast<Eigen::Index>(y_)] = -1.0;
    Eigen::VectorXd v = ldlt_.solve(rhs);
    return v[static_cast<Eigen::Index>(x)] - v[static_cast<Eigen::Index>(y_)];
  }

  /// Graph resistance to every cell: diag(L~^{-1}) - 1, solved in column blocks.
  Eigen::VectorXd all_graph_resistances(Eigen::Index block = 256) const {
    const auto n = static_cast<Eigen::Index>(g_->size());
    Eigen::VectorXd out(n);
    for (Eigen::Index c0 = 0; c0 < n; c0 += block) {
      const Eigen::Index w = std::min(block, n - c0);
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, w);
      for (Eigen::Index j = 0; j < w; ++j) e(c0 + j, j) = 1.0;
      Eigen::MatrixXd z = ldlt_.solve(e);
      for (Eigen::Index j = 0; j < w; ++j) out[c0 + j] = z(c0 + j, j) - 1.0;
    }
    out[static_cast<Eigen::Index>(y_)] = 0.0;
    return out;
  }

 private:
  const CarpetGraph* g_;
  std::size_t y_;
  SparseLDLT<double> ldlt_;
};

/// R(x, y) = r^m (v(x) - v(y)) where L v = e_x - e_y (Neumann graph Laplacian).
inline double effective_resistance(const CarpetGraph& g, std::size_t x, std::size_t y,
                                   double r_inv = 1.25) {
  g.check_cell(x);
  g.check_cell(y);
  if (x == y) return 0.0;
  return std::pow(r_inv, -g.level()) * GroundedLaplacian(g, y).graph_resistance(x);
}

/// R(., y) for all cells from a single factorization.
inline Field resistance_field(const CarpetGraph& g, std::size_t y, double r_inv = 1.25,
                              int max_level = kMaxResistanceFieldLevel) {
  if (g.level() > max_level)
    throw ResourceError("resistance_field limited to level " + std::to_string(max_level));
  return std::pow(r_inv, -g.level()) * GroundedLaplacian(g, y).all_graph_resistances();
}

}  // namespace carpet
