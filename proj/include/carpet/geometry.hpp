#pragma once

// Level-m cell complex of the Sierpinski carpet.
//
// A cell is addressed by a word of base-8 digits; the first digit selects the
// outermost (coarsest) contraction. Digits label the eight subsquares
// clockwise from the top-left:
//
//     0 1 2
//     7 . 3
//     6 5 4
//
// Cells are indexed by reading the address as a base-8 number, so index order
// is lexicographic address order. Grid coordinates (col, row) count from the
// top-left corner of the unit square, row 0 being the top row.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "carpet/error.hpp"

namespace carpet {

inline constexpr int kMaxSupportedLevel = 7;

constexpr std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

/// Grid offset (col, row) of each level-1 subsquare, indexed by digit.
inline constexpr std::array<std::array<int, 2>, 8> kDigitOffset = {{
    {0, 0}, {1, 0}, {2, 0}, {2, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1},
}};

/// Digit of the subsquare at offset (col, row), or -1 for the removed center.
constexpr int digit_at_offset(int col, int row) {
  for (int d = 0; d < 8; ++d)
    if (kDigitOffset[d][0] == col && kDigitOffset[d][1] == row) return d;
  return -1;
}

enum class Side : std::uint8_t { top = 0, right = 1, bottom = 2, left = 3 };
inline constexpr std::array<Side, 4> kSides = {Side::top, Side::right, Side::bottom,
                                               Side::left};

inline std::string_view to_string(Side s) {
  switch (s) {
    case Side::top: return "top";
    case Side::right: return "right";
    case Side::bottom: return "bottom";
    case Side::left: return "left";
  }
  return "?";
}

inline Side parse_side(std::string_view s) {
  for (Side side : kSides)
    if (to_string(side) == s) return side;
  throw ConfigError("unknown side '" + std::string(s) + "'");
}

enum class Corner : std::uint8_t { top_left, top_right, bottom_right, bottom_left };

struct GridPos {
  int col = 0;
  int row = 0;
  auto operator<=>(const GridPos&) const = default;
};

/// Axis-aligned rectangle in unit-square coordinates (y pointing up).
struct Rect {
  double x0, y0, x1, y1;
  double cx() const { return 0.5 * (x0 + x1); }
  double cy() const { return 0.5 * (y0 + y1); }
};

class CellAddress {
 public:
  CellAddress() = default;

  explicit CellAddress(std::vector<std::uint8_t> digits) : digits_(std::move(digits)) {
    if (digits_.empty()) throw ConfigError("cell address must have at least one digit");
    for (auto d : digits_)
      if (d > 7) throw ConfigError("cell address digit out of range 0..7");
  }

  static CellAddress parse(std::string_view text) {
    std::vector<std::uint8_t> digits;
    digits.reserve(text.size());
    for (char c : text) {
      if (c < '0' || c > '7')
        throw ConfigError("invalid cell address '" + std::string(text) + "'");
      digits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return CellAddress(std::move(digits));
  }

  static CellAddress from_index(std::size_t index, int level) {
    if (level < 1) throw ConfigError("level must be >= 1");
    if (index >= ipow(8, level)) throw ConfigError("cell index out of range");
    std::vector<std::uint8_t> digits(static_cast<std::size_t>(level));
    for (int i = level - 1; i >= 0; --i) {
      digits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(index % 8);
      index /= 8;
    }
    return CellAddress(std::move(digits));
  }

  int level() const { return static_cast<int>(digits_.size()); }
  std::span<const std::uint8_t> digits() const { return digits_; }

  std::size_t index() const {
    std::size_t i = 0;
    for (auto d : digits_) i = i * 8 + d;
    return i;
  }

  std::string str() const {
    std::string s;
    s.reserve(digits_.size());
    for (auto d : digits_) s.push_back(static_cast<char>('0' + d));
    return s;
  }

  GridPos grid_position() const {
    GridPos p;
    for (auto d : digits_) {
      p.col = p.col * 3 + kDigitOffset[d][0];
      p.row = p.row * 3 + kDigitOffset[d][1];
    }
    return p;
  }

  Rect rect() const {
    const auto p = grid_position();
    const double h = 1.0 / static_cast<double>(ipow(3, level()));
    return {p.col * h, 1.0 - (p.row + 1) * h, (p.col + 1) * h, 1.0 - p.row * h};
  }

  auto operator<=>(const CellAddress&) const = default;

 private:
  std::vector<std::uint8_t> digits_;
};

/// Element of the dihedral group D4 acting on the unit square, realized as the
/// digit map d -> shift + sign * d (mod 8). Rotations have sign +1 (a quarter
/// turn clockwise is shift 2); reflections have sign -1.
class Symmetry {
 public:
  constexpr Symmetry() = default;

  static constexpr Symmetry identity() { return {}; }
  static constexpr Symmetry rotation(int quarter_turns_clockwise) {
    return Symmetry(+1, 2 * quarter_turns_clockwise);
  }
  /// x -> 1 - x (mirror about the vertical midline).
  static constexpr Symmetry reflect_horizontal() { return Symmetry(-1, 2); }
  /// y -> 1 - y (mirror about the horizontal midline).
  static constexpr Symmetry reflect_vertical() { return Symmetry(-1, 6); }
  /// Mirror about the diagonal through the top-left and bottom-right corners.
  static constexpr Symmetry reflect_main_diagonal() { return Symmetry(-1, 0); }
  /// Mirror about the diagonal through the top-right and bottom-left corners.
  static constexpr Symmetry reflect_anti_diagonal() { return Symmetry(-1, 4); }

  static constexpr std::array<Symmetry, 8> all() {
    return {rotation(0),           rotation(1),          rotation(2),
            rotation(3),           reflect_horizontal(), reflect_vertical(),
            reflect_main_diagonal(), reflect_anti_diagonal()};
  }

  constexpr int apply_digit(int d) const { return ((shift_ + sign_ * d) % 8 + 8) % 8; }

  /// (*this) after `inner`: x -> this(inner(x)).
  constexpr Symmetry compose(const Symmetry& inner) const {
    return Symmetry(sign_ * inner.sign_, shift_ + sign_ * inner.shift_);
  }

  constexpr bool is_reflection() const { return sign_ < 0; }

  CellAddress apply(const CellAddress& a) const {
    std::vector<std::uint8_t> out(a.digits().begin(), a.digits().end());
    for (auto& d : out) d = static_cast<std::uint8_t>(apply_digit(d));
    return CellAddress(std::move(out));
  }

  std::size_t apply_index(std::size_t index, int level) const {
    std::size_t out = 0;
    std::size_t place = 1;
    for (int i = 0; i < level; ++i) {
      out += place * static_cast<std::size_t>(apply_digit(static_cast<int>(index % 8)));
      index /= 8;
      place *= 8;
    }
    return out;
  }

  std::string name() const {
    if (sign_ > 0) return "rot" + std::to_string(90 * (shift_ / 2));
    switch (shift_) {
      case 0: return "diag";
      case 2: return "horiz";
      case 4: return "antidiag";
      default: return "vert";
    }
  }

  constexpr bool operator==(const Symmetry&) const = default;

 private:
  constexpr Symmetry(int sign, int shift) : sign_(sign), shift_(((shift % 8) + 8) % 8) {}

  int sign_ = 1;
  int shift_ = 0;
};

/// Reflection of a boundary cell across the outer boundary line.
struct VirtualCell {
  std::size_t owner = 0;
  Side side = Side::top;
  /// Position along the side: column for top/bottom, row for left/right.
  std::size_t position = 0;
  /// Edge-parameter interval [t0, t1] of the shared boundary segment. The edge
  /// parameter runs left-to-right on top/bottom and top-to-bottom on left/right.
  double t0 = 0.0;
  double t1 = 0.0;
};

enum class LineDirection { horizontal, vertical, half_diagonal };

struct LinePoint {
  std::size_t cell;
  double arc;  ///< arc-length coordinate of the cell center
};
using LineRun = std::vector<LinePoint>;

class CarpetGraph {
 public:
  int level() const { return level_; }
  std::size_t size() const { return positions_.size(); }
  std::size_t side_cells() const { return side_; }
  std::size_t num_virtual() const { return virtuals_.size(); }

  CellAddress address(std::size_t cell) const {
    check_cell(cell);
    return CellAddress::from_index(cell, level_);
  }

  std::size_t index_of(const CellAddress& a) const {
    if (a.level() != level_)
      throw ConfigError("address '" + a.str() + "' does not belong to level " +
                        std::to_string(level_));
    return a.index();
  }
  std::size_t index_of(std::string_view address) const {
    return index_of(CellAddress::parse(address));
  }

  GridPos position(std::size_t cell) const {
    check_cell(cell);
    return positions_[cell];
  }

  Rect rect(std::size_t cell) const {
    const auto p = position(cell);
    const double h = cell_size();
    return {p.col * h, 1.0 - (p.row + 1) * h, (p.col + 1) * h, 1.0 - p.row * h};
  }

  double cell_size() const { return 1.0 / static_cast<double>(side_); }

  /// Cell at grid position, or nullopt for holes and out-of-square positions.
  std::optional<std::size_t> cell_at(long col, long row) const {
    const long n = static_cast<long>(side_);
    if (col < 0 || row < 0 || col >= n || row >= n) return std::nullopt;
    const auto v = grid_[static_cast<std::size_t>(row) * side_ + static_cast<std::size_t>(col)];
    if (v < 0) return std::nullopt;
    return static_cast<std::size_t>(v);
  }

  std::span<const std::uint32_t> neighbors(std::size_t cell) const {
    check_cell(cell);
    return {adjacency_.data() + offsets_[cell], adjacency_.data() + offsets_[cell + 1]};
  }
  std::size_t degree(std::size_t cell) const { return neighbors(cell).size(); }

  /// Undirected edges (a < b), sorted.
  std::span<const std::pair<std::uint32_t, std::uint32_t>> edges() const { return edges_; }

  /// Virtual cells ordered by side (top, right, bottom, left) then position.
  std::span<const VirtualCell> virtual_cells() const { return virtuals_; }

  std::size_t virtual_index(Side side, std::size_t position) const {
    if (position >= side_) throw ConfigError("boundary position out of range");
    return static_cast<std::size_t>(side) * side_ + position;
  }

  /// Indices (into virtual_cells()) of the virtual cells owned by `cell`.
  std::vector<std::size_t> virtuals_of(std::size_t cell) const {
    check_cell(cell);
    std::vector<std::size_t> out;
    for (auto v : cell_virtuals_[cell])
      if (v >= 0) out.push_back(static_cast<std::size_t>(v));
    return out;
  }

  std::size_t boundary_cell(Side side, std::size_t position) const {
    return virtuals_[virtual_index(side, position)].owner;
  }

  std::size_t corner_cell(Corner c) const {
    const long last = static_cast<long>(side_) - 1;
    switch (c) {
      case Corner::top_left: return *cell_at(0, 0);
      case Corner::top_right: return *cell_at(last, 0);
      case Corner::bottom_right: return *cell_at(last, last);
      case Corner::bottom_left: return *cell_at(0, last);
    }
    return 0;
  }

  /// Index of the level-1 cell containing `cell` (its first address digit).
  std::size_t top_digit(std::size_t cell) const { return cell / ipow(8, level_ - 1); }

  /// perm[i] = index of g applied to cell i.
  std::vector<std::size_t> permutation(const Symmetry& g) const {
    std::vector<std::size_t> perm(size());
    for (std::size_t i = 0; i < size(); ++i) perm[i] = g.apply_index(i, level_);
    return perm;
  }

  void check_cell(std::size_t cell) const {
    if (cell >= positions_.size())
      throw ConfigError("cell index " + std::to_string(cell) + " not in level-" +
                        std::to_string(level_) + " graph");
  }

 private:
  friend CarpetGraph build_graph(int level, int max_level);

  int level_ = 0;
  std::size_t side_ = 0;
  std::vector<GridPos> positions_;
  std::vector<std::int32_t> grid_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> adjacency_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges_;
  std::vector<VirtualCell> virtuals_;
  std::vector<std::array<std::int64_t, 2>> cell_virtuals_;
};

/// Builds the level-m cell graph. Cells are adjacent iff their squares share a
/// full edge.
inline CarpetGraph build_graph(int level, int max_level = kMaxSupportedLevel) {
  if (level < 1 || level > max_level)
    throw ResourceError("level " + std::to_string(level) + " outside supported range 1.." +
                        std::to_string(max_level));
  CarpetGraph g;
  g.level_ = level;
  g.side_ = ipow(3, level);
  const std::size_t n = ipow(8, level);
  const std::size_t side = g.side_;

  g.positions_.resize(n);
  g.grid_.assign(side * side, -1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx = i;
    std::size_t place = 1;
    GridPos p;
    for (int k = 0; k < level; ++k) {
      const auto d = idx % 8;
      idx /= 8;
      p.col += static_cast<int>(place) * kDigitOffset[d][0];
      p.row += static_cast<int>(place) * kDigitOffset[d][1];
      place *= 3;
    }
    g.positions_[i] = p;
    g.grid_[static_cast<std::size_t>(p.row) * side + static_cast<std::size_t>(p.col)] =
        static_cast<std::int32_t>(i);
  }

  // Neighbors in sorted index order.
  g.offsets_.assign(n + 1, 0);
  g.adjacency_.reserve(4 * n);
  constexpr std::array<std::array<int, 2>, 4> steps = {{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};
  for (std::size_t i = 0; i < n; ++i) {
    std::array<std::uint32_t, 4> nb{};
    std::size_t count = 0;
    for (auto [dc, dr] : steps) {
      if (auto j = g.cell_at(g.positions_[i].col + dc, g.positions_[i].row + dr))
        nb[count++] = static_cast<std::uint32_t>(*j);
    }
    std::sort(nb.begin(), nb.begin() + static_cast<long>(count));
    for (std::size_t k = 0; k < count; ++k) {
      g.adjacency_.push_back(nb[k]);
      if (i < nb[k]) g.edges_.emplace_back(static_cast<std::uint32_t>(i), nb[k]);
    }
    g.offsets_[i + 1] = g.adjacency_.size();
  }
  std::sort(g.edges_.begin(), g.edges_.end());

  g.cell_virtuals_.assign(n, {-1, -1});
  g.virtuals_.reserve(4 * side);
  const double h = 1.0 / static_cast<double>(side);
  for (Side s : kSides) {
    for (std::size_t p = 0; p < side; ++p) {
      const long pl = static_cast<long>(p);
      const long last = static_cast<long>(side) - 1;
      std::optional<std::size_t> owner;
      switch (s) {
        case Side::top: owner = g.cell_at(pl, 0); break;
        case Side::right: owner = g.cell_at(last, pl); break;
        case Side::bottom: owner = g.cell_at(pl, last); break;
        case Side::left: owner = g.cell_at(0, pl); break;
      }
      if (!owner) throw Error("carpet boundary is not fully covered (internal)");
      VirtualCell vc{*owner, s, p, static_cast<double>(p) * h, static_cast<double>(p + 1) * h};
      auto& slots = g.cell_virtuals_[*owner];
      (slots[0] < 0 ? slots[0] : slots[1]) = static_cast<std::int64_t>(g.virtuals_.size());
      g.virtuals_.push_back(vc);
    }
  }
  return g;
}

/// Ordered runs of cells crossed by a grid line through `anchor`. Horizontal
/// and vertical lines span the whole square and split at holes; arc length is
/// measured from the left (horizontal) or top (vertical) edge. The
/// half-diagonal walks from the anchor toward the square's center along the
/// grid diagonal and stops at the first hole; its arc length is measured from
/// the anchor's center.
inline std::vector<LineRun> line_restriction(const CarpetGraph& g, std::size_t anchor,
                                             LineDirection dir) {
  const auto p = g.position(anchor);
  const double h = g.cell_size();
  const long n = static_cast<long>(g.side_cells());
  std::vector<LineRun> runs;
  LineRun current;
  auto flush = [&] {
    if (!current.empty()) runs.push_back(std::move(current));
    current.clear();
  };

  switch (dir) {
    case LineDirection::horizontal:
      for (long c = 0; c < n; ++c) {
        if (auto cell = g.cell_at(c, p.row))
          current.push_back({*cell, (static_cast<double>(c) + 0.5) * h});
        else
          flush();
      }
      flush();
      break;
    case LineDirection::vertical:
      for (long r = 0; r < n; ++r) {
        if (auto cell = g.cell_at(p.col, r))
          current.push_back({*cell, (static_cast<double>(r) + 0.5) * h});
        else
          flush();
      }
      flush();
      break;
    case LineDirection::half_diagonal: {
      const long half = n / 2;  // index of the central column/row
      const int dc = p.col <= half ? 1 : -1;
      const int dr = p.row <= half ? 1 : -1;
      long c = p.col;
      long r = p.row;
      std::size_t step = 0;
      while (c >= 0 && r >= 0 && c < n && r < n) {
        auto cell = g.cell_at(c, r);
        if (!cell) break;
        current.push_back({*cell, std::sqrt(2.0) * h * static_cast<double>(step)});
        if (c == half || r == half) break;
        c += dc;
        r += dr;
        ++step;
      }
      flush();
      break;
    }
  }
  if (runs.empty()) throw ConfigError("line restriction is empty");
  return runs;
}

/// Cells crossed by the straight segment from `from` to `to` (unit-square
/// coordinates, y up), ordered by arc length from `from` and split at holes.
/// The arc coordinate is the distance from `from` to the sample point that
/// first entered the cell's interior.
inline std::vector<LineRun> segment_restriction(const CarpetGraph& g, std::array<double, 2> from,
                                                std::array<double, 2> to) {
  const double len = std::hypot(to[0] - from[0], to[1] - from[1]);
  if (!(len > 0)) throw ConfigError("segment has zero length");
  const double n = static_cast<double>(g.side_cells());
  const auto samples = static_cast<std::size_t>(std::ceil(len * n * 16.0)) + 1;
  std::vector<LineRun> runs;
  LineRun current;
  long last_col = -1, last_row = -1;
  for (std::size_t s = 0; s <= samples; ++s) {
    const double u = static_cast<double>(s) / static_cast<double>(samples);
    const double x = from[0] + u * (to[0] - from[0]);
    const double y = from[1] + u * (to[1] - from[1]);
    const long col = std::clamp(static_cast<long>(std::floor(x * n)), 0L, static_cast<long>(n) - 1);
    const long row =
        std::clamp(static_cast<long>(std::floor((1.0 - y) * n)), 0L, static_cast<long>(n) - 1);
    if (col == last_col && row == last_row) continue;
    last_col = col;
    last_row = row;
    if (auto cell = g.cell_at(col, row)) {
      if (current.empty() || current.back().cell != *cell) current.push_back({*cell, u * len});
    } else if (!current.empty()) {
      runs.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) runs.push_back(std::move(current));
  if (runs.empty()) throw ConfigError("segment does not meet the carpet");
  return runs;
}

}  // namespace carpet
