#pragma once

// Uniform Cartesian mesh over [-1,1]^2, tissue regions, and the source cap U(x).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "m1rt/errors.hpp"

namespace m1rt {

inline constexpr double kDomainMin = -1.0;
inline constexpr double kDomainMax = 1.0;

struct Grid {
  int nx = 0;
  int ny = 0;
  double dx = 0.0;
  double dy = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
  }
  double xc(int i) const { return kDomainMin + (i + 0.5) * dx; }
  double yc(int j) const { return kDomainMin + (j + 0.5) * dy; }
  double cell_area() const { return dx * dy; }
  double min_width() const { return std::min(dx, dy); }

  friend bool operator==(const Grid&, const Grid&) = default;
};

inline Grid build_grid(int nx, int ny) {
  require(nx >= 2 && ny >= 2, "grid: nx and ny must be >= 2 (got " + std::to_string(nx) + ", " +
                                  std::to_string(ny) + ")");
  const double width = kDomainMax - kDomainMin;
  return Grid{nx, ny, width / nx, width / ny};
}

// ---------------------------------------------------------------------------
// Regions

enum class Region : std::uint8_t { Tumor = 0, Risk = 1, Normal = 2 };
enum class TargetCase { Basic, Intermediate, Complex };

inline std::string_view to_string(TargetCase c) {
  switch (c) {
    case TargetCase::Basic: return "basic";
    case TargetCase::Intermediate: return "intermediate";
    case TargetCase::Complex: return "complex";
  }
  return "?";
}

inline TargetCase parse_target_case(std::string_view s) {
  if (s == "basic") return TargetCase::Basic;
  if (s == "intermediate") return TargetCase::Intermediate;
  if (s == "complex") return TargetCase::Complex;
  throw ValidationError("target: expected basic|intermediate|complex, got '" + std::string(s) + "'");
}

// Closed axis-aligned rectangle.
struct Rect {
  double x0, x1, y0, y1;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  double area() const { return (x1 - x0) * (y1 - y0); }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct TargetGeometry {
  std::vector<Rect> tumor;
  std::vector<Rect> risk;

  static TargetGeometry preset(TargetCase c) {
    switch (c) {
      case TargetCase::Basic:
        return {{{-0.25, 0.25, -0.25, 0.25}}, {{0.254, 0.379, -0.125, 0.125}}};
      case TargetCase::Intermediate:
        return {{{-0.25, 0.25, -0.25, 0.0}, {-0.25, 0.0, 0.0, 0.25}}, {{0.04, 0.25, 0.04, 0.25}}};
      case TargetCase::Complex:
        return {{{-0.25, 0.25, -0.25, -0.125}, {-0.25, 0.25, 0.125, 0.25}, {0.04, 0.25, -0.125, 0.125}},
                {{-0.25, -0.04, -0.121, 0.121}}};
    }
    return {};
  }
};

inline constexpr double kVoidInner = 0.8;
inline constexpr double kVoidOuter = 0.9;

// Tissue label per cell plus an independent void flag. Materials read the flag,
// objective weights read the label.
struct RegionMap {
  std::vector<Region> label;
  std::vector<std::uint8_t> is_void;

  std::size_t size() const { return label.size(); }
  std::size_t count(Region r) const { return static_cast<std::size_t>(std::count(label.begin(), label.end(), r)); }
  std::size_t void_count() const {
    return static_cast<std::size_t>(std::count(is_void.begin(), is_void.end(), std::uint8_t{1}));
  }
  friend bool operator==(const RegionMap&, const RegionMap&) = default;
};

inline bool in_void_annulus(double x, double y) {
  const double r = std::hypot(x, y);
  return r >= kVoidInner && r <= kVoidOuter;
}

inline RegionMap classify_regions(const Grid& grid, const TargetGeometry& geom) {
  RegionMap map;
  map.label.resize(grid.size(), Region::Normal);
  map.is_void.resize(grid.size(), 0);
  auto inside = [](const std::vector<Rect>& rects, double x, double y) {
    return std::any_of(rects.begin(), rects.end(), [&](const Rect& r) { return r.contains(x, y); });
  };
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double x = grid.xc(i);
      const double y = grid.yc(j);
      const auto c = grid.index(i, j);
      // tumor wins over risk if rectangles ever overlap
      if (inside(geom.tumor, x, y)) {
        map.label[c] = Region::Tumor;
      } else if (inside(geom.risk, x, y)) {
        map.label[c] = Region::Risk;
      }
      map.is_void[c] = in_void_annulus(x, y) ? 1 : 0;
    }
  }
  return map;
}

inline RegionMap classify_regions(const Grid& grid, TargetCase c) {
  return classify_regions(grid, TargetGeometry::preset(c));
}

// ---------------------------------------------------------------------------
// Source cap U(x)

enum class Edge : std::uint8_t { Left = 1, Right = 2, Bottom = 4, Top = 8 };

class EdgeSet {
public:
  constexpr EdgeSet() = default;
  constexpr EdgeSet(std::initializer_list<Edge> edges) {
    for (Edge e : edges) bits_ |= static_cast<std::uint8_t>(e);
  }
  constexpr bool contains(Edge e) const { return (bits_ & static_cast<std::uint8_t>(e)) != 0; }
  constexpr void insert(Edge e) { bits_ |= static_cast<std::uint8_t>(e); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool all() const { return bits_ == 0x0F; }
  constexpr std::uint8_t bits() const { return bits_; }
  friend constexpr bool operator==(EdgeSet, EdgeSet) = default;

private:
  std::uint8_t bits_ = 0;
};

inline constexpr Edge kAllEdges[] = {Edge::Left, Edge::Right, Edge::Bottom, Edge::Top};

inline std::string_view to_string(Edge e) {
  switch (e) {
    case Edge::Left: return "left";
    case Edge::Right: return "right";
    case Edge::Bottom: return "bottom";
    case Edge::Top: return "top";
  }
  return "?";
}

inline Edge parse_edge(std::string_view s) {
  for (Edge e : kAllEdges)
    if (to_string(e) == s) return e;
  throw ValidationError("blocked edge: expected left|right|bottom|top, got '" + std::string(s) + "'");
}

// Distance from the center of cell (i,j) to the given domain edge.
inline double edge_distance(const Grid& grid, int i, int j, Edge e) {
  switch (e) {
    case Edge::Left: return (i + 0.5) * grid.dx;
    case Edge::Right: return (grid.nx - i - 0.5) * grid.dx;
    case Edge::Bottom: return (j + 0.5) * grid.dy;
    case Edge::Top: return (grid.ny - j - 0.5) * grid.dy;
  }
  return 0.0;
}

struct SourceCapField {
  std::vector<double> cap;
  double q_max = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  EdgeSet blocked;
  // 1 for cells inside the eps-strip of a blocked edge
  std::vector<std::uint8_t> blocked_strip;
};

inline double default_eps(const Grid& grid) { return grid.min_width(); }
inline double default_delta(const Grid& grid) { return 1e-4 * grid.min_width(); }

// U = q_max within eps of an unblocked edge, delta elsewhere. A cell within eps
// of a blocked edge gets delta even if it also touches an unblocked edge (corners).
inline SourceCapField source_cap(const Grid& grid, double q_max, double eps, double delta, EdgeSet blocked) {
  require(delta > 0.0, "source cap: delta must be > 0");
  require(q_max > delta, "source cap: q_max must exceed delta");
  require(eps > 0.0, "source cap: eps must be > 0");
  require(!blocked.all(), "source cap: all four edges blocked leaves no active boundary");

  SourceCapField f;
  f.q_max = q_max;
  f.eps = eps;
  f.delta = delta;
  f.blocked = blocked;
  f.cap.assign(grid.size(), delta);
  f.blocked_strip.assign(grid.size(), 0);
  // half-ulp slack so that eps == min(dx,dy) catches the boundary ring exactly
  const double reach = eps * (1.0 + 1e-12);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      bool near_open = false;
      bool near_blocked = false;
      for (Edge e : kAllEdges) {
        if (edge_distance(grid, i, j, e) > reach) continue;
        (blocked.contains(e) ? near_blocked : near_open) = true;
      }
      const auto c = grid.index(i, j);
      f.blocked_strip[c] = near_blocked ? 1 : 0;
      if (near_open && !near_blocked) f.cap[c] = q_max;
    }
  }
  return f;
}

}  // namespace m1rt
