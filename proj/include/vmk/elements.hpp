#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vmk/geom.hpp"

namespace vmk {

enum class MapClass : int {
  PedCrossing = 0,
  Divider = 1,
  Boundary = 2,
  LaneSegment = 3,
  RoadBoundaryArea = 4,
};

inline constexpr int kNumMapClasses = 5;

inline bool is_closed_class(MapClass c) { return c == MapClass::PedCrossing; }

inline const char* to_string(MapClass c) {
  switch (c) {
    case MapClass::PedCrossing: return "ped_crossing";
    case MapClass::Divider: return "divider";
    case MapClass::Boundary: return "boundary";
    case MapClass::LaneSegment: return "lane_segment";
    case MapClass::RoadBoundaryArea: return "road_boundary_area";
  }
  return "unknown";
}

inline MapClass map_class_from_string(const std::string& s) {
  if (s == "ped_crossing") return MapClass::PedCrossing;
  if (s == "divider") return MapClass::Divider;
  if (s == "boundary") return MapClass::Boundary;
  if (s == "lane_segment") return MapClass::LaneSegment;
  if (s == "road_boundary_area") return MapClass::RoadBoundaryArea;
  throw std::invalid_argument("unknown map class: " + s);
}

enum class BoundaryAttr : int { None = 0, Dashed = 1, Solid = 2 };

inline const char* to_string(BoundaryAttr a) {
  switch (a) {
    case BoundaryAttr::None: return "none";
    case BoundaryAttr::Dashed: return "dashed";
    case BoundaryAttr::Solid: return "solid";
  }
  return "unknown";
}

inline BoundaryAttr boundary_attr_from_string(const std::string& s) {
  if (s == "none") return BoundaryAttr::None;
  if (s == "dashed") return BoundaryAttr::Dashed;
  if (s == "solid") return BoundaryAttr::Solid;
  throw std::invalid_argument("unknown boundary attribute: " + s);
}

/// Centerline plus per-point offsets to the left/right lane boundaries and
/// one attribute label per side.
struct LaneSegment {
  Polyline centerline;  // open, canonical point count
  std::vector<double> left_offset;
  std::vector<double> right_offset;
  BoundaryAttr left_attr = BoundaryAttr::None;
  BoundaryAttr right_attr = BoundaryAttr::None;
};

/// One vectorized map element. Ped crossings are closed 20-point rings with
/// corners pinned at indices {0,5,10,15}; every other class is an open chain.
struct MapInstance {
  MapClass cls = MapClass::Divider;
  Polyline geometry;
  double score = 1.0;  // 1.0 for ground truth
  std::optional<std::array<int, 4>> corner_indices;
  std::optional<LaneSegment> lane;  // LaneSegment class only
};

inline constexpr std::size_t kPedCrossingPoints = 20;
inline constexpr std::array<int, 4> kPedCornerIndices = {0, 5, 10, 15};
inline constexpr std::size_t kOpenElementPoints = 10;

/// Reduces a closed polygon to its 4 dominant corners: iteratively removes
/// the vertex spanning the smallest XY triangle until 4 remain
/// (Visvalingam), falling back to the minimum-area bounding rectangle when
/// the input or the result is degenerate. Corners come back CCW starting
/// from the lexicographically smallest (x, then y).
inline std::array<Point3, 4> simplify_to_corners(const Polyline& polygon) {
  if (!polygon.closed) throw std::invalid_argument("simplify_to_corners: polygon must be closed");
  if (polygon.points.size() < 3)
    throw std::invalid_argument("simplify_to_corners: need >= 3 vertices");

  auto tri_area = [](const Point3& a, const Point3& b, const Point3& c) {
    return 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
  };

  std::array<Point3, 4> corners;
  bool ok = polygon.points.size() >= 4;
  if (ok) {
    std::vector<Point3> pts = polygon.points;
    while (pts.size() > 4) {
      std::size_t victim = 0;
      double best = std::numeric_limits<double>::infinity();
      const std::size_t n = pts.size();
      for (std::size_t i = 0; i < n; ++i) {
        const double a = tri_area(pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
        if (a < best) {
          best = a;
          victim = i;
        }
      }
      pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(victim));
    }
    corners = {pts[0], pts[1], pts[2], pts[3]};
    const double area = std::abs(polygon_area_xy(pts));
    ok = area > 1e-12;
  }
  if (!ok) {
    corners = min_area_rect_xy(polygon.points);
  }

  std::vector<Point3> ring(corners.begin(), corners.end());
  if (polygon_area_xy(ring) < 0.0) {
    std::reverse(ring.begin(), ring.end());
  }
  std::size_t start = 0;
  for (std::size_t i = 1; i < 4; ++i) {
    if (ring[i].x < ring[start].x || (ring[i].x == ring[start].x && ring[i].y < ring[start].y)) {
      start = i;
    }
  }
  for (std::size_t i = 0; i < 4; ++i) corners[i] = ring[(start + i) % 4];
  return corners;
}

/// 6 evenly spaced points per edge including both endpoints, shared corners
/// deduplicated: 4 x (6-1) = 20 points, corners at {0,5,10,15}.
inline MapInstance resample_ped_crossing(const std::array<Point3, 4>& corners) {
  std::vector<Point3> ring(corners.begin(), corners.end());
  const double area = std::abs(polygon_area_xy(ring));
  double min_edge = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) min_edge = std::min(min_edge, distance(corners[static_cast<std::size_t>(i)], corners[static_cast<std::size_t>((i + 1) % 4)]));
  if (area <= 1e-12 || min_edge <= 1e-12)
    throw degenerate_geometry_error("resample_ped_crossing: zero-area corner set");

  MapInstance inst;
  inst.cls = MapClass::PedCrossing;
  inst.geometry.closed = true;
  inst.geometry.points.reserve(kPedCrossingPoints);
  for (int e = 0; e < 4; ++e) {
    const Point3& a = corners[static_cast<std::size_t>(e)];
    const Point3& b = corners[static_cast<std::size_t>((e + 1) % 4)];
    for (int j = 0; j < 5; ++j) {
      inst.geometry.points.push_back(lerp(a, b, static_cast<double>(j) / 5.0));
    }
  }
  inst.corner_indices = kPedCornerIndices;
  inst.score = 1.0;
  return inst;
}

using Permutation = std::vector<int>;

/// The 8 point orderings equivalent for a canonical ped crossing: start
/// corner in {0,5,10,15} x direction in {forward, reverse}. The forward
/// ordering from corner 0 is the identity.
inline std::vector<Permutation> ped_permutations(const MapInstance& inst) {
  if (inst.cls != MapClass::PedCrossing || inst.geometry.points.size() != kPedCrossingPoints ||
      !inst.corner_indices || *inst.corner_indices != kPedCornerIndices) {
    throw std::invalid_argument("ped_permutations: not a canonical ped-crossing instance");
  }
  const int n = static_cast<int>(kPedCrossingPoints);
  std::vector<Permutation> perms;
  perms.reserve(8);
  for (int corner : kPedCornerIndices) {
    Permutation fwd(static_cast<std::size_t>(n)), rev(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      fwd[static_cast<std::size_t>(j)] = (corner + j) % n;
      rev[static_cast<std::size_t>(j)] = ((corner - j) % n + n) % n;
    }
    perms.push_back(std::move(fwd));
    perms.push_back(std::move(rev));
  }
  return perms;
}

/// Open elements admit exactly two orderings: identity and full reversal.
inline std::vector<Permutation> generic_permutations(const MapInstance& inst) {
  const int n = static_cast<int>(inst.geometry.points.size());
  Permutation fwd(static_cast<std::size_t>(n)), rev(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    fwd[static_cast<std::size_t>(j)] = j;
    rev[static_cast<std::size_t>(j)] = n - 1 - j;
  }
  return {fwd, rev};
}

inline std::vector<Permutation> equivalent_permutations(const MapInstance& inst) {
  return inst.cls == MapClass::PedCrossing ? ped_permutations(inst) : generic_permutations(inst);
}

/// Left/right boundary polylines from per-point offsets along the unit left
/// normal of the local XY tangent. Z is copied from the centerline.
inline std::pair<Polyline, Polyline> lane_boundaries(const LaneSegment& seg) {
  const auto& pts = seg.centerline.points;
  const std::size_t n = pts.size();
  if (n < 2) throw std::invalid_argument("lane_boundaries: centerline needs >= 2 points");
  if (seg.left_offset.size() != n || seg.right_offset.size() != n)
    throw std::invalid_argument("lane_boundaries: offset arrays must match point count");

  // Central-difference tangents, one-sided at the ends; a zero tangent
  // borrows the nearest nonzero neighbor.
  std::vector<Point3> tangents(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point3& a = pts[i == 0 ? 0 : i - 1];
    const Point3& b = pts[i + 1 < n ? i + 1 : n - 1];
    tangents[i] = b - a;
  }
  auto xy_norm = [](const Point3& p) { return std::hypot(p.x, p.y); };
  bool any = false;
  for (const auto& t : tangents) any = any || xy_norm(t) > 1e-12;
  if (!any) throw degenerate_geometry_error("lane_boundaries: fully degenerate centerline");
  for (std::size_t i = 0; i < n; ++i) {
    if (xy_norm(tangents[i]) <= 1e-12) {
      for (std::size_t d = 1; d < n; ++d) {
        if (i >= d && xy_norm(tangents[i - d]) > 1e-12) {
          tangents[i] = tangents[i - d];
          break;
        }
        if (i + d < n && xy_norm(tangents[i + d]) > 1e-12) {
          tangents[i] = tangents[i + d];
          break;
        }
      }
    }
  }

  Polyline left, right;
  left.points.resize(n);
  right.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double len = xy_norm(tangents[i]);
    const double nx = -tangents[i].y / len;
    const double ny = tangents[i].x / len;
    left.points[i] = {pts[i].x + seg.left_offset[i] * nx, pts[i].y + seg.left_offset[i] * ny,
                      pts[i].z};
    right.points[i] = {pts[i].x - seg.right_offset[i] * nx, pts[i].y - seg.right_offset[i] * ny,
                       pts[i].z};
  }
  return {left, right};
}

}  // namespace vmk
