#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "vmk/common.hpp"
#include "vmk/elements.hpp"
#include "vmk/losses.hpp"

using namespace vmk;

namespace {

Polyline closed_poly(std::vector<Point3> pts) {
  Polyline p;
  p.points = std::move(pts);
  p.closed = true;
  return p;
}

std::array<Point3, 4> rect_corners(double w, double h) {
  return {{{0, 0, 0}, {w, 0, 0}, {w, h, 0}, {0, h, 0}}};
}

/// Densifies arectangle outline with extra collinear points per edge.
Polyline densified_rect(const std::array<Point3, 4>& corners, int per_edge) {
  Polyline p;
  p.closed = true;
  for (int e = 0; e < 4; ++e) {
    const Point3& a = corners[static_cast<std::size_t>(e)];
    const Point3& b = corners[static_cast<std::size_t>((e + 1) % 4)];
    for (int j = 0; j < per_edge; ++j)
      p.points.push_back(lerp(a, b, static_cast<double>(j) / per_edge));
  }
  return p;
}

bool near(const Point3& a, const Point3& b, double tol) { return distance(a, b) <= tol; }

}  // namespace

TEST_CASE("simplify_to_corners keeps an exact rectangle") {
  const auto corners = rect_corners(3, 1);
  const auto got = simplify_to_corners(closed_poly({corners[0], corners[1], corners[2], corners[3]}));
  for (int i = 0; i < 4; ++i) CHECK(near(got[static_cast<std::size_t>(i)], corners[static_cast<std::size_t>(i)], 1e-12));
}

TEST_CASE("simplify_to_corners drops collinear midpoints") {
  const auto corners = rect_corners(4, 2);
  const auto got = simplify_to_corners(densified_rect(corners, 2));  // 8 vertices
  for (int i = 0; i < 4; ++i) {
    bool found = false;
    for (int k = 0; k < 4; ++k)
      found = found || near(got[static_cast<std::size_t>(k)], corners[static_cast<std::size_t>(i)], 1e-12);
    CHECK(found);
  }
}

TEST_CASE("simplify_to_corners survives 2 cm jitter on 12 vertices") {
  Rng rng(51);
  for (int trial = 0; trial < 25; ++trial) {
    const auto corners = rect_corners(3 + rng.uniform(0, 2), 1 + rng.uniform(0, 2));
    Polyline noisy = densified_rect(corners, 3);  // 12 vertices
    for (Point3& p : noisy.points) {
      p.x += rng.uniform(-0.02, 0.02);
      p.y += rng.uniform(-0.02, 0.02);
    }
    const auto got = simplify_to_corners(noisy);
    for (const Point3& g : got) {
      double best = 1e9;
      for (const Point3& c : corners) best = std::min(best, distance(g, c));
      CHECK(best < 0.10);
    }
  }
}

TEST_CASE("simplify_to_corners needs at least 3 vertices") {
  Polyline p = closed_poly({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}});
  CHECK_NOTHROW(simplify_to_corners(p));
  p.points.pop_back();
  CHECK_THROWS_AS(simplify_to_corners(p), std::invalid_argument);
}

TEST_CASE("resample_ped_crossing yields the canonical 20-point ring") {
  const MapInstance inst = resample_ped_crossing(rect_corners(1, 1));
  REQUIRE(inst.geometry.points.size() == kPedCrossingPoints);
  CHECK(inst.geometry.closed);
  CHECK(inst.cls == MapClass::PedCrossing);
  REQUIRE(inst.corner_indices.has_value());
  CHECK(*inst.corner_indices == kPedCornerIndices);
  for (int j = 1; j <= 4; ++j) {
    CHECK(inst.geometry.points[static_cast<std::size_t>(j)].x ==
          doctest::Approx(0.2 * j).epsilon(1e-12));
    CHECK(inst.geometry.points[static_cast<std::size_t>(j)].y == 0.0);
  }
}

TEST_CASE("resample_ped_crossing spacing follows edge lengths") {
  const MapInstance inst = resample_ped_crossing(rect_corners(3, 1));
  const auto& pts = inst.geometry.points;
  for (int j = 0; j < 5; ++j) {
    CHECK(distance(pts[static_cast<std::size_t>(j)], pts[static_cast<std::size_t>(j + 1)]) ==
          doctest::Approx(0.6).epsilon(1e-9));  // long edge
    CHECK(distance(pts[static_cast<std::size_t>(5 + j)], pts[static_cast<std::size_t>(6 + j)]) ==
          doctest::Approx(0.2).epsilon(1e-9));  // short edge
  }
}

TEST_CASE("resample_ped_crossing preserves orientation and rejects degenerate corners") {
  const MapInstance ccw = resample_ped_crossing(rect_corners(2, 1));
  CHECK(polygon_area_xy(ccw.geometry.points) > 0);

  const std::array<Point3, 4> cw = {{{0, 0, 0}, {0, 1, 0}, {2, 1, 0}, {2, 0, 0}}};
  CHECK(polygon_area_xy(resample_ped_crossing(cw).geometry.points) < 0);

  const std::array<Point3, 4> flat = {{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}}};
  CHECK_THROWS_AS(resample_ped_crossing(flat), degenerate_geometry_error);
}

TEST_CASE("ped_permutations: exactly 8, identity first corner, closed under reversal") {
  const MapInstance inst = resample_ped_crossing(rect_corners(2, 1));
  const auto perms = ped_permutations(inst);
  REQUIRE(perms.size() == 8);

  bool has_identity = false;
  for (const auto& perm : perms) {
    REQUIRE(perm.size() == 20);
    std::set<int> seen(perm.begin(), perm.end());
    CHECK(seen.size() == 20);  // a true permutation
    CHECK(*std::min_element(perm.begin(), perm.end()) == 0);
    bool starts_at_corner = false;
    for (int c : kPedCornerIndices) starts_at_corner = starts_at_corner || perm[0] == c;
    CHECK(starts_at_corner);
    bool identity = true;
    for (int j = 0; j < 20; ++j) identity = identity && perm[static_cast<std::size_t>(j)] == j;
    has_identity = has_identity || identity;
  }
  CHECK(has_identity);

  // closed under reversal: reversing the traversal of any member is a member
  std::set<std::vector<int>> unique(perms.begin(), perms.end());
  CHECK(unique.size() == 8);
  for (const auto& perm : perms) {
    std::vector<int> rev(20);
    for (int j = 0; j < 20; ++j) rev[static_cast<std::size_t>(j)] = perm[static_cast<std::size_t>((20 - j) % 20)];
    CHECK(unique.count(rev) == 1);
  }
}

TEST_CASE("ped_permutations preserve the cyclic point set") {
  const MapInstance inst = resample_ped_crossing(rect_corners(3, 1));
  std::set<std::array<double, 3>> original;
  for (const Point3& p : inst.geometry.points) original.insert({p.x, p.y, p.z});
  for (const auto& perm : ped_permutations(inst)) {
    std::set<std::array<double, 3>> permuted;
    for (int idx : perm) {
      const Point3& p = inst.geometry.points[static_cast<std::size_t>(idx)];
      permuted.insert({p.x, p.y, p.z});
    }
    CHECK(permuted == original);
  }
}

TEST_CASE("ped_permutations reject non-canonical input") {
  MapInstance inst = resample_ped_crossing(rect_corners(1, 1));
  inst.geometry.points.pop_back();
  CHECK_THROWS_AS(ped_permutations(inst), std::invalid_argument);
  MapInstance divider;
  divider.cls = MapClass::Divider;
  divider.geometry.points = {{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(ped_permutations(divider), std::invalid_argument);
}

TEST_CASE("generic_permutations: identity and reversal") {
  MapInstance divider;
  divider.cls = MapClass::Divider;
  for (int i = 0; i < 10; ++i) divider.geometry.points.push_back({static_cast<double>(i), 0, 0});
  const auto perms = generic_permutations(divider);
  REQUIRE(perms.size() == 2);
  for (int j = 0; j < 10; ++j) {
    CHECK(perms[0][static_cast<std::size_t>(j)] == j);
    CHECK(perms[1][static_cast<std::size_t>(j)] == 9 - j);
  }
  // reverse twice = identity
  std::vector<int> twice(10);
  for (int j = 0; j < 10; ++j) twice[static_cast<std::size_t>(j)] = perms[1][static_cast<std::size_t>(perms[1][static_cast<std::size_t>(j)])];
  CHECK(twice == perms[0]);
}

TEST_CASE("self point2point loss is zero under equivalent orderings") {
  MapInstance divider;
  divider.cls = MapClass::Divider;
  Rng rng(52);
  for (int i = 0; i < 10; ++i)
    divider.geometry.points.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1)});
  MapInstance reversed = divider;
  std::reverse(reversed.geometry.points.begin(), reversed.geometry.points.end());
  CHECK(point2point_loss(reversed, divider).first < 1e-12);
  CHECK(point2point_loss(divider, divider).first == 0.0);
}

TEST_CASE("lane_boundaries on a straight segment") {
  LaneSegment seg;
  for (int i = 0; i < 10; ++i) {
    seg.centerline.points.push_back({static_cast<double>(i), 0, 0.25});
    seg.left_offset.push_back(1.75);
    seg.right_offset.push_back(1.75);
  }
  const auto [left, right] = lane_boundaries(seg);
  REQUIRE(left.points.size() == 10);
  REQUIRE(right.points.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(left.points[static_cast<std::size_t>(i)].y == doctest::Approx(1.75).epsilon(1e-12));
    CHECK(right.points[static_cast<std::size_t>(i)].y == doctest::Approx(-1.75).epsilon(1e-12));
    CHECK(left.points[static_cast<std::size_t>(i)].z == 0.25);
  }
}

TEST_CASE("lane_boundaries with zero offsets collapse onto the centerline") {
  LaneSegment seg;
  for (int i = 0; i < 5; ++i) {
    seg.centerline.points.push_back({static_cast<double>(i), std::sin(i * 0.3), 0});
    seg.left_offset.push_back(0.0);
    seg.right_offset.push_back(0.0);
  }
  const auto [left, right] = lane_boundaries(seg);
  for (int i = 0; i < 5; ++i) {
    CHECK(near(left.points[static_cast<std::size_t>(i)], seg.centerline.points[static_cast<std::size_t>(i)], 1e-12));
    CHECK(near(right.points[static_cast<std::size_t>(i)], seg.centerline.points[static_cast<std::size_t>(i)], 1e-12));
  }
}

TEST_CASE("lane_boundaries radii on a quarter-circle arc") {
  LaneSegment seg;
  const double radius = 10.0;
  const int n = 20;
  for (int i = 0; i < n; ++i) {
    const double a = 0.5 * M_PI * i / (n - 1);
    seg.centerline.points.push_back({radius * std::cos(a), radius * std::sin(a), 0});
    seg.left_offset.push_back(1.5);
    seg.right_offset.push_back(1.5);
  }
  const auto [left, right] = lane_boundaries(seg);
  // CCW arc: left normal points inward (toward the circle center).
  for (int i = 1; i + 1 < n; ++i) {
    const double rl = norm(left.points[static_cast<std::size_t>(i)]);
    const double rr = norm(right.points[static_cast<std::size_t>(i)]);
    CHECK(rl == doctest::Approx(radius - 1.5).epsilon(2e-3));
    CHECK(rr == doctest::Approx(radius + 1.5).epsilon(2e-3));
  }
}

TEST_CASE("lane_boundaries left side sign property") {
  Rng rng(53);
  LaneSegment seg;
  for (int i = 0; i < 10; ++i) {
    seg.centerline.points.push_back({i * 2.0, rng.uniform(-3, 3), rng.uniform(-0.5, 0.5)});
    seg.left_offset.push_back(rng.uniform(0.5, 2.5));
    seg.right_offset.push_back(rng.uniform(0.5, 2.5));
  }
  const auto [left, right] = lane_boundaries(seg);
  for (std::size_t i = 0; i + 1 < seg.centerline.points.size(); ++i) {
    const Point3 tangent = seg.centerline.points[i + 1] - seg.centerline.points[i];
    const Point3 to_left = left.points[i] - seg.centerline.points[i];
    CHECK(tangent.x * to_left.y - tangent.y * to_left.x > 0);
  }
}

TEST_CASE("lane_boundaries reject a fully degenerate centerline") {
  LaneSegment seg;
  for (int i = 0; i < 4; ++i) {
    seg.centerline.points.push_back({1, 1, 1});
    seg.left_offset.push_back(1);
    seg.right_offset.push_back(1);
  }
  CHECK_THROWS_AS(lane_boundaries(seg), degenerate_geometry_error);
}
