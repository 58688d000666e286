#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "vmk/common.hpp"

namespace vmk {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Point3& o) const = default;
};

inline double dot(const Point3& a, const Point3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Point3 cross(const Point3& a, const Point3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Point3& p) { return std::sqrt(dot(p, p)); }

/// Sum of absolute coordinate differences (L1 norm of p).
inline double norm1(const Point3& p) {
  return std::abs(p.x) + std::abs(p.y) + std::abs(p.z);
}

inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

inline Point3 lerp(const Point3& a, const Point3& b, double t) {
  return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, a.z + (b.z - a.z) * t};
}

/// Ordered vertex chain. Closure is a flag: a closed polyline never stores
/// its first vertex twice, the wrap-around segment is implicit.
struct Polyline {
  std::vector<Point3> points;
  bool closed = false;

  std::size_t size() const { return points.size(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }
  Point3& operator[](std::size_t i) { return points[i]; }
};

inline void validate(const Polyline& p) {
  if (p.points.size() < 2) throw std::invalid_argument("polyline needs >= 2 points");
  for (const auto& pt : p.points) {
    if (!is_finite(pt)) throw std::invalid_argument("polyline has non-finite point");
  }
  if (p.closed && p.points.front() == p.points.back() && p.points.size() > 2) {
    throw std::invalid_argument("closed polyline must not duplicate its first vertex");
  }
}

/// Rigid transform: x' = R x + t. Stored row-major.
struct SE3Pose {
  std::array<std::array<double, 3>, 3> r{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Point3 t{0, 0, 0};

  static SE3Pose identity() { return SE3Pose{}; }

  static SE3Pose from_yaw(double yaw, double x = 0, double y = 0, double z = 0) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    SE3Pose p;
    p.r = {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
    p.t = {x, y, z};
    return p;
  }
};

inline Point3 apply(const SE3Pose& p, const Point3& v) {
  return {p.r[0][0] * v.x + p.r[0][1] * v.y + p.r[0][2] * v.z + p.t.x,
          p.r[1][0] * v.x + p.r[1][1] * v.y + p.r[1][2] * v.z + p.t.y,
          p.r[2][0] * v.x + p.r[2][1] * v.y + p.r[2][2] * v.z + p.t.z};
}

inline SE3Pose compose(const SE3Pose& a, const SE3Pose& b) {
  SE3Pose out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      out.r[i][j] = a.r[i][0] * b.r[0][j] + a.r[i][1] * b.r[1][j] + a.r[i][2] * b.r[2][j];
    }
  }
  out.t = apply(a, b.t);
  return out;
}

inline SE3Pose inverse(const SE3Pose& p) {
  SE3Pose out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out.r[i][j] = p.r[j][i];
  }
  const Point3 nt = {-p.t.x, -p.t.y, -p.t.z};
  out.t = {out.r[0][0] * nt.x + out.r[0][1] * nt.y + out.r[0][2] * nt.z,
           out.r[1][0] * nt.x + out.r[1][1] * nt.y + out.r[1][2] * nt.z,
           out.r[2][0] * nt.x + out.r[2][1] * nt.y + out.r[2][2] * nt.z};
  return out;
}

/// Checks R^T R = I and det(R) = +1 within tol. Used at IO boundaries.
inline void validate(const SE3Pose& p, double tol = 1e-9) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += p.r[k][i] * p.r[k][j];
      const double want = (i == j) ? 1.0 : 0.0;
      if (std::abs(acc - want) > tol) throw std::invalid_argument("rotation not orthonormal");
    }
  }
  const double det =
      p.r[0][0] * (p.r[1][1] * p.r[2][2] - p.r[1][2] * p.r[2][1]) -
      p.r[0][1] * (p.r[1][0] * p.r[2][2] - p.r[1][2] * p.r[2][0]) +
      p.r[0][2] * (p.r[1][0] * p.r[2][1] - p.r[1][1] * p.r[2][0]);
  if (std::abs(det - 1.0) > tol) throw std::invalid_argument("rotation determinant != +1");
  if (!is_finite(p.t)) throw std::invalid_argument("pose translation not finite");
}

/// Pose of b expressed in a's frame: a^-1 o b.
inline SE3Pose relative_pose(const SE3Pose& a, const SE3Pose& b) {
  return compose(inverse(a), b);
}

inline Point3 transform(const Point3& p, const SE3Pose& pose) { return apply(pose, p); }

inline Polyline transform(const Polyline& p, const SE3Pose& pose) {
  Polyline out;
  out.closed = p.closed;
  out.points.reserve(p.points.size());
  for (const auto& pt : p.points) out.points.push_back(apply(pose, pt));
  return out;
}

/// Total length; includes the wrap-around segment iff closed.
inline double arc_length(const Polyline& p) {
  double len = 0.0;
  const std::size_t n = p.points.size();
  for (std::size_t i = 0; i + 1 < n; ++i) len += distance(p.points[i], p.points[i + 1]);
  if (p.closed && n >= 2) len += distance(p.points[n - 1], p.points[0]);
  return len;
}

namespace detail {

struct ArcWalker {
  const Polyline& p;
  std::vector<double> cum;  // cumulative length at each segment start
  std::size_t nseg;

  explicit ArcWalker(const Polyline& poly) : p(poly) {
    const std::size_t n = p.points.size();
    nseg = p.closed ? n : n - 1;
    cum.resize(nseg + 1, 0.0);
    for (std::size_t i = 0; i < nseg; ++i) {
      cum[i + 1] = cum[i] + distance(p.points[i], p.points[(i + 1) % n]);
    }
  }

  double total() const { return cum[nseg]; }

  /// Point at arc position s plus the (segment, t) it was found on.
  std::pair<Point3, std::pair<std::size_t, double>> at(double s) const {
    const std::size_t n = p.points.size();
    s = std::clamp(s, 0.0, total());
    // Upper bound keeps the walk O(log n) and skips zero-length segments.
    auto it = std::upper_bound(cum.begin(), cum.end(), s);
    std::size_t seg = (it == cum.begin()) ? 0 : static_cast<std::size_t>(it - cum.begin() - 1);
    if (seg >= nseg) seg = nseg - 1;
    const double d = cum[seg + 1] - cum[seg];
    const double t = d > 0.0 ? std::clamp((s - cum[seg]) / d, 0.0, 1.0) : 0.0;
    return {lerp(p.points[seg], p.points[(seg + 1) % n], t), {seg, t}};
  }
};

/// Arc position reached after `steps` hops of Euclidean length d along the
/// chain. Each hop lands on the first forward chain point at exactly
/// distance d from the previous landing. Returns total + d when the chain
/// runs out before the hops do. Optionally records the station after each hop.
inline double chord_walk(const Polyline& p, const ArcWalker& w, double d, std::size_t steps,
                         std::vector<double>* stations) {
  const std::size_t n = p.points.size();
  const double total = w.total();
  if (stations) stations->clear();
  if (d <= 0.0) {
    if (stations) stations->assign(steps, 0.0);
    return 0.0;
  }
  double s = 0.0;
  Point3 q = p.points.front();
  std::size_t seg = 0;
  for (std::size_t hop = 0; hop < steps; ++hop) {
    bool found = false;
    for (std::size_t j = seg; j < w.nseg && !found; ++j) {
      const Point3& a = p.points[j];
      const Point3& b = p.points[(j + 1) % n];
      const double len = w.cum[j + 1] - w.cum[j];
      if (len <= 0.0) continue;
      const Point3 u{b.x - a.x, b.y - a.y, b.z - a.z};
      const Point3 m{a.x - q.x, a.y - q.y, a.z - q.z};
      const double qa = u.x * u.x + u.y * u.y + u.z * u.z;
      const double qb = 2.0 * (u.x * m.x + u.y * m.y + u.z * m.z);
      const double qc = m.x * m.x + m.y * m.y + m.z * m.z - d * d;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc < 0.0) continue;
      const double root = std::sqrt(disc);
      for (const double t : {(-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)}) {
        if (t < -1e-12 || t > 1.0) continue;
        const double cand = w.cum[j] + std::clamp(t, 0.0, 1.0) * len;
        if (cand <= s) continue;
        s = cand;
        q = lerp(a, b, std::clamp(t, 0.0, 1.0));
        seg = j;
        found = true;
        break;
      }
    }
    if (!found) {
      if (stations)
        for (std::size_t r = hop; r < steps; ++r) stations->push_back(total);
      return total + d;
    }
    if (stations) stations->push_back(s);
  }
  return s;
}

/// Arc positions of k samples whose consecutive points are equidistant in the
/// Euclidean (chord) sense. Found by bisecting the hop length: progress after
/// a fixed hop count is monotone in it. Falls back to equal arc fractions
/// when the chain folds too sharply for a chord solution to exist.
inline std::vector<double> chord_stations(const Polyline& p, std::size_t k) {
  const ArcWalker w(p);
  const double total = w.total();
  const std::size_t steps = p.closed ? k : k - 1;
  const double reach = total * (1.0 - 1e-12);
  double lo = 0.0, hi = total;
  for (int it = 0; it < 200 && hi - lo > total * 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (chord_walk(p, w, mid, steps, nullptr) >= reach ? hi : lo) = mid;
  }
  std::vector<double> st;
  const double landed = chord_walk(p, w, hi, steps, &st);
  std::vector<double> out;
  out.reserve(k);
  out.push_back(0.0);
  if (landed > total) {
    // Fold skipped a hop entirely; degrade gracefully.
    const double denom = static_cast<double>(steps);
    for (std::size_t i = 1; i < k; ++i)
      out.push_back(total * static_cast<double>(i) / denom);
    return out;
  }
  for (std::size_t i = 0; i + 1 < k; ++i) out.push_back(st[i]);
  if (!p.closed) out.back() = total;
  return out;
}

}  // namespace detail

/// k points along the chain with equal consecutive spacing. Open polylines
/// keep their exact endpoints; closed ones start at the original first
/// vertex. Zero-length inputs degrade to k copies of the first point.
inline Polyline resample_uniform(const Polyline& p, std::size_t k) {
  if (k < 2) throw std::invalid_argument("resample_uniform: k must be >= 2");
  Polyline out;
  out.closed = p.closed;
  out.points.reserve(k);
  const double total = arc_length(p);
  if (total <= 0.0) {
    out.points.assign(k, p.points.front());
    return out;
  }
  detail::ArcWalker walker(p);
  const std::vector<double> stations = detail::chord_stations(p, k);
  for (std::size_t i = 0; i < k; ++i) {
    if (i == 0) {
      out.points.push_back(p.points.front());
    } else if (!p.closed && i == k - 1) {
      out.points.push_back(p.points.back());
    } else {
      out.points.push_back(walker.at(stations[i]).first);
    }
  }
  return out;
}

/// resample_uniform that also linearly interpolates per-vertex scalar
/// channels (e.g. lane boundary offsets) at the same arc positions.
inline std::pair<Polyline, std::vector<std::vector<double>>> resample_uniform_with_scalars(
    const Polyline& p, std::size_t k, const std::vector<std::vector<double>>& channels) {
  if (k < 2) throw std::invalid_argument("resample_uniform: k must be >= 2");
  for (const auto& ch : channels) {
    if (ch.size() != p.points.size())
      throw std::invalid_argument("scalar channel length mismatch");
  }
  Polyline out;
  out.closed = p.closed;
  std::vector<std::vector<double>> out_ch(channels.size());
  const double total = arc_length(p);
  const std::size_t n = p.points.size();
  if (total <= 0.0) {
    out.points.assign(k, p.points.front());
    for (std::size_t c = 0; c < channels.size(); ++c) out_ch[c].assign(k, channels[c].front());
    return {out, out_ch};
  }
  detail::ArcWalker walker(p);
  const std::vector<double> stations = detail::chord_stations(p, k);
  for (std::size_t i = 0; i < k; ++i) {
    auto [pt, seg_t] = walker.at(stations[i]);
    if (i == 0) pt = p.points.front();
    if (!p.closed && i == k - 1) pt = p.points.back();
    out.points.push_back(pt);
    const auto [seg, t] = seg_t;
    for (std::size_t c = 0; c < channels.size(); ++c) {
      const double a = channels[c][seg];
      const double b = channels[c][(seg + 1) % n];
      out_ch[c].push_back(i == 0 ? channels[c].front()
                                 : (!p.closed && i == k - 1 ? channels[c].back() : a + (b - a) * t));
    }
  }
  return {out, out_ch};
}

/// Signed area of the XY projection (positive = counter-clockwise).
inline double polygon_area_xy(const std::vector<Point3>& pts) {
  double a = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = pts[i];
    const auto& q = pts[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

inline bool point_in_polygon_xy(double x, double y, const std::vector<Point3>& pts) {
  // Even-odd rule over the XY projection.
  bool inside = false;
  const std::size_t n = pts.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const bool straddle = (pts[i].y > y) != (pts[j].y > y);
    if (straddle) {
      const double xint =
          pts[j].x + (pts[i].x - pts[j].x) * (y - pts[j].y) / (pts[i].y - pts[j].y);
      if (x < xint) inside = !inside;
    }
  }
  return inside;
}

struct BoxXY {
  double x_min, x_max, y_min, y_max;
  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

/// Liang-Barsky: parametric [t0,t1] of segment a->b inside the box (XY), or
/// nullopt when fully outside.
inline std::optional<std::pair<double, double>> clip_segment_box(const Point3& a, const Point3& b,
                                                                 const BoxXY& box) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  double t0 = 0.0, t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - box.x_min, box.x_max - a.x, a.y - box.y_min, box.y_max - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
    } else {
      const double r = q[i] / p[i];
      if (p[i] < 0.0) {
        if (r > t1) return std::nullopt;
        if (r > t0) t0 = r;
      } else {
        if (r < t0) return std::nullopt;
        if (r < t1) t1 = r;
      }
    }
  }
  return std::make_pair(t0, t1);
}

/// Clips an open polyline to a box, splitting it into the contiguous runs
/// that remain inside. Z is interpolated along each segment.
inline std::vector<Polyline> clip_polyline_box(const Polyline& p, const BoxXY& box) {
  std::vector<Polyline> runs;
  Polyline cur;
  cur.closed = false;
  auto flush = [&]() {
    if (cur.points.size() >= 2) runs.push_back(cur);
    cur.points.clear();
  };
  const std::size_t n = p.points.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto clipped = clip_segment_box(p.points[i], p.points[i + 1], box);
    if (!clipped) {
      flush();
      continue;
    }
    const auto [t0, t1] = *clipped;
    const Point3 a = lerp(p.points[i], p.points[i + 1], t0);
    const Point3 b = lerp(p.points[i], p.points[i + 1], t1);
    if (t0 > 0.0) flush();
    if (cur.points.empty()) {
      cur.points.push_back(a);
    }
    cur.points.push_back(b);
    if (t1 < 1.0) flush();
  }
  flush();
  return runs;
}

/// Sutherland-Hodgman clip of a closed polygon against the box. Returns the
/// clipped vertex ring (possibly empty). Z is interpolated.
inline std::vector<Point3> clip_polygon_box(const std::vector<Point3>& poly, const BoxXY& box) {
  auto clip_edge = [](const std::vector<Point3>& in, auto inside, auto intersect) {
    std::vector<Point3> out;
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point3& cur = in[i];
      const Point3& prev = in[(i + n - 1) % n];
      const bool cin = inside(cur), pin = inside(prev);
      if (cin) {
        if (!pin) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (pin) {
        out.push_back(intersect(prev, cur));
      }
    }
    return out;
  };
  auto cut_x = [](const Point3& a, const Point3& b, double x) {
    const double t = (x - a.x) / (b.x - a.x);
    return lerp(a, b, t);
  };
  auto cut_y = [](const Point3& a, const Point3& b, double y) {
    const double t = (y - a.y) / (b.y - a.y);
    return lerp(a, b, t);
  };
  std::vector<Point3> v = poly;
  if (v.empty()) return v;
  v = clip_edge(v, [&](const Point3& p) { return p.x >= box.x_min; },
                [&](const Point3& a, const Point3& b) { return cut_x(a, b, box.x_min); });
  if (v.empty()) return v;
  v = clip_edge(v, [&](const Point3& p) { return p.x <= box.x_max; },
                [&](const Point3& a, const Point3& b) { return cut_x(a, b, box.x_max); });
  if (v.empty()) return v;
  v = clip_edge(v, [&](const Point3& p) { return p.y >= box.y_min; },
                [&](const Point3& a, const Point3& b) { return cut_y(a, b, box.y_min); });
  if (v.empty()) return v;
  v = clip_edge(v, [&](const Point3& p) { return p.y <= box.y_max; },
                [&](const Point3& a, const Point3& b) { return cut_y(a, b, box.y_max); });
  return v;
}

/// Andrew monotone chain over the XY projection; returns hull vertices CCW.
inline std::vector<Point3> convex_hull_xy(std::vector<Point3> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point3& a, const Point3& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Point3& a, const Point3& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  auto cross2 = [](const Point3& o, const Point3& a, const Point3& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point3> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Minimum-area bounding rectangle of the XY projection (rotating edge
/// alignment over the convex hull). Corners come back CCW; z is the mean of
/// the input z values.
inline std::array<Point3, 4> min_area_rect_xy(const std::vector<Point3>& pts) {
  if (pts.empty()) throw std::invalid_argument("min_area_rect_xy: empty input");
  double zsum = 0.0;
  for (const auto& p : pts) zsum += p.z;
  const double zmean = zsum / static_cast<double>(pts.size());
  std::vector<Point3> hull = convex_hull_xy(pts);
  if (hull.size() < 3) {
    // Degenerate point/segment input: emit a hairline box around it.
    double xmin = pts[0].x, xmax = pts[0].x, ymin = pts[0].y, ymax = pts[0].y;
    for (const auto& p : pts) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    return {Point3{xmin, ymin, zmean}, Point3{xmax, ymin, zmean}, Point3{xmax, ymax, zmean},
            Point3{xmin, ymax, zmean}};
  }
  double best_area = std::numeric_limits<double>::infinity();
  std::array<Point3, 4> best{};
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 e = hull[(i + 1) % n] - hull[i];
    const double len = std::hypot(e.x, e.y);
    if (len <= 0.0) continue;
    const double ux = e.x / len, uy = e.y / len;  // edge direction
    double lo_u = 0, hi_u = 0, lo_v = 0, hi_v = 0;
    bool first = true;
    for (const auto& p : hull) {
      const double du = (p.x - hull[i].x) * ux + (p.y - hull[i].y) * uy;
      const double dv = -(p.x - hull[i].x) * uy + (p.y - hull[i].y) * ux;
      if (first) {
        lo_u = hi_u = du;
        lo_v = hi_v = dv;
        first = false;
      } else {
        lo_u = std::min(lo_u, du);
        hi_u = std::max(hi_u, du);
        lo_v = std::min(lo_v, dv);
        hi_v = std::max(hi_v, dv);
      }
    }
    const double area = (hi_u - lo_u) * (hi_v - lo_v);
    if (area < best_area) {
      best_area = area;
      auto corner = [&](double u, double v) {
        return Point3{hull[i].x + u * ux - v * uy, hull[i].y + u * uy + v * ux, zmean};
      };
      best = {corner(lo_u, lo_v), corner(hi_u, lo_v), corner(hi_u, hi_v), corner(lo_u, hi_v)};
    }
  }
  if (polygon_area_xy({best.begin(), best.end()}) < 0) {
    std::swap(best[1], best[3]);
  }
  return best;
}

}  // namespace vmk
