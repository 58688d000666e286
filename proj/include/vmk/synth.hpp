#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vmk/common.hpp"
#include "vmk/elements.hpp"
#include "vmk/geom.hpp"
#include "vmk/topo.hpp"
#include "vmk/view_transform.hpp"

namespace vmk {

// Synthetic driving scenes: a gently curving multi-lane road along +x with
// chunked lane segments, dividers and boundaries, rectangular ped crossings
// at intersections, and traffic-light posts that project to pixel boxes.
// Everything is a pure function of (seed, config).

struct SceneConfig {
  int lanes = 2;
  int intersections = 1;
  double extent = 100.0;       // road length, meters
  double lane_spacing = 3.5;   // meters between lane centers
  double segment_len = 25.0;   // target lane chunk length
  double curve_max = 1.5;      // max lateral amplitude of the road center
  double z_amp = 0.3;          // height field amplitude
  double ped_half_len = 2.0;   // ped crossing half-length along x
  double anchor_height = 5.0;  // traffic-light post height
  int points_per_chunk = 10;
};

inline void validate(const SceneConfig& c) {
  if (c.lanes < 1) throw std::invalid_argument("scene config: lanes must be >= 1");
  if (c.intersections < 0) throw std::invalid_argument("scene config: intersections must be >= 0");
  if (!(c.extent > 0) || !(c.segment_len > 0) || !(c.lane_spacing > 0))
    throw std::invalid_argument("scene config: extents must be > 0");
  if (c.points_per_chunk < 2) throw std::invalid_argument("scene config: points_per_chunk must be >= 2");
  if (c.intersections > 0 && c.extent / (c.intersections + 1) <= 2 * c.ped_half_len)
    throw std::invalid_argument("scene config: intersections too dense for extent");
}

/// Ground height used for every element and the ego trajectory.
inline double ground_z(const SceneConfig& c, double x, double y) {
  return c.z_amp * std::sin(x / 37.0) * std::cos(y / 23.0);
}

/// Traffic-light post anchored in the global frame; projected per frame into
/// a camera to produce pixel boxes.
struct TrafficAnchor {
  Point3 position;  // base of the post
  double width = 0.5;
  double height = 1.2;
  int category = 0;
};

struct Scene {
  std::uint64_t seed = 0;
  SceneConfig config;
  double curve_amp = 0.0;  // sampled from seed
  std::vector<MapInstance> instances;  // global frame
  std::vector<TrafficAnchor> anchors;
  TopologyGraph graph;  // 0/1 gt adjacency; lanes follow LaneSegment order
};

namespace detail {

inline double road_center_y(double curve_amp, double x) {
  return curve_amp * std::sin(x / 53.0);
}

}  // namespace detail

inline Scene gen_scene(std::uint64_t seed, const SceneConfig& cfg) {
  validate(cfg);
  Scene scene;
  scene.seed = seed;
  scene.config = cfg;
  Rng rng(seed);
  scene.curve_amp = rng.uniform(0.0, cfg.curve_max);

  const int chunks = std::max(1, static_cast<int>(std::llround(cfg.extent / cfg.segment_len)));
  const double chunk_len = cfg.extent / chunks;
  const double half_width = 0.5 * cfg.lanes * cfg.lane_spacing;

  auto lane_center_y = [&](int lane, double x) {
    const double offset =
        (static_cast<double>(lane) - 0.5 * (cfg.lanes - 1)) * cfg.lane_spacing;
    return detail::road_center_y(scene.curve_amp, x) + offset;
  };
  auto sampled_line = [&](double x0, double x1, auto&& y_of_x, int pts) {
    Polyline line;
    for (int i = 0; i < pts; ++i) {
      const double x = x0 + (x1 - x0) * static_cast<double>(i) / (pts - 1);
      const double y = y_of_x(x);
      line.points.push_back({x, y, ground_z(cfg, x, y)});
    }
    return line;
  };

  // Lane segments, chunked per lane; successor chains run along each lane.
  std::vector<std::vector<int>> lane_ids(static_cast<std::size_t>(cfg.lanes));
  for (int lane = 0; lane < cfg.lanes; ++lane) {
    for (int c = 0; c < chunks; ++c) {
      MapInstance inst;
      inst.cls = MapClass::LaneSegment;
      inst.geometry = sampled_line(c * chunk_len, (c + 1) * chunk_len,
                                   [&](double x) { return lane_center_y(lane, x); },
                                   cfg.points_per_chunk);
      LaneSegment seg;
      seg.centerline = inst.geometry;
      seg.left_offset.assign(static_cast<std::size_t>(cfg.points_per_chunk), cfg.lane_spacing / 2);
      seg.right_offset.assign(static_cast<std::size_t>(cfg.points_per_chunk), cfg.lane_spacing / 2);
      seg.left_attr = lane == cfg.lanes - 1 ? BoundaryAttr::Solid : BoundaryAttr::Dashed;
      seg.right_attr = lane == 0 ? BoundaryAttr::Solid : BoundaryAttr::Dashed;
      inst.lane = std::move(seg);
      lane_ids[static_cast<std::size_t>(lane)].push_back(static_cast<int>(scene.instances.size()));
      scene.instances.push_back(std::move(inst));
    }
  }

  // Dashed dividers between adjacent lanes, solid boundaries at the edges.
  const int line_pts = std::max(cfg.points_per_chunk, 2 * chunks + 2);
  for (int lane = 0; lane + 1 < cfg.lanes; ++lane) {
    MapInstance inst;
    inst.cls = MapClass::Divider;
    inst.geometry = sampled_line(0, cfg.extent,
                                 [&](double x) {
                                   return 0.5 * (lane_center_y(lane, x) + lane_center_y(lane + 1, x));
                                 },
                                 line_pts);
    scene.instances.push_back(std::move(inst));
  }
  for (double side : {-1.0, 1.0}) {
    MapInstance inst;
    inst.cls = MapClass::Boundary;
    inst.geometry = sampled_line(0, cfg.extent,
                                 [&](double x) {
                                   return detail::road_center_y(scene.curve_amp, x) + side * half_width;
                                 },
                                 line_pts);
    scene.instances.push_back(std::move(inst));
  }

  // Intersections: a ped crossing spanning the road plus two light posts.
  std::vector<std::vector<int>> entering(static_cast<std::size_t>(cfg.intersections));
  for (int k = 0; k < cfg.intersections; ++k) {
    const double xk = cfg.extent * (k + 1) / (cfg.intersections + 1);
    const double yc = detail::road_center_y(scene.curve_amp, xk);
    const double margin = 0.5;
    std::array<Point3, 4> corners;
    const double xs[2] = {xk - cfg.ped_half_len, xk + cfg.ped_half_len};
    const double ys[2] = {yc - half_width - margin, yc + half_width + margin};
    corners[0] = {xs[0], ys[0], ground_z(cfg, xs[0], ys[0])};
    corners[1] = {xs[1], ys[0], ground_z(cfg, xs[1], ys[0])};
    corners[2] = {xs[1], ys[1], ground_z(cfg, xs[1], ys[1])};
    corners[3] = {xs[0], ys[1], ground_z(cfg, xs[0], ys[1])};
    scene.instances.push_back(resample_ped_crossing(corners));

    for (double side : {-1.0, 1.0}) {
      TrafficAnchor anchor;
      const double ya = yc + side * (half_width + 1.0);
      anchor.position = {xk, ya, ground_z(cfg, xk, ya)};
      anchor.height = 1.2;
      anchor.width = 0.5;
      anchor.category = k % 2;  // alternate light states along the road
      scene.anchors.push_back(anchor);
    }
    // Lanes whose chunk contains the crossing feed the lights.
    const int chunk_idx = std::min(chunks - 1, static_cast<int>(xk / chunk_len));
    for (int lane = 0; lane < cfg.lanes; ++lane) {
      entering[static_cast<std::size_t>(k)].push_back(
          lane_ids[static_cast<std::size_t>(lane)][static_cast<std::size_t>(chunk_idx)]);
    }
  }

  // Ground-truth adjacency over lane segments (by LaneSegment order, which
  // here equals instance order since lanes are emitted first).
  const std::int64_t n_lanes = static_cast<std::int64_t>(cfg.lanes) * chunks;
  const std::int64_t n_anchors = static_cast<std::int64_t>(scene.anchors.size());
  scene.graph.ll_scores = Tensor({n_lanes, n_lanes});
  scene.graph.lt_scores = Tensor({n_lanes, n_anchors});
  for (const auto& chain : lane_ids) {
    for (std::size_t c = 0; c + 1 < chain.size(); ++c) {
      scene.graph.ll_scores.at2(chain[c], chain[c + 1]) = 1.0f;
    }
  }
  for (int k = 0; k < cfg.intersections; ++k) {
    for (int lane_inst : entering[static_cast<std::size_t>(k)]) {
      for (int side = 0; side < 2; ++side) {
        scene.graph.lt_scores.at2(lane_inst, 2 * k + side) = 1.0f;
      }
    }
  }
  return scene;
}

/// Instances cut to an ego-frame window. Open elements may split into
/// several runs; fragments shorter than 1 m are dropped; ped crossings
/// survive when the clipped area keeps at least 0.5 m². Every output is
/// re-canonicalized (10 points open, 20-point ring closed) and tagged with
/// the index of its source instance.
struct LocalCrop {
  std::vector<MapInstance> instances;
  std::vector<int> source_index;
};

inline LocalCrop local_crop(const Scene& scene, const SE3Pose& ego_pose, double x_min, double x_max,
                            double y_min, double y_max) {
  if (!(x_min < x_max) || !(y_min < y_max))
    throw std::invalid_argument("local_crop: degenerate range");
  const BoxXY box{x_min, x_max, y_min, y_max};
  const SE3Pose world_to_ego = inverse(ego_pose);
  LocalCrop out;
  for (std::size_t idx = 0; idx < scene.instances.size(); ++idx) {
    const MapInstance& src = scene.instances[idx];
    const Polyline local = transform(src.geometry, world_to_ego);
    if (src.cls == MapClass::PedCrossing) {
      const std::vector<Point3> clipped = clip_polygon_box(local.points, box);
      if (clipped.size() < 3) continue;
      if (std::abs(polygon_area_xy(clipped)) < 0.5) continue;
      Polyline ring;
      ring.points = clipped;
      ring.closed = true;
      MapInstance inst = resample_ped_crossing(simplify_to_corners(ring));
      inst.score = src.score;
      out.instances.push_back(std::move(inst));
      out.source_index.push_back(static_cast<int>(idx));
      continue;
    }
    const std::vector<Polyline> runs = clip_polyline_box(local, box);
    for (const Polyline& run : runs) {
      if (arc_length(run) < 1.0) continue;
      MapInstance inst;
      inst.cls = src.cls;
      inst.score = src.score;
      if (src.cls == MapClass::LaneSegment && src.lane) {
        // Interpolate the boundary offsets onto the clipped run. The run's
        // vertices are a subset/interpolation of the source centerline, so
        // offsets are re-derived by nearest arc position on the source.
        std::vector<double> left, right;
        left.reserve(run.points.size());
        right.reserve(run.points.size());
        const Polyline src_local = transform(src.lane->centerline, world_to_ego);
        for (const Point3& p : run.points) {
          // nearest source vertex (offsets vary slowly; nearest is enough)
          std::size_t best = 0;
          double best_d = std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < src_local.points.size(); ++i) {
            const double d = distance(p, src_local.points[i]);
            if (d < best_d) {
              best_d = d;
              best = i;
            }
          }
          left.push_back(src.lane->left_offset[best]);
          right.push_back(src.lane->right_offset[best]);
        }
        auto [resampled, channels] =
            resample_uniform_with_scalars(run, kOpenElementPoints, {left, right});
        inst.geometry = resampled;
        LaneSegment seg;
        seg.centerline = resampled;
        seg.left_offset = channels[0];
        seg.right_offset = channels[1];
        seg.left_attr = src.lane->left_attr;
        seg.right_attr = src.lane->right_attr;
        inst.lane = std::move(seg);
      } else {
        inst.geometry = resample_uniform(run, kOpenElementPoints);
      }
      out.instances.push_back(std::move(inst));
      out.source_index.push_back(static_cast<int>(idx));
    }
  }
  return out;
}

struct LidarConfig {
  int azimuths = 180;
  int rings = 12;
  double max_range = 40.0;
  double jitter = 0.02;
  double element_step = 0.6;
  std::uint64_t seed = 7;
};

/// Ego-frame cloud: concentric ground rings around the sensor plus points
/// walked along every map element and light post within range.
inline std::vector<Point3> gen_lidar(const Scene& scene, const SE3Pose& ego_pose,
                                     const LidarConfig& cfg) {
  if (cfg.azimuths < 1 || cfg.rings < 1 || !(cfg.max_range > 0))
    throw std::invalid_argument("lidar config: invalid ray pattern");
  Rng rng(cfg.seed);
  const SE3Pose world_to_ego = inverse(ego_pose);
  std::vector<Point3> cloud;
  auto push_global = [&](Point3 g) {
    g.x += rng.uniform(-cfg.jitter, cfg.jitter);
    g.y += rng.uniform(-cfg.jitter, cfg.jitter);
    g.z += rng.uniform(-cfg.jitter, cfg.jitter);
    const Point3 e = apply(world_to_ego, g);
    if (norm(e) <= cfg.max_range) cloud.push_back(e);
  };

  for (int k = 0; k < cfg.rings; ++k) {
    const double r = cfg.max_range * (k + 1) / (cfg.rings + 1);
    for (int a = 0; a < cfg.azimuths; ++a) {
      const double theta = 2.0 * M_PI * a / cfg.azimuths;
      const double gx = ego_pose.t.x + r * std::cos(theta);
      const double gy = ego_pose.t.y + r * std::sin(theta);
      push_global({gx, gy, ground_z(scene.config, gx, gy)});
    }
  }
  for (const MapInstance& inst : scene.instances) {
    const auto& pts = inst.geometry.points;
    const std::size_t n = pts.size();
    const std::size_t nseg = inst.geometry.closed ? n : n - 1;
    for (std::size_t s = 0; s < nseg; ++s) {
      const Point3& a = pts[s];
      const Point3& b = pts[(s + 1) % n];
      const double len = distance(a, b);
      const int steps = std::max(1, static_cast<int>(std::ceil(len / cfg.element_step)));
      for (int i = 0; i < steps; ++i) {
        push_global(lerp(a, b, static_cast<double>(i) / steps));
      }
    }
  }
  for (const TrafficAnchor& anchor : scene.anchors) {
    const int steps = std::max(2, static_cast<int>(std::ceil(scene.config.anchor_height / 0.25)));
    for (int i = 0; i <= steps; ++i) {
      Point3 p = anchor.position;
      p.z += scene.config.anchor_height * static_cast<double>(i) / steps;
      push_global(p);
    }
  }
  return cloud;
}

struct SequenceConfig {
  int frames = 60;
  double step = 0.5;     // meters of travel per frame
  double start_x = 2.0;  // where along the road the drive begins
  double camera_fx = 800.0;
  double camera_fy = 800.0;
  int image_w = 1920;
  int image_h = 1080;
  LidarConfig lidar;
};

struct Sequence {
  std::vector<SE3Pose> poses;
  std::vector<CameraModel> cameras;  // rig shared by all frames
  std::vector<std::vector<Point3>> lidar;  // per frame, ego frame
};

/// The canonical forward camera: optical axis along ego +x, mounted 1.6 m up.
inline CameraModel forward_camera(double fx, double fy, int width, int height) {
  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.width = width;
  cam.height = height;
  SE3Pose e;
  // camera axes: x right (-y ego), y down (-z ego), z forward (+x ego)
  e.r = {{{0, -1, 0}, {0, 0, -1}, {1, 0, 0}}};
  const Point3 center{0.2, 0.0, 1.6};  // camera position in ego frame
  e.t = {-(e.r[0][0] * center.x + e.r[0][1] * center.y + e.r[0][2] * center.z),
         -(e.r[1][0] * center.x + e.r[1][1] * center.y + e.r[1][2] * center.z),
         -(e.r[2][0] * center.x + e.r[2][1] * center.y + e.r[2][2] * center.z)};
  cam.extrinsic = e;
  return cam;
}

/// Drives the ego along the road center at fixed spacing; yaw follows the
/// road tangent, z follows the ground.
inline Sequence gen_sequence(const Scene& scene, const SequenceConfig& cfg) {
  if (cfg.frames < 1) throw std::invalid_argument("sequence config: frames must be >= 1");
  if (!(cfg.step > 0) || cfg.step > 3.0)
    throw std::invalid_argument("sequence config: step must be in (0, 3]");
  Sequence seq;
  seq.cameras.push_back(forward_camera(cfg.camera_fx, cfg.camera_fy, cfg.image_w, cfg.image_h));
  for (int i = 0; i < cfg.frames; ++i) {
    const double x = cfg.start_x + cfg.step * i;
    const double y = detail::road_center_y(scene.curve_amp, x);
    const double dydx = scene.curve_amp / 53.0 * std::cos(x / 53.0);
    const double yaw = std::atan2(dydx, 1.0);
    seq.poses.push_back(SE3Pose::from_yaw(yaw, x, y, ground_z(scene.config, x, y)));
    LidarConfig lc = cfg.lidar;
    lc.seed = cfg.lidar.seed + static_cast<std::uint64_t>(i);
    seq.lidar.push_back(gen_lidar(scene, seq.poses.back(), lc));
  }
  return seq;
}

/// Pixel box for a light post seen from the ego pose, or nothing when the
/// post is behind the camera or outside the image.
inline std::optional<TrafficElement> project_anchor(const TrafficAnchor& anchor,
                                                    const CameraModel& cam,
                                                    const SE3Pose& ego_pose) {
  const SE3Pose world_to_ego = inverse(ego_pose);
  Point3 mid = anchor.position;
  mid.z += 0.5 * anchor.height;
  const Point3 ego_pt = apply(world_to_ego, mid);
  const Point3 cam_pt = apply(cam.extrinsic, ego_pt);
  if (cam_pt.z <= 1e-6) return std::nullopt;
  const double u = cam.fx * cam_pt.x / cam_pt.z + cam.cx;
  const double v = cam.fy * cam_pt.y / cam_pt.z + cam.cy;
  if (u < 0 || u >= cam.width || v < 0 || v >= cam.height) return std::nullopt;
  const double du = cam.fx * (0.5 * anchor.width) / cam_pt.z;
  const double dv = cam.fy * (0.5 * anchor.height) / cam_pt.z;
  TrafficElement te;
  te.u1 = std::max(0.0, u - du);
  te.u2 = std::min(static_cast<double>(cam.width), u + du);
  te.v1 = std::max(0.0, v - dv);
  te.v2 = std::min(static_cast<double>(cam.height), v + dv);
  te.category = anchor.category;
  te.score = 1.0;
  if (!(te.u1 < te.u2) || !(te.v1 < te.v2)) return std::nullopt;
  return te;
}

}  // namespace vmk
