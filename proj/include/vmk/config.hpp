#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "vmk/common.hpp"
#include "vmk/io.hpp"
#include "vmk/matching.hpp"
#include "vmk/metrics.hpp"
#include "vmk/synth.hpp"
#include "vmk/temporal.hpp"
#include "vmk/topo.hpp"
#include "vmk/view_transform.hpp"

namespace vmk {

inline const char* to_string(FusionKind k) {
  switch (k) {
    case FusionKind::None: return "none";
    case FusionKind::Streaming: return "streaming";
    case FusionKind::StreamingStreaming: return "streaming_streaming";
    case FusionKind::StreamingStacking: return "streaming_stacking";
  }
  throw std::invalid_argument("unknown fusion kind");
}

inline FusionKind fusion_kind_from_string(const std::string& s) {
  if (s == "none") return FusionKind::None;
  if (s == "streaming") return FusionKind::Streaming;
  if (s == "streaming_streaming") return FusionKind::StreamingStreaming;
  if (s == "streaming_stacking") return FusionKind::StreamingStacking;
  throw schema_error("unknown fusion kind '" + s + "'");
}

/// One document for everything the commands need. Every section and every
/// field is optional; absent fields keep the library defaults. Unknown keys
/// anywhere are rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  BevGridSpec bev;
  DepthBins depth;
  FusionMode fusion;
  int fusion_kernel = 3;
  CostWeights match;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  EvalConfig eval;
  double ensemble_tau = 0.5;
  double ensemble_penalty = 0.9;
  TopoTrainConfig topo;
  SceneConfig scene;
  SequenceConfig sequence;
};

namespace detail {

/// Applies the fields a section chooses to override and rejects the rest.
class SectionReader {
 public:
  SectionReader(const json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j_.is_object()) throw schema_error(what_ + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    known_.push_back(key);
    if (j_.contains(key)) out = field<T>(j_, key);
  }

  void read_kind(const char* key, FusionKind& out) {
    known_.push_back(key);
    if (j_.contains(key)) out = parse_enum(fusion_kind_from_string, field<std::string>(j_, key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool known = false;
      for (const std::string& k : known_) known = known || k == it.key();
      if (!known) throw schema_error(what_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string what_;
  std::vector<std::string> known_;
};

}  // namespace detail

inline RunConfig run_config_from_json(const json& j) {
  detail::require_keys(j, "config", {},
                       {"seed", "bev", "depth", "fusion", "losses", "eval", "ensemble", "topo",
                        "scene", "sequence"});
  RunConfig c;
  if (j.contains("seed")) c.seed = detail::field<std::uint64_t>(j, "seed");
  if (j.contains("bev")) {
    detail::SectionReader r(j.at("bev"), "config.bev");
    r.read("rows", c.bev.rows);
    r.read("cols", c.bev.cols);
    r.read("x_min", c.bev.x_min);
    r.read("x_max", c.bev.x_max);
    r.read("y_min", c.bev.y_min);
    r.read("y_max", c.bev.y_max);
    r.finish();
  }
  if (j.contains("depth")) {
    detail::SectionReader r(j.at("depth"), "config.depth");
    r.read("d_min", c.depth.d_min);
    r.read("d_max", c.depth.d_max);
    r.read("bin_width", c.depth.bin_width);
    r.finish();
  }
  if (j.contains("fusion")) {
    detail::SectionReader r(j.at("fusion"), "config.fusion");
    r.read_kind("kind", c.fusion.kind);
    r.read("stack_n", c.fusion.stack_n);
    r.read("stack_m", c.fusion.stack_m);
    r.read("test_strides", c.fusion.test_strides);
    r.read("testing_phase", c.fusion.testing_phase);
    r.read("kernel", c.fusion_kernel);
    r.finish();
  }
  if (j.contains("losses")) {
    detail::SectionReader r(j.at("losses"), "config.losses");
    r.read("lambda_cls", c.match.lambda_cls);
    r.read("lambda_pts", c.match.lambda_pts);
    r.read("focal_gamma", c.focal_gamma);
    r.read("focal_alpha", c.focal_alpha);
    r.finish();
  }
  if (j.contains("eval")) {
    detail::SectionReader r(j.at("eval"), "config.eval");
    r.read("thresholds", c.eval.thresholds);
    r.read("iou_thresholds", c.eval.iou_thresholds);
    r.read("topology_threshold", c.eval.topology_threshold);
    r.read("uniscore_weights", c.eval.uniscore_weights);
    r.finish();
  }
  if (j.contains("ensemble")) {
    detail::SectionReader r(j.at("ensemble"), "config.ensemble");
    r.read("tau_sim", c.ensemble_tau);
    r.read("score_penalty", c.ensemble_penalty);
    r.finish();
  }
  if (j.contains("topo")) {
    detail::SectionReader r(j.at("topo"), "config.topo");
    r.read("d", c.topo.d);
    r.read("hidden", c.topo.hidden);
    r.read("epochs", c.topo.epochs);
    r.read("lr", c.topo.lr);
    r.read("momentum", c.topo.momentum);
    r.read("grad_clip", c.topo.grad_clip);
    r.read("seed", c.topo.seed);
    r.read("lane_points", c.topo.lane_points);
    r.read("k_te", c.topo.k_te);
    r.read("image_w", c.topo.image_w);
    r.read("image_h", c.topo.image_h);
    r.read("norm_scale", c.topo.norm_scale);
    r.finish();
  }
  if (j.contains("scene")) {
    detail::SectionReader r(j.at("scene"), "config.scene");
    r.read("lanes", c.scene.lanes);
    r.read("intersections", c.scene.intersections);
    r.read("extent", c.scene.extent);
    r.read("lane_spacing", c.scene.lane_spacing);
    r.read("segment_len", c.scene.segment_len);
    r.read("curve_max", c.scene.curve_max);
    r.read("z_amp", c.scene.z_amp);
    r.read("ped_half_len", c.scene.ped_half_len);
    r.read("anchor_height", c.scene.anchor_height);
    r.read("points_per_chunk", c.scene.points_per_chunk);
    r.finish();
  }
  if (j.contains("sequence")) {
    detail::SectionReader r(j.at("sequence"), "config.sequence");
    r.read("frames", c.sequence.frames);
    r.read("step", c.sequence.step);
    r.read("start_x", c.sequence.start_x);
    r.read("camera_fx", c.sequence.camera_fx);
    r.read("camera_fy", c.sequence.camera_fy);
    r.read("image_w", c.sequence.image_w);
    r.read("image_h", c.sequence.image_h);
    r.read("lidar_azimuths", c.sequence.lidar.azimuths);
    r.read("lidar_rings", c.sequence.lidar.rings);
    r.read("lidar_max_range", c.sequence.lidar.max_range);
    r.read("lidar_jitter", c.sequence.lidar.jitter);
    r.read("lidar_element_step", c.sequence.lidar.element_step);
    r.read("lidar_seed", c.sequence.lidar.seed);
    r.finish();
  }
  validate(c.bev);
  validate(c.depth);
  validate(c.fusion);
  validate(c.match);
  validate(c.eval);
  validate(c.scene);
  if (c.fusion_kernel < 1 || c.fusion_kernel % 2 == 0)
    throw schema_error("config.fusion: kernel must be odd and positive");
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(load_json(path));
}

}  // namespace vmk
