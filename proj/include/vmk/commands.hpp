#pragma once

#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "vmk/config.hpp"
#include "vmk/ensemble.hpp"
#include "vmk/io.hpp"
#include "vmk/losses.hpp"
#include "vmk/metrics.hpp"
#include "vmk/synth.hpp"
#include "vmk/temporal.hpp"
#include "vmk/topo.hpp"

namespace vmk {

namespace detail {

inline std::string frame_tag(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

inline void make_dirs(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory: " + dir + ": " + ec.message());
}

inline MapInstance to_frame(const MapInstance& inst, const SE3Pose& world_to_local) {
  MapInstance out = inst;
  out.geometry = transform(inst.geometry, world_to_local);
  if (out.lane) out.lane->centerline = out.geometry;
  return out;
}

/// Small random convolution weights so streamed features actually mix; the
/// scale follows the usual fan-in rule.
inline ConvGruParams random_gru(int channels, int kernel, Rng& rng) {
  ConvGruParams p = ConvGruParams::zeros(channels, kernel);
  const double bound = 1.0 / std::sqrt(static_cast<double>(2 * channels * kernel * kernel));
  for (Tensor* w : {&p.wz, &p.wr, &p.wh}) {
    for (float& v : w->data) v = static_cast<float>(rng.uniform(-bound, bound));
  }
  return p;
}

}  // namespace detail

/// Whole scene re-expressed at one ego pose: instances in the ego frame,
/// anchors projected through the camera, and the topology graph with columns
/// for unseen anchors dropped so it stays aligned with the element lists.
inline SceneForEval scene_at_pose(const Scene& scene, const SE3Pose& pose,
                                  const CameraModel& cam) {
  SceneForEval view;
  const SE3Pose world_to_ego = inverse(pose);
  view.instances.reserve(scene.instances.size());
  for (const MapInstance& inst : scene.instances)
    view.instances.push_back(detail::to_frame(inst, world_to_ego));

  std::vector<std::int64_t> kept;
  for (std::size_t a = 0; a < scene.anchors.size(); ++a) {
    if (auto te = project_anchor(scene.anchors[a], cam, pose)) {
      view.tes.push_back(*te);
      kept.push_back(static_cast<std::int64_t>(a));
    }
  }

  view.graph.threshold = scene.graph.threshold;
  view.graph.ll_scores = scene.graph.ll_scores;
  const std::int64_t n_lanes = scene.graph.ll_scores.dim(0);
  view.graph.lt_scores = Tensor({n_lanes, static_cast<std::int64_t>(kept.size())});
  for (std::int64_t i = 0; i < n_lanes; ++i) {
    for (std::size_t k = 0; k < kept.size(); ++k) {
      view.graph.lt_scores.at2(i, static_cast<std::int64_t>(k)) =
          scene.graph.lt_scores.at2(i, kept[k]);
    }
  }
  return view;
}

// ---------------------------------------------------------------------------

inline void cmd_synth(const RunConfig& cfg, const std::string& out_dir, bool verbose,
                      std::ostream& os) {
  detail::make_dirs(out_dir + "/frames");
  const Scene scene = gen_scene(cfg.seed, cfg.scene);
  const Sequence seq = gen_sequence(scene, cfg.sequence);

  save_json(out_dir + "/scene.json", to_json(scene));
  save_json(out_dir + "/sequence.json", to_json(SequenceMeta{seq.poses, seq.cameras}));

  std::size_t lidar_points = 0;
  for (std::size_t i = 0; i < seq.poses.size(); ++i) {
    const std::string tag = detail::frame_tag(i);

    const std::vector<Point3>& cloud = seq.lidar[i];
    TensorT<double> pts({static_cast<std::int64_t>(cloud.size()), 3});
    for (std::size_t k = 0; k < cloud.size(); ++k) {
      pts.at2(static_cast<std::int64_t>(k), 0) = cloud[k].x;
      pts.at2(static_cast<std::int64_t>(k), 1) = cloud[k].y;
      pts.at2(static_cast<std::int64_t>(k), 2) = cloud[k].z;
    }
    save_tensor(out_dir + "/frames/lidar_" + tag + ".vmkt", pts);
    lidar_points += cloud.size();

    const LocalCrop crop = local_crop(scene, seq.poses[i], cfg.bev.x_min, cfg.bev.x_max,
                                      cfg.bev.y_min, cfg.bev.y_max);
    save_tensor(out_dir + "/frames/grid_" + tag + ".vmkt",
                rasterize(crop.instances, cfg.bev));
    save_json(out_dir + "/frames/local_" + tag + ".json",
              to_json(MapFile{crop.instances, {}, std::nullopt}));
    if (verbose) {
      os << "frame " << i << ": " << crop.instances.size() << " local instances, "
         << cloud.size() << " lidar points\n";
    }
  }

  const SceneForEval view = scene_at_pose(scene, seq.poses.front(), seq.cameras.front());
  save_map(out_dir + "/map.json", MapFile{view.instances, view.tes, view.graph});

  os << "scene: " << scene.instances.size() << " instances, " << scene.anchors.size()
     << " anchors\n";
  os << "sequence: " << seq.poses.size() << " frames, " << lidar_points << " lidar points\n";
  os << "map: " << view.instances.size() << " instances, " << view.tes.size()
     << " traffic elements\n";
}

// ---------------------------------------------------------------------------

/// Canonical form: ped crossings as 20-point rings with corners at 0/5/10/15,
/// everything else at the fixed open-element point count. Instances already
/// canonical pass through untouched, which makes the command idempotent.
inline MapInstance canonicalize_instance(const MapInstance& inst) {
  if (inst.cls == MapClass::PedCrossing) {
    const bool canonical = inst.geometry.closed &&
                           inst.geometry.points.size() == kPedCrossingPoints &&
                           inst.corner_indices && *inst.corner_indices == kPedCornerIndices;
    if (canonical) return inst;
    MapInstance out = resample_ped_crossing(simplify_to_corners(inst.geometry));
    out.score = inst.score;
    return out;
  }
  if (inst.geometry.points.size() == kOpenElementPoints) return inst;
  MapInstance out = inst;
  if (inst.lane) {
    auto [line, channels] = resample_uniform_with_scalars(
        inst.geometry, kOpenElementPoints, {inst.lane->left_offset, inst.lane->right_offset});
    out.geometry = line;
    out.lane->centerline = line;
    out.lane->left_offset = channels[0];
    out.lane->right_offset = channels[1];
  } else {
    out.geometry = resample_uniform(inst.geometry, kOpenElementPoints);
  }
  return out;
}

inline void cmd_resample(const std::string& in_path, const std::string& out_path,
                         std::ostream& os) {
  MapFile m = load_map(in_path);
  std::size_t changed = 0;
  for (MapInstance& inst : m.instances) {
    MapInstance canon = canonicalize_instance(inst);
    if (canon.geometry.points.size() != inst.geometry.points.size() ||
        !(canon.geometry.points == inst.geometry.points))
      ++changed;
    inst = std::move(canon);
  }
  save_map(out_path, m);
  os << "resampled " << m.instances.size() << " instances (" << changed << " changed)\n";
}

// ---------------------------------------------------------------------------

inline void cmd_fuse(const RunConfig& cfg, const std::string& seq_dir,
                     const std::string& mode_name, const std::string& out_dir, bool verbose,
                     std::ostream& os) {
  const SequenceMeta meta = sequence_from_json(load_json(seq_dir + "/sequence.json"));

  std::vector<std::size_t> gaps;
  std::vector<std::string> grid_paths;
  for (std::size_t i = 0; i < meta.poses.size(); ++i) {
    const std::string p = seq_dir + "/frames/grid_" + detail::frame_tag(i) + ".vmkt";
    if (!std::filesystem::exists(p)) gaps.push_back(i);
    grid_paths.push_back(p);
  }
  if (!gaps.empty()) {
    std::string msg = seq_dir + ": missing frames:";
    for (std::size_t g : gaps) msg += " " + std::to_string(g);
    throw io_error(msg);
  }

  FusionMode mode = cfg.fusion;
  if (!mode_name.empty()) mode.kind = fusion_kind_from_string(mode_name);

  std::vector<SequenceFrame> frames;
  for (std::size_t i = 0; i < meta.poses.size(); ++i) {
    const Tensor grid = load_tensor<float>(grid_paths[i]);
    if (grid.rank() != 3 || grid.dim(1) != cfg.bev.rows || grid.dim(2) != cfg.bev.cols)
      throw schema_error(grid_paths[i] + ": grid shape does not match the configured bev spec");
    FeatureGrid fg;
    fg.spec = cfg.bev;
    fg.data = grid;
    frames.push_back({static_cast<std::int64_t>(i), meta.poses[i], std::move(fg)});
  }

  const int channels = frames.empty() ? 0 : frames.front().features.channels();
  Rng rng(cfg.seed);
  TemporalParams params;
  params.gru1 = detail::random_gru(channels, cfg.fusion_kernel, rng);
  params.gru2 = detail::random_gru(channels, cfg.fusion_kernel, rng);
  params.stack = StackParams::passthrough(channels, mode.stack_n);

  std::vector<std::vector<std::int64_t>> selections;
  const std::vector<FeatureGrid> fused = run_sequence(mode, frames, params, cfg.seed, &selections);

  // Cumulative planar travel, so the log can show how far back each pick was.
  std::vector<double> travelled(meta.poses.size(), 0.0);
  for (std::size_t i = 1; i < meta.poses.size(); ++i) {
    const Point3 a = meta.poses[i - 1].t, b = meta.poses[i].t;
    travelled[i] = travelled[i - 1] + std::hypot(b.x - a.x, b.y - a.y);
  }

  detail::make_dirs(out_dir + "/frames");
  json log_frames = json::array();
  for (std::size_t i = 0; i < fused.size(); ++i) {
    save_tensor(out_dir + "/frames/fused_" + detail::frame_tag(i) + ".vmkt", fused[i].data);
    json sel = json::array(), dist = json::array();
    for (std::int64_t id : selections[i]) {
      sel.push_back(id);
      dist.push_back(travelled[i] - travelled[static_cast<std::size_t>(id)]);
    }
    log_frames.push_back(json{{"frame", i}, {"selected", sel}, {"distances", dist}});
    if (verbose) os << "frame " << i << ": fused " << selections[i].size() << " buffered frames\n";
  }
  save_json(out_dir + "/selection_log.json",
            json{{"version", 1}, {"mode", to_string(mode.kind)}, {"frames", log_frames}});
  os << "fused " << fused.size() << " frames (mode " << to_string(mode.kind) << ")\n";
}

// ---------------------------------------------------------------------------

namespace detail {

inline std::int64_t lane_count(const std::vector<MapInstance>& instances) {
  std::int64_t n = 0;
  for (const auto& inst : instances) n += inst.cls == MapClass::LaneSegment ? 1 : 0;
  return n;
}

/// A file without a graph scores zero on topology rather than crashing the
/// matched-pair bookkeeping: substitute an all-zero graph of the right shape.
inline SceneForEval to_eval_view(const MapFile& m) {
  SceneForEval v;
  v.instances = m.instances;
  v.tes = m.tes;
  if (m.graph) {
    v.graph = *m.graph;
  } else {
    const std::int64_t l = lane_count(m.instances);
    v.graph.ll_scores = Tensor({l, l});
    v.graph.lt_scores = Tensor({l, static_cast<std::int64_t>(m.tes.size())});
  }
  return v;
}

}  // namespace detail

inline void cmd_eval(const RunConfig& cfg, const std::string& pred_path,
                     const std::string& gt_path, const std::string& out_dir, std::ostream& os) {
  const MapFile pred = load_map(pred_path);
  const MapFile gt = load_map(gt_path);
  const EvalReport report =
      evaluate_scene(detail::to_eval_view(pred), detail::to_eval_view(gt), cfg.eval);

  detail::make_dirs(out_dir);
  save_json(out_dir + "/report.json", to_json(report));
  detail::atomic_write(out_dir + "/report.txt", report_text(report));
  detail::atomic_write(out_dir + "/pr_curves.csv", pr_curves_csv(report));
  os << report_text(report);
}

// ---------------------------------------------------------------------------

inline void cmd_ensemble(const RunConfig& cfg, const std::vector<std::string>& pred_paths,
                         const std::string& out_dir, std::ostream& os) {
  if (pred_paths.empty()) throw std::invalid_argument("ensemble: need at least one file");
  std::vector<MapFile> models;
  for (const std::string& p : pred_paths) models.push_back(load_map(p));

  // Rank order follows the argument order. Accepted counts come from prefix
  // runs; the pass over earlier ranks never depends on later ones.
  std::vector<std::vector<MapInstance>> ranked;
  std::vector<std::size_t> accepted;
  std::size_t prev = 0;
  std::vector<MapInstance> merged;
  for (const MapFile& m : models) {
    ranked.push_back(m.instances);
    merged = ensemble_instances(ranked, cfg.ensemble_tau, cfg.ensemble_penalty);
    accepted.push_back(merged.size() - prev);
    prev = merged.size();
  }

  detail::make_dirs(out_dir);
  save_map(out_dir + "/ensemble.json", MapFile{merged, models.front().tes, std::nullopt});
  for (std::size_t r = 0; r < accepted.size(); ++r) {
    os << "model " << r << ": " << accepted[r] << "/" << models[r].instances.size()
       << " accepted\n";
  }
  os << "merged: " << merged.size() << " instances\n";
}

// ---------------------------------------------------------------------------

namespace detail {

struct TopoSceneView {
  TopoSample sample;
  Tensor gt_ll_f, gt_lt_f;  // float copies for the metric helpers
};

inline TopoSceneView topo_view(const Scene& scene, const RunConfig& cfg) {
  SequenceConfig one = cfg.sequence;
  one.frames = 1;
  const Sequence seq = gen_sequence(scene, one);
  const SceneForEval view = scene_at_pose(scene, seq.poses.front(), seq.cameras.front());

  TopoSceneView out;
  for (const MapInstance& inst : view.instances) {
    if (inst.cls != MapClass::LaneSegment) continue;
    out.sample.lanes.push_back(
        resample_uniform(inst.geometry, static_cast<std::size_t>(cfg.topo.lane_points)));
  }
  out.sample.tes = view.tes;
  const std::int64_t l = view.graph.ll_scores.dim(0);
  const std::int64_t t = view.graph.lt_scores.dim(1);
  if (l != static_cast<std::int64_t>(out.sample.lanes.size()))
    throw schema_error("scene: graph size does not match lane count");
  out.sample.gt_ll = TensorT<double>({l, l});
  out.sample.gt_lt = TensorT<double>({l, t});
  for (std::int64_t i = 0; i < l; ++i) {
    for (std::int64_t k = 0; k < l; ++k)
      out.sample.gt_ll.at2(i, k) = view.graph.ll_scores.at2(i, k) > 0.5f ? 1.0 : 0.0;
    for (std::int64_t k = 0; k < t; ++k)
      out.sample.gt_lt.at2(i, k) = view.graph.lt_scores.at2(i, k) > 0.5f ? 1.0 : 0.0;
  }
  out.gt_ll_f = view.graph.ll_scores;
  out.gt_lt_f = view.graph.lt_scores;
  return out;
}

}  // namespace detail

inline void cmd_topo_train(const RunConfig& cfg, const std::vector<std::string>& scene_paths,
                           const std::string& out_dir, std::ostream& os) {
  if (scene_paths.empty()) throw std::invalid_argument("topo train: need scene files");
  std::vector<TopoSample> dataset;
  for (const std::string& p : scene_paths)
    dataset.push_back(detail::topo_view(scene_from_json(load_json(p)), cfg).sample);

  const TopoTrainResult result = train_topo(dataset, cfg.topo);
  detail::make_dirs(out_dir);
  save_topo_params(out_dir + "/topo_params", result.params);
  os << "trained on " << dataset.size() << " scenes, loss " << result.loss_curve.front()
     << " -> " << result.loss_curve.back() << "\n";
}

inline void cmd_topo_eval(const RunConfig& cfg, const std::string& params_dir,
                          const std::vector<std::string>& scene_paths, const std::string& out_dir,
                          std::ostream& os) {
  if (scene_paths.empty()) throw std::invalid_argument("topo eval: need scene files");
  const TopoHeadParams params = load_topo_params(params_dir);

  std::int64_t correct = 0, total = 0;
  double ll_sum = 0, lt_sum = 0;
  std::int64_t ll_n = 0, lt_n = 0;
  for (const std::string& p : scene_paths) {
    const detail::TopoSceneView view = detail::topo_view(scene_from_json(load_json(p)), cfg);
    const TopologyGraph inferred =
        infer_topology(params, view.sample.lanes, view.sample.tes, cfg.topo.image_w,
                       cfg.topo.image_h, cfg.topo.norm_scale, cfg.eval.topology_threshold);
    const std::int64_t l = inferred.ll_scores.dim(0);
    const std::int64_t t = inferred.lt_scores.dim(1);
    for (std::int64_t i = 0; i < l; ++i) {
      for (std::int64_t k = 0; k < l; ++k) {
        if (i == k) continue;
        const bool hit = inferred.ll_scores.at2(i, k) >= inferred.threshold;
        correct += hit == (view.sample.gt_ll.at2(i, k) > 0.5) ? 1 : 0;
        ++total;
      }
      for (std::int64_t k = 0; k < t; ++k) {
        const bool hit = inferred.lt_scores.at2(i, k) >= inferred.threshold;
        correct += hit == (view.sample.gt_lt.at2(i, k) > 0.5) ? 1 : 0;
        ++total;
      }
    }
    std::vector<std::pair<int, int>> lane_pairs, te_pairs;
    for (std::int64_t i = 0; i < l; ++i) lane_pairs.emplace_back(static_cast<int>(i), static_cast<int>(i));
    for (std::int64_t i = 0; i < t; ++i) te_pairs.emplace_back(static_cast<int>(i), static_cast<int>(i));
    if (auto s = top_ll_score(inferred.ll_scores, view.gt_ll_f, lane_pairs)) {
      ll_sum += *s;
      ++ll_n;
    }
    if (auto s = top_lt_score(inferred.lt_scores, view.gt_lt_f, lane_pairs, te_pairs)) {
      lt_sum += *s;
      ++lt_n;
    }
  }

  const double accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 1.0;
  json summary{{"version", 1},
               {"pair_accuracy", accuracy},
               {"top_ll", ll_n > 0 ? json(ll_sum / ll_n) : json(nullptr)},
               {"top_lt", lt_n > 0 ? json(lt_sum / lt_n) : json(nullptr)}};
  detail::make_dirs(out_dir);
  save_json(out_dir + "/topo_eval.json", summary);
  os << "pair_accuracy " << accuracy << "\n";
  if (ll_n > 0) os << "top_ll " << ll_sum / ll_n << "\n";
  if (lt_n > 0) os << "top_lt " << lt_sum / lt_n << "\n";
}

}  // namespace vmk
