// End-to-end tour of the library: synthesize a drive, fuse BEV features over
// time, canonicalize and score a degraded prediction, train the topology head
// on ground truth, and merge two ranked models.

#include <cstdint>
#include <iostream>
#include <string>

#include "vmk/commands.hpp"

using namespace vmk;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 7;

  SceneConfig scene_cfg;
  scene_cfg.extent = 60;
  scene_cfg.segment_len = 20;
  scene_cfg.intersections = 1;
  const Scene scene = gen_scene(seed, scene_cfg);
  std::cout << "scene " << seed << ": " << scene.instances.size() << " instances, "
            << scene.anchors.size() << " anchors\n";

  SequenceConfig seq_cfg;
  seq_cfg.frames = 30;
  seq_cfg.lidar.azimuths = 60;
  seq_cfg.lidar.rings = 6;
  const Sequence seq = gen_sequence(scene, seq_cfg);

  BevGridSpec spec;
  spec.rows = 50;
  spec.cols = 100;
  spec.x_min = -25;
  spec.x_max = 25;
  spec.y_min = -12.5;
  spec.y_max = 12.5;

  std::vector<SequenceFrame> frames;
  for (std::size_t i = 0; i < seq.poses.size(); ++i) {
    const LocalCrop crop = local_crop(scene, seq.poses[i], spec.x_min, spec.x_max,
                                      spec.y_min, spec.y_max);
    FeatureGrid fg;
    fg.spec = spec;
    fg.data = rasterize(crop.instances, spec);
    frames.push_back({static_cast<std::int64_t>(i), seq.poses[i], std::move(fg)});
  }

  FusionMode mode;
  mode.kind = FusionKind::StreamingStacking;
  mode.testing_phase = true;
  mode.test_strides = {2, 4, 6, 8};
  Rng rng(seed);
  TemporalParams params;
  params.gru1 = detail::random_gru(kNumMapClasses, 3, rng);
  params.gru2 = detail::random_gru(kNumMapClasses, 3, rng);
  params.stack = StackParams::passthrough(kNumMapClasses, mode.stack_n);
  std::vector<std::vector<std::int64_t>> selections;
  const std::vector<FeatureGrid> fused = run_sequence(mode, frames, params, seed, &selections);
  double mass = 0;
  for (float v : fused.back().data.data) mass += v;
  std::cout << "fused " << fused.size() << " frames; last frame stacked "
            << selections.back().size() << " history frames, feature mass " << mass << "\n";

  // Degrade the ground truth into a "prediction": jitter geometry, drop one
  // element, and re-canonicalize the point counts.
  const SceneForEval gt = scene_at_pose(scene, seq.poses.front(), seq.cameras.front());
  SceneForEval pred = gt;
  pred.instances.pop_back();
  pred.graph.ll_scores = Tensor(gt.graph.ll_scores.shape);
  pred.graph.lt_scores = Tensor(gt.graph.lt_scores.shape);
  for (std::size_t i = 0; i < gt.graph.ll_scores.data.size(); ++i)
    pred.graph.ll_scores.data[i] = gt.graph.ll_scores.data[i] * 0.9f;
  for (std::size_t i = 0; i < gt.graph.lt_scores.data.size(); ++i)
    pred.graph.lt_scores.data[i] = gt.graph.lt_scores.data[i] * 0.9f;
  for (auto& inst : pred.instances) {
    for (auto& p : inst.geometry.points) {
      p.x += rng.uniform(-0.3, 0.3);
      p.y += rng.uniform(-0.3, 0.3);
    }
    if (inst.lane) inst.lane->centerline = inst.geometry;
    inst = canonicalize_instance(inst);
    inst.score = 0.9;
  }
  const EvalReport report = evaluate_scene(pred, gt, EvalConfig{});
  std::cout << "degraded prediction scores:\n" << report_text(report);

  // Fit the topology head on the scene's own ground truth and read it back.
  TopoTrainConfig topo_cfg;
  topo_cfg.d = 8;
  topo_cfg.hidden = 16;
  topo_cfg.epochs = 150;
  topo_cfg.lane_points = 6;
  std::vector<TopoSample> dataset;
  TopoSample sample;
  for (const MapInstance& inst : gt.instances) {
    if (inst.cls != MapClass::LaneSegment) continue;
    sample.lanes.push_back(resample_uniform(inst.geometry, 6));
  }
  sample.tes = gt.tes;
  const std::int64_t l = static_cast<std::int64_t>(sample.lanes.size());
  sample.gt_ll = TensorT<double>({l, l});
  sample.gt_lt = TensorT<double>({l, static_cast<std::int64_t>(sample.tes.size())});
  for (std::int64_t i = 0; i < l; ++i) {
    for (std::int64_t j = 0; j < l; ++j)
      sample.gt_ll.at2(i, j) = gt.graph.ll_scores.at2(i, j) > 0.5f ? 1.0 : 0.0;
    for (std::int64_t j = 0; j < sample.gt_lt.dim(1); ++j)
      sample.gt_lt.at2(i, j) = gt.graph.lt_scores.at2(i, j) > 0.5f ? 1.0 : 0.0;
  }
  dataset.push_back(sample);
  const TopoTrainResult trained = train_topo(dataset, topo_cfg);
  std::cout << "topology head: loss " << trained.loss_curve.front() << " -> "
            << trained.loss_curve.back() << " over " << topo_cfg.epochs << " epochs\n";

  // Two ranked models with complementary coverage beat either one alone.
  std::vector<MapInstance> model_a(pred.instances.begin(),
                                   pred.instances.begin() + pred.instances.size() / 2);
  std::vector<MapInstance> model_b(pred.instances.begin() + pred.instances.size() / 2,
                                   pred.instances.end());
  const std::vector<MapInstance> merged = ensemble_instances({model_a, model_b});
  const auto solo = det_score(model_a, gt.instances, MapClass::LaneSegment,
                              DistanceFn::DiscreteFrechet, EvalConfig{});
  const auto both = det_score(merged, gt.instances, MapClass::LaneSegment,
                              DistanceFn::DiscreteFrechet, EvalConfig{});
  std::cout << "ensemble: lane det " << (solo ? *solo : 0.0) << " -> " << (both ? *both : 0.0)
            << " after merging the second model\n";
  return 0;
}
