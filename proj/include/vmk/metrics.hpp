#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vmk/elements.hpp"
#include "vmk/geom.hpp"
#include "vmk/tensor.hpp"
#include "vmk/topo.hpp"

namespace vmk {

/// Symmetric mean nearest-point distance between two point sets.
inline double chamfer(const Polyline& a, const Polyline& b) {
  if (a.points.empty() || b.points.empty()) throw std::invalid_argument("chamfer: empty polyline");
  auto directed = [](const std::vector<Point3>& from, const std::vector<Point3>& to) {
    double acc = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, distance(p, q));
      acc += best;
    }
    return acc / static_cast<double>(from.size());
  };
  return 0.5 * (directed(a.points, b.points) + directed(b.points, a.points));
}

/// Discrete Fréchet distance by dynamic programming over point indices.
inline double discrete_frechet(const Polyline& a, const Polyline& b) {
  const std::size_t n = a.points.size(), m = b.points.size();
  if (n == 0 || m == 0) throw std::invalid_argument("discrete_frechet: empty polyline");
  std::vector<double> prev(m), cur(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double d = distance(a.points[0], b.points[j]);
    prev[j] = j == 0 ? d : std::max(prev[j - 1], d);
  }
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = distance(a.points[i], b.points[j]);
      double reach = prev[j];
      if (j > 0) reach = std::min(reach, std::min(prev[j - 1], cur[j - 1]));
      cur[j] = std::max(reach, d);
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

enum class DistanceFn { Chamfer, DiscreteFrechet };

inline double instance_distance(const MapInstance& a, const MapInstance& b, DistanceFn fn) {
  return fn == DistanceFn::Chamfer ? chamfer(a.geometry, b.geometry)
                                   : discrete_frechet(a.geometry, b.geometry);
}

struct PrPoint {
  double score = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

namespace detail {

struct ScoredFlag {
  double score;
  bool tp;
};

/// All-points interpolated area under the precision-recall curve.
inline double ap_all_points(std::vector<ScoredFlag> flags, std::size_t n_gt,
                            std::vector<PrPoint>* curve = nullptr) {
  std::stable_sort(flags.begin(), flags.end(),
                   [](const ScoredFlag& x, const ScoredFlag& y) { return x.score > y.score; });
  std::vector<double> precision(flags.size()), recall(flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i].tp) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  if (curve) {
    curve->clear();
    for (std::size_t i = 0; i < flags.size(); ++i) {
      curve->push_back({flags[i].score, precision[i], recall[i]});
    }
  }
  double ap = 0.0;
  double best_p = 0.0;
  for (std::size_t i = flags.size(); i-- > 0;) {
    best_p = std::max(best_p, precision[i]);
    const double r_prev = i == 0 ? 0.0 : recall[i - 1];
    if (recall[i] > r_prev) ap += (recall[i] - r_prev) * best_p;
  }
  return ap;
}

}  // namespace detail

/// Greedy score-descending matching of same-class instances: each prediction
/// takes the nearest still-unmatched ground truth within the threshold.
/// Returns (pred index, gt index) pairs using indices into the full lists.
inline std::vector<std::pair<int, int>> greedy_match(const std::vector<MapInstance>& preds,
                                                     const std::vector<MapInstance>& gts,
                                                     MapClass cls, DistanceFn fn,
                                                     double threshold) {
  std::vector<int> pi, gi;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].cls == cls) pi.push_back(static_cast<int>(i));
  }
  for (std::size_t j = 0; j < gts.size(); ++j) {
    if (gts[j].cls == cls) gi.push_back(static_cast<int>(j));
  }
  std::stable_sort(pi.begin(), pi.end(), [&](int a, int b) {
    return preds[static_cast<std::size_t>(a)].score > preds[static_cast<std::size_t>(b)].score;
  });
  std::vector<char> taken(gi.size(), 0);
  std::vector<std::pair<int, int>> pairs;
  for (int p : pi) {
    int best = -1;
    double best_d = threshold;
    for (std::size_t j = 0; j < gi.size(); ++j) {
      if (taken[j]) continue;
      const double d = instance_distance(preds[static_cast<std::size_t>(p)],
                                         gts[static_cast<std::size_t>(gi[j])], fn);
      if (d <= best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = 1;
      pairs.emplace_back(p, gi[static_cast<std::size_t>(best)]);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

/// Average precision for one class at one distance threshold. A class with
/// no ground truth is absent (nullopt), not zero.
inline std::optional<double> detection_ap(const std::vector<MapInstance>& preds,
                                          const std::vector<MapInstance>& gts, MapClass cls,
                                          DistanceFn fn, double threshold,
                                          std::vector<PrPoint>* curve = nullptr) {
  std::vector<int> pi, gi;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].cls == cls) pi.push_back(static_cast<int>(i));
  }
  for (std::size_t j = 0; j < gts.size(); ++j) {
    if (gts[j].cls == cls) gi.push_back(static_cast<int>(j));
  }
  if (gi.empty()) return std::nullopt;
  std::stable_sort(pi.begin(), pi.end(), [&](int a, int b) {
    return preds[static_cast<std::size_t>(a)].score > preds[static_cast<std::size_t>(b)].score;
  });
  std::vector<char> taken(gi.size(), 0);
  std::vector<detail::ScoredFlag> flags;
  flags.reserve(pi.size());
  for (int p : pi) {
    int best = -1;
    double best_d = threshold;
    for (std::size_t j = 0; j < gi.size(); ++j) {
      if (taken[j]) continue;
      const double d = instance_distance(preds[static_cast<std::size_t>(p)],
                                         gts[static_cast<std::size_t>(gi[j])], fn);
      if (d <= best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) taken[static_cast<std::size_t>(best)] = 1;
    flags.push_back({preds[static_cast<std::size_t>(p)].score, best >= 0});
  }
  return detail::ap_all_points(std::move(flags), gi.size(), curve);
}

struct EvalConfig {
  std::vector<double> thresholds = {1.0, 2.0, 3.0};       // meters, map classes
  std::vector<double> iou_thresholds = {0.5, 0.75};       // traffic element boxes
  double topology_threshold = 0.5;
  std::array<double, 5> uniscore_weights = {1, 1, 1, 1, 1};  // DET_l, DET_a, DET_t, TOP_ll, TOP_lt
};

inline void validate(const EvalConfig& cfg) {
  for (const std::vector<double>* ts : {&cfg.thresholds, &cfg.iou_thresholds}) {
    if (ts->empty()) throw std::invalid_argument("eval config: thresholds must be nonempty");
    double prev = 0.0;
    for (double t : *ts) {
      if (!(t > prev)) throw std::invalid_argument("eval config: thresholds must be positive ascending");
      prev = t;
    }
  }
  if (!(cfg.topology_threshold >= 0 && cfg.topology_threshold <= 1))
    throw std::invalid_argument("eval config: topology threshold out of [0,1]");
}

/// Mean AP over the distance thresholds for one class; absent if the class
/// has no ground truth.
inline std::optional<double> det_score(const std::vector<MapInstance>& preds,
                                       const std::vector<MapInstance>& gts, MapClass cls,
                                       DistanceFn fn, const EvalConfig& cfg) {
  double acc = 0.0;
  for (double t : cfg.thresholds) {
    const std::optional<double> ap = detection_ap(preds, gts, cls, fn, t);
    if (!ap) return std::nullopt;
    acc += *ap;
  }
  return acc / static_cast<double>(cfg.thresholds.size());
}

/// Mean det_score over the classes of a group that are present in the ground
/// truth; absent when none are.
inline std::optional<double> det_group_score(const std::vector<MapInstance>& preds,
                                             const std::vector<MapInstance>& gts,
                                             const std::vector<MapClass>& classes, DistanceFn fn,
                                             const EvalConfig& cfg) {
  double acc = 0.0;
  int present = 0;
  for (MapClass cls : classes) {
    const std::optional<double> s = det_score(preds, gts, cls, fn, cfg);
    if (!s) continue;
    acc += *s;
    ++present;
  }
  if (present == 0) return std::nullopt;
  return acc / present;
}

inline std::vector<MapClass> lane_like_classes() {
  return {MapClass::LaneSegment, MapClass::Divider, MapClass::Boundary};
}

inline std::vector<MapClass> area_classes() {
  return {MapClass::PedCrossing, MapClass::RoadBoundaryArea};
}

inline double box_iou(const TrafficElement& a, const TrafficElement& b) {
  const double iw = std::min(a.u2, b.u2) - std::max(a.u1, b.u1);
  const double ih = std::min(a.v2, b.v2) - std::max(a.v1, b.v1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (a.u2 - a.u1) * (a.v2 - a.v1);
  const double area_b = (b.u2 - b.u1) * (b.v2 - b.v1);
  return inter / (area_a + area_b - inter);
}

/// AP for one traffic-element category at one IoU threshold.
inline std::optional<double> detection_ap_boxes(const std::vector<TrafficElement>& preds,
                                                const std::vector<TrafficElement>& gts,
                                                int category, double iou_threshold) {
  std::vector<int> pi, gi;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].category == category) pi.push_back(static_cast<int>(i));
  }
  for (std::size_t j = 0; j < gts.size(); ++j) {
    if (gts[j].category == category) gi.push_back(static_cast<int>(j));
  }
  if (gi.empty()) return std::nullopt;
  std::stable_sort(pi.begin(), pi.end(), [&](int a, int b) {
    return preds[static_cast<std::size_t>(a)].score > preds[static_cast<std::size_t>(b)].score;
  });
  std::vector<char> taken(gi.size(), 0);
  std::vector<detail::ScoredFlag> flags;
  for (int p : pi) {
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t j = 0; j < gi.size(); ++j) {
      if (taken[j]) continue;
      const double iou =
          box_iou(preds[static_cast<std::size_t>(p)], gts[static_cast<std::size_t>(gi[j])]);
      if (iou >= best_iou) {
        best_iou = iou;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) taken[static_cast<std::size_t>(best)] = 1;
    flags.push_back({preds[static_cast<std::size_t>(p)].score, best >= 0});
  }
  return detail::ap_all_points(std::move(flags), gi.size(), nullptr);
}

/// Traffic-element detection score: mean AP over (category, IoU threshold)
/// cells for categories present in the ground truth.
inline std::optional<double> det_t_score(const std::vector<TrafficElement>& preds,
                                         const std::vector<TrafficElement>& gts,
                                         const EvalConfig& cfg) {
  std::vector<int> cats;
  for (const auto& g : gts) {
    if (std::find(cats.begin(), cats.end(), g.category) == cats.end()) cats.push_back(g.category);
  }
  if (cats.empty()) return std::nullopt;
  std::sort(cats.begin(), cats.end());
  double acc = 0.0;
  int cells = 0;
  for (int cat : cats) {
    for (double iou : cfg.iou_thresholds) {
      const std::optional<double> ap = detection_ap_boxes(preds, gts, cat, iou);
      if (ap) {
        acc += *ap;
        ++cells;
      }
    }
  }
  if (cells == 0) return std::nullopt;
  return acc / cells;
}

/// IoU-greedy category-respecting pairing of predicted and gt boxes.
inline std::vector<std::pair<int, int>> greedy_match_boxes(const std::vector<TrafficElement>& preds,
                                                           const std::vector<TrafficElement>& gts,
                                                           double iou_threshold) {
  std::vector<int> order(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return preds[static_cast<std::size_t>(a)].score > preds[static_cast<std::size_t>(b)].score;
  });
  std::vector<char> taken(gts.size(), 0);
  std::vector<std::pair<int, int>> pairs;
  for (int p : order) {
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (taken[j] || gts[j].category != preds[static_cast<std::size_t>(p)].category) continue;
      const double iou = box_iou(preds[static_cast<std::size_t>(p)], gts[j]);
      if (iou >= best_iou) {
        best_iou = iou;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = 1;
      pairs.emplace_back(p, best);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

namespace detail {

/// Edge-level AP shared by both topology scores. Predicted edges are every
/// ordered pair with positive score; an edge is true positive when both
/// endpoints are matched instances and the mapped gt edge exists (score >
/// 0.5) and was not already claimed.
inline std::optional<double> edge_ap(const Tensor& pred_scores, const Tensor& gt_scores,
                                     const std::vector<int>& row_map,
                                     const std::vector<int>& col_map, bool skip_diagonal) {
  const std::int64_t gr = gt_scores.dim(0), gc = gt_scores.dim(1);
  std::size_t n_gt = 0;
  for (std::int64_t i = 0; i < gr; ++i) {
    for (std::int64_t j = 0; j < gc; ++j) {
      if (skip_diagonal && i == j) continue;
      if (gt_scores.at2(i, j) > 0.5f) ++n_gt;
    }
  }
  if (n_gt == 0) return std::nullopt;

  struct Edge {
    double score;
    std::int64_t gi, gj;  // mapped gt endpoints, -1 if unmatched
  };
  std::vector<Edge> edges;
  const std::int64_t pr = pred_scores.dim(0), pc = pred_scores.dim(1);
  for (std::int64_t i = 0; i < pr; ++i) {
    for (std::int64_t j = 0; j < pc; ++j) {
      if (skip_diagonal && i == j) continue;
      const double s = pred_scores.at2(i, j);
      if (s <= 0.0) continue;
      const int gi = i < static_cast<std::int64_t>(row_map.size()) ? row_map[static_cast<std::size_t>(i)] : -1;
      const int gj = j < static_cast<std::int64_t>(col_map.size()) ? col_map[static_cast<std::size_t>(j)] : -1;
      edges.push_back({s, gi, gj});
    }
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& a, const Edge& b) { return a.score > b.score; });
  std::vector<char> claimed(static_cast<std::size_t>(gr * gc), 0);
  std::vector<ScoredFlag> flags;
  flags.reserve(edges.size());
  for (const auto& e : edges) {
    bool tp = false;
    if (e.gi >= 0 && e.gj >= 0 && gt_scores.at2(e.gi, e.gj) > 0.5f) {
      std::size_t key = static_cast<std::size_t>(e.gi * gc + e.gj);
      if (!claimed[key]) {
        claimed[key] = 1;
        tp = true;
      }
    }
    flags.push_back({e.score, tp});
  }
  return ap_all_points(std::move(flags), n_gt, nullptr);
}

inline std::vector<int> index_map(const std::vector<std::pair<int, int>>& pairs, std::size_t n) {
  std::vector<int> map(n, -1);
  for (const auto& [p, g] : pairs) {
    if (p >= 0 && static_cast<std::size_t>(p) < n) map[static_cast<std::size_t>(p)] = g;
  }
  return map;
}

}  // namespace detail

/// Lane-lane topology AP given the lane instance assignment from detection
/// matching. Absent when the gt graph has no edges.
inline std::optional<double> top_ll_score(const Tensor& pred_ll, const Tensor& gt_ll,
                                          const std::vector<std::pair<int, int>>& lane_pairs) {
  const std::vector<int> map = detail::index_map(lane_pairs, static_cast<std::size_t>(pred_ll.dim(0)));
  return detail::edge_ap(pred_ll, gt_ll, map, map, true);
}

/// Lane-TE topology AP; rows map through the lane assignment, columns through
/// the traffic-element assignment.
inline std::optional<double> top_lt_score(const Tensor& pred_lt, const Tensor& gt_lt,
                                          const std::vector<std::pair<int, int>>& lane_pairs,
                                          const std::vector<std::pair<int, int>>& te_pairs) {
  const std::vector<int> rmap = detail::index_map(lane_pairs, static_cast<std::size_t>(pred_lt.dim(0)));
  const std::vector<int> cmap = detail::index_map(te_pairs, static_cast<std::size_t>(pred_lt.dim(1)));
  return detail::edge_ap(pred_lt, gt_lt, rmap, cmap, false);
}

struct UniComponents {
  std::optional<double> det_l, det_a, det_t, top_ll, top_lt;
};

/// Weighted mean of the detection scores and the square roots of the
/// topology scores; absent components drop out with their weight.
inline double uniscore(const UniComponents& c, const std::array<double, 5>& weights = {1, 1, 1, 1,
                                                                                       1}) {
  const std::array<std::optional<double>, 5> values = {
      c.det_l, c.det_a, c.det_t,
      c.top_ll ? std::optional<double>(std::sqrt(*c.top_ll)) : std::nullopt,
      c.top_lt ? std::optional<double>(std::sqrt(*c.top_lt)) : std::nullopt};
  double acc = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    if (!values[i]) continue;
    if (weights[i] < 0) throw std::invalid_argument("uniscore: negative weight");
    acc += weights[i] * *values[i];
    wsum += weights[i];
  }
  if (wsum == 0.0) throw std::invalid_argument("uniscore: all components absent");
  return acc / wsum;
}

struct ClassApRow {
  MapClass cls = MapClass::PedCrossing;
  std::vector<std::optional<double>> ap;  // one per threshold
  std::optional<double> mean_ap;
  std::vector<PrPoint> pr_curve;  // at the middle threshold
};

struct EvalReport {
  std::vector<ClassApRow> per_class;
  std::optional<double> det_l, det_a, det_t, top_ll, top_lt;
  std::optional<double> uni;
};

struct SceneForEval {
  std::vector<MapInstance> instances;
  std::vector<TrafficElement> tes;
  TopologyGraph graph;  // lane rows follow LaneSegment order within instances
};

/// Full scene evaluation: per-class AP table, grouped detection scores,
/// topology scores over detection-matched instances, and the aggregate.
inline EvalReport evaluate_scene(const SceneForEval& pred, const SceneForEval& gt,
                                 const EvalConfig& cfg) {
  validate(cfg);
  EvalReport report;
  const double mid = cfg.thresholds[cfg.thresholds.size() / 2];
  for (int c = 0; c < kNumMapClasses; ++c) {
    const MapClass cls = static_cast<MapClass>(c);
    const DistanceFn fn =
        (cls == MapClass::PedCrossing || cls == MapClass::RoadBoundaryArea)
            ? DistanceFn::Chamfer
            : DistanceFn::DiscreteFrechet;
    ClassApRow row;
    row.cls = cls;
    double acc = 0.0;
    bool present = true;
    for (double t : cfg.thresholds) {
      std::vector<PrPoint>* curve = (t == mid) ? &row.pr_curve : nullptr;
      const std::optional<double> ap = detection_ap(pred.instances, gt.instances, cls, fn, t, curve);
      row.ap.push_back(ap);
      if (ap) {
        acc += *ap;
      } else {
        present = false;
      }
    }
    if (present) row.mean_ap = acc / static_cast<double>(cfg.thresholds.size());
    report.per_class.push_back(std::move(row));
  }

  report.det_l = det_group_score(pred.instances, gt.instances, lane_like_classes(),
                                 DistanceFn::DiscreteFrechet, cfg);
  report.det_a =
      det_group_score(pred.instances, gt.instances, area_classes(), DistanceFn::Chamfer, cfg);
  report.det_t = det_t_score(pred.tes, gt.tes, cfg);

  // Topology instance assignment: detection matching at the middle distance
  // threshold for lanes, the lower IoU threshold for traffic elements.
  std::vector<std::pair<int, int>> lane_pairs_global = greedy_match(
      pred.instances, gt.instances, MapClass::LaneSegment, DistanceFn::DiscreteFrechet, mid);
  // Convert instance indices to per-class lane indices used by the graphs.
  auto lane_index = [](const std::vector<MapInstance>& list) {
    std::vector<int> idx(list.size(), -1);
    int next = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].cls == MapClass::LaneSegment) idx[i] = next++;
    }
    return idx;
  };
  const std::vector<int> pred_lane_idx = lane_index(pred.instances);
  const std::vector<int> gt_lane_idx = lane_index(gt.instances);
  std::vector<std::pair<int, int>> lane_pairs;
  for (const auto& [p, g] : lane_pairs_global) {
    lane_pairs.emplace_back(pred_lane_idx[static_cast<std::size_t>(p)],
                            gt_lane_idx[static_cast<std::size_t>(g)]);
  }
  const std::vector<std::pair<int, int>> te_pairs =
      greedy_match_boxes(pred.tes, gt.tes, cfg.iou_thresholds.front());

  report.top_ll = top_ll_score(pred.graph.ll_scores, gt.graph.ll_scores, lane_pairs);
  report.top_lt = top_lt_score(pred.graph.lt_scores, gt.graph.lt_scores, lane_pairs, te_pairs);

  UniComponents c{report.det_l, report.det_a, report.det_t, report.top_ll, report.top_lt};
  const bool any = c.det_l || c.det_a || c.det_t || c.top_ll || c.top_lt;
  if (any) report.uni = uniscore(c, cfg.uniscore_weights);
  return report;
}

}  // namespace vmk
