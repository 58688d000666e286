#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vmk/common.hpp"
#include "vmk/elements.hpp"
#include "vmk/geom.hpp"
#include "vmk/tensor.hpp"
#include "vmk/view_transform.hpp"

namespace vmk {

/// Minimum over the class's equivalent point orderings of the mean pointwise
/// L1 distance in 3D. Returns the loss and the ordering that achieves it.
inline std::pair<double, std::vector<int>> point2point_loss(const MapInstance& pred,
                                                            const MapInstance& gt) {
  if (pred.cls != gt.cls) throw std::invalid_argument("point2point_loss: class mismatch");
  const std::size_t n = pred.geometry.points.size();
  if (n != gt.geometry.points.size() || n == 0)
    throw std::invalid_argument("point2point_loss: point count mismatch");
  const std::vector<std::vector<int>> perms = equivalent_permutations(gt);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (std::size_t pi = 0; pi < perms.size(); ++pi) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Point3& a = pred.geometry.points[i];
      const Point3& b = gt.geometry.points[static_cast<std::size_t>(perms[pi][i])];
      acc += norm1(a - b);
    }
    const double loss = acc / static_cast<double>(n);
    if (loss < best) {
      best = loss;
      best_idx = pi;
    }
  }
  return {best, perms[best_idx]};
}

namespace detail {

inline std::vector<Point3> edge_vectors(const std::vector<Point3>& pts, bool closed) {
  std::vector<Point3> edges;
  const std::size_t n = pts.size();
  edges.reserve(n);
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back(pts[i + 1] - pts[i]);
  if (closed && n > 2) edges.push_back(pts[0] - pts[n - 1]);
  return edges;
}

inline std::vector<Point3> apply_perm(const Polyline& p, const std::vector<int>& perm) {
  if (perm.size() != p.points.size())
    throw std::invalid_argument("permutation length must match point count");
  std::vector<Point3> out(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const int src = perm[i];
    if (src < 0 || static_cast<std::size_t>(src) >= p.points.size())
      throw std::invalid_argument("permutation index out of range");
    out[i] = p.points[static_cast<std::size_t>(src)];
  }
  return out;
}

}  // namespace detail

/// Mean (1 - cosine similarity) between corresponding edge vectors of the
/// prediction and the permuted ground truth. Edge pairs where either side is
/// zero length are skipped.
inline double edge_direction_loss(const MapInstance& pred, const MapInstance& gt,
                                  const std::vector<int>& perm) {
  const std::vector<Point3> gp = detail::apply_perm(gt.geometry, perm);
  const std::vector<Point3> pe = detail::edge_vectors(pred.geometry.points, pred.geometry.closed);
  const std::vector<Point3> ge = detail::edge_vectors(gp, gt.geometry.closed);
  if (pe.size() != ge.size()) throw std::invalid_argument("edge_direction_loss: edge count mismatch");
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < pe.size(); ++i) {
    const double np = norm(pe[i]);
    const double ng = norm(ge[i]);
    if (np < 1e-12 || ng < 1e-12) continue;
    acc += 1.0 - dot(pe[i], ge[i]) / (np * ng);
    ++used;
  }
  if (used == 0) throw degenerate_geometry_error("edge_direction_loss: all edges degenerate");
  return acc / static_cast<double>(used);
}

/// Mean euclidean distance between corresponding 3D edge displacement
/// vectors. Translation-invariant (only the shape matters) and unchanged
/// when both polylines rotate together.
inline double geometric3d_loss(const MapInstance& pred, const MapInstance& gt,
                               const std::vector<int>& perm) {
  if (pred.geometry.points.size() < 2)
    throw std::invalid_argument("geometric3d_loss: need >= 2 points");
  const std::vector<Point3> gp = detail::apply_perm(gt.geometry, perm);
  const std::vector<Point3> pe = detail::edge_vectors(pred.geometry.points, pred.geometry.closed);
  const std::vector<Point3> ge = detail::edge_vectors(gp, gt.geometry.closed);
  if (pe.size() != ge.size()) throw std::invalid_argument("geometric3d_loss: edge count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pe.size(); ++i) acc += norm(pe[i] - ge[i]);
  return acc / static_cast<double>(pe.size());
}

/// Multi-label focal loss over per-class probabilities: the true class
/// contributes -alpha (1-p)^gamma ln p, every other class contributes
/// -(1-alpha) p^gamma ln(1-p). Summed over classes, averaged over instances.
inline double focal_loss(const Tensor& scores, const std::vector<int>& labels, double gamma = 2.0,
                         double alpha = 0.25) {
  if (scores.rank() != 2) throw std::invalid_argument("focal_loss: expected scores[N,K]");
  const std::int64_t n = scores.dim(0), k = scores.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw std::invalid_argument("focal_loss: label count mismatch");
  if (n == 0) return 0.0;
  constexpr double kEps = 1e-12;
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] < 0 || labels[static_cast<std::size_t>(i)] >= k)
      throw std::invalid_argument("focal_loss: label out of range");
    for (std::int64_t j = 0; j < k; ++j) {
      const double p = scores.at2(i, j);
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("focal_loss: probability out of [0,1]");
      if (j == labels[static_cast<std::size_t>(i)]) {
        acc += -alpha * std::pow(1.0 - p, gamma) * std::log(std::max(p, kEps));
      } else {
        acc += -(1.0 - alpha) * std::pow(p, gamma) * std::log(std::max(1.0 - p, kEps));
      }
    }
  }
  return acc / static_cast<double>(n);
}

struct DepthLoss {
  double loss = 0.0;
  std::int64_t valid_pixels = 0;
};

/// Cross-entropy between a categorical depth distribution and binned lidar
/// depth, averaged over pixels that actually have an in-range return.
inline DepthLoss depth_ce_loss(const Tensor& pred_dist, const DepthMap& target,
                               const DepthBins& bins) {
  if (pred_dist.rank() != 3) throw std::invalid_argument("depth_ce_loss: expected [D,h,w]");
  if (pred_dist.dim(0) != bins.count() || pred_dist.dim(1) != target.depth.dim(0) ||
      pred_dist.dim(2) != target.depth.dim(1))
    throw std::invalid_argument("depth_ce_loss: distribution/target shape mismatch");
  constexpr double kEps = 1e-12;
  DepthLoss out;
  double acc = 0.0;
  const std::int64_t h = target.depth.dim(0), w = target.depth.dim(1);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      const float d = target.depth.at2(r, c);
      if (d <= 0.0f) continue;
      const BinIndex bin = depth_to_bins(d, bins);
      if (!bin.valid) continue;
      acc += -std::log(std::max(static_cast<double>(pred_dist.at3(bin.index, r, c)), kEps));
      ++out.valid_pixels;
    }
  }
  out.loss = out.valid_pixels > 0 ? acc / static_cast<double>(out.valid_pixels) : 0.0;
  return out;
}

namespace detail {

inline void mark_dilated(Tensor& mask, int ch, int r, int c, int radius) {
  const int rows = static_cast<int>(mask.dim(1));
  const int cols = static_cast<int>(mask.dim(2));
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      const int rr = r + dr, cc = c + dc;
      if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
      mask.at3(ch, rr, cc) = 1.0f;
    }
  }
}

}  // namespace detail

/// Binary per-class occupancy raster. Open (and closed non-area) geometry is
/// traced segment by segment and dilated by `thickness` cells; pedestrian
/// crossings are filled with even-odd containment of cell centers.
inline Tensor rasterize(const std::vector<MapInstance>& instances, const BevGridSpec& spec,
                        int thickness = 1) {
  if (thickness < 1) throw std::invalid_argument("rasterize: thickness must be >= 1");
  Tensor mask({kNumMapClasses, spec.rows, spec.cols});
  const double step = 0.25 * std::min(spec.cell_w(), spec.cell_h());
  for (const auto& inst : instances) {
    const int ch = static_cast<int>(inst.cls);
    const auto& pts = inst.geometry.points;
    if (inst.cls == MapClass::PedCrossing && pts.size() >= 3) {
      double xmin = pts[0].x, xmax = pts[0].x, ymin = pts[0].y, ymax = pts[0].y;
      for (const auto& p : pts) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
      }
      for (int r = 0; r < spec.rows; ++r) {
        const double y = spec.cell_center_y(r);
        if (y < ymin || y > ymax) continue;
        for (int c = 0; c < spec.cols; ++c) {
          const double x = spec.cell_center_x(c);
          if (x < xmin || x > xmax) continue;
          if (point_in_polygon_xy(x, y, pts)) mask.at3(ch, r, c) = 1.0f;
        }
      }
      continue;
    }
    const std::size_t n = pts.size();
    if (n < 2) continue;
    const std::size_t nseg = inst.geometry.closed ? n : n - 1;
    for (std::size_t s = 0; s < nseg; ++s) {
      const Point3& a = pts[s];
      const Point3& b = pts[(s + 1) % n];
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      const int substeps = std::max(1, static_cast<int>(std::ceil(len / step)));
      for (int i = 0; i <= substeps; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(substeps);
        const double x = a.x + (b.x - a.x) * t;
        const double y = a.y + (b.y - a.y) * t;
        if (!spec.contains(x, y)) continue;
        const auto [r, c] = spec.cell_of(x, y);
        detail::mark_dilated(mask, ch, r, c, thickness);
      }
    }
  }
  return mask;
}

struct SegLoss {
  double bce = 0.0;
  double dice = 0.0;
  double total = 0.0;
};

/// Equal-weight sum of mean binary cross-entropy and dice loss
/// (1 - 2|P∩G|/(|P|+|G|), smoothed by 1).
inline SegLoss seg_loss(const Tensor& pred, const Tensor& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("seg_loss: shape mismatch");
  if (pred.numel() == 0) throw std::invalid_argument("seg_loss: empty masks");
  constexpr double kEps = 1e-12;
  constexpr double kSmooth = 1.0;
  double bce = 0.0, inter = 0.0, psum = 0.0, gsum = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double p = pred.data[i];
    const double y = gt.data[i];
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("seg_loss: probability out of [0,1]");
    bce += -(y * std::log(std::max(p, kEps)) + (1.0 - y) * std::log(std::max(1.0 - p, kEps)));
    inter += p * y;
    psum += p;
    gsum += y;
  }
  SegLoss out;
  out.bce = bce / static_cast<double>(pred.numel());
  out.dice = 1.0 - (2.0 * inter + kSmooth) / (psum + gsum + kSmooth);
  out.total = out.bce + out.dice;
  return out;
}

}  // namespace vmk
