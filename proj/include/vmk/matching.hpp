#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "vmk/elements.hpp"
#include "vmk/losses.hpp"
#include "vmk/tensor.hpp"

namespace vmk {

struct CostWeights {
  double lambda_cls = 2.0;
  double lambda_pts = 5.0;
};

inline void validate(const CostWeights& w) {
  if (w.lambda_cls < 0 || w.lambda_pts < 0)
    throw std::invalid_argument("cost weights must be nonnegative");
  if (w.lambda_cls == 0 && w.lambda_pts == 0)
    throw std::invalid_argument("cost weights must not both be zero");
}

/// One-to-one pairing between prediction and ground-truth indices.
struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (pred, gt)
  std::vector<int> unmatched_preds;
  std::vector<int> unmatched_gts;
  double total_cost = 0.0;
};

/// Minimum-cost one-to-one assignment of min(P,G) pairs via the potentials
/// form of the Hungarian algorithm (O(n^2 m)).
inline Assignment hungarian(const TensorT<double>& cost) {
  if (cost.rank() != 2) throw std::invalid_argument("hungarian: expected cost[P,G]");
  const std::int64_t p64 = cost.dim(0), g64 = cost.dim(1);
  Assignment out;
  if (p64 == 0 || g64 == 0) {
    for (std::int64_t i = 0; i < p64; ++i) out.unmatched_preds.push_back(static_cast<int>(i));
    for (std::int64_t j = 0; j < g64; ++j) out.unmatched_gts.push_back(static_cast<int>(j));
    return out;
  }
  for (double v : cost.data) {
    if (!std::isfinite(v)) throw std::invalid_argument("hungarian: costs must be finite");
  }
  const bool transposed = p64 > g64;
  const int n = static_cast<int>(transposed ? g64 : p64);
  const int m = static_cast<int>(transposed ? p64 : g64);
  auto a = [&](int i, int j) -> double {
    return transposed ? cost.at2(j - 1, i - 1) : cost.at2(i - 1, j - 1);
  };

  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(m) + 1, 0);  // row matched to column j
  std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = a(i0, j) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<char> pred_used(static_cast<std::size_t>(p64), 0);
  std::vector<char> gt_used(static_cast<std::size_t>(g64), 0);
  for (int j = 1; j <= m; ++j) {
    const int i = match[static_cast<std::size_t>(j)];
    if (i == 0) continue;
    const int pred = transposed ? j - 1 : i - 1;
    const int gt = transposed ? i - 1 : j - 1;
    out.pairs.emplace_back(pred, gt);
    out.total_cost += cost.at2(pred, gt);
    pred_used[static_cast<std::size_t>(pred)] = 1;
    gt_used[static_cast<std::size_t>(gt)] = 1;
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  for (std::int64_t i = 0; i < p64; ++i) {
    if (!pred_used[static_cast<std::size_t>(i)]) out.unmatched_preds.push_back(static_cast<int>(i));
  }
  for (std::int64_t j = 0; j < g64; ++j) {
    if (!gt_used[static_cast<std::size_t>(j)]) out.unmatched_gts.push_back(static_cast<int>(j));
  }
  return out;
}

/// Matches predictions to ground truth per class with
/// cost = lambda_cls*(1 - score) + lambda_pts*point2point. Cross-class pairs
/// never match; instances left over in either set are reported unmatched.
inline Assignment match_instances(const std::vector<MapInstance>& preds,
                                  const std::vector<MapInstance>& gts, const CostWeights& weights) {
  validate(weights);
  Assignment out;
  std::vector<char> pred_used(preds.size(), 0);
  std::vector<char> gt_used(gts.size(), 0);
  for (int cls = 0; cls < kNumMapClasses; ++cls) {
    std::vector<int> pi, gi;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (static_cast<int>(preds[i].cls) == cls) pi.push_back(static_cast<int>(i));
    }
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (static_cast<int>(gts[j].cls) == cls) gi.push_back(static_cast<int>(j));
    }
    if (pi.empty() || gi.empty()) continue;
    TensorT<double> cost({static_cast<std::int64_t>(pi.size()), static_cast<std::int64_t>(gi.size())});
    for (std::size_t a = 0; a < pi.size(); ++a) {
      for (std::size_t b = 0; b < gi.size(); ++b) {
        const MapInstance& p = preds[static_cast<std::size_t>(pi[a])];
        const MapInstance& g = gts[static_cast<std::size_t>(gi[b])];
        cost.at2(static_cast<std::int64_t>(a), static_cast<std::int64_t>(b)) =
            weights.lambda_cls * (1.0 - p.score) +
            weights.lambda_pts * point2point_loss(p, g).first;
      }
    }
    const Assignment sub = hungarian(cost);
    for (const auto& [a, b] : sub.pairs) {
      out.pairs.emplace_back(pi[static_cast<std::size_t>(a)], gi[static_cast<std::size_t>(b)]);
      out.total_cost += cost.at2(a, b);
      pred_used[static_cast<std::size_t>(pi[static_cast<std::size_t>(a)])] = 1;
      gt_used[static_cast<std::size_t>(gi[static_cast<std::size_t>(b)])] = 1;
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!pred_used[i]) out.unmatched_preds.push_back(static_cast<int>(i));
  }
  for (std::size_t j = 0; j < gts.size(); ++j) {
    if (!gt_used[j]) out.unmatched_gts.push_back(static_cast<int>(j));
  }
  return out;
}

}  // namespace vmk
