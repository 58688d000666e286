#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vmk/common.hpp"
#include "vmk/geom.hpp"
#include "vmk/nn.hpp"
#include "vmk/tensor.hpp"

namespace vmk {

/// Camera-space traffic element: pixel-aligned box plus a category id.
struct TrafficElement {
  double u1 = 0, v1 = 0, u2 = 0, v2 = 0;
  int category = 0;
  double score = 1.0;
};

inline void validate(const TrafficElement& te, int k_te) {
  if (!(te.u1 < te.u2) || !(te.v1 < te.v2))
    throw std::invalid_argument("traffic element: box must have positive extent");
  if (te.category < 0 || te.category >= k_te)
    throw std::invalid_argument("traffic element: category out of range");
}

/// Soft adjacency over lane-lane and lane-TE pairs; the ll diagonal carries
/// no meaning and is ignored by every consumer.
struct TopologyGraph {
  Tensor ll_scores;  // [L, L]
  Tensor lt_scores;  // [L, T]
  double threshold = 0.5;
};

inline void validate(const TopologyGraph& g) {
  if (g.ll_scores.rank() != 2 || g.ll_scores.dim(0) != g.ll_scores.dim(1))
    throw std::invalid_argument("topology graph: ll_scores must be square");
  if (g.lt_scores.rank() != 2 || g.lt_scores.dim(0) != g.ll_scores.dim(0))
    throw std::invalid_argument("topology graph: lt_scores row count must match lane count");
  for (const Tensor* t : {&g.ll_scores, &g.lt_scores}) {
    for (float v : t->data) {
      if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("topology graph: score out of [0,1]");
    }
  }
  if (!(g.threshold >= 0.0 && g.threshold <= 1.0))
    throw std::invalid_argument("topology graph: threshold out of [0,1]");
}

struct DecodedGraph {
  std::vector<std::pair<int, int>> ll_edges;
  std::vector<std::pair<int, int>> lt_edges;
};

/// Hard edges at a threshold; ll self-loops dropped.
inline DecodedGraph decode_graph(const Tensor& ll_scores, const Tensor& lt_scores,
                                 double threshold) {
  DecodedGraph g;
  const std::int64_t l = ll_scores.rank() == 2 ? ll_scores.dim(0) : 0;
  for (std::int64_t i = 0; i < l; ++i) {
    for (std::int64_t j = 0; j < l; ++j) {
      if (i != j && ll_scores.at2(i, j) >= threshold)
        g.ll_edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  const std::int64_t t = lt_scores.rank() == 2 ? lt_scores.dim(1) : 0;
  for (std::int64_t i = 0; i < (lt_scores.rank() == 2 ? lt_scores.dim(0) : 0); ++i) {
    for (std::int64_t j = 0; j < t; ++j) {
      if (lt_scores.at2(i, j) >= threshold)
        g.lt_edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return g;
}

/// Relationship head over map tokens: coordinate embeddings, one residual
/// self-attention block, and a pairwise classifier on concatenated token
/// pairs. Double precision throughout so finite-difference checks are clean.
struct TopoHeadParams {
  MlpParamsT<double> lane_mlp;  // 3*P -> D
  MlpParamsT<double> te_mlp;    // 4+K -> D
  MlpParamsT<double> cls_mlp;   // 2D -> 1
  TensorT<double> wq, wk, wv;   // [D, D]

  std::int64_t feature_dim() const { return lane_mlp.output_dim(); }
  std::int64_t lane_points() const { return lane_mlp.input_dim() / 3; }
  int te_categories() const { return static_cast<int>(te_mlp.input_dim() - 4); }
};

inline TopoHeadParams make_topo_head(int lane_points, int k_te, int d, int hidden, Rng& rng) {
  if (lane_points < 2 || k_te < 1 || d < 1 || hidden < 1)
    throw std::invalid_argument("make_topo_head: invalid dimensions");
  TopoHeadParams p;
  p.lane_mlp = make_mlp<double>({3 * static_cast<std::int64_t>(lane_points), hidden, d}, rng);
  p.te_mlp = make_mlp<double>({4 + static_cast<std::int64_t>(k_te), hidden, d}, rng);
  p.cls_mlp = make_mlp<double>({2 * static_cast<std::int64_t>(d), hidden, 1}, rng);
  const double bound = std::sqrt(6.0 / static_cast<double>(2 * d));
  for (TensorT<double>* w : {&p.wq, &p.wk, &p.wv}) {
    *w = TensorT<double>({d, d});
    for (auto& v : w->data) v = rng.uniform(-bound, bound);
  }
  return p;
}

/// Flattened centerline coordinates scaled into roughly [-1,1] by a metric
/// half-extent, one row per lane.
inline TensorT<double> lane_inputs(const std::vector<Polyline>& lanes, std::int64_t lane_points,
                                   double norm_scale) {
  if (!(norm_scale > 0)) throw std::invalid_argument("lane_inputs: norm_scale must be > 0");
  TensorT<double> x({static_cast<std::int64_t>(lanes.size()), 3 * lane_points});
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    if (static_cast<std::int64_t>(lanes[i].points.size()) != lane_points)
      throw std::invalid_argument("lane_inputs: wrong point count");
    for (std::int64_t j = 0; j < lane_points; ++j) {
      const Point3& p = lanes[i].points[static_cast<std::size_t>(j)];
      x.at2(static_cast<std::int64_t>(i), 3 * j + 0) = p.x / norm_scale;
      x.at2(static_cast<std::int64_t>(i), 3 * j + 1) = p.y / norm_scale;
      x.at2(static_cast<std::int64_t>(i), 3 * j + 2) = p.z / norm_scale;
    }
  }
  return x;
}

/// Box center/size normalized by the image, then the category one-hot.
inline TensorT<double> te_inputs(const std::vector<TrafficElement>& tes, int k_te, double image_w,
                                 double image_h) {
  if (!(image_w > 0) || !(image_h > 0)) throw std::invalid_argument("te_inputs: image size must be > 0");
  TensorT<double> x({static_cast<std::int64_t>(tes.size()), 4 + static_cast<std::int64_t>(k_te)});
  for (std::size_t i = 0; i < tes.size(); ++i) {
    validate(tes[i], k_te);
    const TrafficElement& te = tes[i];
    const std::int64_t r = static_cast<std::int64_t>(i);
    x.at2(r, 0) = 0.5 * (te.u1 + te.u2) / image_w;
    x.at2(r, 1) = 0.5 * (te.v1 + te.v2) / image_h;
    x.at2(r, 2) = (te.u2 - te.u1) / image_w;
    x.at2(r, 3) = (te.v2 - te.v1) / image_h;
    x.at2(r, 4 + te.category) = 1.0;
  }
  return x;
}

inline TensorT<double> embed_lane(const Polyline& centerline, const TopoHeadParams& params,
                                  double norm_scale) {
  const TensorT<double> x = lane_inputs({centerline}, params.lane_points(), norm_scale);
  TensorT<double> row = mlp_forward(params.lane_mlp, x).first;
  TensorT<double> out({params.feature_dim()});
  out.data = std::move(row.data);
  return out;
}

inline TensorT<double> embed_te(const TrafficElement& te, const TopoHeadParams& params,
                                double image_w, double image_h) {
  const TensorT<double> x = te_inputs({te}, params.te_categories(), image_w, image_h);
  TensorT<double> row = mlp_forward(params.te_mlp, x).first;
  TensorT<double> out({params.feature_dim()});
  out.data = std::move(row.data);
  return out;
}

namespace detail {

inline TensorT<double> matmul(const TensorT<double>& a, const TensorT<double>& b, bool ta,
                              bool tb) {
  const std::int64_t n = ta ? a.dim(1) : a.dim(0);
  const std::int64_t k = ta ? a.dim(0) : a.dim(1);
  const std::int64_t m = tb ? b.dim(0) : b.dim(1);
  if ((tb ? b.dim(1) : b.dim(0)) != k) throw std::invalid_argument("matmul: inner dim mismatch");
  TensorT<double> y({n, m});
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::int64_t c = 0; c < k; ++c) {
        const double av = ta ? a.at2(c, i) : a.at2(i, c);
        const double bv = tb ? b.at2(j, c) : b.at2(c, j);
        acc += av * bv;
      }
      y.at2(i, j) = acc;
    }
  }
  return y;
}

struct TopoCache {
  MlpCacheT<double> lane_cache, te_cache, cls_cache;
  TensorT<double> tokens0, q, k, v, attn_w, tokens1, pair_in;
  std::int64_t n_lanes = 0, n_tes = 0;
};

}  // namespace detail

struct TopoLogits {
  TensorT<double> ll;  // [L, L]
  TensorT<double> lt;  // [L, T]
};

namespace detail {

/// Forward pass from raw per-token inputs, keeping every intermediate needed
/// for the manual backward pass.
inline TopoLogits topo_forward_impl(const TopoHeadParams& params, const TensorT<double>& lane_in,
                                    const TensorT<double>& te_in, TopoCache* cache) {
  const std::int64_t l = lane_in.dim(0);
  const std::int64_t t = te_in.dim(0);
  const std::int64_t d = params.feature_dim();
  TopoCache local;
  TopoCache& cc = cache ? *cache : local;
  cc.n_lanes = l;
  cc.n_tes = t;

  auto [lane_feats, lane_cache] = mlp_forward(params.lane_mlp, lane_in);
  cc.lane_cache = std::move(lane_cache);
  TensorT<double> te_feats({t, d});
  if (t > 0) {
    auto [tf, te_cache] = mlp_forward(params.te_mlp, te_in);
    te_feats = std::move(tf);
    cc.te_cache = std::move(te_cache);
  }

  const std::int64_t n = l + t;
  cc.tokens0 = TensorT<double>({n, d});
  for (std::int64_t i = 0; i < l; ++i) {
    for (std::int64_t c = 0; c < d; ++c) cc.tokens0.at2(i, c) = lane_feats.at2(i, c);
  }
  for (std::int64_t i = 0; i < t; ++i) {
    for (std::int64_t c = 0; c < d; ++c) cc.tokens0.at2(l + i, c) = te_feats.at2(i, c);
  }

  cc.tokens1 = cc.tokens0;
  if (n > 0) {
    cc.q = matmul(cc.tokens0, params.wq, false, false);
    cc.k = matmul(cc.tokens0, params.wk, false, false);
    cc.v = matmul(cc.tokens0, params.wv, false, false);
    auto [attn_out, attn_w] = attention_with_weights(cc.q, cc.k, cc.v);
    cc.attn_w = std::move(attn_w);
    for (std::size_t i = 0; i < cc.tokens1.data.size(); ++i) cc.tokens1.data[i] += attn_out.data[i];
  }

  const std::int64_t n_pairs = l * l + l * t;
  cc.pair_in = TensorT<double>({n_pairs, 2 * d});
  std::int64_t row = 0;
  auto emit_pair = [&](std::int64_t a, std::int64_t b) {
    for (std::int64_t c = 0; c < d; ++c) {
      cc.pair_in.at2(row, c) = cc.tokens1.at2(a, c);
      cc.pair_in.at2(row, d + c) = cc.tokens1.at2(b, c);
    }
    ++row;
  };
  for (std::int64_t i = 0; i < l; ++i) {
    for (std::int64_t j = 0; j < l; ++j) emit_pair(i, j);
  }
  for (std::int64_t i = 0; i < l; ++i) {
    for (std::int64_t j = 0; j < t; ++j) emit_pair(i, l + j);
  }

  TopoLogits out{TensorT<double>({l, l}), TensorT<double>({l, t})};
  if (n_pairs > 0) {
    auto [logits, cls_cache] = mlp_forward(params.cls_mlp, cc.pair_in);
    cc.cls_cache = std::move(cls_cache);
    for (std::int64_t i = 0; i < l * l; ++i) out.ll.data[static_cast<std::size_t>(i)] = logits.at2(i, 0);
    for (std::int64_t i = 0; i < l * t; ++i)
      out.lt.data[static_cast<std::size_t>(i)] = logits.at2(l * l + i, 0);
  }
  return out;
}

}  // namespace detail

/// Pairwise relationship logits from precomputed raw inputs (see lane_inputs
/// and te_inputs for the expected layouts).
inline TopoLogits topo_forward(const TopoHeadParams& params, const TensorT<double>& lane_in,
                               const TensorT<double>& te_in) {
  if (lane_in.rank() != 2 || lane_in.dim(1) != params.lane_mlp.input_dim())
    throw std::invalid_argument("topo_forward: lane input width mismatch");
  if (te_in.dim(0) > 0 && (te_in.rank() != 2 || te_in.dim(1) != params.te_mlp.input_dim()))
    throw std::invalid_argument("topo_forward: te input width mismatch");
  return detail::topo_forward_impl(params, lane_in, te_in, nullptr);
}

struct TopoHeadGrads {
  MlpGradsT<double> lane, te, cls;
  TensorT<double> dwq, dwk, dwv;
};

/// Mean binary cross-entropy over off-diagonal ll pairs and all lt pairs,
/// with positives up-weighted by the batch negative/positive ratio.
/// Returns the loss and gradients for every parameter tensor.
inline std::pair<double, TopoHeadGrads> topo_loss_and_grads(const TopoHeadParams& params,
                                                            const TensorT<double>& lane_in,
                                                            const TensorT<double>& te_in,
                                                            const TensorT<double>& gt_ll,
                                                            const TensorT<double>& gt_lt) {
  const std::int64_t l = lane_in.dim(0);
  const std::int64_t t = te_in.dim(0);
  if (gt_ll.dim(0) != l || gt_ll.dim(1) != l)
    throw std::invalid_argument("topo_loss_and_grads: gt_ll shape mismatch");
  if (gt_lt.dim(0) != l || gt_lt.dim(1) != t)
    throw std::invalid_argument("topo_loss_and_grads: gt_lt shape mismatch");
  const std::int64_t d = params.feature_dim();

  detail::TopoCache cache;
  const TopoLogits logits = detail::topo_forward_impl(params, lane_in, te_in, &cache);

  const std::int64_t n_pairs = l * l + l * t;
  std::vector<double> labels(static_cast<std::size_t>(n_pairs), 0.0);
  std::vector<double> weights(static_cast<std::size_t>(n_pairs), 1.0);
  std::int64_t considered = 0, positives = 0;
  for (std::int64_t i = 0; i < l; ++i) {
    for (std::int64_t j = 0; j < l; ++j) {
      const std::size_t r = static_cast<std::size_t>(i * l + j);
      if (i == j) {
        weights[r] = 0.0;
        continue;
      }
      labels[r] = gt_ll.at2(i, j) > 0.5 ? 1.0 : 0.0;
      ++considered;
      if (labels[r] > 0.5) ++positives;
    }
  }
  for (std::int64_t i = 0; i < l * t; ++i) {
    const std::size_t r = static_cast<std::size_t>(l * l + i);
    labels[r] = gt_lt.data[static_cast<std::size_t>(i)] > 0.5 ? 1.0 : 0.0;
    ++considered;
    if (labels[r] > 0.5) ++positives;
  }
  const double pos_weight =
      positives > 0 ? static_cast<double>(considered - positives) / static_cast<double>(positives)
                    : 1.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (weights[r] > 0.0 && labels[r] > 0.5) weights[r] = pos_weight;
  }

  constexpr double kEps = 1e-12;
  double loss = 0.0;
  TensorT<double> dlogits({n_pairs, 1});
  auto logit_at = [&](std::int64_t r) {
    return r < l * l ? logits.ll.data[static_cast<std::size_t>(r)]
                     : logits.lt.data[static_cast<std::size_t>(r - l * l)];
  };
  const double denom = considered > 0 ? static_cast<double>(considered) : 1.0;
  for (std::int64_t r = 0; r < n_pairs; ++r) {
    const double w = weights[static_cast<std::size_t>(r)];
    if (w == 0.0) continue;
    const double y = labels[static_cast<std::size_t>(r)];
    const double p = sigmoid(logit_at(r));
    loss += -w * (y * std::log(std::max(p, kEps)) + (1.0 - y) * std::log(std::max(1.0 - p, kEps)));
    dlogits.at2(r, 0) = w * (p - y) / denom;
  }
  loss /= denom;

  TopoHeadGrads g;
  g.dwq = TensorT<double>({d, d});
  g.dwk = TensorT<double>({d, d});
  g.dwv = TensorT<double>({d, d});
  auto zero_like = [](const MlpParamsT<double>& p) {
    MlpGradsT<double> z;
    for (const auto& layer : p.layers) {
      z.layers.push_back({TensorT<double>(layer.w.shape), TensorT<double>(layer.b.shape)});
    }
    return z;
  };
  g.lane = zero_like(params.lane_mlp);
  g.te = zero_like(params.te_mlp);
  if (n_pairs == 0) {
    g.cls = zero_like(params.cls_mlp);
    return {loss, g};
  }

  g.cls = mlp_backward(params.cls_mlp, cache.cls_cache, dlogits);
  const TensorT<double>& dpair = g.cls.dx;  // [n_pairs, 2D]

  const std::int64_t n = l + t;
  TensorT<double> dtok1({n, d});
  std::int64_t row = 0;
  auto absorb_pair = [&](std::int64_t a, std::int64_t b) {
    for (std::int64_t c = 0; c < d; ++c) {
      dtok1.at2(a, c) += dpair.at2(row, c);
      dtok1.at2(b, c) += dpair.at2(row, d + c);
    }
    ++row;
  };
  for (std::int64_t i = 0; i < l; ++i) {
    for (std::int64_t j = 0; j < l; ++j) absorb_pair(i, j);
  }
  for (std::int64_t i = 0; i < l; ++i) {
    for (std::int64_t j = 0; j < t; ++j) absorb_pair(i, l + j);
  }

  TensorT<double> dtok0 = dtok1;  // residual branch
  if (n > 0) {
    const AttentionGrads<double> ag = attention_backward(dtok1, cache.q, cache.k, cache.v,
                                                         cache.attn_w);
    g.dwq = detail::matmul(cache.tokens0, ag.dq, true, false);
    g.dwk = detail::matmul(cache.tokens0, ag.dk, true, false);
    g.dwv = detail::matmul(cache.tokens0, ag.dv, true, false);
    const TensorT<double> dq_in = detail::matmul(ag.dq, params.wq, false, true);
    const TensorT<double> dk_in = detail::matmul(ag.dk, params.wk, false, true);
    const TensorT<double> dv_in = detail::matmul(ag.dv, params.wv, false, true);
    for (std::size_t i = 0; i < dtok0.data.size(); ++i) {
      dtok0.data[i] += dq_in.data[i] + dk_in.data[i] + dv_in.data[i];
    }
  }

  TensorT<double> dlane({l, d});
  for (std::int64_t i = 0; i < l; ++i) {
    for (std::int64_t c = 0; c < d; ++c) dlane.at2(i, c) = dtok0.at2(i, c);
  }
  g.lane = mlp_backward(params.lane_mlp, cache.lane_cache, dlane);
  if (t > 0) {
    TensorT<double> dte({t, d});
    for (std::int64_t i = 0; i < t; ++i) {
      for (std::int64_t c = 0; c < d; ++c) dte.at2(i, c) = dtok0.at2(l + i, c);
    }
    g.te = mlp_backward(params.te_mlp, cache.te_cache, dte);
  }
  return {loss, g};
}

struct TopoSample {
  std::vector<Polyline> lanes;
  std::vector<TrafficElement> tes;
  TensorT<double> gt_ll;  // [L, L] binary
  TensorT<double> gt_lt;  // [L, T] binary
};

struct TopoTrainConfig {
  int d = 64;
  int hidden = 128;
  int epochs = 150;
  double lr = 0.01;
  double momentum = 0.9;
  // Global-norm clip on each per-sample gradient. Updates are taken one
  // scene at a time, so a single sparse-positive scene can otherwise blow
  // the relu layers into a dead constant-output state they never leave.
  double grad_clip = 1.0;
  std::uint64_t seed = 1;
  int lane_points = 10;
  int k_te = 4;
  double image_w = 1920;
  double image_h = 1080;
  double norm_scale = 50;
};

struct TopoTrainResult {
  TopoHeadParams params;
  std::vector<double> loss_curve;  // mean loss per epoch
};

inline TopoTrainResult train_topo(const std::vector<TopoSample>& dataset,
                                  const TopoTrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train_topo: empty dataset");
  if (cfg.epochs < 1) throw std::invalid_argument("train_topo: epochs must be >= 1");
  Rng rng(cfg.seed);
  TopoTrainResult result;
  result.params = make_topo_head(cfg.lane_points, cfg.k_te, cfg.d, cfg.hidden, rng);

  struct Prepared {
    TensorT<double> lane_in, te_in, gt_ll, gt_lt;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(dataset.size());
  for (const auto& s : dataset) {
    Prepared p{lane_inputs(s.lanes, cfg.lane_points, cfg.norm_scale),
               te_inputs(s.tes, cfg.k_te, cfg.image_w, cfg.image_h), s.gt_ll, s.gt_lt};
    prepared.push_back(std::move(p));
  }

  SgdStateT<double> lane_state, te_state, cls_state;
  TensorT<double> vq({cfg.d, cfg.d}), vk({cfg.d, cfg.d}), vv({cfg.d, cfg.d});
  auto step_plain = [&](TensorT<double>& p, TensorT<double>& vel, const TensorT<double>& grad) {
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      vel.data[i] = cfg.momentum * vel.data[i] + grad.data[i];
      p.data[i] -= cfg.lr * vel.data[i];
    }
  };
  auto for_each_grad = [](TopoHeadGrads& g, auto&& fn) {
    for (auto* mlp : {&g.lane, &g.te, &g.cls}) {
      for (auto& layer : mlp->layers) {
        fn(layer.w);
        fn(layer.b);
      }
    }
    fn(g.dwq);
    fn(g.dwk);
    fn(g.dwv);
  };
  auto clip = [&](TopoHeadGrads& g) {
    if (!(cfg.grad_clip > 0)) return;
    double sq = 0.0;
    for_each_grad(g, [&](const TensorT<double>& t) {
      for (double v : t.data) sq += v * v;
    });
    const double norm = std::sqrt(sq);
    if (norm <= cfg.grad_clip) return;
    const double scale = cfg.grad_clip / norm;
    for_each_grad(g, [&](TensorT<double>& t) {
      for (double& v : t.data) v *= scale;
    });
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (const auto& s : prepared) {
      auto [loss, grads] =
          topo_loss_and_grads(result.params, s.lane_in, s.te_in, s.gt_ll, s.gt_lt);
      epoch_loss += loss;
      clip(grads);
      sgd_step(result.params.lane_mlp, grads.lane, lane_state, cfg.lr, cfg.momentum);
      if (s.te_in.dim(0) > 0) {
        sgd_step(result.params.te_mlp, grads.te, te_state, cfg.lr, cfg.momentum);
      }
      sgd_step(result.params.cls_mlp, grads.cls, cls_state, cfg.lr, cfg.momentum);
      step_plain(result.params.wq, vq, grads.dwq);
      step_plain(result.params.wk, vk, grads.dwk);
      step_plain(result.params.wv, vv, grads.dwv);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(prepared.size()));
  }
  return result;
}

/// End-to-end scoring: embed, attend, classify, squash to [0,1].
inline TopologyGraph infer_topology(const TopoHeadParams& params,
                                    const std::vector<Polyline>& lanes,
                                    const std::vector<TrafficElement>& tes, double image_w,
                                    double image_h, double norm_scale, double threshold = 0.5) {
  const TensorT<double> lane_in = lane_inputs(lanes, params.lane_points(), norm_scale);
  const TensorT<double> te_in = te_inputs(tes, params.te_categories(), image_w, image_h);
  const TopoLogits logits = topo_forward(params, lane_in, te_in);
  TopologyGraph g;
  g.threshold = threshold;
  g.ll_scores = Tensor(logits.ll.shape);
  g.lt_scores = Tensor(logits.lt.shape);
  for (std::size_t i = 0; i < logits.ll.data.size(); ++i)
    g.ll_scores.data[i] = static_cast<float>(sigmoid(logits.ll.data[i]));
  for (std::size_t i = 0; i < logits.lt.data.size(); ++i)
    g.lt_scores.data[i] = static_cast<float>(sigmoid(logits.lt.data[i]));
  return g;
}

}  // namespace vmk
