#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vmk/topo.hpp"

using namespace vmk;

namespace {

Polyline random_lane(Rng& rng, int n_pts, double span) {
  Polyline p;
  double x = rng.uniform(-span, span);
  double y = rng.uniform(-span, span);
  const double heading = rng.uniform(0.0, 6.28318);
  const double step = rng.uniform(0.5, 1.5);
  for (int i = 0; i < n_pts; ++i) {
    p.points.push_back({x, y, rng.uniform(-0.2, 0.2)});
    x += step * std::cos(heading);
    y += step * std::sin(heading);
  }
  return p;
}

void zero_mlp(MlpParamsT<double>& m) {
  for (auto& layer : m.layers) {
    std::fill(layer.w.data.begin(), layer.w.data.end(), 0.0);
    std::fill(layer.b.data.begin(), layer.b.data.end(), 0.0);
  }
}

void jitter_biases(TopoHeadParams& p, Rng& rng) {
  for (MlpParamsT<double>* m : {&p.lane_mlp, &p.te_mlp, &p.cls_mlp}) {
    for (auto& layer : m->layers) {
      for (auto& v : layer.b.data) v = rng.uniform(-0.1, 0.1);
    }
  }
}

std::size_t pick(Rng& rng, std::size_t n) {
  const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
  return std::min(i, n - 1);
}

double dist2d(const Point3& a, const Point3& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Straight lanes where half the consecutive placements chain a new lane's
/// start onto an earlier lane's end. Labels come from the geometric rule
/// (successor iff end-to-start gap < 1 m), not from the construction, and
/// rejection sampling keeps every non-chained gap at 4 m or more so the two
/// classes stay well separated.
TopoSample successor_scene(Rng& rng, int n_lanes, int n_pts) {
  TopoSample s;
  auto far_from_all = [&](const Point3& q, double margin) {
    for (const Polyline& lane : s.lanes) {
      if (dist2d(q, lane.points.front()) < margin) return false;
      if (dist2d(q, lane.points.back()) < margin) return false;
    }
    return true;
  };
  for (int i = 0; i < n_lanes; ++i) {
    Point3 start{0.0, 0.0, 0.0};
    if (i > 0 && rng.uniform() < 0.5) {
      const Point3& e = s.lanes[pick(rng, s.lanes.size())].points.back();
      start = {e.x + rng.uniform(-0.25, 0.25), e.y + rng.uniform(-0.25, 0.25), 0.0};
    } else {
      do {
        start = {rng.uniform(-15.0, 15.0), rng.uniform(-15.0, 15.0), 0.0};
      } while (!far_from_all(start, 4.0));
    }
    Polyline lane;
    for (int tries = 0;; ++tries) {
      lane.points.clear();
      const double heading = rng.uniform(0.0, 6.28318);
      const double length = rng.uniform(5.0, 8.0);
      for (int j = 0; j < n_pts; ++j) {
        const double f = static_cast<double>(j) / (n_pts - 1);
        lane.points.push_back(
            {start.x + f * length * std::cos(heading), start.y + f * length * std::sin(heading), 0.0});
      }
      if (far_from_all(lane.points.back(), 4.0) || tries > 100) break;
    }
    s.lanes.push_back(std::move(lane));
  }
  const auto l = static_cast<std::int64_t>(n_lanes);
  s.gt_ll = TensorT<double>({l, l});
  s.gt_lt = TensorT<double>({l, 0});
  for (std::int64_t i = 0; i < l; ++i) {
    for (std::int64_t j = 0; j < l; ++j) {
      if (i == j) continue;
      const Point3& e = s.lanes[static_cast<std::size_t>(i)].points.back();
      const Point3& b = s.lanes[static_cast<std::size_t>(j)].points.front();
      s.gt_ll.at2(i, j) = dist2d(e, b) < 1.0 ? 1.0 : 0.0;
    }
  }
  return s;
}

}  // namespace

TEST_CASE("embed_lane gives zeros through a zeroed network and checks the point count") {
  Rng rng(11);
  TopoHeadParams head = make_topo_head(10, 4, 8, 16, rng);
  zero_mlp(head.lane_mlp);
  const TensorT<double> f = embed_lane(random_lane(rng, 10, 20.0), head, 50.0);
  REQUIRE(f.rank() == 1);
  REQUIRE(f.dim(0) == 8);
  for (double v : f.data) CHECK(v == 0.0);

  CHECK_THROWS_AS(embed_lane(random_lane(rng, 7, 20.0), head, 50.0), std::invalid_argument);
  CHECK_THROWS_AS(embed_lane(random_lane(rng, 10, 20.0), head, 0.0), std::invalid_argument);
}

TEST_CASE("embed_lane is deterministic and reacts to coordinate changes") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    TopoHeadParams head = make_topo_head(6, 2, 16, 32, rng);
    const Polyline lane = random_lane(rng, 6, 15.0);

    const TensorT<double> a = embed_lane(lane, head, 50.0);
    const TensorT<double> b = embed_lane(lane, head, 50.0);
    REQUIRE(a.data == b.data);

    Polyline moved = lane;
    Point3& p = moved.points[pick(rng, moved.points.size())];
    const double delta = rng.uniform(0.01, 0.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    switch (static_cast<int>(pick(rng, 3))) {
      case 0: p.x += delta; break;
      case 1: p.y += delta; break;
      default: p.z += delta; break;
    }
    const TensorT<double> c = embed_lane(moved, head, 50.0);
    double diff = 0.0;
    for (std::size_t i = 0; i < c.data.size(); ++i) diff = std::max(diff, std::abs(c.data[i] - a.data[i]));
    CHECK(diff > 0.0);
  }
}

TEST_CASE("embed_te normalizes the box and separates categories") {
  Rng rng(13);
  TopoHeadParams head = make_topo_head(10, 4, 8, 16, rng);

  SUBCASE("zeroed network gives a zero feature") {
    TopoHeadParams z = head;
    zero_mlp(z.te_mlp);
    const TensorT<double> f = embed_te({100, 50, 300, 200, 2, 1.0}, z, 1920, 1080);
    REQUIRE(f.dim(0) == 8);
    for (double v : f.data) CHECK(v == 0.0);
  }

  SUBCASE("full-image box maps to the (0.5, 0.5, 1, 1) prefix plus a one-hot") {
    const TensorT<double> x = te_inputs({{0, 0, 1920, 1080, 3, 1.0}}, 4, 1920, 1080);
    REQUIRE(x.dim(1) == 8);
    CHECK(x.at2(0, 0) == doctest::Approx(0.5));
    CHECK(x.at2(0, 1) == doctest::Approx(0.5));
    CHECK(x.at2(0, 2) == doctest::Approx(1.0));
    CHECK(x.at2(0, 3) == doctest::Approx(1.0));
    CHECK(x.at2(0, 4) == 0.0);
    CHECK(x.at2(0, 5) == 0.0);
    CHECK(x.at2(0, 6) == 0.0);
    CHECK(x.at2(0, 7) == 1.0);
  }

  SUBCASE("same box with another category embeds differently") {
    Rng trial_rng(14);
    for (int trial = 0; trial < 50; ++trial) {
      TopoHeadParams h = make_topo_head(10, 4, 16, 32, trial_rng);
      const TrafficElement a{400, 300, 700, 500, 0, 1.0};
      TrafficElement b = a;
      b.category = 1 + static_cast<int>(pick(trial_rng, 3));
      const TensorT<double> fa = embed_te(a, h, 1920, 1080);
      const TensorT<double> fb = embed_te(b, h, 1920, 1080);
      double diff = 0.0;
      for (std::size_t i = 0; i < fa.data.size(); ++i)
        diff = std::max(diff, std::abs(fa.data[i] - fb.data[i]));
      CHECK(diff > 0.0);
    }
  }

  SUBCASE("degenerate boxes and out-of-range categories are rejected") {
    CHECK_THROWS_AS(embed_te({300, 50, 100, 200, 0, 1.0}, head, 1920, 1080), std::invalid_argument);
    CHECK_THROWS_AS(embed_te({100, 200, 300, 150, 0, 1.0}, head, 1920, 1080), std::invalid_argument);
    CHECK_THROWS_AS(embed_te({100, 50, 300, 200, 4, 1.0}, head, 1920, 1080), std::invalid_argument);
    CHECK_THROWS_AS(embed_te({100, 50, 300, 200, 0, 1.0}, head, 0, 1080), std::invalid_argument);
  }
}

TEST_CASE("topo_forward returns the classifier bias when the classifier is zeroed") {
  Rng rng(15);
  TopoHeadParams head = make_topo_head(5, 3, 8, 16, rng);
  zero_mlp(head.cls_mlp);
  head.cls_mlp.layers.back().b.data[0] = 0.7;

  std::vector<Polyline> lanes;
  for (int i = 0; i < 3; ++i) lanes.push_back(random_lane(rng, 5, 10.0));
  const std::vector<TrafficElement> tes{{10, 10, 60, 40, 0, 1.0}, {200, 90, 260, 180, 2, 1.0}};

  const TensorT<double> lane_in = lane_inputs(lanes, 5, 50.0);
  const TensorT<double> te_in = te_inputs(tes, 3, 1920, 1080);
  const TopoLogits out = topo_forward(head, lane_in, te_in);
  REQUIRE(out.ll.dim(0) == 3);
  REQUIRE(out.ll.dim(1) == 3);
  REQUIRE(out.lt.dim(0) == 3);
  REQUIRE(out.lt.dim(1) == 2);
  for (double v : out.ll.data) CHECK(v == 0.7);
  for (double v : out.lt.data) CHECK(v == 0.7);

  TensorT<double> bad({3, 7});
  CHECK_THROWS_AS(topo_forward(head, bad, te_in), std::invalid_argument);
}

TEST_CASE("topo_forward permutes logits exactly with token order") {
  Rng rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    TopoHeadParams head = make_topo_head(5, 3, 8, 16, rng);
    std::vector<Polyline> lanes;
    for (int i = 0; i < 4; ++i) lanes.push_back(random_lane(rng, 5, 12.0));
    std::vector<TrafficElement> tes;
    for (int i = 0; i < 3; ++i) {
      const double u1 = rng.uniform(0, 900), v1 = rng.uniform(0, 500);
      tes.push_back({u1, v1, u1 + rng.uniform(10, 400), v1 + rng.uniform(10, 300),
                     static_cast<int>(pick(rng, 3)), 1.0});
    }

    std::vector<std::size_t> lp{0, 1, 2, 3}, tp{0, 1, 2};
    for (std::size_t i = lp.size(); i > 1; --i) std::swap(lp[i - 1], lp[pick(rng, i)]);
    for (std::size_t i = tp.size(); i > 1; --i) std::swap(tp[i - 1], tp[pick(rng, i)]);

    std::vector<Polyline> lanes2;
    std::vector<TrafficElement> tes2;
    for (std::size_t i : lp) lanes2.push_back(lanes[i]);
    for (std::size_t i : tp) tes2.push_back(tes[i]);

    const TopoLogits a =
        topo_forward(head, lane_inputs(lanes, 5, 50.0), te_inputs(tes, 3, 1920, 1080));
    const TopoLogits b = topo_forward(head, lane_inputs(lanes2, 5, 50.0),
                                      te_inputs(tes2, 3, 1920, 1080));

    for (std::int64_t i = 0; i < 4; ++i) {
      for (std::int64_t j = 0; j < 4; ++j) {
        CHECK(b.ll.at2(i, j) ==
              a.ll.at2(static_cast<std::int64_t>(lp[static_cast<std::size_t>(i)]),
                       static_cast<std::int64_t>(lp[static_cast<std::size_t>(j)])));
      }
      for (std::int64_t j = 0; j < 3; ++j) {
        CHECK(b.lt.at2(i, j) ==
              a.lt.at2(static_cast<std::int64_t>(lp[static_cast<std::size_t>(i)]),
                       static_cast<std::int64_t>(tp[static_cast<std::size_t>(j)])));
      }
    }
  }
}

TEST_CASE("topo_forward matches a hand-built attention and classifier composition") {
  Rng rng(17);
  const int d = 4;
  TopoHeadParams head = make_topo_head(3, 2, d, 6, rng);
  jitter_biases(head, rng);
  std::vector<Polyline> lanes{random_lane(rng, 3, 8.0), random_lane(rng, 3, 8.0)};
  const TensorT<double> lane_in = lane_inputs(lanes, 3, 50.0);
  const TensorT<double> te_in({0, 6});

  // Every step below is recomputed with plain loops, independent of the
  // library's forward pass.
  auto mlp_by_hand = [](const MlpParamsT<double>& m, const std::vector<double>& x) {
    std::vector<double> cur = x;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      const auto& layer = m.layers[l];
      const std::int64_t in = layer.w.dim(0), out = layer.w.dim(1);
      std::vector<double> nxt(static_cast<std::size_t>(out));
      for (std::int64_t o = 0; o < out; ++o) {
        double acc = layer.b.data[static_cast<std::size_t>(o)];
        for (std::int64_t i = 0; i < in; ++i)
          acc += cur[static_cast<std::size_t>(i)] * layer.w.at2(i, o);
        if (l + 1 < m.layers.size() && acc < 0.0) acc = 0.0;
        nxt[static_cast<std::size_t>(o)] = acc;
      }
      cur = std::move(nxt);
    }
    return cur;
  };
  auto project = [&](const std::vector<std::vector<double>>& toks, const TensorT<double>& w) {
    std::vector<std::vector<double>> out(toks.size(), std::vector<double>(d, 0.0));
    for (std::size_t r = 0; r < toks.size(); ++r) {
      for (int o = 0; o < d; ++o) {
        for (int i = 0; i < d; ++i) out[r][static_cast<std::size_t>(o)] += toks[r][static_cast<std::size_t>(i)] * w.at2(i, o);
      }
    }
    return out;
  };

  std::vector<std::vector<double>> tokens;
  for (std::int64_t r = 0; r < 2; ++r) {
    std::vector<double> row(lane_in.data.begin() + r * 9, lane_in.data.begin() + (r + 1) * 9);
    tokens.push_back(mlp_by_hand(head.lane_mlp, row));
  }
  const auto q = project(tokens, head.wq);
  const auto k = project(tokens, head.wk);
  const auto v = project(tokens, head.wv);

  std::vector<std::vector<double>> mixed = tokens;
  for (std::size_t i = 0; i < 2; ++i) {
    double s[2];
    for (std::size_t j = 0; j < 2; ++j) {
      s[j] = 0.0;
      for (int c = 0; c < d; ++c) s[j] += q[i][static_cast<std::size_t>(c)] * k[j][static_cast<std::size_t>(c)];
      s[j] /= std::sqrt(static_cast<double>(d));
    }
    const double m = std::max(s[0], s[1]);
    const double e0 = std::exp(s[0] - m), e1 = std::exp(s[1] - m);
    const double a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);
    for (int c = 0; c < d; ++c)
      mixed[i][static_cast<std::size_t>(c)] +=
          a0 * v[0][static_cast<std::size_t>(c)] + a1 * v[1][static_cast<std::size_t>(c)];
  }

  const TopoLogits got = topo_forward(head, lane_in, te_in);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      std::vector<double> pair_in = mixed[i];
      pair_in.insert(pair_in.end(), mixed[j].begin(), mixed[j].end());
      const double expected = mlp_by_hand(head.cls_mlp, pair_in)[0];
      CHECK(got.ll.at2(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)) ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("train_topo drives an all-negative ground truth toward zero scores") {
  Rng rng(18);
  std::vector<TopoSample> data;
  for (int s = 0; s < 4; ++s) {
    TopoSample sample;
    for (int i = 0; i < 3; ++i) sample.lanes.push_back(random_lane(rng, 6, 12.0));
    sample.tes.push_back({100 + 50.0 * s, 80, 300 + 50.0 * s, 200, s % 4, 1.0});
    sample.gt_ll = TensorT<double>({3, 3});
    sample.gt_lt = TensorT<double>({3, 1});
    data.push_back(std::move(sample));
  }

  TopoTrainConfig cfg;
  cfg.d = 8;
  cfg.hidden = 16;
  cfg.epochs = 40;
  cfg.lane_points = 6;
  cfg.lr = 0.3;
  const TopoTrainResult r = train_topo(data, cfg);
  REQUIRE(r.loss_curve.size() == 40);

  for (const TopoSample& s : data) {
    const TopologyGraph g =
        infer_topology(r.params, s.lanes, s.tes, cfg.image_w, cfg.image_h, cfg.norm_scale);
    validate(g);
    for (std::int64_t i = 0; i < 3; ++i) {
      for (std::int64_t j = 0; j < 3; ++j) {
        if (i != j) CHECK(g.ll_scores.at2(i, j) < 0.1f);
      }
      CHECK(g.lt_scores.at2(i, 0) < 0.1f);
    }
  }

  const TopoTrainResult again = train_topo(data, cfg);
  CHECK(again.loss_curve == r.loss_curve);
}

TEST_CASE("train_topo learns a nearby-successor rule and its loss trends down") {
  Rng rng(19);
  std::vector<TopoSample> train_set, eval_set;
  for (int i = 0; i < 300; ++i) train_set.push_back(successor_scene(rng, 4, 6));
  for (int i = 0; i < 10; ++i) eval_set.push_back(successor_scene(rng, 4, 6));

  TopoTrainConfig cfg;
  cfg.d = 8;
  cfg.hidden = 16;
  cfg.epochs = 150;
  cfg.lane_points = 6;
  cfg.norm_scale = 10.0;
  cfg.lr = 0.01;
  const TopoTrainResult r = train_topo(train_set, cfg);

  std::int64_t correct = 0, total = 0;
  for (const TopoSample& s : eval_set) {
    const TopologyGraph g =
        infer_topology(r.params, s.lanes, s.tes, cfg.image_w, cfg.image_h, cfg.norm_scale);
    for (std::int64_t i = 0; i < 4; ++i) {
      for (std::int64_t j = 0; j < 4; ++j) {
        if (i == j) continue;
        const bool pred = g.ll_scores.at2(i, j) >= 0.5f;
        const bool want = s.gt_ll.at2(i, j) > 0.5;
        correct += pred == want ? 1 : 0;
        ++total;
      }
    }
  }
  CHECK(total == 120);
  CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.99);

  // Five-epoch moving average smooths out sgd-with-momentum wobble; the
  // smoothed curve must never move up by more than a sliver.
  std::vector<double> sm;
  for (std::size_t t = 0; t + 5 <= r.loss_curve.size(); ++t) {
    double acc = 0.0;
    for (std::size_t j = t; j < t + 5; ++j) acc += r.loss_curve[j];
    sm.push_back(acc / 5.0);
  }
  for (std::size_t t = 1; t < sm.size(); ++t) CHECK(sm[t] <= sm[t - 1] + 1e-3 * sm.front());
  CHECK(sm.back() < 0.5 * sm.front());
}

TEST_CASE("train_topo rejects bad inputs") {
  CHECK_THROWS_AS(train_topo({}, TopoTrainConfig{}), std::invalid_argument);
  Rng rng(20);
  TopoSample s = successor_scene(rng, 2, 10);
  TopoTrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train_topo({s}, cfg), std::invalid_argument);
}

TEST_CASE("topo_loss_and_grads matches finite differences on one batch") {
  Rng rng(21);
  TopoHeadParams head = make_topo_head(4, 2, 4, 6, rng);
  jitter_biases(head, rng);

  std::vector<Polyline> lanes{random_lane(rng, 4, 8.0), random_lane(rng, 4, 8.0)};
  const std::vector<TrafficElement> tes{{120, 40, 360, 220, 1, 1.0}};
  const TensorT<double> lane_in = lane_inputs(lanes, 4, 10.0);
  const TensorT<double> te_in = te_inputs(tes, 2, 640, 480);
  TensorT<double> gt_ll({2, 2});
  gt_ll.at2(0, 1) = 1.0;
  TensorT<double> gt_lt({2, 1});

  auto loss_of = [&](const TopoHeadParams& p) {
    return topo_loss_and_grads(p, lane_in, te_in, gt_ll, gt_lt).first;
  };
  const auto [loss, grads] = topo_loss_and_grads(head, lane_in, te_in, gt_ll, gt_lt);
  CHECK(loss > 0.0);

  const double h = 1e-5;
  auto check_tensor = [&](TensorT<double>& param, const TensorT<double>& grad) {
    REQUIRE(param.data.size() == grad.data.size());
    for (std::size_t i = 0; i < param.data.size(); ++i) {
      const double keep = param.data[i];
      param.data[i] = keep + h;
      const double up = loss_of(head);
      param.data[i] = keep - h;
      const double dn = loss_of(head);
      param.data[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double a = grad.data[i];
      REQUIRE(std::abs(a - fd) <= 1e-6 + 1e-4 * std::max(std::abs(a), std::abs(fd)));
    }
  };

  for (std::size_t l = 0; l < head.lane_mlp.layers.size(); ++l) {
    check_tensor(head.lane_mlp.layers[l].w, grads.lane.layers[l].w);
    check_tensor(head.lane_mlp.layers[l].b, grads.lane.layers[l].b);
  }
  for (std::size_t l = 0; l < head.te_mlp.layers.size(); ++l) {
    check_tensor(head.te_mlp.layers[l].w, grads.te.layers[l].w);
    check_tensor(head.te_mlp.layers[l].b, grads.te.layers[l].b);
  }
  for (std::size_t l = 0; l < head.cls_mlp.layers.size(); ++l) {
    check_tensor(head.cls_mlp.layers[l].w, grads.cls.layers[l].w);
    check_tensor(head.cls_mlp.layers[l].b, grads.cls.layers[l].b);
  }
  check_tensor(head.wq, grads.dwq);
  check_tensor(head.wk, grads.dwk);
  check_tensor(head.wv, grads.dwv);
}

TEST_CASE("decode_graph applies thresholds with self-loops removed") {
  Tensor ll({3, 3});
  Tensor lt({3, 2});

  SUBCASE("all zero scores below a positive threshold give an empty graph") {
    const DecodedGraph g = decode_graph(ll, lt, 0.5);
    CHECK(g.ll_edges.empty());
    CHECK(g.lt_edges.empty());
  }

  SUBCASE("threshold zero keeps everything except self-loops") {
    const DecodedGraph g = decode_graph(ll, lt, 0.0);
    CHECK(g.ll_edges.size() == 6);
    CHECK(g.lt_edges.size() == 6);
    for (const auto& [i, j] : g.ll_edges) CHECK(i != j);
  }

  SUBCASE("0.5 splits scores of 0.4 and 0.6") {
    ll.at2(0, 1) = 0.6f;
    ll.at2(1, 0) = 0.4f;
    const DecodedGraph g = decode_graph(ll, lt, 0.5);
    REQUIRE(g.ll_edges.size() == 1);
    CHECK(g.ll_edges[0] == std::pair<int, int>(0, 1));
  }

  SUBCASE("edge count is monotone non-increasing in the threshold") {
    Rng rng(22);
    for (auto& v : ll.data) v = static_cast<float>(rng.uniform());
    for (auto& v : lt.data) v = static_cast<float>(rng.uniform());
    std::size_t prev = SIZE_MAX;
    for (double th : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
      const DecodedGraph g = decode_graph(ll, lt, th);
      const std::size_t n = g.ll_edges.size() + g.lt_edges.size();
      CHECK(n <= prev);
      prev = n;
    }
  }
}

TEST_CASE("topology graph validation rejects malformed graphs") {
  TopologyGraph g;
  g.ll_scores = Tensor({2, 2});
  g.lt_scores = Tensor({2, 1});
  validate(g);

  TopologyGraph bad = g;
  bad.ll_scores = Tensor({2, 3});
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  bad = g;
  bad.lt_scores = Tensor({3, 1});
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  bad = g;
  bad.ll_scores.at2(0, 1) = 1.5f;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  bad = g;
  bad.threshold = -0.2;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}
