// Acceptance gate: one line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <array>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "vmk/commands.hpp"

using namespace vmk;
namespace fs = std::filesystem;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- 1: ped-crossing resampling, permutations, loss closure -----------------

bool crit_ped(std::string& note) {
  Rng rng(101);
  const double t0 = now_s();
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double w = rng.uniform(2.0, 10.0), h = rng.uniform(1.0, 6.0);
    const double th = rng.uniform(0.0, 6.28318);
    const double cx = rng.uniform(-20.0, 20.0), cy = rng.uniform(-20.0, 20.0);
    const double jit = 0.04 * std::min(w, h);

    Polyline ring;
    ring.closed = true;
    const double xs[4] = {-w / 2, w / 2, w / 2, -w / 2};
    const double ys[4] = {-h / 2, -h / 2, h / 2, h / 2};
    for (int e = 0; e < 4; ++e) {
      const int segs = 2 + static_cast<int>(rng.uniform_int(3));
      for (int s = 0; s < segs; ++s) {
        const double f = static_cast<double>(s) / segs;
        const double lx = xs[e] + f * (xs[(e + 1) % 4] - xs[e]);
        const double ly = ys[e] + f * (ys[(e + 1) % 4] - ys[e]);
        ring.points.push_back({cx + lx * std::cos(th) - ly * std::sin(th) + rng.uniform(-jit, jit),
                               cy + lx * std::sin(th) + ly * std::cos(th) + rng.uniform(-jit, jit),
                               0.0});
      }
    }

    const MapInstance inst = resample_ped_crossing(simplify_to_corners(ring));
    if (inst.geometry.points.size() != kPedCrossingPoints) return false;
    if (!inst.corner_indices || *inst.corner_indices != kPedCornerIndices) return false;

    const std::vector<Permutation> perms = ped_permutations(inst);
    if (perms.size() != 8) return false;

    MapInstance permuted = inst;
    const Permutation& p = perms[1 + rng.uniform_int(7)];
    permuted.geometry.points = detail::apply_perm(inst.geometry, p);
    const double loss = point2point_loss(permuted, inst).first;
    worst = std::max(worst, loss);
    if (!(loss <= 1e-9)) return false;
  }
  const double dt = now_s() - t0;
  note = "worst loss " + fmt("%.2e", worst) + ", " + fmt("%.2f", dt) + " s";
  return dt < 5.0;
}

// --- 2: assignment vs exhaustive search --------------------------------------

double exhaustive_min_cost(const TensorT<double>& cost) {
  const int n = static_cast<int>(cost.dim(0)), m = static_cast<int>(cost.dim(1));
  if (n > m) {
    TensorT<double> t({m, n});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) t.at2(j, i) = cost.at2(i, j);
    return exhaustive_min_cost(t);
  }
  std::vector<int> cols(static_cast<std::size_t>(m));
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double tot = 0.0;
    for (int i = 0; i < n; ++i) tot += cost.at2(i, cols[static_cast<std::size_t>(i)]);
    best = std::min(best, tot);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

bool crit_matching(std::string& note) {
  Rng rng(202);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(6));
    const int m = 1 + static_cast<int>(rng.uniform_int(6));
    TensorT<double> cost({n, m});
    // Dyadic entries keep every partial sum exact in double.
    for (auto& v : cost.data) v = static_cast<double>(rng.uniform_int(256)) / 64.0;
    const Assignment a = hungarian(cost);
    if (a.total_cost != exhaustive_min_cost(cost)) {
      note = "mismatch at trial " + std::to_string(trial);
      return false;
    }
  }
  note = "1000 exact matches";
  return true;
}

// --- 3: view transform mass and cell agreement --------------------------------

CameraModel random_camera(Rng& rng) {
  CameraModel cam;
  cam.width = 6 + 2 * static_cast<int>(rng.uniform_int(4));
  cam.height = 6 + 2 * static_cast<int>(rng.uniform_int(3));
  cam.fx = rng.uniform(8.0, 30.0);
  cam.fy = rng.uniform(8.0, 30.0);
  cam.cx = cam.width * rng.uniform(0.4, 0.6);
  cam.cy = cam.height * rng.uniform(0.4, 0.6);
  cam.extrinsic.r = {{{0, -1, 0}, {0, 0, -1}, {1, 0, 0}}};
  const Point3 c{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(1.0, 2.0)};
  cam.extrinsic.t = {c.y, c.z, -c.x};  // t = -R c for the fixed forward rotation
  return cam;
}

BevGridSpec random_spec(Rng& rng) {
  BevGridSpec spec;
  spec.rows = 10 + static_cast<int>(rng.uniform_int(21));
  spec.cols = 10 + static_cast<int>(rng.uniform_int(31));
  spec.x_min = -rng.uniform(5.0, 10.0);
  spec.x_max = rng.uniform(15.0, 40.0);
  const double half = rng.uniform(5.0, 15.0);
  spec.y_min = -half;
  spec.y_max = half;
  return spec;
}

bool crit_view_transform(std::string& note) {
  const DepthBins bins;
  if (bins.count() != 55 || bins.d_min != 1.0 || bins.d_max != 56.0) return false;
  Rng rng(303);
  for (int i = 0; i < 1000; ++i) {
    const double d = rng.uniform(1.0, 56.0 - 1e-9);
    const BinIndex b = depth_to_bins(d, bins);
    if (!b.valid || b.index != static_cast<int>(std::floor(d - 1.0))) return false;
  }
  if (depth_to_bins(0.99, bins).valid || depth_to_bins(56.0, bins).valid) return false;

  double worst_rel = 0.0;
  int fwd_hits = 0, bwd_hits = 0;
  for (int cfgi = 0; cfgi < 100; ++cfgi) {
    const CameraModel cam = random_camera(rng);
    const BevGridSpec spec = random_spec(rng);
    const int W = cam.width, H = cam.height;
    const SE3Pose ego_from_cam = inverse(cam.extrinsic);

    // mass conservation against an independent re-trace
    Tensor feat({1, H, W});
    for (auto& v : feat.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    Tensor dist({55, H, W});
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        double sum = 0.0;
        std::vector<double> wts(55);
        for (auto& x : wts) {
          x = rng.uniform(0.0, 1.0);
          sum += x;
        }
        for (int d = 0; d < 55; ++d) dist.at3(d, r, c) = static_cast<float>(wts[static_cast<std::size_t>(d)] / sum);
      }
    }
    const FeatureGrid grid = forward_splat({feat}, {dist}, {cam}, spec, bins);
    double expected = 0.0;
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        for (int d = 0; d < 55; ++d) {
          const double z = bins.center(d);
          const Point3 pc{(c + 0.5 - cam.cx) / cam.fx * z, (r + 0.5 - cam.cy) / cam.fy * z, z};
          const Point3 pe = apply(ego_from_cam, pc);
          if (spec.contains(pe.x, pe.y))
            expected += static_cast<double>(feat.at3(0, r, c)) * dist.at3(d, r, c);
        }
      }
    }
    double total = 0.0;
    for (float v : grid.data.data) total += v;
    const double rel = std::abs(total - expected) / std::max(1e-12, std::abs(expected));
    worst_rel = std::max(worst_rel, rel);
    if (!(rel <= 1e-4)) return false;

    // forward delta: the splat cell must be the analytically predicted one
    for (int k = 0; k < 50 && fwd_hits < (cfgi + 1) * 2; ++k) {
      const int pr = static_cast<int>(rng.uniform_int(H)), pc = static_cast<int>(rng.uniform_int(W));
      const int bin = static_cast<int>(rng.uniform_int(55));
      const double z = bins.center(bin);
      const Point3 cpt{(pc + 0.5 - cam.cx) / cam.fx * z, (pr + 0.5 - cam.cy) / cam.fy * z, z};
      const Point3 pe = apply(ego_from_cam, cpt);
      if (!spec.contains(pe.x, pe.y)) continue;
      ++fwd_hits;
      Tensor df({1, H, W}), dd({55, H, W});
      df.at3(0, pr, pc) = 1.0f;
      dd.at3(bin, pr, pc) = 1.0f;
      const FeatureGrid g = forward_splat({df}, {dd}, {cam}, spec, bins);
      const auto [row, col] = spec.cell_of(pe.x, pe.y);
      int nonzero = 0;
      for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
          if (g.at(0, r, c) != 0.0f) {
            ++nonzero;
            if (r != row || c != col) return false;
            if (std::abs(g.at(0, r, c) - 1.0f) > 1e-6f) return false;
          }
      if (nonzero != 1) return false;
    }

    // backward delta: a pixel impulse is recovered at the cell that chose it
    for (int k = 0; k < 50 && bwd_hits < (cfgi + 1) * 2; ++k) {
      const int row = static_cast<int>(rng.uniform_int(spec.rows));
      const int col = static_cast<int>(rng.uniform_int(spec.cols));
      const double height = rng.uniform(-0.5, 0.5);
      const Projection proj =
          project_point(cam, {spec.cell_center_x(col), spec.cell_center_y(row), height});
      if (!proj.valid) continue;
      const int pu = static_cast<int>(std::lround(proj.u - 0.5));
      const int pv = static_cast<int>(std::lround(proj.v - 0.5));
      if (pu < 1 || pu > W - 2 || pv < 1 || pv > H - 2) continue;
      ++bwd_hits;
      Tensor df({1, H, W});
      df.at3(0, pv, pu) = 5.0f;
      const BackwardSampleResult res = backward_sample({df}, {cam}, spec, {height});
      if (!(res.hit_mask.at2(row, col) > 0.0f) || !(res.grid.at(0, row, col) > 0.0f)) return false;
    }
  }
  if (fwd_hits < 150 || bwd_hits < 150) {
    note = "too few in-range draws";
    return false;
  }
  note = "mass rel err " + fmt("%.2e", worst_rel) + ", " + std::to_string(fwd_hits) + "+" +
         std::to_string(bwd_hits) + " cell agreements";
  return true;
}

// --- 4: temporal fusion -------------------------------------------------------

bool crit_temporal(std::string& note) {
  Rng rng(404);
  BevGridSpec spec;
  spec.rows = 40;
  spec.cols = 60;
  spec.x_min = -15;
  spec.x_max = 15;
  spec.y_min = -10;
  spec.y_max = 10;

  // warp round trip on an affine field, interior cells only
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    FeatureGrid src(spec, 1);
    const double gx = rng.uniform(-0.05, 0.05), gy = rng.uniform(-0.05, 0.05);
    for (int r = 0; r < spec.rows; ++r)
      for (int c = 0; c < spec.cols; ++c)
        src.at(0, r, c) =
            static_cast<float>(0.5 + gx * spec.cell_center_x(c) + gy * spec.cell_center_y(r));
    const SE3Pose a = SE3Pose::from_yaw(rng.uniform(-0.3, 0.3), rng.uniform(-5, 5),
                                        rng.uniform(-5, 5), 0.0);
    const SE3Pose b = SE3Pose::from_yaw(rng.uniform(-0.05, 0.05), a.t.x + rng.uniform(-1.5, 1.5),
                                        a.t.y + rng.uniform(-1.5, 1.5), 0.0);
    const auto [fwd, m1] = warp_grid(src, a, b);
    (void)m1;
    const auto [back, m2] = warp_grid(fwd, b, a);
    for (int r = 10; r < spec.rows - 10; ++r) {
      for (int c = 10; c < spec.cols - 10; ++c) {
        if (m2.at2(r, c) == 0.0f) continue;
        worst = std::max(worst, static_cast<double>(std::abs(back.at(0, r, c) - src.at(0, r, c))));
      }
    }
    if (!(worst < 1e-3)) return false;
  }

  // zero-parameter gate halves the hidden state exactly
  const ConvGruParams zero = ConvGruParams::zeros(2, 3);
  FeatureGrid h(spec, 2), x(spec, 2);
  for (auto& v : h.data.data) v = static_cast<float>(rng.uniform(-2, 2));
  for (auto& v : x.data.data) v = static_cast<float>(rng.uniform(-2, 2));
  const FeatureGrid h2 = conv_gru_step(zero, h, x);
  for (std::size_t i = 0; i < h.data.data.size(); ++i) {
    if (h2.data.data[i] != 0.5f * h.data.data[i]) return false;
  }

  // test-phase stride selection on a straight 0.5 m/frame drive
  BevGridSpec tiny;
  tiny.rows = 2;
  tiny.cols = 2;
  FrameBuffer buf;
  buf.capacity = 64;
  for (int i = 0; i < 60; ++i)
    buf.push({i, SE3Pose::from_yaw(0.0, 0.5 * i, 0.0, 0.0), FeatureGrid(tiny, 1)});
  const SE3Pose cur = SE3Pose::from_yaw(0.0, 30.0, 0.0, 0.0);
  const auto picks = select_frames_testing(buf, cur, {5, 10, 15, 20});
  if (picks.size() != 4) return false;
  for (std::size_t s = 0; s < 4; ++s) {
    const double dist = 30.0 - 0.5 * static_cast<double>(picks[s]);
    if (std::abs(dist - 5.0 * static_cast<double>(s + 1)) > 0.25) return false;
  }

  // training selection: 4 distinct of the latest 10, uniform by chi-square
  FrameBuffer tbuf;
  tbuf.capacity = 10;
  for (int i = 0; i < 15; ++i)
    tbuf.push({i, SE3Pose::from_yaw(0.0, 1.0 * i, 0.0, 0.0), FeatureGrid(tiny, 1)});
  std::array<long, 10> counts{};
  for (int draw = 0; draw < 10000; ++draw) {
    const auto ids = select_frames_training(tbuf, 4, static_cast<std::uint64_t>(draw));
    if (ids.size() != 4) return false;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k] < 5 || ids[k] > 14) return false;
      if (k > 0 && ids[k] <= ids[k - 1]) return false;
      ++counts[static_cast<std::size_t>(ids[k] - 5)];
    }
  }
  double chi2 = 0.0;
  for (long c : counts) chi2 += (static_cast<double>(c) - 4000.0) * (static_cast<double>(c) - 4000.0) / 4000.0;
  note = "round-trip err " + fmt("%.2e", worst) + ", chi2 " + fmt("%.2f", chi2);
  return chi2 < 21.666;  // 0.99 quantile, 9 dof
}

// --- 5: gradients vs finite differences ---------------------------------------

bool crit_gradients(std::string& note) {
  Rng rng(505);
  double worst = 0.0;
  int accepted = 0;
  for (int attempt = 0; attempt < 200 && accepted < 20; ++attempt) {
    std::vector<std::int64_t> dims{1 + static_cast<std::int64_t>(rng.uniform_int(5))};
    const int hidden_layers = 1 + static_cast<int>(rng.uniform_int(3));
    for (int l = 0; l < hidden_layers; ++l) dims.push_back(1 + static_cast<std::int64_t>(rng.uniform_int(6)));
    dims.push_back(1 + static_cast<std::int64_t>(rng.uniform_int(4)));

    MlpParamsT<double> params = make_mlp<double>(dims, rng);
    for (auto& layer : params.layers)
      for (auto& v : layer.b.data) v = rng.uniform(-0.3, 0.3);

    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.uniform_int(3));
    TensorT<double> x({n, dims.front()});
    for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
    TensorT<double> lw({n, dims.back()});
    for (auto& v : lw.data) v = rng.uniform(-1.0, 1.0);

    const auto [y, cache] = mlp_forward(params, x);
    // stay clear of relu kinks where the derivative is one-sided
    double min_pre = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < params.layers.size(); ++l)
      for (double z : cache.preacts[l].data) min_pre = std::min(min_pre, std::abs(z));
    if (min_pre < 1e-3) continue;
    ++accepted;

    const MlpGradsT<double> grads = mlp_backward(params, cache, lw);
    auto loss_at = [&](const MlpParamsT<double>& p, const TensorT<double>& xin) {
      const auto out = mlp_forward(p, xin).first;
      double s = 0.0;
      for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * lw.data[i];
      return s;
    };
    const double hstep = 1e-5;
    auto check = [&](double analytic, double plus, double minus) {
      const double fd = (plus - minus) / (2 * hstep);
      const double rel = std::abs(analytic - fd) / std::max({1e-6, std::abs(analytic), std::abs(fd)});
      worst = std::max(worst, rel);
      return rel < 1e-4;
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      using Field = TensorT<double> MlpParamsT<double>::Layer::*;
      for (Field field : {&MlpParamsT<double>::Layer::w, &MlpParamsT<double>::Layer::b}) {
        auto& tensor = params.layers[l].*field;
        for (std::size_t i = 0; i < tensor.data.size(); ++i) {
          MlpParamsT<double> pp = params, pm = params;
          (pp.layers[l].*field).data[i] += hstep;
          (pm.layers[l].*field).data[i] -= hstep;
          if (!check((grads.layers[l].*field).data[i], loss_at(pp, x), loss_at(pm, x)))
            return false;
        }
      }
    }
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      TensorT<double> xp = x, xm = x;
      xp.data[i] += hstep;
      xm.data[i] -= hstep;
      if (!check(grads.dx.data[i], loss_at(params, xp), loss_at(params, xm))) return false;
    }
  }
  note = std::to_string(accepted) + " architectures, max rel err " + fmt("%.2e", worst);
  return accepted == 20;
}

// --- 6: topology training on the separable successor rule ----------------------

std::size_t pick(Rng& rng, std::size_t n) {
  const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
  return std::min(i, n - 1);
}

double dist2d(const Point3& a, const Point3& b) { return std::hypot(a.x - b.x, a.y - b.y); }

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
        lane.points.push_back({start.x + f * length * std::cos(heading),
                               start.y + f * length * std::sin(heading), 0.0});
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

bool crit_topology(std::string& note) {
  const double t0 = now_s();
  Rng rng(607);
  std::vector<TopoSample> train, eval;
  for (int i = 0; i < 300; ++i) train.push_back(successor_scene(rng, 4, 6));
  for (int i = 0; i < 10; ++i) eval.push_back(successor_scene(rng, 4, 6));

  TopoTrainConfig cfg;
  cfg.d = 8;
  cfg.hidden = 16;
  cfg.epochs = 150;
  cfg.lane_points = 6;
  cfg.norm_scale = 10.0;
  const TopoTrainResult result = train_topo(train, cfg);

  int correct = 0, total = 0;
  double ll_sum = 0.0;
  int ll_n = 0;
  for (const TopoSample& s : eval) {
    const TopologyGraph g = infer_topology(result.params, s.lanes, s.tes, cfg.image_w,
                                           cfg.image_h, cfg.norm_scale, 0.5);
    const std::int64_t l = g.ll_scores.dim(0);
    Tensor gtf({l, l});
    std::vector<std::pair<int, int>> pairs;
    for (std::int64_t i = 0; i < l; ++i) {
      pairs.emplace_back(static_cast<int>(i), static_cast<int>(i));
      for (std::int64_t j = 0; j < l; ++j) {
        gtf.at2(i, j) = static_cast<float>(s.gt_ll.at2(i, j));
        if (i == j) continue;
        const bool hit = g.ll_scores.at2(i, j) >= 0.5f;
        correct += hit == (s.gt_ll.at2(i, j) > 0.5) ? 1 : 0;
        ++total;
      }
    }
    if (const auto sc = top_ll_score(g.ll_scores, gtf, pairs)) {
      ll_sum += *sc;
      ++ll_n;
    }
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(total);
  const double top_ll = ll_n > 0 ? ll_sum / ll_n : 0.0;
  const double dt = now_s() - t0;
  note = "accuracy " + fmt("%.4f", accuracy) + ", top_ll " + fmt("%.4f", top_ll) + ", " +
         fmt("%.1f", dt) + " s";
  return accuracy >= 0.99 && top_ll >= 0.95 && dt < 60.0;
}

// --- 7: metric self-consistency and corruption monotonicity --------------------

bool crit_metrics(std::string& note) {
  SceneConfig sc;
  sc.extent = 60;
  sc.segment_len = 20;
  sc.intersections = 1;
  const Scene scene = gen_scene(11, sc);
  SequenceConfig one;
  one.frames = 1;
  const Sequence seq = gen_sequence(scene, one);
  const SceneForEval view = scene_at_pose(scene, seq.poses.front(), seq.cameras.front());
  const EvalReport self = evaluate_scene(view, view, EvalConfig{});
  if (!self.det_l || *self.det_l != 1.0) return false;
  if (!self.det_a || *self.det_a != 1.0) return false;
  if (!self.det_t || *self.det_t != 1.0) return false;
  if (!self.uni || *self.uni != 1.0) return false;

  std::vector<MapInstance> gts;
  for (int i = 0; i < 3; ++i) {
    MapInstance inst;
    inst.cls = MapClass::Divider;
    for (int k = 0; k < 10; ++k) inst.geometry.points.push_back({2.0 * k, 40.0 * i, 0.0});
    gts.push_back(inst);
  }
  const EvalConfig cfg;
  Rng rng(715);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    double kappa[3], sign[3];
    for (int i = 0; i < 3; ++i) {
      kappa[i] = rng.uniform(0.5, 1.5);
      sign[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    std::array<double, 4> levels{0.0, rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0),
                                 rng.uniform(0.0, 5.0)};
    std::sort(levels.begin(), levels.end());

    auto corrupt = [&](double level) {
      std::vector<MapInstance> preds = gts;
      for (int i = 0; i < 3; ++i)
        for (auto& p : preds[static_cast<std::size_t>(i)].geometry.points)
          p.y += sign[i] * kappa[i] * level;
      return preds;
    };

    std::vector<double> prev_ap(cfg.thresholds.size(), 2.0);
    double prev_det = 2.0;
    for (double level : levels) {
      const std::vector<MapInstance> preds = corrupt(level);
      for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
        const auto ap = detection_ap(preds, gts, MapClass::Divider, DistanceFn::Chamfer,
                                     cfg.thresholds[t]);
        if (!ap || *ap > prev_ap[t] + 1e-15) ++violations;
        prev_ap[t] = ap.value_or(0.0);
      }
      const auto det = det_score(preds, gts, MapClass::Divider, DistanceFn::Chamfer, cfg);
      if (!det || *det > prev_det + 1e-15) ++violations;
      prev_det = det.value_or(0.0);
    }

    // dropping predictions only reduces recall
    const std::vector<MapInstance> base = corrupt(levels[1]);
    double prev = 2.0;
    for (int keep = 3; keep >= 1; --keep) {
      std::vector<MapInstance> preds(base.begin(), base.begin() + keep);
      const auto det = det_score(preds, gts, MapClass::Divider, DistanceFn::Chamfer, cfg);
      if (!det || *det > prev + 1e-15) ++violations;
      prev = det.value_or(0.0);
    }
  }
  note = std::to_string(violations) + " violations in 1000 trials";
  return violations == 0;
}

// --- 8: ensembling disjoint models strictly improves detection ------------------

bool crit_ensemble(std::string& note) {
  std::vector<MapInstance> gts;
  for (int i = 0; i < 6; ++i) {
    MapInstance inst;
    inst.cls = MapClass::Divider;
    for (int k = 0; k < 10; ++k) inst.geometry.points.push_back({2.0 * k, 40.0 * i, 0.0});
    inst.score = 1.0;
    gts.push_back(inst);
  }
  auto slice = [&](int from, int to, double score) {
    std::vector<MapInstance> out(gts.begin() + from, gts.begin() + to);
    for (auto& inst : out) inst.score = score;
    return out;
  };
  const std::vector<MapInstance> m1 = slice(0, 2, 0.9);
  const std::vector<MapInstance> m2 = slice(2, 4, 0.85);
  const std::vector<MapInstance> m3 = slice(4, 6, 0.8);

  const EvalConfig cfg;
  std::vector<double> scores;
  std::vector<std::vector<MapInstance>> ranked;
  for (const auto& m : {m1, m2, m3}) {
    ranked.push_back(m);
    const auto merged = ensemble_instances(ranked);
    const auto det = det_score(merged, gts, MapClass::Divider, DistanceFn::Chamfer, cfg);
    if (!det) return false;
    scores.push_back(*det);
  }
  note = fmt("%.3f", scores[0]) + " -> " + fmt("%.3f", scores[1]) + " -> " + fmt("%.3f", scores[2]);
  return scores[0] < scores[1] && scores[1] < scores[2];
}

// --- 9: CLI determinism ---------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(VMK_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

bool same_tree(const fs::path& a, const fs::path& b) {
  auto files = [](const fs::path& root) {
    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), root));
    }
    std::sort(rel.begin(), rel.end());
    return rel;
  };
  const auto fa = files(a), fb = files(b);
  if (fa != fb) return false;
  for (const auto& f : fa) {
    if (slurp(a / f) != slurp(b / f)) return false;
  }
  return true;
}

bool crit_determinism(std::string& note) {
  const fs::path dir = fs::temp_directory_path() / "vmk_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << R"({
    "seed": 3,
    "bev": {"rows": 50, "cols": 100, "x_min": -25.0, "x_max": 25.0, "y_min": -12.5, "y_max": 12.5},
    "fusion": {"test_strides": [1.0, 2.0, 3.0], "testing_phase": true},
    "scene": {"extent": 60.0, "segment_len": 20.0, "intersections": 1},
    "sequence": {"frames": 10, "step": 0.5, "lidar_azimuths": 60, "lidar_rings": 6},
    "topo": {"d": 8, "hidden": 16, "epochs": 5, "lane_points": 6}
  })";
  const std::string base = "--config " + cfg.string() + " ";
  const fs::path log = dir / "log.txt";

  const std::string synth_dir = (dir / "synth_a").string();
  std::vector<std::pair<std::string, std::string>> cmds = {
      {"synth", base + "--seed 7 --out %s synth"},
      {"resample", "resample " + synth_dir + "/map.json %s/map.json"},
      {"fuse", base + "--out %s fuse " + synth_dir + " --mode streaming_stacking"},
      {"eval", base + "--out %s eval " + synth_dir + "/map.json " + synth_dir + "/map.json"},
      {"ensemble", base + "--out %s ensemble " + synth_dir + "/map.json " + synth_dir + "/map.json"},
      {"topo-train", base + "--out %s topo train " + synth_dir + "/scene.json"},
      {"topo-eval", base + "--out %s topo eval " + dir.string() + "/topo-train_a/topo_params " +
                        synth_dir + "/scene.json"},
  };
  for (const auto& [name, tmpl] : cmds) {
    for (const char* run : {"a", "b"}) {
      fs::path out = dir / (name + std::string("_") + run);
      fs::create_directories(out);
      std::string args = tmpl;
      const auto at = args.find("%s");
      args.replace(at, 2, out.string());
      if (run_cli(args, log) != 0) {
        note = name + std::string(" run ") + run + " failed: " + slurp(log);
        return false;
      }
    }
    if (!same_tree(dir / (name + std::string("_a")), dir / (name + std::string("_b")))) {
      note = name + std::string(" outputs differ between runs");
      return false;
    }
  }
  fs::remove_all(dir);
  note = "7 commands byte-identical across reruns";
  return true;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {"ped-crossing resampling, permutations, and loss closure", crit_ped},
      {"assignment equals exhaustive search with exact costs", crit_matching},
      {"view transform mass conservation and cell agreement", crit_view_transform},
      {"temporal warp round trip, gate identity, frame selection", crit_temporal},
      {"mlp gradients match central finite differences", crit_gradients},
      {"topology head learns the successor rule on held-out scenes", crit_topology},
      {"evaluation self-score and corruption monotonicity", crit_metrics},
      {"ensembling disjoint models strictly improves detection", crit_ensemble},
      {"cli commands are byte-identical across reruns", crit_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    failures += ok ? 0 : 1;
    std::printf("[%s] %zu %s%s%s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].name,
                detail.empty() ? "" : ": ", detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
