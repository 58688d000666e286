#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vmk/common.hpp"
#include "vmk/geom.hpp"
#include "vmk/tensor.hpp"
#include "vmk/view_transform.hpp"

namespace vmk {

// Temporal fusion over BEV feature grids: pose-aligned warping, a convGRU
// streaming pass, and an optional stacking pass over frames picked from a
// bounded history buffer.

struct BufferEntry {
  std::int64_t frame_id = 0;
  SE3Pose ego_pose;
  FeatureGrid hidden;
};

/// Bounded history of post-streaming hidden states, oldest first.
struct FrameBuffer {
  int capacity = 10;
  std::deque<BufferEntry> entries;

  void push(BufferEntry e) {
    if (capacity < 1) throw std::invalid_argument("frame buffer: capacity must be >= 1");
    if (!entries.empty() && e.frame_id <= entries.back().frame_id)
      throw std::invalid_argument("frame buffer: frame ids must be strictly increasing");
    entries.push_back(std::move(e));
    while (static_cast<int>(entries.size()) > capacity) entries.pop_front();
  }
  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  const BufferEntry* find(std::int64_t frame_id) const {
    for (const auto& e : entries) {
      if (e.frame_id == frame_id) return &e;
    }
    return nullptr;
  }
};

/// Gate convolutions for a convGRU cell. Each weight is [C, 2C, k, k] over
/// the channel-concatenated pair fed to that gate; biases are [C].
struct ConvGruParams {
  Tensor wz, bz;
  Tensor wr, br;
  Tensor wh, bh;

  static ConvGruParams zeros(int channels, int kernel) {
    ConvGruParams p;
    const std::int64_t c = channels, k = kernel;
    p.wz = Tensor({c, 2 * c, k, k});
    p.wr = Tensor({c, 2 * c, k, k});
    p.wh = Tensor({c, 2 * c, k, k});
    p.bz = Tensor({c});
    p.br = Tensor({c});
    p.bh = Tensor({c});
    return p;
  }
};

inline void validate(const ConvGruParams& p) {
  for (const Tensor* w : {&p.wz, &p.wr, &p.wh}) {
    if (w->rank() != 4 || w->dim(1) != 2 * w->dim(0) || w->dim(2) != w->dim(3) ||
        w->dim(2) % 2 != 1)
      throw std::invalid_argument("conv gru: weights must be [C,2C,k,k] with odd k");
    if (!w->same_shape(p.wz)) throw std::invalid_argument("conv gru: gate weight shapes differ");
  }
  for (const Tensor* b : {&p.bz, &p.br, &p.bh}) {
    if (b->rank() != 1 || b->dim(0) != p.wz.dim(0))
      throw std::invalid_argument("conv gru: bias must be [C]");
  }
}

enum class FusionKind { None, Streaming, StreamingStreaming, StreamingStacking };

struct FusionMode {
  FusionKind kind = FusionKind::None;
  int stack_n = 4;                                    // frames fused per step
  int stack_m = 10;                                   // history buffer depth
  std::vector<double> test_strides = {5, 10, 15, 20};  // meters behind ego
  bool testing_phase = false;
};

inline void validate(const FusionMode& m) {
  if (m.stack_n < 1 || m.stack_m < 1 || m.stack_n > m.stack_m)
    throw std::invalid_argument("fusion mode: need 1 <= N <= M");
  double prev = 0.0;
  for (double s : m.test_strides) {
    if (!(s > prev)) throw std::invalid_argument("fusion mode: strides must be positive ascending");
    prev = s;
  }
}

/// Warps a BEV grid from the frame of src_pose into the frame of dst_pose.
/// Only the yaw component of the relative rotation is applied; grids are
/// planar. Destination cells that land outside the source get 0 and mask 0.
inline std::pair<FeatureGrid, Tensor> warp_grid(const FeatureGrid& src, const SE3Pose& src_pose,
                                                const SE3Pose& dst_pose) {
  const BevGridSpec& spec = src.spec;
  const SE3Pose rel = relative_pose(src_pose, dst_pose);  // src-from-dst
  const double yaw = std::atan2(rel.r[1][0], rel.r[0][0]);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const int channels = src.channels();
  FeatureGrid out(spec, channels);
  Tensor mask({spec.rows, spec.cols});
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const double xd = spec.cell_center_x(c);
      const double yd = spec.cell_center_y(r);
      const double xs = cy * xd - sy * yd + rel.t.x;
      const double ys = sy * xd + cy * yd + rel.t.y;
      // A hair of slack keeps identity warps exact on the boundary row/col.
      const double slack = 1e-9;
      const double cf = (xs - spec.x_min) / spec.cell_w() - 0.5;
      const double rf = (ys - spec.y_min) / spec.cell_h() - 0.5;
      if (cf < -slack || cf > static_cast<double>(spec.cols - 1) + slack || rf < -slack ||
          rf > static_cast<double>(spec.rows - 1) + slack)
        continue;
      const double cfc = std::clamp(cf, 0.0, static_cast<double>(spec.cols - 1));
      const double rfc = std::clamp(rf, 0.0, static_cast<double>(spec.rows - 1));
      mask.at2(r, c) = 1.0f;
      for (int ch = 0; ch < channels; ++ch) {
        out.at(ch, r, c) = static_cast<float>(detail::bilinear(src.data, ch, rfc, cfc));
      }
    }
  }
  return {std::move(out), std::move(mask)};
}

namespace detail {

/// Same-padding 2-D convolution of the channel concatenation [a;b] with one
/// gate's weights. Serial double accumulation.
inline Tensor conv_concat(const Tensor& w, const Tensor& b, const FeatureGrid& a,
                          const FeatureGrid& bb) {
  const int cout = static_cast<int>(w.dim(0));
  const int cin = static_cast<int>(w.dim(1));
  const int k = static_cast<int>(w.dim(2));
  const int pad = k / 2;
  const int rows = a.spec.rows, cols = a.spec.cols;
  const int ca = a.channels();
  Tensor y({cout, rows, cols});
  auto input_at = [&](int ch, int r, int c) -> double {
    if (r < 0 || r >= rows || c < 0 || c >= cols) return 0.0;
    return ch < ca ? a.at(ch, r, c) : bb.at(ch - ca, r, c);
  };
  for (int oc = 0; oc < cout; ++oc) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        double acc = b.data[static_cast<std::size_t>(oc)];
        for (int ic = 0; ic < cin; ++ic) {
          for (int kr = 0; kr < k; ++kr) {
            for (int kc = 0; kc < k; ++kc) {
              const double wv = w.data[((static_cast<std::size_t>(oc) * cin + ic) * k + kr) * k + kc];
              if (wv == 0.0) continue;
              acc += wv * input_at(ic, r - pad + kr, c - pad + kc);
            }
          }
        }
        y.at3(oc, r, c) = static_cast<float>(acc);
      }
    }
  }
  return y;
}

}  // namespace detail

/// One convGRU update: z and r gates from [h;x], candidate from [r*h;x],
/// output (1-z)*h + z*tanh(candidate).
inline FeatureGrid conv_gru_step(const ConvGruParams& params, const FeatureGrid& h,
                                 const FeatureGrid& x) {
  validate(params);
  if (!(h.spec == x.spec) || h.channels() != x.channels())
    throw std::invalid_argument("conv_gru_step: hidden/input grid mismatch");
  if (params.wz.dim(0) != h.channels())
    throw std::invalid_argument("conv_gru_step: parameter channels mismatch");
  const Tensor zpre = detail::conv_concat(params.wz, params.bz, h, x);
  const Tensor rpre = detail::conv_concat(params.wr, params.br, h, x);
  FeatureGrid rh = h;
  for (std::size_t i = 0; i < rh.data.data.size(); ++i) {
    rh.data.data[i] *= sigmoid(rpre.data[i]);
  }
  const Tensor hpre = detail::conv_concat(params.wh, params.bh, rh, x);
  FeatureGrid out = h;
  for (std::size_t i = 0; i < out.data.data.size(); ++i) {
    const float z = sigmoid(zpre.data[i]);
    out.data.data[i] = (1.0f - z) * h.data.data[i] + z * std::tanh(hpre.data[i]);
  }
  return out;
}

/// Uniform sample without replacement of min(n, size) frame ids, oldest-first
/// output, deterministic under the seed.
inline std::vector<std::int64_t> select_frames_training(const FrameBuffer& buffer, int n,
                                                        std::uint64_t rng_seed) {
  if (n < 1) throw std::invalid_argument("select_frames_training: n must be >= 1");
  std::vector<std::int64_t> ids;
  ids.reserve(buffer.size());
  for (const auto& e : buffer.entries) ids.push_back(e.frame_id);
  Rng rng(rng_seed);
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(n), ids.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(take);
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Picks one frame per stride by along-trajectory distance behind the current
/// pose; each stride takes the frame minimizing |distance - stride| (ties go
/// to the older frame). A frame claimed by a closer stride is not reused, so
/// colliding strides contribute nothing. Output follows stride order.
inline std::vector<std::int64_t> select_frames_testing(const FrameBuffer& buffer,
                                                       const SE3Pose& cur_pose,
                                                       const std::vector<double>& strides) {
  if (strides.empty()) throw std::invalid_argument("select_frames_testing: strides required");
  if (buffer.empty()) return {};
  const std::size_t n = buffer.size();
  // Cumulative travelled distance from the current pose back to each entry,
  // measured in the ground plane.
  std::vector<double> dist(n, 0.0);
  Point3 ahead = cur_pose.t;
  for (std::size_t back = 0; back < n; ++back) {
    const std::size_t idx = n - 1 - back;
    const Point3& p = buffer.entries[idx].ego_pose.t;
    const double step = std::hypot(p.x - ahead.x, p.y - ahead.y);
    dist[idx] = (back == 0 ? 0.0 : dist[idx + 1]) + step;
    ahead = p;
  }
  struct Claim {
    double err;
    std::size_t stride_rank;
  };
  std::vector<std::optional<Claim>> claimed(n);
  for (std::size_t s = 0; s < strides.size(); ++s) {
    std::size_t best = 0;
    double best_err = std::abs(dist[0] - strides[s]);
    for (std::size_t i = 1; i < n; ++i) {
      const double err = std::abs(dist[i] - strides[s]);
      // Older frames sit at lower indices; strict improvement keeps ties old.
      if (err < best_err) {
        best = i;
        best_err = err;
      }
    }
    if (!claimed[best] || best_err < claimed[best]->err) {
      claimed[best] = Claim{best_err, s};
    }
  }
  std::vector<std::pair<std::size_t, std::int64_t>> picked;
  for (std::size_t i = 0; i < n; ++i) {
    if (claimed[i]) picked.emplace_back(claimed[i]->stride_rank, buffer.entries[i].frame_id);
  }
  std::sort(picked.begin(), picked.end());
  std::vector<std::int64_t> out;
  out.reserve(picked.size());
  for (const auto& [rank, id] : picked) out.push_back(id);
  return out;
}

/// Per-cell linear projection over the channel concatenation of the current
/// grid and n_slots history slots: w is [(n_slots+1)*C, C], b is [C].
struct StackParams {
  int n_slots = 4;
  Tensor w;
  Tensor b;

  static StackParams passthrough(int channels, int n_slots) {
    StackParams p;
    p.n_slots = n_slots;
    p.w = Tensor({static_cast<std::int64_t>(n_slots + 1) * channels, channels});
    p.b = Tensor({channels});
    for (int c = 0; c < channels; ++c) p.w.at2(c, c) = 1.0f;
    return p;
  }
};

/// Warps each history grid into the current frame, stacks channels (missing
/// slots stay zero), and projects back to C channels per cell.
inline FeatureGrid fuse_stack(const FeatureGrid& current,
                              const std::vector<std::pair<SE3Pose, FeatureGrid>>& selected,
                              const SE3Pose& cur_pose, const StackParams& params) {
  const int channels = current.channels();
  if (static_cast<int>(selected.size()) > params.n_slots)
    throw std::invalid_argument("fuse_stack: more history frames than stack slots");
  if (params.w.rank() != 2 ||
      params.w.dim(0) != static_cast<std::int64_t>(params.n_slots + 1) * channels ||
      params.w.dim(1) != channels || params.b.dim(0) != channels)
    throw std::invalid_argument("fuse_stack: projection shape mismatch");

  std::vector<FeatureGrid> warped;
  warped.reserve(selected.size());
  for (const auto& [pose, grid] : selected) {
    if (!(grid.spec == current.spec) || grid.channels() != channels)
      throw std::invalid_argument("fuse_stack: history grid spec mismatch");
    warped.push_back(warp_grid(grid, pose, cur_pose).first);
  }

  const BevGridSpec& spec = current.spec;
  FeatureGrid out(spec, channels);
  const int cin = (params.n_slots + 1) * channels;
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      for (int oc = 0; oc < channels; ++oc) {
        double acc = params.b.data[static_cast<std::size_t>(oc)];
        for (int ic = 0; ic < cin; ++ic) {
          const int slot = ic / channels;
          const int ch = ic % channels;
          double v = 0.0;
          if (slot == 0) {
            v = current.at(ch, r, c);
          } else if (static_cast<std::size_t>(slot - 1) < warped.size()) {
            v = warped[static_cast<std::size_t>(slot - 1)].at(ch, r, c);
          }
          if (v != 0.0) acc += v * params.w.at2(ic, oc);
        }
        out.at(oc, r, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

struct SequenceFrame {
  std::int64_t frame_id = 0;
  SE3Pose pose;
  FeatureGrid features;
};

struct TemporalParams {
  ConvGruParams gru1;
  ConvGruParams gru2;  // second streaming layer; used by StreamingStreaming
  StackParams stack;   // used by StreamingStacking
};

/// Runs a time-ordered sequence through the chosen fusion mode. The first
/// frame has no history and passes through untouched in every mode. The
/// stacking buffer keeps the streaming layer's outputs. When selection_log is
/// given it receives, per frame, the ids the stacking step fused (empty for
/// the other modes).
inline std::vector<FeatureGrid> run_sequence(const FusionMode& mode,
                                             const std::vector<SequenceFrame>& frames,
                                             const TemporalParams& params,
                                             std::uint64_t seed = 0,
                                             std::vector<std::vector<std::int64_t>>* selection_log = nullptr) {
  validate(mode);
  if (selection_log) selection_log->assign(frames.size(), {});
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].frame_id <= frames[i - 1].frame_id)
      throw std::invalid_argument("run_sequence: frames must be time-ordered");
  }
  std::vector<FeatureGrid> outputs;
  outputs.reserve(frames.size());
  if (mode.kind == FusionKind::None) {
    for (const auto& f : frames) outputs.push_back(f.features);
    return outputs;
  }

  // Training draws from the latest M frames; the test-phase stride selector
  // needs history as deep as the largest stride, so it keeps everything and
  // trims by distance instead.
  FrameBuffer buffer;
  buffer.capacity = mode.testing_phase ? static_cast<int>(frames.size()) : mode.stack_m;
  std::optional<FeatureGrid> h1, h2;
  SE3Pose prev_pose;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const SequenceFrame& f = frames[i];
    FeatureGrid stream;
    if (!h1) {
      stream = f.features;
    } else {
      const FeatureGrid aligned = warp_grid(*h1, prev_pose, f.pose).first;
      stream = conv_gru_step(params.gru1, aligned, f.features);
    }

    FeatureGrid out = stream;
    if (mode.kind == FusionKind::StreamingStreaming) {
      if (!h2) {
        out = stream;
      } else {
        const FeatureGrid aligned2 = warp_grid(*h2, prev_pose, f.pose).first;
        out = conv_gru_step(params.gru2, aligned2, stream);
      }
      h2 = out;
    } else if (mode.kind == FusionKind::StreamingStacking) {
      std::vector<std::int64_t> ids =
          mode.testing_phase
              ? select_frames_testing(buffer, f.pose, mode.test_strides)
              : select_frames_training(buffer, mode.stack_n, seed + static_cast<std::uint64_t>(i));
      if (static_cast<int>(ids.size()) > mode.stack_n) ids.resize(static_cast<std::size_t>(mode.stack_n));
      if (selection_log) (*selection_log)[i] = ids;
      if (!ids.empty()) {
        std::vector<std::pair<SE3Pose, FeatureGrid>> selected;
        selected.reserve(ids.size());
        for (std::int64_t id : ids) {
          const BufferEntry* e = buffer.find(id);
          selected.emplace_back(e->ego_pose, e->hidden);
        }
        out = fuse_stack(stream, selected, f.pose, params.stack);
      }
      buffer.push({f.frame_id, f.pose, stream});
    }

    h1 = stream;
    prev_pose = f.pose;
    outputs.push_back(std::move(out));
  }
  return outputs;
}

}  // namespace vmk
