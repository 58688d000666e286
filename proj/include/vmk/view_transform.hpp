#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "vmk/geom.hpp"
#include "vmk/nn.hpp"
#include "vmk/tensor.hpp"

namespace vmk {

/// Pinhole camera with a camera-from-ego extrinsic. Camera frame: z forward,
/// x right, y down.
struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  SE3Pose extrinsic;  // camera-from-ego
};

inline void validate(const CameraModel& cam) {
  if (cam.fx <= 0 || cam.fy <= 0) throw std::invalid_argument("camera focal lengths must be > 0");
  if (cam.width < 1 || cam.height < 1) throw std::invalid_argument("camera image size must be >= 1");
  validate(cam.extrinsic);
}

/// Uniform categorical depth discretization over [d_min, d_max).
struct DepthBins {
  double d_min = 1.0;
  double d_max = 56.0;
  double bin_width = 1.0;

  int count() const {
    return static_cast<int>(std::llround((d_max - d_min) / bin_width));
  }
  double center(int i) const { return d_min + (static_cast<double>(i) + 0.5) * bin_width; }
};

inline void validate(const DepthBins& b) {
  if (!(b.d_min < b.d_max)) throw std::invalid_argument("depth bins: d_min must be < d_max");
  if (!(b.bin_width > 0)) throw std::invalid_argument("depth bins: bin_width must be > 0");
}

/// Metric BEV raster layout: rows sweep y, cols sweep x, ego frame.
struct BevGridSpec {
  int rows = 100;
  int cols = 200;
  double x_min = -50.0, x_max = 50.0;
  double y_min = -25.0, y_max = 25.0;

  double cell_w() const { return (x_max - x_min) / static_cast<double>(cols); }
  double cell_h() const { return (y_max - y_min) / static_cast<double>(rows); }
  double cell_center_x(int c) const { return x_min + (static_cast<double>(c) + 0.5) * cell_w(); }
  double cell_center_y(int r) const { return y_min + (static_cast<double>(r) + 0.5) * cell_h(); }
  bool contains(double x, double y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }
  /// Cell of a metric point; only meaningful when contains(x, y).
  std::pair<int, int> cell_of(double x, double y) const {
    const int c = static_cast<int>(std::floor((x - x_min) / cell_w()));
    const int r = static_cast<int>(std::floor((y - y_min) / cell_h()));
    return {r, c};
  }
  bool operator==(const BevGridSpec&) const = default;
};

inline void validate(const BevGridSpec& s) {
  if (s.rows < 1 || s.cols < 1) throw std::invalid_argument("bev spec: rows/cols must be >= 1");
  if (!(s.x_min < s.x_max) || !(s.y_min < s.y_max))
    throw std::invalid_argument("bev spec: degenerate metric range");
}

struct FeatureGrid {
  BevGridSpec spec;
  Tensor data;  // [C, rows, cols]

  FeatureGrid() = default;
  FeatureGrid(const BevGridSpec& s, int channels)
      : spec(s), data({channels, s.rows, s.cols}) {}

  int channels() const { return data.shape.empty() ? 0 : static_cast<int>(data.dim(0)); }
  float& at(int ch, int r, int c) { return data.at3(ch, r, c); }
  float at(int ch, int r, int c) const { return data.at3(ch, r, c); }
};

/// Sparse lidar depth raster at an image-feature stride; 0 marks missing.
struct DepthMap {
  int stride = 1;
  Tensor depth;  // [height', width'] meters
};

struct Projection {
  double u = 0, v = 0, depth = 0;
  bool valid = false;
};

inline Projection project_point(const CameraModel& cam, const Point3& p_ego) {
  const Point3 pc = apply(cam.extrinsic, p_ego);
  Projection out;
  out.depth = pc.z;
  if (pc.z <= 1e-6) return out;
  out.u = cam.fx * pc.x / pc.z + cam.cx;
  out.v = cam.fy * pc.y / pc.z + cam.cy;
  out.valid = out.u >= 0 && out.u < static_cast<double>(cam.width) && out.v >= 0 &&
              out.v < static_cast<double>(cam.height);
  return out;
}

/// Z-buffers an ego-frame cloud into a strided depth raster; each valid point
/// keeps the smallest depth seen in its cell.
inline DepthMap lidar_to_depthmap(const CameraModel& cam, const std::vector<Point3>& cloud,
                                  int stride) {
  if (stride < 1) throw std::invalid_argument("lidar_to_depthmap: stride must be >= 1");
  const int hs = (cam.height + stride - 1) / stride;
  const int ws = (cam.width + stride - 1) / stride;
  DepthMap out;
  out.stride = stride;
  out.depth = Tensor({hs, ws});
  for (const auto& p : cloud) {
    const Projection proj = project_point(cam, p);
    if (!proj.valid) continue;
    const int r = static_cast<int>(proj.v) / stride;
    const int c = static_cast<int>(proj.u) / stride;
    float& cell = out.depth.at2(r, c);
    if (cell == 0.0f || proj.depth < static_cast<double>(cell)) {
      cell = static_cast<float>(proj.depth);
    }
  }
  return out;
}

struct BinIndex {
  int index = -1;
  bool valid = false;
};

inline BinIndex depth_to_bins(double depth, const DepthBins& bins) {
  BinIndex out;
  out.index = static_cast<int>(std::floor((depth - bins.d_min) / bins.bin_width));
  out.valid = depth >= bins.d_min && depth < bins.d_max;
  return out;
}

/// Forward (lift-splat) view transform: every pixel distributes its feature
/// along its ray according to the categorical depth distribution; mass
/// lifting outside the grid is dropped. Accumulation is serial and
/// double-precision, so results are bit-stable across runs.
inline FeatureGrid forward_splat(const std::vector<Tensor>& cam_features,
                                 const std::vector<Tensor>& depth_dist,
                                 const std::vector<CameraModel>& cams, const BevGridSpec& spec,
                                 const DepthBins& bins) {
  if (cam_features.size() != cams.size() || depth_dist.size() != cams.size())
    throw std::invalid_argument("forward_splat: per-camera input count mismatch");
  if (cams.empty()) throw std::invalid_argument("forward_splat: no cameras");
  const int channels = static_cast<int>(cam_features[0].dim(0));
  const int nbins = bins.count();
  FeatureGrid grid(spec, channels);
  std::vector<double> acc(static_cast<std::size_t>(grid.data.numel()), 0.0);
  const std::size_t plane = static_cast<std::size_t>(spec.rows) * static_cast<std::size_t>(spec.cols);

  for (std::size_t ci = 0; ci < cams.size(); ++ci) {
    const Tensor& feat = cam_features[ci];
    const Tensor& dist = depth_dist[ci];
    if (feat.rank() != 3 || dist.rank() != 3 || feat.dim(0) != channels ||
        dist.dim(0) != nbins || feat.dim(1) != dist.dim(1) || feat.dim(2) != dist.dim(2)) {
      throw std::invalid_argument("forward_splat: feature/depth shape mismatch");
    }
    const int h = static_cast<int>(feat.dim(1));
    const int w = static_cast<int>(feat.dim(2));
    const double su = static_cast<double>(cams[ci].width) / static_cast<double>(w);
    const double sv = static_cast<double>(cams[ci].height) / static_cast<double>(h);
    const SE3Pose ego_from_cam = inverse(cams[ci].extrinsic);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double u = (static_cast<double>(c) + 0.5) * su;
        const double v = (static_cast<double>(r) + 0.5) * sv;
        for (int d = 0; d < nbins; ++d) {
          const float weight = dist.at3(d, r, c);
          if (weight == 0.0f) continue;
          const double z = bins.center(d);
          const Point3 p_cam = {(u - cams[ci].cx) / cams[ci].fx * z,
                                (v - cams[ci].cy) / cams[ci].fy * z, z};
          const Point3 p_ego = apply(ego_from_cam, p_cam);
          if (!spec.contains(p_ego.x, p_ego.y)) continue;
          const auto [row, col] = spec.cell_of(p_ego.x, p_ego.y);
          const std::size_t base = static_cast<std::size_t>(row) * static_cast<std::size_t>(spec.cols) +
                                   static_cast<std::size_t>(col);
          for (int ch = 0; ch < channels; ++ch) {
            acc[static_cast<std::size_t>(ch) * plane + base] +=
                static_cast<double>(weight) * static_cast<double>(feat.at3(ch, r, c));
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i) grid.data.data[i] = static_cast<float>(acc[i]);
  return grid;
}

namespace detail {

/// Bilinear sample of plane [h,w] at fractional (rf, cf); caller guarantees
/// rf in [0, h-1] and cf in [0, w-1].
inline double bilinear(const Tensor& t, int ch, double rf, double cf) {
  const int h = static_cast<int>(t.dim(1));
  const int w = static_cast<int>(t.dim(2));
  int r0 = static_cast<int>(std::floor(rf));
  int c0 = static_cast<int>(std::floor(cf));
  r0 = std::min(r0, h - 2 < 0 ? 0 : h - 2);
  c0 = std::min(c0, w - 2 < 0 ? 0 : w - 2);
  const int r1 = std::min(r0 + 1, h - 1);
  const int c1 = std::min(c0 + 1, w - 1);
  const double fr = rf - static_cast<double>(r0);
  const double fc = cf - static_cast<double>(c0);
  const double v00 = t.at3(ch, r0, c0), v01 = t.at3(ch, r0, c1);
  const double v10 = t.at3(ch, r1, c0), v11 = t.at3(ch, r1, c1);
  return v00 * (1 - fr) * (1 - fc) + v01 * (1 - fr) * fc + v10 * fr * (1 - fc) + v11 * fr * fc;
}

}  // namespace detail

struct BackwardSampleResult {
  FeatureGrid grid;
  Tensor hit_mask;  // [rows, cols] valid-sample counts
};

/// Backward view transform: each BEV cell center is lifted to the reference
/// heights, projected into every camera, and bilinearly sampled where the
/// projection lands inside the feature plane. The output is the mean over
/// valid samples only.
inline BackwardSampleResult backward_sample(const std::vector<Tensor>& image_features,
                                            const std::vector<CameraModel>& cams,
                                            const BevGridSpec& spec,
                                            const std::vector<double>& heights) {
  if (image_features.size() != cams.size())
    throw std::invalid_argument("backward_sample: per-camera input count mismatch");
  if (heights.empty()) throw std::invalid_argument("backward_sample: need >= 1 height");
  if (cams.empty()) throw std::invalid_argument("backward_sample: no cameras");
  const int channels = static_cast<int>(image_features[0].dim(0));
  BackwardSampleResult out{FeatureGrid(spec, channels), Tensor({spec.rows, spec.cols})};
  std::vector<double> acc(static_cast<std::size_t>(channels), 0.0);

  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const double x = spec.cell_center_x(c);
      const double y = spec.cell_center_y(r);
      std::fill(acc.begin(), acc.end(), 0.0);
      int hits = 0;
      for (double hgt : heights) {
        for (std::size_t ci = 0; ci < cams.size(); ++ci) {
          const Tensor& feat = image_features[ci];
          const int fh = static_cast<int>(feat.dim(1));
          const int fw = static_cast<int>(feat.dim(2));
          const Point3 pc = apply(cams[ci].extrinsic, Point3{x, y, hgt});
          if (pc.z <= 1e-6) continue;
          const double u = cams[ci].fx * pc.x / pc.z + cams[ci].cx;
          const double v = cams[ci].fy * pc.y / pc.z + cams[ci].cy;
          const double su = static_cast<double>(cams[ci].width) / static_cast<double>(fw);
          const double sv = static_cast<double>(cams[ci].height) / static_cast<double>(fh);
          const double cf = u / su - 0.5;
          const double rf = v / sv - 0.5;
          if (cf < 0 || cf > static_cast<double>(fw - 1) || rf < 0 || rf > static_cast<double>(fh - 1))
            continue;
          for (int ch = 0; ch < channels; ++ch) {
            acc[static_cast<std::size_t>(ch)] += detail::bilinear(feat, ch, rf, cf);
          }
          ++hits;
        }
      }
      out.hit_mask.at2(r, c) = static_cast<float>(hits);
      if (hits > 0) {
        for (int ch = 0; ch < channels; ++ch) {
          out.grid.at(ch, r, c) = static_cast<float>(acc[static_cast<std::size_t>(ch)] / hits);
        }
      }
    }
  }
  return out;
}

/// Sinusoidal embedding of uniformly resampled polyline points. The first
/// embed_dim/2 dimensions encode x as interleaved sin/cos over geometrically
/// spaced frequencies, the rest encode y the same way.
inline Tensor encode_sd_map(const std::vector<Polyline>& polylines, std::size_t points_per_line,
                            int embed_dim, double wavelength_max = 100.0,
                            double wavelength_min = 1.0) {
  if (embed_dim < 2 || embed_dim % 2 != 0)
    throw std::invalid_argument("encode_sd_map: embed_dim must be even and >= 2");
  if (points_per_line < 2) throw std::invalid_argument("encode_sd_map: points_per_line must be >= 2");
  const int half = embed_dim / 2;
  const int nfreq = (half + 1) / 2;
  std::vector<double> omega(static_cast<std::size_t>(nfreq));
  for (int f = 0; f < nfreq; ++f) {
    const double t = nfreq > 1 ? static_cast<double>(f) / static_cast<double>(nfreq - 1) : 0.0;
    const double lambda = wavelength_max * std::pow(wavelength_min / wavelength_max, t);
    omega[static_cast<std::size_t>(f)] = 2.0 * M_PI / lambda;
  }
  const std::int64_t rows = static_cast<std::int64_t>(polylines.size() * points_per_line);
  Tensor out({rows, embed_dim});
  std::int64_t row = 0;
  for (const auto& line : polylines) {
    const Polyline rs = resample_uniform(line, points_per_line);
    for (const auto& p : rs.points) {
      for (int axis = 0; axis < 2; ++axis) {
        const double coord = axis == 0 ? p.x : p.y;
        for (int d = 0; d < half; ++d) {
          const double w = omega[static_cast<std::size_t>(d / 2)];
          const double val = (d % 2 == 0) ? std::sin(coord * w) : std::cos(coord * w);
          out.at2(row, axis * half + d) = static_cast<float>(val);
        }
      }
      ++row;
    }
  }
  return out;
}

/// Cross-attention from BEV cells (queries) to SD-map tokens (keys/values),
/// added residually. w_q: [C,Dk], w_k: [E,Dk], w_v: [E,C].
inline FeatureGrid sd_cross_attend(const FeatureGrid& bev, const Tensor& sd_tokens,
                                   const Tensor& w_q, const Tensor& w_k, const Tensor& w_v) {
  const int channels = bev.channels();
  const std::int64_t cells = static_cast<std::int64_t>(bev.spec.rows) * bev.spec.cols;
  if (sd_tokens.rank() != 2 || w_q.rank() != 2 || w_k.rank() != 2 || w_v.rank() != 2)
    throw std::invalid_argument("sd_cross_attend: expected 2-D tokens and projections");
  if (w_q.dim(0) != channels || w_k.dim(0) != sd_tokens.dim(1) || w_k.dim(1) != w_q.dim(1) ||
      w_v.dim(0) != sd_tokens.dim(1) || w_v.dim(1) != channels)
    throw std::invalid_argument("sd_cross_attend: projection shape mismatch");

  Tensor x({cells, channels});
  for (std::int64_t cell = 0; cell < cells; ++cell) {
    for (int ch = 0; ch < channels; ++ch) {
      x.at2(cell, ch) = bev.data.data[static_cast<std::size_t>(ch * cells + cell)];
    }
  }
  Tensor zero_bias_q({w_q.dim(1)});
  Tensor zero_bias_c({static_cast<std::int64_t>(channels)});
  const Tensor q = dense(x, w_q, zero_bias_q);
  const Tensor k = dense(sd_tokens, w_k, zero_bias_q);
  const Tensor v = dense(sd_tokens, w_v, zero_bias_c);
  const Tensor attended = attention(q, k, v);

  FeatureGrid out = bev;
  for (std::int64_t cell = 0; cell < cells; ++cell) {
    for (int ch = 0; ch < channels; ++ch) {
      out.data.data[static_cast<std::size_t>(ch * cells + cell)] += attended.at2(cell, ch);
    }
  }
  return out;
}

/// Channel-attention fusion of two BEV rasters: a sigmoid gate per channel,
/// computed by an MLP over the global-average-pooled concatenation, blends
/// the inputs as w*a + (1-w)*b.
inline FeatureGrid channel_fuse(const FeatureGrid& a, const FeatureGrid& b,
                                const MlpParams& fusion_params) {
  if (!(a.spec == b.spec) || a.channels() != b.channels())
    throw std::invalid_argument("channel_fuse: grid spec/channel mismatch");
  const int channels = a.channels();
  const std::int64_t cells = static_cast<std::int64_t>(a.spec.rows) * a.spec.cols;
  if (fusion_params.input_dim() != 2 * channels || fusion_params.output_dim() != channels)
    throw std::invalid_argument("channel_fuse: fusion MLP must map 2C -> C");

  Tensor pooled({1, 2 * channels});
  for (int ch = 0; ch < channels; ++ch) {
    double sa = 0.0, sb = 0.0;
    for (std::int64_t cell = 0; cell < cells; ++cell) {
      sa += a.data.data[static_cast<std::size_t>(ch * cells + cell)];
      sb += b.data.data[static_cast<std::size_t>(ch * cells + cell)];
    }
    pooled.at2(0, ch) = static_cast<float>(sa / static_cast<double>(cells));
    pooled.at2(0, channels + ch) = static_cast<float>(sb / static_cast<double>(cells));
  }
  const Tensor gate_logits = mlp_forward(fusion_params, pooled).first;
  FeatureGrid out = a;
  for (int ch = 0; ch < channels; ++ch) {
    const float w = sigmoid(gate_logits.at2(0, ch));
    for (std::int64_t cell = 0; cell < cells; ++cell) {
      const std::size_t i = static_cast<std::size_t>(ch * cells + cell);
      out.data.data[i] = w * a.data.data[i] + (1.0f - w) * b.data.data[i];
    }
  }
  return out;
}

}  // namespace vmk
