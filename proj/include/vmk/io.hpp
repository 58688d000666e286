#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vmk/common.hpp"
#include "vmk/elements.hpp"
#include "vmk/geom.hpp"
#include "vmk/metrics.hpp"
#include "vmk/synth.hpp"
#include "vmk/tensor.hpp"
#include "vmk/topo.hpp"
#include "vmk/view_transform.hpp"

namespace vmk {

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

using nlohmann::json;

// ---------------------------------------------------------------------------
// Flat binary tensor container: magic "VMKT", u32 version, u32 dtype,
// u32 rank, u64 dims[rank], row-major little-endian payload.

template <typename T>
struct VmktDtype;
template <>
struct VmktDtype<float> {
  static constexpr std::uint32_t code = 1;
};
template <>
struct VmktDtype<double> {
  static constexpr std::uint32_t code = 2;
};
template <>
struct VmktDtype<std::int64_t> {
  static constexpr std::uint32_t code = 3;
};

inline constexpr std::uint32_t kVmktVersion = 1;

namespace detail {

/// Writes bytes to path atomically: same-directory temp file then rename.
inline void atomic_write(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw io_error("rename failed: " + path + ": " + ec.message());
}

template <typename T>
void append_raw(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace detail

template <typename T>
void save_tensor(const std::string& path, const TensorT<T>& t) {
  std::string buf;
  buf.reserve(20 + t.shape.size() * 8 + t.data.size() * sizeof(T));
  buf.append("VMKT", 4);
  detail::append_raw(buf, kVmktVersion);
  detail::append_raw(buf, VmktDtype<T>::code);
  detail::append_raw(buf, static_cast<std::uint32_t>(t.rank()));
  for (std::int64_t d : t.shape) detail::append_raw(buf, static_cast<std::uint64_t>(d));
  buf.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(T));
  detail::atomic_write(path, buf);
}

template <typename T>
TensorT<T> load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "VMKT", 4) != 0)
    throw schema_error(path + ": not a tensor container");
  auto read_u32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  const std::uint32_t version = read_u32();
  if (!in || version != kVmktVersion)
    throw schema_error(path + ": unsupported container version " + std::to_string(version));
  const std::uint32_t dtype = read_u32();
  if (!in || dtype != VmktDtype<T>::code)
    throw schema_error(path + ": dtype code " + std::to_string(dtype) + " does not match request");
  const std::uint32_t rank = read_u32();
  if (!in || rank > 8) throw schema_error(path + ": implausible rank");
  std::vector<std::int64_t> shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) {
    std::uint64_t d = 0;
    in.read(reinterpret_cast<char*>(&d), sizeof(d));
    if (!in || d > (1ull << 32)) throw schema_error(path + ": implausible dimension");
    shape[i] = static_cast<std::int64_t>(d);
  }
  TensorT<T> t(shape);
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(T)));
  if (!in) throw schema_error(path + ": truncated payload");
  return t;
}

// ---------------------------------------------------------------------------
// JSON documents. Readers reject unknown keys so schema drift fails loudly.

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw schema_error(path + ": " + e.what());
  }
}

inline void save_json(const std::string& path, const json& j) {
  detail::atomic_write(path, j.dump(2) + "\n");
}

namespace detail {

inline void require_keys(const json& j, const char* what,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {}) {
  if (!j.is_object()) throw schema_error(std::string(what) + ": expected an object");
  for (const char* k : required) {
    if (!j.contains(k)) throw schema_error(std::string(what) + ": missing key '" + k + "'");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : required) known = known || it.key() == k;
    for (const char* k : optional) known = known || it.key() == k;
    if (!known) throw schema_error(std::string(what) + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw schema_error(std::string("field '") + key + "': " + e.what());
  }
}

inline void check_version(const json& j, const char* what) {
  if (field<int>(j, "version") != 1)
    throw schema_error(std::string(what) + ": unsupported document version");
}

// Enum names arriving in a document are schema problems, not argument problems.
template <typename Parse>
auto parse_enum(Parse&& parse, const std::string& s) {
  try {
    return parse(s);
  } catch (const std::invalid_argument& e) {
    throw schema_error(e.what());
  }
}

}  // namespace detail

// --- geometry ---------------------------------------------------------------

inline json to_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

inline Point3 point_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw schema_error("point: expected [x,y,z]");
  return {detail::field<double>(json{{"v", j[0]}}, "v"), j[1].get<double>(), j[2].get<double>()};
}

inline json to_json(const SE3Pose& pose) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(pose.r[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
  }
  return json{{"r", r}, {"t", to_json(pose.t)}};
}

inline SE3Pose pose_from_json(const json& j) {
  detail::require_keys(j, "pose", {"r", "t"});
  const json& r = j.at("r");
  if (!r.is_array() || r.size() != 9) throw schema_error("pose: 'r' must be 9 numbers");
  SE3Pose pose;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) {
      pose.r[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
          r[static_cast<std::size_t>(3 * i + k)].get<double>();
    }
  }
  pose.t = point_from_json(j.at("t"));
  validate(pose);
  return pose;
}

// --- map instances ----------------------------------------------------------

inline json to_json(const MapInstance& inst) {
  json points = json::array();
  for (const Point3& p : inst.geometry.points) points.push_back(to_json(p));
  json j{{"class", to_string(inst.cls)},
         {"score", inst.score},
         {"closed", inst.geometry.closed},
         {"points", points}};
  if (inst.corner_indices) {
    j["corner_indices"] = json::array();
    for (int c : *inst.corner_indices) j["corner_indices"].push_back(c);
  }
  if (inst.lane) {
    j["lane"] = json{{"left_offset", inst.lane->left_offset},
                     {"right_offset", inst.lane->right_offset},
                     {"left_attr", to_string(inst.lane->left_attr)},
                     {"right_attr", to_string(inst.lane->right_attr)}};
  }
  return j;
}

inline MapInstance instance_from_json(const json& j) {
  detail::require_keys(j, "instance", {"class", "score", "closed", "points"},
                       {"corner_indices", "lane"});
  MapInstance inst;
  inst.cls = detail::parse_enum(map_class_from_string, detail::field<std::string>(j, "class"));
  inst.score = detail::field<double>(j, "score");
  inst.geometry.closed = detail::field<bool>(j, "closed");
  for (const json& p : j.at("points")) inst.geometry.points.push_back(point_from_json(p));
  if (j.contains("corner_indices")) {
    const json& c = j.at("corner_indices");
    if (!c.is_array() || c.size() != 4) throw schema_error("instance: corner_indices must be 4 ints");
    std::array<int, 4> idx{};
    for (int i = 0; i < 4; ++i) idx[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)].get<int>();
    inst.corner_indices = idx;
  }
  if (j.contains("lane")) {
    const json& l = j.at("lane");
    detail::require_keys(l, "lane", {"left_offset", "right_offset", "left_attr", "right_attr"});
    LaneSegment seg;
    seg.centerline = inst.geometry;
    seg.left_offset = detail::field<std::vector<double>>(l, "left_offset");
    seg.right_offset = detail::field<std::vector<double>>(l, "right_offset");
    seg.left_attr = detail::parse_enum(boundary_attr_from_string, detail::field<std::string>(l, "left_attr"));
    seg.right_attr = detail::parse_enum(boundary_attr_from_string, detail::field<std::string>(l, "right_attr"));
    if (seg.left_offset.size() != inst.geometry.points.size() ||
        seg.right_offset.size() != inst.geometry.points.size())
      throw schema_error("lane: offset length must match point count");
    inst.lane = std::move(seg);
  }
  validate(inst.geometry);
  return inst;
}

inline json to_json(const TrafficElement& te) {
  return json{{"box", json::array({te.u1, te.v1, te.u2, te.v2})},
              {"category", te.category},
              {"score", te.score}};
}

inline TrafficElement te_from_json(const json& j) {
  detail::require_keys(j, "traffic element", {"box", "category", "score"});
  const json& b = j.at("box");
  if (!b.is_array() || b.size() != 4) throw schema_error("traffic element: box must be 4 numbers");
  TrafficElement te;
  te.u1 = b[0].get<double>();
  te.v1 = b[1].get<double>();
  te.u2 = b[2].get<double>();
  te.v2 = b[3].get<double>();
  te.category = detail::field<int>(j, "category");
  te.score = detail::field<double>(j, "score");
  return te;
}

inline json to_json(const TopologyGraph& g) {
  const std::int64_t l = g.ll_scores.rank() == 2 ? g.ll_scores.dim(0) : 0;
  const std::int64_t t = g.lt_scores.rank() == 2 ? g.lt_scores.dim(1) : 0;
  json ll = json::array(), lt = json::array();
  for (std::int64_t i = 0; i < l; ++i) {
    json row = json::array();
    for (std::int64_t k = 0; k < l; ++k) row.push_back(g.ll_scores.at2(i, k));
    ll.push_back(std::move(row));
    json row2 = json::array();
    for (std::int64_t k = 0; k < t; ++k) row2.push_back(g.lt_scores.at2(i, k));
    lt.push_back(std::move(row2));
  }
  return json{{"lanes", l}, {"tes", t}, {"ll", ll}, {"lt", lt}, {"threshold", g.threshold}};
}

inline TopologyGraph graph_from_json(const json& j) {
  detail::require_keys(j, "graph", {"lanes", "tes", "ll", "lt", "threshold"});
  const std::int64_t l = detail::field<std::int64_t>(j, "lanes");
  const std::int64_t t = detail::field<std::int64_t>(j, "tes");
  TopologyGraph g;
  g.threshold = detail::field<double>(j, "threshold");
  g.ll_scores = Tensor({l, l});
  g.lt_scores = Tensor({l, t});
  const json& ll = j.at("ll");
  const json& lt = j.at("lt");
  if (static_cast<std::int64_t>(ll.size()) != l || static_cast<std::int64_t>(lt.size()) != l)
    throw schema_error("graph: row count mismatch");
  for (std::int64_t i = 0; i < l; ++i) {
    if (static_cast<std::int64_t>(ll[static_cast<std::size_t>(i)].size()) != l ||
        static_cast<std::int64_t>(lt[static_cast<std::size_t>(i)].size()) != t)
      throw schema_error("graph: column count mismatch");
    for (std::int64_t k = 0; k < l; ++k)
      g.ll_scores.at2(i, k) = ll[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<float>();
    for (std::int64_t k = 0; k < t; ++k)
      g.lt_scores.at2(i, k) = lt[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<float>();
  }
  validate(g);
  return g;
}

// --- map documents (predictions and ground truth share one schema) ----------

struct MapFile {
  std::vector<MapInstance> instances;
  std::vector<TrafficElement> tes;
  std::optional<TopologyGraph> graph;
};

inline json to_json(const MapFile& m) {
  json instances = json::array();
  for (const auto& inst : m.instances) instances.push_back(to_json(inst));
  json tes = json::array();
  for (const auto& te : m.tes) tes.push_back(to_json(te));
  json j{{"version", 1}, {"instances", instances}, {"traffic_elements", tes}};
  if (m.graph) j["graph"] = to_json(*m.graph);
  return j;
}

inline MapFile map_from_json(const json& j) {
  detail::require_keys(j, "map", {"version", "instances", "traffic_elements"}, {"graph"});
  detail::check_version(j, "map");
  MapFile m;
  for (const json& inst : j.at("instances")) m.instances.push_back(instance_from_json(inst));
  for (const json& te : j.at("traffic_elements")) m.tes.push_back(te_from_json(te));
  if (j.contains("graph")) m.graph = graph_from_json(j.at("graph"));
  return m;
}

inline void save_map(const std::string& path, const MapFile& m) { save_json(path, to_json(m)); }

inline MapFile load_map(const std::string& path) { return map_from_json(load_json(path)); }

// --- scenes and sequences ----------------------------------------------------

inline json to_json(const SceneConfig& c) {
  return json{{"lanes", c.lanes},
              {"intersections", c.intersections},
              {"extent", c.extent},
              {"lane_spacing", c.lane_spacing},
              {"segment_len", c.segment_len},
              {"curve_max", c.curve_max},
              {"z_amp", c.z_amp},
              {"ped_half_len", c.ped_half_len},
              {"anchor_height", c.anchor_height},
              {"points_per_chunk", c.points_per_chunk}};
}

inline SceneConfig scene_config_from_json(const json& j) {
  detail::require_keys(j, "scene config",
                       {"lanes", "intersections", "extent", "lane_spacing", "segment_len",
                        "curve_max", "z_amp", "ped_half_len", "anchor_height", "points_per_chunk"});
  SceneConfig c;
  c.lanes = detail::field<int>(j, "lanes");
  c.intersections = detail::field<int>(j, "intersections");
  c.extent = detail::field<double>(j, "extent");
  c.lane_spacing = detail::field<double>(j, "lane_spacing");
  c.segment_len = detail::field<double>(j, "segment_len");
  c.curve_max = detail::field<double>(j, "curve_max");
  c.z_amp = detail::field<double>(j, "z_amp");
  c.ped_half_len = detail::field<double>(j, "ped_half_len");
  c.anchor_height = detail::field<double>(j, "anchor_height");
  c.points_per_chunk = detail::field<int>(j, "points_per_chunk");
  validate(c);
  return c;
}

inline json to_json(const Scene& s) {
  json instances = json::array();
  for (const auto& inst : s.instances) instances.push_back(to_json(inst));
  json anchors = json::array();
  for (const auto& a : s.anchors) {
    anchors.push_back(json{{"position", to_json(a.position)},
                           {"width", a.width},
                           {"height", a.height},
                           {"category", a.category}});
  }
  return json{{"version", 1},      {"seed", s.seed},       {"curve_amp", s.curve_amp},
              {"config", to_json(s.config)}, {"instances", instances}, {"anchors", anchors},
              {"graph", to_json(s.graph)}};
}

inline Scene scene_from_json(const json& j) {
  detail::require_keys(j, "scene",
                       {"version", "seed", "curve_amp", "config", "instances", "anchors", "graph"});
  detail::check_version(j, "scene");
  Scene s;
  s.seed = detail::field<std::uint64_t>(j, "seed");
  s.curve_amp = detail::field<double>(j, "curve_amp");
  s.config = scene_config_from_json(j.at("config"));
  for (const json& inst : j.at("instances")) s.instances.push_back(instance_from_json(inst));
  for (const json& a : j.at("anchors")) {
    detail::require_keys(a, "anchor", {"position", "width", "height", "category"});
    TrafficAnchor anchor;
    anchor.position = point_from_json(a.at("position"));
    anchor.width = detail::field<double>(a, "width");
    anchor.height = detail::field<double>(a, "height");
    anchor.category = detail::field<int>(a, "category");
    s.anchors.push_back(anchor);
  }
  s.graph = graph_from_json(j.at("graph"));
  return s;
}

inline json to_json(const CameraModel& cam) {
  return json{{"fx", cam.fx},       {"fy", cam.fy},       {"cx", cam.cx},
              {"cy", cam.cy},       {"width", cam.width}, {"height", cam.height},
              {"extrinsic", to_json(cam.extrinsic)}};
}

inline CameraModel camera_from_json(const json& j) {
  detail::require_keys(j, "camera", {"fx", "fy", "cx", "cy", "width", "height", "extrinsic"});
  CameraModel cam;
  cam.fx = detail::field<double>(j, "fx");
  cam.fy = detail::field<double>(j, "fy");
  cam.cx = detail::field<double>(j, "cx");
  cam.cy = detail::field<double>(j, "cy");
  cam.width = detail::field<int>(j, "width");
  cam.height = detail::field<int>(j, "height");
  cam.extrinsic = pose_from_json(j.at("extrinsic"));
  validate(cam);
  return cam;
}

/// sequence.json stores the trajectory and rig; per-frame rasters and lidar
/// clouds live beside it as numbered tensor files.
struct SequenceMeta {
  std::vector<SE3Pose> poses;
  std::vector<CameraModel> cameras;
};

inline json to_json(const SequenceMeta& seq) {
  json poses = json::array();
  for (const auto& p : seq.poses) poses.push_back(to_json(p));
  json cams = json::array();
  for (const auto& c : seq.cameras) cams.push_back(to_json(c));
  return json{{"version", 1}, {"poses", poses}, {"cameras", cams}};
}

inline SequenceMeta sequence_from_json(const json& j) {
  detail::require_keys(j, "sequence", {"version", "poses", "cameras"});
  detail::check_version(j, "sequence");
  SequenceMeta seq;
  for (const json& p : j.at("poses")) seq.poses.push_back(pose_from_json(p));
  for (const json& c : j.at("cameras")) seq.cameras.push_back(camera_from_json(c));
  return seq;
}

// --- evaluation reports -------------------------------------------------------

inline json to_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& row : r.per_class) {
    json ap = json::array();
    for (const auto& v : row.ap) {
      if (v) {
        ap.push_back(*v);
      } else {
        ap.push_back(nullptr);
      }
    }
    per_class.push_back(json{{"class", to_string(row.cls)},
                             {"ap", ap},
                             {"mean_ap", row.mean_ap ? json(*row.mean_ap) : json(nullptr)}});
  }
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"version", 1},
              {"per_class", per_class},
              {"det_l", opt(r.det_l)},
              {"det_a", opt(r.det_a)},
              {"det_t", opt(r.det_t)},
              {"top_ll", opt(r.top_ll)},
              {"top_lt", opt(r.top_lt)},
              {"uniscore", opt(r.uni)}};
}

inline std::string report_text(const EvalReport& r) {
  std::string out;
  auto line = [&](const std::string& name, const std::optional<double>& v) {
    out += name + ": " + (v ? std::to_string(*v) : std::string("absent")) + "\n";
  };
  out += "per-class mean AP\n";
  for (const auto& row : r.per_class) {
    line(std::string("  ") + to_string(row.cls), row.mean_ap);
  }
  line("DET_l", r.det_l);
  line("DET_a", r.det_a);
  line("DET_t", r.det_t);
  line("TOP_ll", r.top_ll);
  line("TOP_lt", r.top_lt);
  line("UniScore", r.uni);
  return out;
}

inline std::string pr_curves_csv(const EvalReport& r) {
  std::string out = "class,score,precision,recall\n";
  for (const auto& row : r.per_class) {
    for (const PrPoint& p : row.pr_curve) {
      out += std::string(to_string(row.cls)) + "," + std::to_string(p.score) + "," +
             std::to_string(p.precision) + "," + std::to_string(p.recall) + "\n";
    }
  }
  return out;
}

// --- topology head parameters --------------------------------------------------

inline void save_topo_params(const std::string& dir, const TopoHeadParams& p) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory: " + dir + ": " + ec.message());
  auto save_mlp = [&](const std::string& prefix, const MlpParamsT<double>& mlp) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      save_tensor(dir + "/" + prefix + "_w" + std::to_string(l) + ".vmkt", mlp.layers[l].w);
      save_tensor(dir + "/" + prefix + "_b" + std::to_string(l) + ".vmkt", mlp.layers[l].b);
    }
  };
  save_mlp("lane", p.lane_mlp);
  save_mlp("te", p.te_mlp);
  save_mlp("cls", p.cls_mlp);
  save_tensor(dir + "/wq.vmkt", p.wq);
  save_tensor(dir + "/wk.vmkt", p.wk);
  save_tensor(dir + "/wv.vmkt", p.wv);
  save_json(dir + "/manifest.json",
            json{{"version", 1},
                 {"lane_layers", p.lane_mlp.layers.size()},
                 {"te_layers", p.te_mlp.layers.size()},
                 {"cls_layers", p.cls_mlp.layers.size()}});
}

inline TopoHeadParams load_topo_params(const std::string& dir) {
  const json manifest = load_json(dir + "/manifest.json");
  detail::require_keys(manifest, "params manifest",
                       {"version", "lane_layers", "te_layers", "cls_layers"});
  detail::check_version(manifest, "params manifest");
  TopoHeadParams p;
  auto load_mlp = [&](const std::string& prefix, std::size_t layers) {
    MlpParamsT<double> mlp;
    for (std::size_t l = 0; l < layers; ++l) {
      MlpParamsT<double>::Layer layer{
          load_tensor<double>(dir + "/" + prefix + "_w" + std::to_string(l) + ".vmkt"),
          load_tensor<double>(dir + "/" + prefix + "_b" + std::to_string(l) + ".vmkt")};
      mlp.layers.push_back(std::move(layer));
    }
    return mlp;
  };
  p.lane_mlp = load_mlp("lane", detail::field<std::size_t>(manifest, "lane_layers"));
  p.te_mlp = load_mlp("te", detail::field<std::size_t>(manifest, "te_layers"));
  p.cls_mlp = load_mlp("cls", detail::field<std::size_t>(manifest, "cls_layers"));
  p.wq = load_tensor<double>(dir + "/wq.vmkt");
  p.wk = load_tensor<double>(dir + "/wk.vmkt");
  p.wv = load_tensor<double>(dir + "/wv.vmkt");
  return p;
}

}  // namespace vmk
