#include "gsreg/interchange.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gsreg/error.hpp"

namespace gsreg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kBundleSchema = "gsreg.foundation_bundle";
constexpr const char* kEmbeddingSchema = "gsreg.embeddings";
constexpr const char* kMetaName = "meta.json";

json read_meta(const fs::path& dir, const char* schema) {
  const fs::path path = dir / kMetaName;
  std::ifstream in(path);
  if (!in) throw FormatError("interchange: cannot open " + path.string());
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw FormatError("interchange: " + path.string() + ": " + e.what());
  }
  if (!meta.contains("schema") || meta["schema"] != schema) {
    throw FormatError("interchange: " + path.string() + ": expected schema '" + schema + "'");
  }
  if (!meta.contains("version")) {
    throw FormatError("interchange: " + path.string() + ": missing field 'version'");
  }
  const int version = meta["version"].get<int>();
  if (version != kInterchangeSchemaVersion) {
    throw FormatError("interchange: " + path.string() + ": unknown schema version " +
                      std::to_string(version));
  }
  return meta;
}

void write_meta(const json& meta, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / kMetaName);
  if (!out) throw FormatError("interchange: cannot write " + (dir / kMetaName).string());
  out << meta.dump(2) << '\n';
}

template <typename T>
T field(const json& meta, const char* name) {
  if (!meta.contains(name)) throw FormatError(std::string("interchange: missing field '") + name + "'");
  try {
    return meta[name].get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("interchange: bad field '") + name + "': " + e.what());
  }
}

void check_map(const MapF& m, const char* name, int width, int height) {
  if (m.width() != width || m.height() != height || m.channels() != 1) {
    throw FormatError(std::string("bundle: dimension mismatch for ") + name + " (" +
                      std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                      ", expected " + std::to_string(width) + "x" + std::to_string(height) + ")");
  }
  for (float v : m.data()) {
    if (!std::isfinite(v)) throw FormatError(std::string("bundle: non-finite value in ") + name);
  }
}

void check_confidence(const MapF& m, const char* name) {
  bool positive = false;
  for (float v : m.data()) {
    if (v < 0.0f) throw FormatError(std::string("bundle: negative confidence in ") + name);
    positive = positive || v > 0.0f;
  }
  if (!positive) throw FormatError(std::string("bundle: ") + name + " has no positive entry");
}

}  // namespace

bool FoundationBundle::operator==(const FoundationBundle& o) const {
  return pose_2_to_1.params() == o.pose_2_to_1.params() && depth_fm_1 == o.depth_fm_1 &&
         depth_fm_2 == o.depth_fm_2 && conf_1 == o.conf_1 && conf_2 == o.conf_2 &&
         inference_mode == o.inference_mode;
}

void validate_bundle(const FoundationBundle& b) {
  const int w = b.depth_fm_1.width(), h = b.depth_fm_1.height();
  if (w <= 0 || h <= 0) throw FormatError("bundle: empty depth map");
  check_map(b.depth_fm_1, "depth_fm_1", w, h);
  check_map(b.depth_fm_2, "depth_fm_2", w, h);
  check_map(b.conf_1, "conf_1", w, h);
  check_map(b.conf_2, "conf_2", w, h);
  check_confidence(b.conf_1, "conf_1");
  check_confidence(b.conf_2, "conf_2");
  if (!b.pose_2_to_1.is_rigid(1e-9)) throw FormatError("bundle: pose_2_to_1 must be rigid");
}

FoundationBundle read_bundle(const fs::path& dir) {
  const json meta = read_meta(dir, kBundleSchema);
  const int width = field<int>(meta, "width");
  const int height = field<int>(meta, "height");
  if (width <= 0 || height <= 0) throw FormatError("bundle: non-positive width/height");
  if (field<std::string>(meta, "dtype") != "float32") {
    throw FormatError("bundle: unsupported dtype (expected float32)");
  }
  const auto pose = field<std::vector<double>>(meta, "pose_2_to_1");
  if (pose.size() != 7) throw FormatError("bundle: pose_2_to_1 must hold 7 scalars");
  Eigen::Quaterniond q(pose[0], pose[1], pose[2], pose[3]);
  if (std::abs(q.norm() - 1.0) > 1e-6) {
    throw FormatError("bundle: pose rotation is not orthonormal");
  }
  q = canonical(q);

  FoundationBundle b;
  b.pose_2_to_1 = Sim3::rigid(q, Eigen::Vector3d(pose[4], pose[5], pose[6]));
  b.inference_mode = meta.value("inference_mode", std::string{});

  const json buffers = field<json>(meta, "buffers");
  auto load = [&](const char* name, const json& shape) {
    if (!buffers.contains(name)) throw FormatError(std::string("bundle: missing field '") + name + "'");
    if (!shape.contains(name)) throw FormatError(std::string("bundle: missing shape for ") + name);
    const auto dims = shape[name].get<std::vector<int>>();
    if (dims.size() != 2) throw FormatError(std::string("bundle: bad shape for ") + name);
    const int h = dims[0], w = dims[1];
    if (w != width || h != height) {
      throw FormatError(std::string("bundle: dimension mismatch for ") + name + " (" +
                        std::to_string(w) + "x" + std::to_string(h) + ", expected " +
                        std::to_string(width) + "x" + std::to_string(height) + ")");
    }
    MapF m(w, h, 1);
    m.data() = read_f32(dir / buffers[name].get<std::string>(), m.data().size());
    return m;
  };
  const json shapes = field<json>(meta, "shapes");
  b.depth_fm_1 = load("depth_fm_1", shapes);
  b.depth_fm_2 = load("depth_fm_2", shapes);
  b.conf_1 = load("conf_1", shapes);
  b.conf_2 = load("conf_2", shapes);
  validate_bundle(b);
  return b;
}

void write_bundle(const FoundationBundle& b, const fs::path& dir) {
  validate_bundle(b);
  const auto p = b.pose_2_to_1.params();
  json meta;
  meta["schema"] = kBundleSchema;
  meta["version"] = kInterchangeSchemaVersion;
  meta["width"] = b.width();
  meta["height"] = b.height();
  meta["dtype"] = "float32";
  meta["layout"] = "row-major";
  meta["depth_convention"] = "z";
  meta["pose_2_to_1"] = {p[1], p[2], p[3], p[4], p[5], p[6], p[7]};
  meta["inference_mode"] = b.inference_mode;
  json buffers, shapes;
  const std::pair<const char*, const MapF*> maps[] = {{"depth_fm_1", &b.depth_fm_1},
                                                      {"depth_fm_2", &b.depth_fm_2},
                                                      {"conf_1", &b.conf_1},
                                                      {"conf_2", &b.conf_2}};
  fs::create_directories(dir);
  for (const auto& [name, map] : maps) {
    const std::string file = std::string(name) + ".f32";
    buffers[name] = file;
    shapes[name] = {map->height(), map->width()};
    write_f32(map->data(), dir / file);
  }
  meta["buffers"] = buffers;
  meta["shapes"] = shapes;
  write_meta(meta, dir);
}

void validate_embeddings(const EmbeddingSet& set) {
  if (set.view_ids.empty()) throw FormatError("embeddings: empty set");
  if (static_cast<Eigen::Index>(set.view_ids.size()) != set.vectors.rows()) {
    throw FormatError("embeddings: view_ids do not align with vectors");
  }
  if (set.vectors.cols() < 1) throw FormatError("embeddings: zero dimension");
  for (Eigen::Index i = 0; i < set.vectors.rows(); ++i) {
    if (!set.vectors.row(i).allFinite()) {
      throw FormatError("embeddings: non-finite vector for view " + set.view_ids[i]);
    }
    if (set.vectors.row(i).squaredNorm() == 0.0f) {
      throw FormatError("embeddings: zero-norm vector for view " + set.view_ids[i]);
    }
  }
}

EmbeddingSet read_embeddings(const fs::path& dir) {
  const json meta = read_meta(dir, kEmbeddingSchema);
  const int count = field<int>(meta, "count");
  const int dim = field<int>(meta, "dim");
  if (count < 1 || dim < 1) throw FormatError("embeddings: non-positive count/dim");
  if (field<std::string>(meta, "dtype") != "float32") {
    throw FormatError("embeddings: unsupported dtype (expected float32)");
  }
  EmbeddingSet set;
  set.view_ids = field<std::vector<std::string>>(meta, "view_ids");
  if (set.view_ids.size() != static_cast<std::size_t>(count)) {
    throw FormatError("embeddings: view_ids count does not match 'count'");
  }
  const auto data = read_f32(dir / field<std::string>(meta, "buffer"),
                             static_cast<std::size_t>(count) * dim);
  set.vectors.resize(count, dim);
  std::copy(data.begin(), data.end(), set.vectors.data());
  validate_embeddings(set);
  return set;
}

void write_embeddings(const EmbeddingSet& set, const fs::path& dir) {
  validate_embeddings(set);
  json meta;
  meta["schema"] = kEmbeddingSchema;
  meta["version"] = kInterchangeSchemaVersion;
  meta["count"] = set.size();
  meta["dim"] = set.dim();
  meta["dtype"] = "float32";
  meta["buffer"] = "vectors.f32";
  meta["view_ids"] = set.view_ids;
  fs::create_directories(dir);
  std::vector<float> data(set.vectors.data(), set.vectors.data() + set.vectors.size());
  write_f32(data, dir / "vectors.f32");
  write_meta(meta, dir);
}

}  // namespace gsreg
