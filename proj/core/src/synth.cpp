#include "gsreg/synth.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "gsreg/coarse.hpp"
#include "gsreg/error.hpp"
#include "gsreg/renderer.hpp"

namespace gsreg {

namespace {

constexpr const char* kTruthSchema = "gsreg.split_truth";

Eigen::Vector3d random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = {n(rng), n(rng), n(rng)};
  } while (v.norm() < 1e-9);
  return v.normalized();
}

Eigen::Quaterniond random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng));
  } while (q.norm() < 1e-9);
  q.normalize();
  return canonical(q);
}

/// Sum of a few seeded plane waves per channel, roughly within [0.1, 0.9].
struct ColorField {
  struct Wave {
    Eigen::Vector3d k;
    double phase;
    double amplitude;
  };
  std::array<std::vector<Wave>, 3> waves;

  ColorField(std::mt19937_64& rng, double wavelength_min, double wavelength_max) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double amplitudes[] = {0.2, 0.12, 0.08};
    for (auto& channel : waves) {
      for (double a : amplitudes) {
        Eigen::Vector3d dir = random_direction(rng);
        dir.z() *= 0.3;
        const double wavelength = wavelength_min + (wavelength_max - wavelength_min) * u(rng);
        channel.push_back({dir.normalized() * (2.0 * M_PI / wavelength), 2.0 * M_PI * u(rng), a});
      }
    }
  }

  double operator()(int c, const Eigen::Vector3d& x) const {
    double v = 0.5;
    for (const auto& w : waves[c]) v += w.amplitude * std::sin(w.k.dot(x) + w.phase);
    return v;
  }
};

nlohmann::json ids_to_json(const std::vector<std::size_t>& ids) { return ids; }

}  // namespace

GaussianCloud make_scene(const SceneSpec& spec) {
  if (spec.count < 1) throw InvalidArgument("make_scene: count must be >= 1");
  if (spec.sh_degree < 0 || spec.sh_degree > kMaxShDegree) {
    throw InvalidArgument("make_scene: SH degree out of range");
  }
  if (!(spec.opacity_min > 0.0) || !(spec.opacity_max < 1.0) || spec.opacity_min > spec.opacity_max) {
    throw InvalidArgument("make_scene: opacity range must lie inside (0, 1)");
  }
  if (!(spec.wavelength_min > 0.0) || spec.wavelength_max < spec.wavelength_min) {
    throw InvalidArgument("make_scene: bad color wavelength range");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  const ColorField field(rng, spec.wavelength_min, spec.wavelength_max);
  const int coeffs = sh_coeff_count(spec.sh_degree);

  GaussianCloud cloud(spec.sh_degree);
  cloud.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    Gaussian g;
    for (int a = 0; a < 3; ++a) g.mu[a] = spec.half_extent[a] * (2.0 * u(rng) - 1.0);
    g.rot = random_rotation(rng);
    for (int a = 0; a < 3; ++a) {
      const double sd = std::clamp(spec.scale_median * std::exp(spec.scale_log_sigma * n(rng)),
                                   spec.scale_min, spec.scale_max);
      g.log_scale[a] = std::log(sd);
    }
    g.opacity_logit = logit(spec.opacity_min + (spec.opacity_max - spec.opacity_min) * u(rng));
    for (int c = 0; c < 3; ++c) {
      const double color = std::clamp(field(c, g.mu) + spec.color_noise * n(rng), 0.02, 0.98);
      g.sh[c * kMaxShCoeffs] = (color - kShColorOffset) / kShC0;
      for (int k = 1; k < coeffs; ++k) {
        g.sh[c * kMaxShCoeffs + k] = spec.sh_rest_amplitude * (2.0 * u(rng) - 1.0);
      }
    }
    cloud.push_back(g);
  }
  return cloud;
}

SplitResult split_scene(const GaussianCloud& cloud, double overlap_fraction, const Sim3& transform,
                        std::uint64_t seed) {
  if (!(overlap_fraction >= 0.0 && overlap_fraction <= 1.0)) {
    throw InvalidArgument("split_scene: overlap fraction must lie in [0, 1]");
  }
  const std::size_t n = cloud.size();
  if (n == 0) throw InvalidArgument("split_scene: empty cloud");

  const Eigen::Matrix3Xd means = cloud.means();
  const Eigen::Vector3d centroid = means.rowwise().mean();
  const Eigen::Matrix3Xd centered = means.colwise() - centroid;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> pca(centered * centered.transpose());
  const Eigen::Vector3d e1 = pca.eigenvectors().col(2);
  const Eigen::Vector3d e2 = pca.eigenvectors().col(1);
  std::mt19937_64 rng(seed);
  const double theta = std::uniform_real_distribution<double>(0.0, M_PI)(rng);
  const Eigen::Vector3d normal = (std::cos(theta) * e1 + std::sin(theta) * e2).normalized();

  std::vector<double> offset(n);
  for (std::size_t i = 0; i < n; ++i) offset[i] = normal.dot(centered.col(i));
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return offset[a] < offset[b]; });

  std::size_t shared = static_cast<std::size_t>(std::llround(overlap_fraction * static_cast<double>(n)));
  if (overlap_fraction > 0.0 && shared == 0) {
    shared = 1;  // widen the slab to its smallest non-empty size
  }
  if (overlap_fraction > 0.0 && shared > n) throw StageError("split_scene: overlap slab is empty");
  const std::size_t lo = (n - shared) / 2;
  const std::size_t hi = lo + shared;  // ranks [lo, hi) are shared

  SplitTruth truth;
  truth.transform = transform;
  truth.overlap_fraction = overlap_fraction;
  truth.plane_normal = normal;
  truth.seed = seed;
  truth.slab_lo = shared ? offset[rank[lo]] : (lo < n ? offset[rank[lo]] : 0.0);
  truth.slab_hi = shared ? offset[rank[hi - 1]] : truth.slab_lo;
  std::vector<int> side(n);  // 1: g1 only, 2: g2 only, 3: both
  for (std::size_t r = 0; r < n; ++r) side[rank[r]] = r < lo ? 1 : (r < hi ? 3 : 2);

  std::vector<Gaussian> part1, part2;
  for (std::size_t i = 0; i < n; ++i) {
    if (side[i] & 1) {
      truth.ids_1.push_back(i);
      part1.push_back(cloud[i]);
    }
    if (side[i] & 2) {
      truth.ids_2.push_back(i);
      part2.push_back(cloud[i]);
    }
    if (side[i] == 3) truth.shared_ids.push_back(i);
  }
  SplitResult out;
  out.g1 = GaussianCloud(cloud.sh_degree(), std::move(part1), "g1");
  out.g2 = transform_cloud(GaussianCloud(cloud.sh_degree(), std::move(part2)), transform.inverse(), "g2");
  out.truth = std::move(truth);
  return out;
}

void write_truth(const SplitTruth& truth, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["schema"] = kTruthSchema;
  doc["version"] = 1;
  doc["transform"] = truth.transform.params();
  doc["overlap_fraction"] = truth.overlap_fraction;
  doc["plane_normal"] = {truth.plane_normal.x(), truth.plane_normal.y(), truth.plane_normal.z()};
  doc["slab"] = {truth.slab_lo, truth.slab_hi};
  doc["seed"] = truth.seed;
  doc["ids_1"] = ids_to_json(truth.ids_1);
  doc["ids_2"] = ids_to_json(truth.ids_2);
  doc["shared_ids"] = ids_to_json(truth.shared_ids);
  std::ofstream out(path);
  if (!out) throw FormatError("truth: cannot write " + path.string());
  out << doc.dump() << '\n';
}

SplitTruth read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("truth: cannot open " + path.string());
  try {
    nlohmann::json doc;
    in >> doc;
    if (doc.value("schema", std::string{}) != kTruthSchema) {
      throw FormatError("truth: " + path.string() + ": not a split truth document");
    }
    SplitTruth t;
    t.transform = Sim3::from_params(doc.at("transform").get<std::array<double, 8>>());
    t.overlap_fraction = doc.at("overlap_fraction").get<double>();
    const auto nrm = doc.at("plane_normal").get<std::array<double, 3>>();
    t.plane_normal = {nrm[0], nrm[1], nrm[2]};
    const auto slab = doc.at("slab").get<std::array<double, 2>>();
    t.slab_lo = slab[0];
    t.slab_hi = slab[1];
    t.seed = doc.at("seed").get<std::uint64_t>();
    t.ids_1 = doc.at("ids_1").get<std::vector<std::size_t>>();
    t.ids_2 = doc.at("ids_2").get<std::vector<std::size_t>>();
    t.shared_ids = doc.at("shared_ids").get<std::vector<std::size_t>>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("truth: " + path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError("truth: " + path.string() + ": " + e.what());
  }
}

namespace {

MapF confidence_profile(int w, int h, ConfidenceProfile profile) {
  MapF c(w, h, 1, 1.0f);
  if (profile == ConfidenceProfile::kUniform) return c;
  const double half = 0.5 * std::min(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = std::min({x + 0.5, w - x - 0.5, y + 0.5, h - y - 0.5});
      c(x, y) = static_cast<float>(std::clamp(d / half, 0.01, 1.0));
    }
  }
  return c;
}

/// Rescales `conf` so its sum over the estimator's support equals the target mass.
void normalize_mass(MapF& conf, const MapF& fm_depth, const RenderOutput& r) {
  double mass = 0.0;
  std::vector<char> keep(conf.pixel_count(), 0);
  for (int y = 0; y < conf.height(); ++y) {
    for (int x = 0; x < conf.width(); ++x) {
      const double d = r.depth(x, y);
      if (fm_depth(x, y) > kDepthFloor && std::isfinite(d) && d > 0.0 &&
          r.alpha(x, y) >= kCoverageThreshold) {
        keep[static_cast<std::size_t>(y) * conf.width() + x] = 1;
        mass += conf(x, y);
      }
    }
  }
  if (!(mass > 0.0)) return;
  const double k = kSyntheticConfidenceMass / mass;
  for (float& v : conf.data()) v = static_cast<float>(v * k);
}

MapF foundation_depth(const Image& depth, double unit, std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, 1.0);
  MapF out(depth.width(), depth.height(), 1);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double noise = sigma > 0.0 ? std::max(0.05, 1.0 + sigma * n(rng)) : 1.0;
      out(x, y) = static_cast<float>(unit * depth(x, y) * noise);
    }
  }
  return out;
}

}  // namespace

FoundationBundle make_synthetic_bundle(const GaussianCloud& g1, const GaussianCloud& g2,
                                       const SplitTruth& truth, const CameraView& view1,
                                       const CameraView& view2, const BundleNoise& noise) {
  if (!(noise.fm_unit > 0.0)) throw InvalidArgument("make_synthetic_bundle: fm_unit must be positive");
  if (view1.width() != view2.width() || view1.height() != view2.height()) {
    throw InvalidArgument("make_synthetic_bundle: matched views must share an image size");
  }
  std::mt19937_64 rng(noise.seed);
  const Sim3 chain = view1.world_to_cam() * truth.transform * view2.world_to_cam().inverse();
  Eigen::Quaterniond rot = chain.rotation();
  Eigen::Vector3d t = chain.translation();
  if (noise.rotation_deg != 0.0) {
    rot = canonical(so3_exp(random_direction(rng) * (noise.rotation_deg * M_PI / 180.0)) * rot);
  }
  if (noise.translation_frac != 0.0) {
    t += noise.translation_frac * t.norm() * random_direction(rng);
  }

  const RenderOutput r1 = render(g1, view1);
  const RenderOutput r2 = render(g2, view2);
  FoundationBundle b;
  b.pose_2_to_1 = Sim3::rigid(rot, noise.fm_unit * t);
  b.depth_fm_1 = foundation_depth(r1.depth, noise.fm_unit, rng, noise.depth_noise);
  b.depth_fm_2 = foundation_depth(r2.depth, noise.fm_unit * chain.scale() * (1.0 + noise.scale_frac),
                                  rng, noise.depth_noise);
  b.conf_1 = confidence_profile(view1.width(), view1.height(), noise.profile);
  b.conf_2 = b.conf_1;
  normalize_mass(b.conf_1, b.depth_fm_1, r1);
  normalize_mass(b.conf_2, b.depth_fm_2, r2);
  b.inference_mode = "synthetic";
  return b;
}

Sim3 perturb_sim3(const Sim3& t, double rotation_deg, double translation, double scale_frac,
                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::Vector3d axis = random_direction(rng);
  const Eigen::Vector3d dir = random_direction(rng);
  const bool up = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  const Eigen::Quaterniond r = canonical(so3_exp(axis * (rotation_deg * M_PI / 180.0)) * t.rotation());
  const double s = t.scale() * (up ? 1.0 + scale_frac : 1.0 - scale_frac);
  return {s, r, t.translation() + translation * dir};
}

CameraSet overhead_grid(const Eigen::Vector3d& centre, const Eigen::Vector2d& half_xy, int nx,
                        int ny, double height, double fov_x_deg, int width, int height_px,
                        const std::string& prefix) {
  if (nx < 1 || ny < 1) throw InvalidArgument("overhead_grid: grid must be at least 1x1");
  CameraSet set;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double fx = nx == 1 ? 0.0 : 2.0 * i / (nx - 1) - 1.0;
      const double fy = ny == 1 ? 0.0 : 2.0 * j / (ny - 1) - 1.0;
      const Eigen::Vector3d target = centre + Eigen::Vector3d(fx * half_xy.x(), fy * half_xy.y(), 0.0);
      const Eigen::Vector3d eye = target + Eigen::Vector3d(0.0, 0.0, height);
      set.views.push_back(
          CameraView::look_at(eye, target, Eigen::Vector3d::UnitY(), fov_x_deg, width, height_px));
      char id[64];
      std::snprintf(id, sizeof id, "%s_%03zu", prefix.c_str(), set.ids.size());
      set.ids.emplace_back(id);
    }
  }
  return set;
}

CameraSet orbit_ring(const Eigen::Vector3d& target, double radius, double height, int n,
                     double fov_x_deg, int width, int height_px, double phase_deg,
                     const std::string& prefix) {
  if (n < 1) throw InvalidArgument("orbit_ring: need at least one camera");
  if (!(radius > 0.0)) throw InvalidArgument("orbit_ring: radius must be positive");
  CameraSet set;
  for (int i = 0; i < n; ++i) {
    const double a = (phase_deg + 360.0 * i / n) * M_PI / 180.0;
    const Eigen::Vector3d eye = target + Eigen::Vector3d(radius * std::cos(a), radius * std::sin(a), height);
    set.views.push_back(
        CameraView::look_at(eye, target, Eigen::Vector3d::UnitZ(), fov_x_deg, width, height_px));
    char id[64];
    std::snprintf(id, sizeof id, "%s_%03d", prefix.c_str(), i);
    set.ids.emplace_back(id);
  }
  return set;
}

CameraView standard_view(const SceneSpec& spec, int width, int height, double fov_x_deg) {
  const double tan_half = std::tan(0.5 * fov_x_deg * M_PI / 180.0);
  const double aspect = static_cast<double>(width) / height;
  const double half = std::max(spec.half_extent.x(), spec.half_extent.y() * aspect);
  const double dist = 1.05 * half / tan_half + spec.half_extent.z();
  return CameraView::look_at({0.0, 0.0, dist}, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(),
                             fov_x_deg, width, height);
}

CameraSet express_cameras(const CameraSet& set, const Sim3& a_from_b) {
  CameraSet out;
  out.ids = set.ids;
  for (const auto& v : set.views) out.views.push_back(v.expressed_in(a_from_b));
  return out;
}

EmbeddingSet synthetic_embeddings(const std::vector<Image>& images,
                                  const std::vector<std::string>& ids, int grid) {
  if (images.size() != ids.size()) throw InvalidArgument("synthetic_embeddings: id count mismatch");
  if (images.empty()) throw InvalidArgument("synthetic_embeddings: no images");
  if (grid < 1) throw InvalidArgument("synthetic_embeddings: grid must be >= 1");
  EmbeddingSet set;
  set.view_ids = ids;
  set.vectors.resize(static_cast<Eigen::Index>(images.size()), 3 * grid * grid);
  for (std::size_t k = 0; k < images.size(); ++k) {
    const Image& im = images[k];
    if (im.channels() != 3 || im.width() < grid || im.height() < grid) {
      throw InvalidArgument("synthetic_embeddings: images must be RGB and at least grid x grid");
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(3 * grid * grid);
    for (int gy = 0; gy < grid; ++gy) {
      for (int gx = 0; gx < grid; ++gx) {
        const int x0 = gx * im.width() / grid, x1 = (gx + 1) * im.width() / grid;
        const int y0 = gy * im.height() / grid, y1 = (gy + 1) * im.height() / grid;
        for (int c = 0; c < 3; ++c) {
          double s = 0.0;
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) s += im(x, y, c);
          v[(gy * grid + gx) * 3 + c] = s / ((x1 - x0) * (y1 - y0));
        }
      }
    }
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (int i = c; i < v.size(); i += 3) mean += v[i];
      mean /= grid * grid;
      for (int i = c; i < v.size(); i += 3) v[i] -= mean;
    }
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    else v.setConstant(1.0 / std::sqrt(static_cast<double>(v.size())));
    set.vectors.row(static_cast<Eigen::Index>(k)) = v.cast<float>().transpose();
  }
  return set;
}

}  // namespace gsreg
