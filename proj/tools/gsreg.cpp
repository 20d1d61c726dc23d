// gsreg command-line tool: each subcommand wraps one library stage, and
// `pipeline` chains matching, coarse registration, refinement and merging.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gsreg/camera.hpp"
#include "gsreg/coarse.hpp"
#include "gsreg/error.hpp"
#include "gsreg/gaussian.hpp"
#include "gsreg/icp.hpp"
#include "gsreg/interchange.hpp"
#include "gsreg/matching.hpp"
#include "gsreg/merge.hpp"
#include "gsreg/metrics.hpp"
#include "gsreg/parallel.hpp"
#include "gsreg/ply.hpp"
#include "gsreg/refine.hpp"
#include "gsreg/renderer.hpp"
#include "gsreg/report.hpp"
#include "gsreg/synth.hpp"

namespace fs = std::filesystem;
using namespace gsreg;

namespace {

constexpr int kExitStage = 1;
constexpr int kExitUsage = 2;

/// Input problems (bad flags, unreadable or malformed files) map to exit 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct GlobalOptions {
  int threads = 0;
  std::string log_level = "info";
  std::string precision = "float32";
};

PlyPrecision ply_precision(const GlobalOptions& g) {
  return g.precision == "float64" ? PlyPrecision::kFloat64 : PlyPrecision::kFloat32;
}

GaussianCloud load_cloud(const std::string& path) {
  spdlog::debug("loading {}", path);
  GaussianCloud cloud = load_ply(path);
  spdlog::info("{}: {} Gaussians, SH degree {}", path, cloud.size(), cloud.sh_degree());
  return cloud;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

nlohmann::json pair_to_json(const MatchedPair& p) {
  return {{"index_1", p.index_1}, {"index_2", p.index_2}, {"view_id_1", p.view_id_1},
          {"view_id_2", p.view_id_2}, {"score", p.score}};
}

MatchedPair read_match(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("match: cannot open " + path.string());
  try {
    nlohmann::json doc;
    in >> doc;
    MatchedPair p;
    p.index_1 = doc.at("index_1").get<std::size_t>();
    p.index_2 = doc.at("index_2").get<std::size_t>();
    p.view_id_1 = doc.value("view_id_1", std::string{});
    p.view_id_2 = doc.value("view_id_2", std::string{});
    p.score = doc.value("score", 0.0);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("match: " + path.string() + ": " + e.what());
  }
}

void write_match(const MatchedPair& p, const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw FormatError("match: cannot write " + path.string());
  out << pair_to_json(p).dump(2) << '\n';
}

const CameraView& view_at(const CameraSet& set, std::size_t index, const char* which) {
  if (index >= set.views.size()) {
    throw UsageError(fmt::format("{} camera index {} out of range ({} views)", which, index,
                                 set.views.size()));
  }
  return set.views[index];
}

Eigen::AlignedBox3d bounds(const GaussianCloud& cloud) {
  Eigen::AlignedBox3d box;
  for (const auto& g : cloud.gaussians()) box.extend(g.mu);
  return box;
}

/// Overhead grid over the cloud's footprint, as a capture rig would see it.
CameraSet capture(const GaussianCloud& cloud, int nx, int ny, double height, int size,
                  const std::string& prefix) {
  const Eigen::AlignedBox3d box = bounds(cloud);
  const Eigen::Vector2d half = 0.7 * (0.5 * box.sizes()).head<2>();
  return overhead_grid(box.center(), half, nx, ny, height, 60.0, size, size, prefix);
}

// ---------------------------------------------------------------------------
// Refinement settings shared by `refine` and `pipeline`.

struct RefineFlags {
  int iters = 400;
  double lr = 1e-2;
  double lr_trans_rel = 1e-2;
  double final_lr_factor = 0.01;
  int views_per_iter = 8;
  double tol = 0.0;
  int patience = 10;
  bool freeze_sh = false;
  int midpoint_views = 2;
  std::size_t overlap_views = 4;
  double min_fraction = 0.1;
  std::uint64_t seed = 0;
  std::string history;

  void add(CLI::App* app) {
    app->add_option("--history", history, "Write the per-iteration loss history as a delimited table");
    app->add_option("--iters", iters, "Maximum refinement iterations")->capture_default_str();
    app->add_option("--lr", lr, "Step size for rotation and log-scale")->capture_default_str();
    app->add_option("--lr-trans", lr_trans_rel, "Translation step size, relative to the diameter of g1")
        ->capture_default_str();
    app->add_option("--final-lr-factor", final_lr_factor, "Step-size multiplier reached at the last iteration")
        ->capture_default_str();
    app->add_option("--views-per-iter", views_per_iter, "Views sampled per iteration")->capture_default_str();
    app->add_option("--tol", tol, "Relative improvement below which an iteration counts as stalled (0 disables)")
        ->capture_default_str();
    app->add_option("--patience", patience, "Stalled iterations before stopping")->capture_default_str();
    app->add_flag("--freeze-sh", freeze_sh, "Do not rotate SH coefficients during refinement");
    app->add_option("--midpoint-views", midpoint_views, "Views interpolated between the matched cameras")
        ->capture_default_str();
    app->add_option("--overlap-views", overlap_views, "Candidate views kept by overlap ranking")
        ->capture_default_str();
    app->add_option("--min-overlap", min_fraction, "Overlap share a candidate view must reach")
        ->capture_default_str();
  }

  RefineConfig config(double diameter) const {
    RefineConfig cfg;
    cfg.max_iters = iters;
    cfg.lr_rot = lr;
    cfg.lr_logscale = lr;
    cfg.lr_trans = lr_trans_rel * diameter;
    cfg.final_lr_factor = final_lr_factor;
    cfg.views_per_iter = views_per_iter;
    cfg.convergence_tol = tol;
    cfg.patience = patience;
    cfg.freeze_sh_rotation = freeze_sh;
    cfg.seed = seed;
    validate_refine_config(cfg);
    return cfg;
  }

  ViewPlan plan() const {
    ViewPlan p;
    p.midpoint_views = midpoint_views;
    p.overlap_views = overlap_views;
    p.min_fraction = min_fraction;
    p.seed = seed;
    return p;
  }
};

struct Refined {
  RefineResult result;
  std::size_t views = 0;
};

Refined run_refinement(const GaussianCloud& g1, const GaussianCloud& g2, const Sim3& init,
                       const CameraSet& cams1, const CameraSet& cams2, const MatchedPair& pair,
                       const RefineFlags& flags) {
  const CameraView& c1 = view_at(cams1, pair.index_1, "g1");
  const CameraView& c2 = view_at(cams2, pair.index_2, "g2");
  const auto views = plan_refinement_views(g1, g2, init, c1, c2.expressed_in(init), cams1.views, flags.plan());
  spdlog::info("refining over {} views", views.size());
  const auto t0 = std::chrono::steady_clock::now();
  Refined out{refine(g1, g2, init, views, flags.config(scene_diameter(g1))), views.size()};
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  spdlog::info("refinement: {} iterations ({}), loss {:.5e} -> {:.5e}, {:.1f} s", out.result.iterations,
               out.result.stop_reason, out.result.raw_loss.front(), out.result.loss_history.back(), secs);
  if (!flags.history.empty()) {
    Table t{{"iteration", "loss", "best_loss"}, {}};
    for (std::size_t i = 0; i < out.result.raw_loss.size(); ++i) {
      t.add_row({std::to_string(i), format_number(out.result.raw_loss[i]), format_number(out.result.loss_history[i])});
    }
    ensure_parent(flags.history);
    write_table(t, flags.history);
  }
  return out;
}

void add_refine_diagnostics(TransformReport& report, const Refined& r) {
  report.diagnostics["refine_iterations"] = r.result.iterations;
  report.diagnostics["refine_best_iteration"] = r.result.best_iteration;
  report.diagnostics["refine_views"] = static_cast<double>(r.views);
  report.diagnostics["loss_initial"] = r.result.raw_loss.front();
  report.diagnostics["loss_final"] = r.result.loss_history.back();
  report.diagnostics["converged"] = r.result.converged ? 1.0 : 0.0;
  report.labels["stop_reason"] = r.result.stop_reason;
}

void add_alignment_rows(Table& table, const std::string& stage, const AlignmentError& e) {
  table.add_row({stage + ".rotation_deg", format_number(e.rotation_deg)});
  table.add_row({stage + ".translation_rel", format_number(e.translation_rel)});
  table.add_row({stage + ".scale_rel", format_number(e.scale_rel)});
  table.add_row({stage + ".rms_displacement_rel", format_number(e.rms_displacement_rel)});
}

void emit_table(const Table& table, const std::string& path) {
  std::cout << format_table(table);
  if (!path.empty()) {
    ensure_parent(path);
    write_table(table, path);
  }
}

// ---------------------------------------------------------------------------
// Subcommands.

struct SynthCmd {
  std::size_t count = 5000;
  std::uint64_t seed = 0;
  std::string out;
  std::string instance;
  double overlap = 0.3;
  double truth_scale = 1.7;
  double truth_rot_deg = 20.0;
  double truth_trans_rel = 0.3;
  int image_size = 256;
  int grid_x = 4, grid_y = 3;
  double height = 2.0;
  double depth_noise = 0.0;
  double pose_noise_deg = 0.0;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("synth", "Generate a synthetic scene or a full registration instance");
    app->add_option("--count", count, "Number of Gaussians")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--out", out, "Write the scene to this PLY");
    app->add_option("--instance", instance, "Write a split registration instance into this directory");
    app->add_option("--overlap", overlap, "Shared fraction of Gaussians between the two parts")
        ->capture_default_str();
    app->add_option("--truth-scale", truth_scale, "Scale of the ground-truth transform")->capture_default_str();
    app->add_option("--truth-rot", truth_rot_deg, "Rotation angle of the ground-truth transform, degrees")
        ->capture_default_str();
    app->add_option("--truth-trans", truth_trans_rel, "Translation of the ground-truth transform, relative to the diameter")
        ->capture_default_str();
    app->add_option("--image-size", image_size, "Camera resolution (square)")->capture_default_str();
    app->add_option("--grid", grid_x, "Cameras along x")->capture_default_str();
    app->add_option("--grid-y", grid_y, "Cameras along y")->capture_default_str();
    app->add_option("--height", height, "Camera height above the scene centre")->capture_default_str();
    app->add_option("--depth-noise", depth_noise, "Multiplicative depth noise in the synthetic bundle")
        ->capture_default_str();
    app->add_option("--pose-noise", pose_noise_deg, "Rotation noise on the synthetic relative pose, degrees")
        ->capture_default_str();
    app->callback([this] {
      if (out.empty() && instance.empty()) throw UsageError("synth: give --out, --instance or both");
    });
    cmd = app;
  }

  int run(const GlobalOptions& g) const {
    SceneSpec spec;
    spec.count = count;
    spec.seed = seed;
    const GaussianCloud scene = make_scene(spec);
    spdlog::info("synthesized {} Gaussians (seed {})", scene.size(), seed);
    if (!out.empty()) {
      ensure_parent(out);
      save_ply(scene, out, ply_precision(g));
    }
    if (!instance.empty()) write_instance(scene, g);
    return 0;
  }

  void write_instance(const GaussianCloud& scene, const GlobalOptions& g) const {
    const fs::path dir(instance);
    fs::create_directories(dir);
    const double diameter = scene_diameter(scene);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> n(0.0, 1.0);
    const Eigen::Vector3d axis = Eigen::Vector3d{n(rng), n(rng), n(rng)}.normalized();
    const Eigen::Vector3d dir_t = Eigen::Vector3d{n(rng), n(rng), n(rng)}.normalized();
    const Sim3 truth{truth_scale, so3_exp(axis * (truth_rot_deg * std::numbers::pi / 180.0)),
                     dir_t * (truth_trans_rel * diameter)};
    const SplitResult split = split_scene(scene, overlap, truth, seed + 1);

    const CameraSet cams1 = capture(split.g1, grid_x, grid_y, height, image_size, "g1");
    const CameraSet cams2 = express_cameras(
        capture(transform_cloud(split.g2, truth), grid_x, grid_y, height, image_size, "g2"), truth.inverse());
    const auto img1 = render_candidate_views(split.g1, cams1.views);
    const auto img2 = render_candidate_views(split.g2, cams2.views);
    const EmbeddingSet e1 = synthetic_embeddings(img1, cams1.ids);
    const EmbeddingSet e2 = synthetic_embeddings(img2, cams2.ids);
    const MatchedPair pair = best_pair(e1, e2);

    BundleNoise noise;
    noise.depth_noise = depth_noise;
    noise.rotation_deg = pose_noise_deg;
    noise.seed = seed + 2;
    const FoundationBundle bundle = make_synthetic_bundle(split.g1, split.g2, split.truth, cams1.views[pair.index_1],
                                                          cams2.views[pair.index_2], noise);

    save_ply(scene, dir / "source.ply", ply_precision(g));
    save_ply(split.g1, dir / "g1.ply", ply_precision(g));
    save_ply(split.g2, dir / "g2.ply", ply_precision(g));
    write_truth(split.truth, dir / "truth.json");
    write_cameras(cams1, dir / "cams1.json");
    write_cameras(cams2, dir / "cams2.json");
    write_embeddings(e1, dir / "emb1");
    write_embeddings(e2, dir / "emb2");
    write_bundle(bundle, dir / "bundle");
    spdlog::info("instance written to {} (g1 {} / g2 {} Gaussians, matched {} <-> {})", dir.string(),
                 split.g1.size(), split.g2.size(), pair.view_id_1, pair.view_id_2);
  }

  CLI::App* cmd = nullptr;
};

struct RenderCmd {
  std::string in, cameras, out, sim3;
  bool depth = false;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("render", "Render a model at every camera of a cameras.json");
    app->add_option("--in", in, "Input PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--cameras", cameras, "cameras.json")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output directory for PNGs")->required();
    app->add_option("--sim3", sim3, "Transform report applied to the model before rendering")
        ->check(CLI::ExistingFile);
    app->add_flag("--depth", depth, "Also write normalized depth PNGs");
    cmd = app;
  }

  int run(const GlobalOptions&) const {
    GaussianCloud cloud = load_cloud(in);
    if (!sim3.empty()) cloud = transform_cloud(cloud, read_transform_report(sim3).transform);
    const CameraSet cams = read_cameras(cameras);
    fs::create_directories(out);
    for (std::size_t i = 0; i < cams.views.size(); ++i) {
      const RenderOutput r = render(cloud, cams.views[i]);
      const std::string id = i < cams.ids.size() ? cams.ids[i] : std::to_string(i);
      write_png(r.rgb, fs::path(out) / (id + ".png"));
      if (depth) {
        double dmax = 0.0;
        for (double d : r.depth.data()) dmax = std::max(dmax, d);
        Image d = r.depth;
        if (dmax > 0.0) {
          for (double& v : d.data()) v /= dmax;
        }
        write_png(d, fs::path(out) / (id + "_depth.png"));
      }
    }
    spdlog::info("rendered {} views into {}", cams.views.size(), out);
    return 0;
  }

  CLI::App* cmd = nullptr;
};

struct MatchCmd {
  std::string emb1, emb2, out;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("match", "Pick the most similar view pair from two embedding sets");
    app->add_option("--emb1", emb1, "Embedding directory of model 1")->required()->check(CLI::ExistingDirectory);
    app->add_option("--emb2", emb2, "Embedding directory of model 2")->required()->check(CLI::ExistingDirectory);
    app->add_option("--out", out, "Write the matched pair as JSON");
    cmd = app;
  }

  int run(const GlobalOptions&) const {
    const MatchedPair p = best_pair(read_embeddings(emb1), read_embeddings(emb2));
    std::cout << pair_to_json(p).dump() << '\n';
    if (!out.empty()) write_match(p, out);
    return 0;
  }

  CLI::App* cmd = nullptr;
};

struct CoarseCmd {
  std::string g1, g2, cams1, cams2, bundle, match, out;
  bool no_rescale = false;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("coarse", "Initial Sim(3) from depth ratios and the relative pose");
    app->add_option("--g1", g1, "Model 1 PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--g2", g2, "Model 2 PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--cams1", cams1, "Cameras of model 1")->required()->check(CLI::ExistingFile);
    app->add_option("--cams2", cams2, "Cameras of model 2")->required()->check(CLI::ExistingFile);
    app->add_option("--bundle", bundle, "Foundation-model bundle directory")->required()->check(CLI::ExistingDirectory);
    app->add_option("--match", match, "Matched pair JSON written by `match`")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output transform report")->required();
    app->add_flag("--no-rescale", no_rescale, "Use the foundation translation without unit conversion");
    cmd = app;
  }

  int run(const GlobalOptions&) const {
    const GaussianCloud a = load_cloud(g1), b = load_cloud(g2);
    const CameraSet c1 = read_cameras(cams1), c2 = read_cameras(cams2);
    const MatchedPair pair = read_match(match);
    CoarseOptions opts;
    opts.rescale_translation = !no_rescale;
    const CoarseEstimate est = coarse_register(a, b, view_at(c1, pair.index_1, "g1"), view_at(c2, pair.index_2, "g2"),
                                               read_bundle(bundle), pair, opts);
    TransformReport report{est.transform, {}, {}};
    report.diagnostics["scale_ratio"] = est.scale_ratio;
    report.diagnostics["translation_scale"] = est.translation_scale;
    report.diagnostics["pixels_1"] = static_cast<double>(est.diagnostics.pixels_1);
    report.diagnostics["pixels_2"] = static_cast<double>(est.diagnostics.pixels_2);
    report.diagnostics["match_score"] = pair.score;
    report.labels["stage"] = "coarse";
    report.labels["view_id_1"] = pair.view_id_1;
    report.labels["view_id_2"] = pair.view_id_2;
    ensure_parent(out);
    write_transform_report(report, out);
    spdlog::info("coarse scale {:.6f}", est.scale_ratio);
    return 0;
  }

  CLI::App* cmd = nullptr;
};

struct RefineCmd {
  std::string g1, g2, init, cams1, cams2, match, out;
  RefineFlags flags;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("refine", "Photometric Sim(3) refinement from an initial transform");
    app->add_option("--g1", g1, "Model 1 PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--g2", g2, "Model 2 PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--init", init, "Initial transform report")->required()->check(CLI::ExistingFile);
    app->add_option("--cams1", cams1, "Cameras of model 1 (candidate refinement views)")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--cams2", cams2, "Cameras of model 2")->required()->check(CLI::ExistingFile);
    app->add_option("--match", match, "Matched pair JSON")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output transform report")->required();
    app->add_option("--seed", flags.seed, "Random seed")->capture_default_str();
    flags.add(app);
    cmd = app;
  }

  int run(const GlobalOptions&) const {
    const GaussianCloud a = load_cloud(g1), b = load_cloud(g2);
    const TransformReport start = read_transform_report(init);
    const Refined r =
        run_refinement(a, b, start.transform, read_cameras(cams1), read_cameras(cams2), read_match(match), flags);
    TransformReport report{r.result.transform, {}, {{"stage", "refine"}}};
    add_refine_diagnostics(report, r);
    ensure_parent(out);
    write_transform_report(report, out);
    return 0;
  }

  CLI::App* cmd = nullptr;
};

struct MergeCmd {
  std::string g1, g2, sim3, out;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("merge", "Transform model 2 into model 1's frame and concatenate");
    app->add_option("--g1", g1, "Model 1 PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--g2", g2, "Model 2 PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--sim3", sim3, "Transform report mapping model 2 into model 1")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output PLY")->required();
    cmd = app;
  }

  int run(const GlobalOptions& g) const {
    const GaussianCloud merged = merge(load_cloud(g1), load_cloud(g2), read_transform_report(sim3).transform);
    ensure_parent(out);
    save_ply(merged, out, ply_precision(g));
    spdlog::info("merged model has {} Gaussians", merged.size());
    return 0;
  }

  CLI::App* cmd = nullptr;
};

struct FuseManyCmd {
  std::vector<std::string> inputs;
  std::vector<std::string> edges;
  std::string out;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("fuse-many", "Fuse several models along a tree of pairwise transforms");
    app->add_option("--in", inputs, "Model PLYs, indexed from 0 in the given order")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--edge", edges, "CHILD:PARENT:REPORT, the report mapping CHILD into PARENT")->required();
    app->add_option("--out", out, "Output PLY")->required();
    cmd = app;
  }

  static FusionEdge parse_edge(const std::string& text) {
    const auto a = text.find(':');
    const auto b = a == std::string::npos ? a : text.find(':', a + 1);
    if (b == std::string::npos) throw UsageError("fuse-many: edge must look like CHILD:PARENT:REPORT, got " + text);
    FusionEdge e;
    try {
      e.child = std::stoul(text.substr(0, a));
      e.parent = std::stoul(text.substr(a + 1, b - a - 1));
    } catch (const std::exception&) {
      throw UsageError("fuse-many: bad model index in edge " + text);
    }
    const std::string report = text.substr(b + 1);
    if (!fs::exists(report)) throw UsageError("fuse-many: report not found: " + report);
    e.transform = read_transform_report(report).transform;
    return e;
  }

  int run(const GlobalOptions& g) const {
    std::vector<GaussianCloud> clouds;
    for (const auto& p : inputs) clouds.push_back(load_cloud(p));
    std::vector<FusionEdge> plan;
    for (const auto& e : edges) plan.push_back(parse_edge(e));
    const GaussianCloud fused = fuse_many(clouds, plan);
    ensure_parent(out);
    save_ply(fused, out, ply_precision(g));
    spdlog::info("fused {} models into {} Gaussians", clouds.size(), fused.size());
    return 0;
  }

  CLI::App* cmd = nullptr;
};

struct EvalCmd {
  std::string g1, g2, estimate, truth, table;
  bool icp = false;
  int icp_iters = 50;
  std::string reference, fused, cameras;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("eval", "Alignment errors against ground truth, an ICP baseline and image metrics");
    app->add_option("--g1", g1, "Model 1 PLY (needed for --icp)")->check(CLI::ExistingFile);
    app->add_option("--g2", g2, "Model 2 PLY")->check(CLI::ExistingFile);
    app->add_option("--estimate", estimate, "Estimated transform report")->check(CLI::ExistingFile);
    app->add_option("--truth", truth, "Split truth JSON written by `synth --instance`")->check(CLI::ExistingFile);
    app->add_flag("--icp", icp, "Run point-to-point ICP from the estimate as a baseline");
    app->add_option("--icp-iters", icp_iters, "ICP iterations")->capture_default_str();
    app->add_option("--reference", reference, "Reference PLY for image metrics")->check(CLI::ExistingFile);
    app->add_option("--fused", fused, "Fused PLY compared against --reference")->check(CLI::ExistingFile);
    app->add_option("--cameras", cameras, "Cameras for image metrics")->check(CLI::ExistingFile);
    app->add_option("--table", table, "Also write the metrics as a tab-separated table");
    cmd = app;
  }

  int run(const GlobalOptions&) const {
    Table t{{"metric", "value"}, {}};
    const bool images = !reference.empty() || !fused.empty() || !cameras.empty();
    if (images && (reference.empty() || fused.empty() || cameras.empty())) {
      throw UsageError("eval: image metrics need --reference, --fused and --cameras");
    }
    if (!images && estimate.empty()) throw UsageError("eval: nothing to evaluate; give --estimate or image inputs");

    if (!estimate.empty()) {
      if (g2.empty()) throw UsageError("eval: --estimate needs --g2");
      const GaussianCloud b = load_cloud(g2);
      const Sim3 est = read_transform_report(estimate).transform;
      std::optional<SplitTruth> st;
      if (!truth.empty()) st = read_truth(truth);
      const double diameter = scene_diameter(transform_cloud(b, st ? st->transform : est));
      if (st) add_alignment_rows(t, "estimate", alignment_error(est, st->transform, b, diameter));
      if (icp) {
        if (g1.empty()) throw UsageError("eval: --icp needs --g1");
        const GaussianCloud a = load_cloud(g1);
        const IcpResult r = icp_umeyama(a.means(), b.means(), est, icp_iters);
        t.add_row({"icp.iterations", std::to_string(r.iterations)});
        t.add_row({"icp.collapsed", r.collapsed ? "1" : "0"});
        t.add_row({"icp.rms_residual", format_number(r.rms_residual)});
        if (st) add_alignment_rows(t, "icp", alignment_error(r.transform, st->transform, b, diameter));
      }
    }
    if (images) {
      const GaussianCloud ref = load_cloud(reference), fus = load_cloud(fused);
      const CameraSet cams = read_cameras(cameras);
      double psnr_sum = 0.0, ssim_sum = 0.0, psnr_min = kPsnrCap, ssim_min = 1.0;
      for (const auto& v : cams.views) {
        const Image a = render(fus, v).rgb, b = render(ref, v).rgb;
        const double p = psnr(a, b), s = ssim(a, b);
        psnr_sum += p;
        ssim_sum += s;
        psnr_min = std::min(psnr_min, p);
        ssim_min = std::min(ssim_min, s);
      }
      const double n = static_cast<double>(std::max<std::size_t>(cams.views.size(), 1));
      t.add_row({"psnr.mean", format_number(psnr_sum / n)});
      t.add_row({"psnr.min", format_number(psnr_min)});
      t.add_row({"ssim.mean", format_number(ssim_sum / n)});
      t.add_row({"ssim.min", format_number(ssim_min)});
    }
    emit_table(t, table);
    return 0;
  }

  CLI::App* cmd = nullptr;
};

struct TransformCmd {
  std::string in, sim3, out;
  bool inverse = false;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("transform", "Apply a Sim(3) transform report to a model");
    app->add_option("--in", in, "Input PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--sim3", sim3, "Transform report")->required()->check(CLI::ExistingFile);
    app->add_flag("--inverse", inverse, "Apply the inverse transform");
    app->add_option("--out", out, "Output PLY")->required();
    cmd = app;
  }

  int run(const GlobalOptions& g) const {
    Sim3 t = read_transform_report(sim3).transform;
    if (inverse) t = t.inverse();
    ensure_parent(out);
    save_ply(transform_cloud(load_cloud(in), t), out, ply_precision(g));
    return 0;
  }

  CLI::App* cmd = nullptr;
};

struct PipelineCmd {
  std::string g1, g2, bundle, emb1, emb2, cams1, cams2, out, report, table, truth;
  RefineFlags flags;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("pipeline", "match, coarse, refine and merge in one run");
    app->add_option("--g1", g1, "Model 1 PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--g2", g2, "Model 2 PLY")->required()->check(CLI::ExistingFile);
    app->add_option("--bundle", bundle, "Foundation-model bundle directory")->required()->check(CLI::ExistingDirectory);
    app->add_option("--emb1", emb1, "Embedding directory of model 1")->required()->check(CLI::ExistingDirectory);
    app->add_option("--emb2", emb2, "Embedding directory of model 2")->required()->check(CLI::ExistingDirectory);
    app->add_option("--cams1", cams1, "Cameras of model 1; defaults to cams1.json next to the bundle")
        ->check(CLI::ExistingFile);
    app->add_option("--cams2", cams2, "Cameras of model 2; defaults to cams2.json next to the bundle")
        ->check(CLI::ExistingFile);
    app->add_option("--out", out, "Fused PLY")->required();
    app->add_option("--report", report, "Write the final transform report here");
    app->add_option("--table", table, "Write the metrics as a tab-separated table");
    app->add_option("--truth", truth, "Split truth JSON; adds alignment errors to the table")
        ->check(CLI::ExistingFile);
    app->add_option("--seed", flags.seed, "Random seed")->capture_default_str();
    flags.add(app);
    cmd = app;
  }

  std::string camera_file(const std::string& given, const char* name) const {
    if (!given.empty()) return given;
    const fs::path guess = fs::path(bundle).parent_path() / name;
    if (!fs::exists(guess)) throw UsageError(fmt::format("pipeline: no --{} and {} not found", fs::path(name).stem().string(), guess.string()));
    return guess.string();
  }

  int run(const GlobalOptions& g) const {
    const GaussianCloud a = load_cloud(g1), b = load_cloud(g2);
    const CameraSet c1 = read_cameras(camera_file(cams1, "cams1.json"));
    const CameraSet c2 = read_cameras(camera_file(cams2, "cams2.json"));

    const MatchedPair pair = best_pair(read_embeddings(emb1), read_embeddings(emb2));
    spdlog::info("matched {} <-> {} (cosine {:.4f})", pair.view_id_1, pair.view_id_2, pair.score);

    const CoarseEstimate coarse = coarse_register(a, b, view_at(c1, pair.index_1, "g1"),
                                                  view_at(c2, pair.index_2, "g2"), read_bundle(bundle), pair);
    spdlog::info("coarse scale {:.6f}", coarse.scale_ratio);

    const Refined r = run_refinement(a, b, coarse.transform, c1, c2, pair, flags);
    const GaussianCloud fused = merge(a, b, r.result.transform);
    ensure_parent(out);
    save_ply(fused, out, ply_precision(g));

    TransformReport rep{r.result.transform, {}, {{"stage", "pipeline"}}};
    rep.diagnostics["coarse_scale"] = coarse.scale_ratio;
    rep.diagnostics["match_score"] = pair.score;
    add_refine_diagnostics(rep, r);
    rep.labels["view_id_1"] = pair.view_id_1;
    rep.labels["view_id_2"] = pair.view_id_2;
    if (!report.empty()) {
      ensure_parent(report);
      write_transform_report(rep, report);
    }

    Table t{{"metric", "value"}, {}};
    t.add_row({"match.score", format_number(pair.score)});
    t.add_row({"coarse.scale", format_number(coarse.scale_ratio)});
    t.add_row({"refine.views", std::to_string(r.views)});
    t.add_row({"refine.iterations", std::to_string(r.result.iterations)});
    t.add_row({"refine.loss_initial", format_number(r.result.raw_loss.front())});
    t.add_row({"refine.loss_final", format_number(r.result.loss_history.back())});
    t.add_row({"fused.gaussians", std::to_string(fused.size())});
    if (!truth.empty()) {
      const SplitTruth st = read_truth(truth);
      const double diameter = scene_diameter(a);
      add_alignment_rows(t, "coarse", alignment_error(coarse.transform, st.transform, b, diameter));
      add_alignment_rows(t, "refined", alignment_error(r.result.transform, st.transform, b, diameter));
    }
    emit_table(t, table);
    return 0;
  }

  CLI::App* cmd = nullptr;
};

void print_error(const char* kind, int code, const std::string& message) {
  const nlohmann::json line = {{"error", kind}, {"exit_code", code}, {"message", message}};
  std::cerr << line.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gsreg: register and fuse 3D Gaussian Splatting models"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--threads", global.threads, "Worker threads (0 uses all cores)")->capture_default_str();
  app.add_option("--log-level", global.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}))
      ->capture_default_str();
  app.add_option("--precision", global.precision, "PLY output precision")
      ->check(CLI::IsMember({"float32", "float64"}))
      ->capture_default_str();

  SynthCmd synth;
  RenderCmd render_cmd;
  MatchCmd match;
  CoarseCmd coarse;
  RefineCmd refine_cmd;
  MergeCmd merge_cmd;
  FuseManyCmd fuse;
  EvalCmd eval;
  TransformCmd transform;
  PipelineCmd pipeline;
  synth.add(app);
  render_cmd.add(app);
  match.add(app);
  coarse.add(app);
  refine_cmd.add(app);
  merge_cmd.add(app);
  fuse.add(app);
  eval.add(app);
  transform.add(app);
  pipeline.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", kExitUsage, e.what());
    std::cerr << app.help() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    print_error("usage", kExitUsage, e.what());
    return kExitUsage;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("gsreg"));
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::from_str(global.log_level));
  if (global.threads > 0) set_num_threads(global.threads);

  try {
    if (synth.cmd->parsed()) return synth.run(global);
    if (render_cmd.cmd->parsed()) return render_cmd.run(global);
    if (match.cmd->parsed()) return match.run(global);
    if (coarse.cmd->parsed()) return coarse.run(global);
    if (refine_cmd.cmd->parsed()) return refine_cmd.run(global);
    if (merge_cmd.cmd->parsed()) return merge_cmd.run(global);
    if (fuse.cmd->parsed()) return fuse.run(global);
    if (eval.cmd->parsed()) return eval.run(global);
    if (transform.cmd->parsed()) return transform.run(global);
    if (pipeline.cmd->parsed()) return pipeline.run(global);
  } catch (const UsageError& e) {
    print_error("usage", kExitUsage, e.what());
    return kExitUsage;
  } catch (const FormatError& e) {
    print_error("input", kExitUsage, e.what());
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    print_error("usage", kExitUsage, e.what());
    return kExitUsage;
  } catch (const NoOverlapError& e) {
    print_error("no_overlap", kExitStage, e.what());
    return kExitStage;
  } catch (const StageError& e) {
    print_error("stage", kExitStage, e.what());
    return kExitStage;
  } catch (const std::exception& e) {
    print_error("internal", kExitStage, e.what());
    return kExitStage;
  }
  return kExitUsage;
}
