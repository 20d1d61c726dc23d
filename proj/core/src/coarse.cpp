#include "gsreg/coarse.hpp"

#include <cmath>

#include "gsreg/error.hpp"
#include "gsreg/renderer.hpp"

namespace gsreg {

namespace {

struct RatioSum {
  double weighted = 0.0;
  double mass = 0.0;
  std::size_t pixels = 0;
};

RatioSum accumulate(const DepthSupport& in, const char* which) {
  const Image& d = in.rendered_depth;
  const int w = d.width(), h = d.height();
  if (in.fm_depth.width() != w || in.fm_depth.height() != h || in.confidence.width() != w ||
      in.confidence.height() != h ||
      (in.rendered_alpha && (in.rendered_alpha->width() != w || in.rendered_alpha->height() != h))) {
    throw InvalidArgument(std::string("estimate_scale: map shapes differ for ") + which);
  }
  // Row-wise partial sums in a fixed order.
  RatioSum total;
  for (int y = 0; y < h; ++y) {
    RatioSum row;
    for (int x = 0; x < w; ++x) {
      const double fm = in.fm_depth(x, y);
      const double rd = d(x, y);
      double c = in.confidence(x, y);
      if (!(fm > kDepthFloor) || !std::isfinite(rd) || !(rd > 0.0)) c = 0.0;
      if (in.rendered_alpha && (*in.rendered_alpha)(x, y) < kCoverageThreshold) c = 0.0;
      if (c <= 0.0) continue;
      row.weighted += c * (rd / fm);
      row.mass += c;
      ++row.pixels;
    }
    total.weighted += row.weighted;
    total.mass += row.mass;
    total.pixels += row.pixels;
  }
  return total;
}

}  // namespace

ScaleEstimate estimate_scale(const DepthSupport& image1, const DepthSupport& image2) {
  const RatioSum a = accumulate(image1, "image 1");
  const RatioSum b = accumulate(image2, "image 2");
  if (a.pixels == 0 || b.pixels == 0 || !(a.weighted > 0.0) || !(b.weighted > 0.0)) {
    throw StageError("insufficient depth support");
  }
  ScaleEstimate e;
  e.weighted_ratio_1 = a.weighted;
  e.weighted_ratio_2 = b.weighted;
  e.confidence_mass_1 = a.mass;
  e.confidence_mass_2 = b.mass;
  e.pixels_1 = a.pixels;
  e.pixels_2 = b.pixels;
  e.scale = a.weighted / b.weighted;
  return e;
}

Sim3 compose_initial_transform(const Sim3& w2c_1, const Sim3& w2c_2, const Sim3& pose_2_to_1,
                               double scale) {
  if (!w2c_1.is_rigid(1e-9) || !w2c_2.is_rigid(1e-9) || !pose_2_to_1.is_rigid(1e-9)) {
    throw InvalidArgument("compose_initial_transform: camera poses and relative pose must be rigid");
  }
  const Sim3 cam2_to_cam1(scale, pose_2_to_1.rotation(), pose_2_to_1.translation());
  const Sim3 chained = w2c_1.inverse() * cam2_to_cam1 * w2c_2;
  // The rigid factors contribute exact unit scale.
  return {scale, chained.rotation(), chained.translation()};
}

CoarseEstimate coarse_register(const GaussianCloud& g1, const GaussianCloud& g2,
                               const CameraView& view1, const CameraView& view2,
                               const FoundationBundle& bundle, const MatchedPair& pair,
                               const CoarseOptions& options) {
  validate_bundle(bundle);
  if (view1.width() != bundle.width() || view1.height() != bundle.height() ||
      view2.width() != bundle.width() || view2.height() != bundle.height()) {
    throw InvalidArgument("coarse_register: bundle maps must match the matched views' image size");
  }
  const RenderOutput r1 = render(g1, view1);
  const RenderOutput r2 = render(g2, view2);
  const ScaleEstimate scale =
      estimate_scale({r1.depth, &r1.alpha, bundle.depth_fm_1, bundle.conf_1},
                     {r2.depth, &r2.alpha, bundle.depth_fm_2, bundle.conf_2});

  CoarseEstimate out;
  out.scale_ratio = scale.scale;
  out.diagnostics = scale;
  out.pair = pair;
  out.translation_scale = options.rescale_translation ? scale.mean_ratio_1() : 1.0;
  const Sim3 pose = Sim3::rigid(bundle.pose_2_to_1.rotation(),
                                out.translation_scale * bundle.pose_2_to_1.translation());
  out.transform =
      compose_initial_transform(view1.world_to_cam(), view2.world_to_cam(), pose, scale.scale);
  return out;
}

}  // namespace gsreg
