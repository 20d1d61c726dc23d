#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

#include "gsreg/sim3.hpp"

namespace gsreg {

/// Pinhole camera with an OpenCV-style frame (x right, y down, z forward).
class CameraView {
 public:
  CameraView() = default;
  /// Throws InvalidArgument on a non-rigid pose or degenerate intrinsics.
  CameraView(const Sim3& world_to_cam, double fx, double fy, double cx, double cy, int width,
             int height);

  /// Camera at `eye` looking at `target`; `up` fixes the roll (image y points away from it).
  static CameraView look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                            const Eigen::Vector3d& up, double fov_x_deg, int width, int height);

  const Sim3& world_to_cam() const { return world_to_cam_; }
  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }

  Eigen::Vector3d center() const;
  /// Camera-to-world rotation; columns are the camera axes in world coordinates.
  Eigen::Matrix3d cam_to_world_rotation() const;

  /// Same intrinsics, different pose.
  CameraView with_pose(const Sim3& world_to_cam) const;

  /**
   * Re-expresses a camera of frame B in frame A, given `a_from_b` mapping B
   * to A. The optical center maps through the similarity and the orientation
   * through its rotation, so the new camera sees `transform_cloud(G, a_from_b)`
   * exactly as this camera sees G.
   */
  CameraView expressed_in(const Sim3& a_from_b) const;

 private:
  Sim3 world_to_cam_;
  double fx_ = 1.0, fy_ = 1.0, cx_ = 0.0, cy_ = 0.0;
  int width_ = 1, height_ = 1;
};

/// Named camera list, one entry per training / candidate view.
struct CameraSet {
  std::vector<std::string> ids;
  std::vector<CameraView> views;
};

/**
 * Reads a cameras.json in the layout written by common 3DGS trainers:
 * an array of objects with "id", "img_name", "width", "height",
 * "position" (camera center), "rotation" (3x3 camera-to-world, row-major
 * nested arrays), "fx", "fy", and optionally "cx", "cy" (default: image center).
 */
CameraSet read_cameras(const std::filesystem::path& path);
void write_cameras(const CameraSet& cameras, const std::filesystem::path& path);

}  // namespace gsreg
