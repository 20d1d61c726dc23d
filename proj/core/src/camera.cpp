#include "gsreg/camera.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "gsreg/error.hpp"

namespace gsreg {

CameraView::CameraView(const Sim3& world_to_cam, double fx, double fy, double cx, double cy,
                       int width, int height)
    : world_to_cam_(world_to_cam), fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width),
      height_(height) {
  if (!world_to_cam.is_rigid(1e-9)) {
    throw InvalidArgument("camera: world_to_cam must be rigid (scale 1)");
  }
  if (width <= 0 || height <= 0) throw InvalidArgument("camera: image size must be positive");
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw InvalidArgument("camera: focal lengths must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InvalidArgument("camera: principal point outside the image");
  }
  world_to_cam_ = Sim3::rigid(world_to_cam.rotation(), world_to_cam.translation());
}

CameraView CameraView::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                               const Eigen::Vector3d& up, double fov_x_deg, int width,
                               int height) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-9) {
    throw InvalidArgument("camera look_at: up vector is parallel to the viewing direction");
  }
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d cam_to_world;
  cam_to_world.col(0) = right;
  cam_to_world.col(1) = down;
  cam_to_world.col(2) = forward;
  const Eigen::Matrix3d r = cam_to_world.transpose();
  const double fx = 0.5 * width / std::tan(0.5 * fov_x_deg * std::numbers::pi / 180.0);
  return {Sim3(1.0, r, -(r * eye)), fx, fx, 0.5 * width, 0.5 * height, width, height};
}

Eigen::Vector3d CameraView::center() const {
  return -(world_to_cam_.rotation().conjugate() * world_to_cam_.translation());
}

Eigen::Matrix3d CameraView::cam_to_world_rotation() const {
  return world_to_cam_.rotation_matrix().transpose();
}

CameraView CameraView::with_pose(const Sim3& world_to_cam) const {
  return {world_to_cam, fx_, fy_, cx_, cy_, width_, height_};
}

CameraView CameraView::expressed_in(const Sim3& a_from_b) const {
  const Eigen::Quaterniond r = world_to_cam_.rotation() * a_from_b.rotation().conjugate();
  const Eigen::Vector3d t =
      -(r * a_from_b.translation()) + a_from_b.scale() * world_to_cam_.translation();
  return with_pose(Sim3::rigid(r.normalized(), t));
}

CameraSet read_cameras(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cameras: cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cameras: " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw FormatError("cameras: top-level value must be an array");

  CameraSet set;
  for (const auto& entry : doc) {
    try {
      const int width = entry.at("width").get<int>();
      const int height = entry.at("height").get<int>();
      const auto pos = entry.at("position").get<std::vector<double>>();
      const auto rot = entry.at("rotation").get<std::vector<std::vector<double>>>();
      if (pos.size() != 3 || rot.size() != 3) throw FormatError("cameras: bad pose shape");
      Eigen::Matrix3d c2w;
      for (int i = 0; i < 3; ++i) {
        if (rot[i].size() != 3) throw FormatError("cameras: bad rotation shape");
        for (int j = 0; j < 3; ++j) c2w(i, j) = rot[i][j];
      }
      const Eigen::Matrix3d w2c = c2w.transpose();
      const Eigen::Vector3d center(pos[0], pos[1], pos[2]);
      const double cx = entry.contains("cx") ? entry["cx"].get<double>() : 0.5 * width;
      const double cy = entry.contains("cy") ? entry["cy"].get<double>() : 0.5 * height;
      set.views.emplace_back(Sim3(1.0, w2c, -(w2c * center)), entry.at("fx").get<double>(),
                             entry.at("fy").get<double>(), cx, cy, width, height);
      std::string id = entry.contains("img_name") ? entry["img_name"].get<std::string>()
                                                  : std::to_string(entry.at("id").get<int>());
      set.ids.push_back(std::move(id));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("cameras: " + path.string() + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw FormatError("cameras: " + path.string() + ": " + e.what());
    }
  }
  return set;
}

void write_cameras(const CameraSet& cameras, const std::filesystem::path& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (std::size_t i = 0; i < cameras.views.size(); ++i) {
    const CameraView& v = cameras.views[i];
    const Eigen::Matrix3d c2w = v.cam_to_world_rotation();
    const Eigen::Vector3d c = v.center();
    nlohmann::json rot = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) rot.push_back({c2w(r, 0), c2w(r, 1), c2w(r, 2)});
    doc.push_back({{"id", i},
                   {"img_name", i < cameras.ids.size() ? cameras.ids[i] : std::to_string(i)},
                   {"width", v.width()},
                   {"height", v.height()},
                   {"position", {c.x(), c.y(), c.z()}},
                   {"rotation", rot},
                   {"fx", v.fx()},
                   {"fy", v.fy()},
                   {"cx", v.cx()},
                   {"cy", v.cy()}});
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cameras: cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace gsreg
