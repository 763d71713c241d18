#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace roi10d {

// Pinhole intrinsics. Camera frame is right-handed: x right, y down,
// z forward, so KITTI labels ingest without axis remapping.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
    if (fx <= 0.0 || fy <= 0.0)
      throw std::domain_error("CameraIntrinsics: focal lengths must be positive");
  }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d K;
    K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return K;
  }

  Eigen::Matrix3d inverse_matrix() const {
    Eigen::Matrix3d Kinv;
    Kinv << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return Kinv;
  }

  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    if (p.z() <= 0.0) throw std::domain_error("project: point behind camera");
    return Eigen::Vector2d(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
  }

  // K^-1 (u z, v z, z); the third coordinate equals z exactly.
  Eigen::Vector3d backproject(double u, double v, double z) const {
    if (z <= 0.0) throw std::domain_error("backproject: depth must be positive");
    return Eigen::Vector3d((u - cx) / fx * z, (v - cy) / fy * z, z);
  }

  // Homogeneous direction of the pixel ray, z component 1 (not normalized).
  Eigen::Vector3d pixel_direction(double u, double v) const {
    return Eigen::Vector3d((u - cx) / fx, (v - cy) / fy, 1.0);
  }

  // Unit ray through the pixel, pointing away from the camera.
  Eigen::Vector3d view_ray(double u, double v) const {
    return pixel_direction(u, v).normalized();
  }
};

}  // namespace roi10d
