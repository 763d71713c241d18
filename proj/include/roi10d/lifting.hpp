#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "roi10d/camera.hpp"
#include "roi10d/quaternion.hpp"
#include "roi10d/rect.hpp"

namespace roi10d {

// Per-class extent statistics (meters). Extents are regressed as deviations
// in multiples of the standard deviation from the mean.
struct ExtentStats {
  double mean_w = 0.0, mean_h = 0.0, mean_l = 0.0;
  double std_w = 1.0, std_h = 1.0, std_l = 1.0;

  ExtentStats() = default;
  ExtentStats(double mw, double mh, double ml, double sw, double sh, double sl)
      : mean_w(mw), mean_h(mh), mean_l(ml), std_w(sw), std_h(sh), std_l(sl) {
    if (std_w <= 0.0 || std_h <= 0.0 || std_l <= 0.0)
      throw std::domain_error("ExtentStats: standard deviations must be positive");
  }

  Eigen::Vector3d mean() const { return {mean_w, mean_h, mean_l}; }
  Eigen::Vector3d stddev() const { return {std_w, std_h, std_l}; }

  // (w, h, l) = mean + dev * std, all must stay positive.
  Eigen::Vector3d resolve(const Eigen::Vector3d& dev) const {
    Eigen::Vector3d e = mean() + dev.cwiseProduct(stddev());
    if (e.minCoeff() <= 0.0)
      throw std::domain_error("ExtentStats::resolve: non-positive extent after deviation");
    return e;
  }

  Eigen::Vector3d deviation_of(const Eigen::Vector3d& extents) const {
    return (extents - mean()).cwiseQuotient(stddev());
  }
};

// The 10D regression target of one region: allocentric rotation, image-space
// centroid, metric depth, extent deviations and the latent shape code.
struct LiftParams {
  Quaternion q_allo;
  double u = 0.0;  // centroid, pixels
  double v = 0.0;
  double z = 1.0;  // depth, meters
  Eigen::Vector3d extent_dev = Eigen::Vector3d::Zero();
  Eigen::VectorXd shape = unit_shape(6);

  static Eigen::VectorXd unit_shape(int dim) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(dim);
    s[0] = 1.0;
    return s;
  }

  void validate(const ExtentStats& stats) const {
    if (z <= 0.0) throw std::domain_error("LiftParams: depth must be positive");
    if (std::abs(q_allo.norm() - 1.0) > 1e-9)
      throw std::domain_error("LiftParams: quaternion must be unit");
    if (shape.size() > 0 && std::abs(shape.norm() - 1.0) > 1e-9)
      throw std::domain_error("LiftParams: shape code must be unit");
    stats.resolve(extent_dev);  // throws on degenerate extents
  }
};

// Recovered rigid pose + extents of a Box3D.
struct BoxPose {
  Quaternion rotation;           // egocentric
  Eigen::Vector3d center;        // camera frame, meters
  Eigen::Vector3d extents;       // (w, h, l), meters
};

// Corner sign pattern over (w, h, l)/2 in the object frame. Order is fixed:
// (+,+,+), (+,+,-), (+,-,+), (+,-,-), (-,+,+), (-,+,-), (-,-,+), (-,-,-).
inline Eigen::Vector3d corner_sign(int i) {
  return Eigen::Vector3d((i & 4) ? -1.0 : 1.0, (i & 2) ? -1.0 : 1.0, (i & 1) ? -1.0 : 1.0);
}

// Oriented 3D box as eight ordered corners in the camera frame.
struct Box3D {
  std::array<Eigen::Vector3d, 8> corners;

  static Box3D from_pose(const Quaternion& q, const Eigen::Vector3d& center,
                         const Eigen::Vector3d& extents) {
    if (extents.minCoeff() <= 0.0)
      throw std::domain_error("Box3D::from_pose: extents must be positive");
    const Eigen::Matrix3d R = q.matrix();
    const Eigen::Vector3d half = 0.5 * extents;
    Box3D box;
    for (int i = 0; i < 8; ++i)
      box.corners[i] = R * corner_sign(i).cwiseProduct(half) + center;
    return box;
  }

  Eigen::Vector3d centroid() const {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto& p : corners) c += p;
    return c / 8.0;
  }

  // Inverts the corner construction. Throws if the corners do not form a
  // rigid box in the fixed ordering.
  BoxPose recover_pose(double tol = 1e-6) const {
    BoxPose pose;
    pose.center = centroid();
    const Eigen::Vector3d ex = corners[0] - corners[4];  // R * (w, 0, 0)
    const Eigen::Vector3d ey = corners[0] - corners[2];  // R * (0, h, 0)
    const Eigen::Vector3d ez = corners[0] - corners[1];  // R * (0, 0, l)
    pose.extents = Eigen::Vector3d(ex.norm(), ey.norm(), ez.norm());
    if (pose.extents.minCoeff() <= 0.0)
      throw std::domain_error("Box3D::recover_pose: degenerate box");
    Eigen::Matrix3d R;
    R.col(0) = ex / pose.extents.x();
    R.col(1) = ey / pose.extents.y();
    R.col(2) = ez / pose.extents.z();
    if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol ||
        R.determinant() < 0.0)
      throw std::domain_error("Box3D::recover_pose: corners do not form a rigid box");
    pose.rotation = Quaternion::from_matrix(R);
    // edge vectors alone cannot see every corner; verify the full set
    const Eigen::Vector3d half = 0.5 * pose.extents;
    for (int i = 0; i < 8; ++i) {
      const Eigen::Vector3d expect = R * corner_sign(i).cwiseProduct(half) + pose.center;
      if ((expect - corners[i]).norm() > std::max(tol, tol * pose.extents.norm()))
        throw std::domain_error("Box3D::recover_pose: corners do not form a rigid box");
    }
    return pose;
  }

  Box3D translated(const Eigen::Vector3d& d) const {
    Box3D b = *this;
    for (auto& p : b.corners) p += d;
    return b;
  }
};

// Minimal geodesic rotation taking the optical axis (0,0,1) onto `ray`.
// Closed form q = (1 + r_z, e_z x r) normalized; undefined for rays
// antiparallel to the optical axis.
inline Quaternion view_rotation(const Eigen::Vector3d& ray) {
  const double c = ray.z();
  if (1.0 + c < 1e-12)
    throw std::domain_error("view_rotation: ray antiparallel to optical axis");
  const double inv = 1.0 / std::sqrt(2.0 * (1.0 + c));
  return Quaternion((1.0 + c) * inv, -ray.y() * inv, ray.x() * inv, 0.0);
}

// Egocentric rotation = view rotation of the centroid ray composed with the
// allocentric rotation. Objects on the optical axis keep their rotation.
inline Quaternion allo_to_ego(const Quaternion& q_allo, const Eigen::Vector3d& ray) {
  return view_rotation(ray) * q_allo;
}

inline Quaternion ego_to_allo(const Quaternion& q_ego, const Eigen::Vector3d& ray) {
  return view_rotation(ray).conjugate() * q_ego;
}

// The lifting map: 10D parameters -> oriented metric 3D box of 8 ordered
// corners, B_i = R(q_ego) (s_i . (w,h,l)/2) + K^-1 (u z, v z, z).
inline Box3D lift(const LiftParams& params, const ExtentStats& stats,
                  const CameraIntrinsics& K) {
  const Eigen::Vector3d extents = stats.resolve(params.extent_dev);
  if (params.z <= 0.0) throw std::domain_error("lift: depth must be positive");
  const Eigen::Vector3d t = K.backproject(params.u, params.v, params.z);
  const Quaternion q_ego = allo_to_ego(params.q_allo.normalized(), K.view_ray(params.u, params.v));
  return Box3D::from_pose(q_ego, t, extents);
}

// Tight axis-aligned bounding rectangle of the projected corners.
inline Rect2D project_box(const Box3D& box, const CameraIntrinsics& K) {
  Rect2D r(std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
           std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest());
  for (const auto& c : box.corners) {
    if (c.z() <= 0.0) throw std::domain_error("project_box: corner behind camera");
    const Eigen::Vector2d p = K.project(c);
    r.left = std::min(r.left, p.x());
    r.top = std::min(r.top, p.y());
    r.right = std::max(r.right, p.x());
    r.bottom = std::max(r.bottom, p.y());
  }
  return r;
}

// Observation angle from global yaw: alpha = ry - atan2(x, z), in (-pi, pi].
inline double alpha_from_rotation_y(double rotation_y, const Eigen::Vector3d& location) {
  if (location.z() <= 0.0)
    throw std::domain_error("alpha_from_rotation_y: location must be in front of camera");
  return wrap_angle(rotation_y - std::atan2(location.x(), location.z()));
}

inline double rotation_y_from_alpha(double alpha, const Eigen::Vector3d& location) {
  if (location.z() <= 0.0)
    throw std::domain_error("rotation_y_from_alpha: location must be in front of camera");
  return wrap_angle(alpha + std::atan2(location.x(), location.z()));
}

}  // namespace roi10d
