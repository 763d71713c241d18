#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace roi10d {

// Unit quaternion (w, x, y, z), Hamilton convention. Rotations act on camera
// frame vectors: x right, y down, z forward.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Quaternion() = default;
  Quaternion(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  static Quaternion identity() { return Quaternion(1.0, 0.0, 0.0, 0.0); }

  static Quaternion from_axis_angle(const Eigen::Vector3d& axis, double angle) {
    const double n = axis.norm();
    if (n < 1e-15) return identity();
    const double half = 0.5 * angle;
    const double s = std::sin(half) / n;
    return Quaternion(std::cos(half), axis.x() * s, axis.y() * s, axis.z() * s);
  }

  // Yaw about the camera y axis (gravity direction in the KITTI convention).
  static Quaternion from_yaw(double angle) {
    return from_axis_angle(Eigen::Vector3d::UnitY(), angle);
  }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quaternion normalized() const {
    const double n = norm();
    if (n < 1e-15) throw std::domain_error("Quaternion::normalized: zero quaternion");
    return Quaternion(w / n, x / n, y / n, z / n);
  }

  Quaternion conjugate() const { return Quaternion(w, -x, -y, -z); }

  Quaternion operator-() const { return Quaternion(-w, -x, -y, -z); }

  Quaternion operator*(const Quaternion& r) const {
    return Quaternion(w * r.w - x * r.x - y * r.y - z * r.z,
                      w * r.x + x * r.w + y * r.z - z * r.y,
                      w * r.y - x * r.z + y * r.w + z * r.x,
                      w * r.z + x * r.y - y * r.x + z * r.w);
  }

  double dot(const Quaternion& r) const { return w * r.w + x * r.x + y * r.y + z * r.z; }

  Eigen::Vector4d coeffs() const { return Eigen::Vector4d(w, x, y, z); }

  // Rotation matrix, homogeneous polynomial form (exact for unit quaternions).
  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d R;
    R << w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z;
    return R;
  }

  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const { return matrix() * v; }

  // Extraction from a proper rotation matrix (Shepperd's method), w >= 0.
  static Quaternion from_matrix(const Eigen::Matrix3d& R) {
    Quaternion q;
    const double tr = R.trace();
    if (tr > 0.0) {
      double s = std::sqrt(tr + 1.0) * 2.0;
      q.w = 0.25 * s;
      q.x = (R(2, 1) - R(1, 2)) / s;
      q.y = (R(0, 2) - R(2, 0)) / s;
      q.z = (R(1, 0) - R(0, 1)) / s;
    } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
      double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
      q.w = (R(2, 1) - R(1, 2)) / s;
      q.x = 0.25 * s;
      q.y = (R(0, 1) + R(1, 0)) / s;
      q.z = (R(0, 2) + R(2, 0)) / s;
    } else if (R(1, 1) > R(2, 2)) {
      double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
      q.w = (R(0, 2) - R(2, 0)) / s;
      q.x = (R(0, 1) + R(1, 0)) / s;
      q.y = 0.25 * s;
      q.z = (R(1, 2) + R(2, 1)) / s;
    } else {
      double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
      q.w = (R(1, 0) - R(0, 1)) / s;
      q.x = (R(0, 2) + R(2, 0)) / s;
      q.y = (R(1, 2) + R(2, 1)) / s;
      q.z = 0.25 * s;
    }
    q = q.normalized();
    if (q.w < 0.0) q = -q;
    return q;
  }
};

// d(R(q) p)/dq as a 3x4 matrix, columns ordered (w, x, y, z). Derivatives of
// the homogeneous polynomial form; callers working on the unit sphere must
// project the resulting gradient onto the tangent space.
inline Eigen::Matrix<double, 3, 4> rotate_jacobian_wrt_quaternion(const Quaternion& q,
                                                                  const Eigen::Vector3d& p) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Eigen::Matrix3d dRw, dRx, dRy, dRz;
  dRw << w, -z, y, z, w, -x, -y, x, w;
  dRx << x, y, z, y, -x, -w, z, w, -x;
  dRy << -y, x, w, x, y, z, -w, z, -y;
  dRz << -z, -w, x, w, -z, y, x, y, z;
  Eigen::Matrix<double, 3, 4> J;
  J.col(0) = 2.0 * dRw * p;
  J.col(1) = 2.0 * dRx * p;
  J.col(2) = 2.0 * dRy * p;
  J.col(3) = 2.0 * dRz * p;
  return J;
}

inline double wrap_angle(double a) {
  double r = std::fmod(a + M_PI, 2.0 * M_PI);
  if (r <= 0.0) r += 2.0 * M_PI;
  return r - M_PI;  // (-pi, pi]
}

}  // namespace roi10d
