#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "roi10d/camera.hpp"
#include "roi10d/lifting.hpp"
#include "roi10d/quaternion.hpp"
#include "roi10d/random.hpp"
#include "roi10d/rect.hpp"

using namespace roi10d;

namespace {

Quaternion random_unit_quaternion(Rng& rng) {
  Quaternion q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.norm() < 1e-6 ? Quaternion::identity() : q.normalized();
}

const CameraIntrinsics kK(1000.0, 1000.0, 500.0, 200.0);

}  // namespace

TEST_CASE("Rect2D basics") {
  Rect2D r{10.0, 20.0, 110.0, 70.0};
  CHECK(r.width() == 100.0);
  CHECK(r.height() == 50.0);
  CHECK(r.area() == 5000.0);
  CHECK(r.valid());
  CHECK(r.contains(50.0, 30.0));
  CHECK_FALSE(r.contains(5.0, 30.0));
  CHECK(intersection_area(r, Rect2D{60.0, 20.0, 160.0, 70.0}) == Catch::Approx(2500.0));
  CHECK(intersection_area(r, Rect2D{500.0, 500.0, 600.0, 600.0}) == 0.0);
}

TEST_CASE("Rng determinism and ranges") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-2.0, 3.0);
    CHECK(x >= -2.0);
    CHECK(x < 3.0);
    const int k = rng.uniform_int(0, 5);
    CHECK(k >= 0);
    CHECK(k <= 5);
  }
  for (int i = 0; i < 50; ++i)
    CHECK(rng.unit_vector3().norm() == Catch::Approx(1.0).margin(1e-12));
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}

TEST_CASE("Quaternion normalization and rotation invariants") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    Quaternion q = random_unit_quaternion(rng);
    CHECK(q.norm() == Catch::Approx(1.0).margin(1e-9));

    const Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    CHECK(q.rotate(v).norm() == Catch::Approx(v.norm()).margin(1e-9));

    // q and -q give the same rotation
    CHECK(((-q).matrix() - q.matrix()).norm() < 1e-12);
    // matrix() agrees with rotate()
    CHECK((q.matrix() * v - q.rotate(v)).norm() < 1e-12);
    // matrix() agrees with Eigen's independent conversion
    const Eigen::Matrix3d R_eigen =
        Eigen::Quaterniond(q.w, q.x, q.y, q.z).toRotationMatrix();
    CHECK((q.matrix() - R_eigen).norm() < 1e-12);
  }
  CHECK_THROWS_AS(Quaternion(0, 0, 0, 0).normalized(), std::domain_error);
}

TEST_CASE("Quaternion composition matches matrix product") {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    const Quaternion a = random_unit_quaternion(rng);
    const Quaternion b = random_unit_quaternion(rng);
    CHECK(((a * b).matrix() - a.matrix() * b.matrix()).norm() < 1e-12);
    CHECK(((a * a.conjugate()).matrix() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  }
}

TEST_CASE("Quaternion axis-angle and matrix round trips") {
  const Quaternion qz = Quaternion::from_axis_angle(Eigen::Vector3d(0, 0, 1), M_PI / 2);
  CHECK((qz.rotate(Eigen::Vector3d(1, 0, 0)) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);

  const Quaternion qy = Quaternion::from_yaw(M_PI / 2);
  CHECK((qy.rotate(Eigen::Vector3d(0, 0, 1)) - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);

  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const Quaternion q = random_unit_quaternion(rng);
    const Quaternion back = Quaternion::from_matrix(q.matrix());
    CHECK((back.matrix() - q.matrix()).norm() < 1e-9);
    CHECK(back.w >= 0.0);
  }
}

TEST_CASE("rotate_jacobian_wrt_quaternion matches finite differences") {
  Rng rng(14);
  const double h = 1e-6;
  for (int i = 0; i < 50; ++i) {
    const Quaternion q = random_unit_quaternion(rng);
    const Eigen::Vector3d p(rng.normal(), rng.normal(), rng.normal());
    const auto J = rotate_jacobian_wrt_quaternion(q, p);
    for (int c = 0; c < 4; ++c) {
      Eigen::Vector4d e = Eigen::Vector4d::Zero();
      e[c] = h;
      const Eigen::Vector4d qp = q.coeffs() + e;
      const Eigen::Vector4d qm = q.coeffs() - e;
      // raw (unnormalized) perturbation: matrix() is a polynomial in the coeffs
      const Eigen::Vector3d fp = Quaternion(qp[0], qp[1], qp[2], qp[3]).matrix() * p;
      const Eigen::Vector3d fm = Quaternion(qm[0], qm[1], qm[2], qm[3]).matrix() * p;
      CHECK((J.col(c) - (fp - fm) / (2 * h)).norm() < 1e-6);
    }
  }
}

TEST_CASE("CameraIntrinsics construction validates focal lengths") {
  CHECK_THROWS_AS(CameraIntrinsics(0.0, 1000.0, 500.0, 200.0), std::domain_error);
  CHECK_THROWS_AS(CameraIntrinsics(1000.0, -5.0, 500.0, 200.0), std::domain_error);
}

TEST_CASE("backproject maps principal point to the optical axis") {
  CHECK((kK.backproject(500.0, 200.0, 10.0) - Eigen::Vector3d(0, 0, 10)).norm() == 0.0);
  CHECK((kK.backproject(1500.0, 200.0, 10.0) - Eigen::Vector3d(10, 0, 10)).norm() < 1e-12);
  CHECK_THROWS_AS(kK.backproject(500.0, 200.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(kK.backproject(500.0, 200.0, -1.0), std::domain_error);
}

TEST_CASE("backproject matches dense matrix-inverse oracle") {
  Rng rng(15);
  for (int i = 0; i < 500; ++i) {
    const double u = rng.uniform(-200.0, 1500.0);
    const double v = rng.uniform(-200.0, 800.0);
    const double z = rng.uniform(0.1, 80.0);
    const Eigen::Vector3d uvz(u * z, v * z, z);
    const Eigen::Vector3d oracle = kK.matrix().inverse() * uvz;
    const Eigen::Vector3d got = kK.backproject(u, v, z);
    CHECK((got - oracle).norm() < 1e-9);
    CHECK(got.z() == z);
  }
}

TEST_CASE("project and backproject are inverse") {
  Rng rng(16);
  for (int i = 0; i < 500; ++i) {
    const double u = rng.uniform(0.0, 1000.0);
    const double v = rng.uniform(0.0, 400.0);
    const double z = rng.uniform(0.5, 60.0);
    const Eigen::Vector2d uv = kK.project(kK.backproject(u, v, z));
    CHECK(std::abs(uv.x() - u) < 1e-9);
    CHECK(std::abs(uv.y() - v) < 1e-9);
  }
  CHECK_THROWS_AS(kK.project(Eigen::Vector3d(0, 0, 0)), std::domain_error);
}

TEST_CASE("view_rotation takes the optical axis to the ray") {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    Eigen::Vector3d ray = rng.unit_vector3();
    if (ray.z() < 0.05) ray.z() = std::abs(ray.z()) + 0.05;
    ray.normalize();
    const Quaternion qv = view_rotation(ray);
    CHECK((qv.rotate(Eigen::Vector3d(0, 0, 1)) - ray).norm() < 1e-9);
    // agrees with Eigen's independent minimal-rotation construction
    const Eigen::Quaterniond ref =
        Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d(0, 0, 1), ray);
    const double sign = ref.w() * qv.w >= 0 ? 1.0 : -1.0;
    CHECK(std::abs(ref.w() - sign * qv.w) < 1e-9);
    CHECK((ref.vec() - sign * Eigen::Vector3d(qv.x, qv.y, qv.z)).norm() < 1e-9);
  }
  CHECK_THROWS_AS(view_rotation(Eigen::Vector3d(0, 0, -1)), std::domain_error);
}

TEST_CASE("allo_to_ego on the optical axis is the identity map") {
  Rng rng(18);
  const Quaternion q = random_unit_quaternion(rng);
  const Quaternion ego = allo_to_ego(q, Eigen::Vector3d(0, 0, 1));
  CHECK((ego.coeffs() - q.coeffs()).norm() < 1e-12);
}

TEST_CASE("allo_to_ego at azimuth theta rotates about the vertical axis") {
  for (const double theta : {0.2, -0.4, 1.1}) {
    const Eigen::Vector3d ray(std::sin(theta), 0.0, std::cos(theta));
    const Quaternion ego = allo_to_ego(Quaternion::identity(), ray);
    const Quaternion expect = Quaternion::from_axis_angle(Eigen::Vector3d(0, 1, 0), theta);
    CHECK((ego.matrix() - expect.matrix()).norm() < 1e-9);
  }
}

TEST_CASE("allo/ego conversions round trip") {
  Rng rng(19);
  for (int i = 0; i < 300; ++i) {
    const Quaternion q = random_unit_quaternion(rng);
    Eigen::Vector3d ray = rng.unit_vector3();
    ray.z() = std::abs(ray.z()) + 0.01;
    ray.normalize();
    const Quaternion back = allo_to_ego(ego_to_allo(q, ray), ray);
    CHECK((back.matrix() - q.matrix()).norm() < 1e-9);
    const Quaternion back2 = ego_to_allo(allo_to_ego(q, ray), ray);
    CHECK((back2.matrix() - q.matrix()).norm() < 1e-9);
  }
}

TEST_CASE("lift places an on-axis identity-rotation box axis-aligned") {
  const ExtentStats stats(2.0, 2.0, 4.0, 0.2, 0.2, 0.2);
  LiftParams p;
  p.q_allo = Quaternion::identity();
  p.u = kK.cx;
  p.v = kK.cy;
  p.z = 10.0;
  p.extent_dev = Eigen::Vector3d::Zero();
  const Box3D box = lift(p, stats, kK);
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector3d s = corner_sign(i);
    const Eigen::Vector3d expect(s.x() * 1.0, s.y() * 1.0, s.z() * 2.0 + 10.0);
    CHECK((box.corners[i] - expect).norm() < 1e-12);
  }
  CHECK((box.centroid() - Eigen::Vector3d(0, 0, 10)).norm() < 1e-12);
}

TEST_CASE("lift translation is linear in depth on the optical axis") {
  const ExtentStats stats(2.0, 1.5, 4.0, 0.2, 0.1, 0.3);
  Rng rng(20);
  LiftParams p;
  p.q_allo = random_unit_quaternion(rng);
  p.u = kK.cx;
  p.v = kK.cy;
  p.z = 7.0;
  const Box3D a = lift(p, stats, kK);
  p.z = 14.0;
  const Box3D b = lift(p, stats, kK);
  // translation is exactly (0,0,z) on axis, so offsets are bit-identical
  CHECK((kK.backproject(kK.cx, kK.cy, 7.0) - Eigen::Vector3d(0, 0, 7)).norm() == 0.0);
  CHECK((kK.backproject(kK.cx, kK.cy, 14.0) - Eigen::Vector3d(0, 0, 14)).norm() == 0.0);
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector3d off_a = a.corners[i] - Eigen::Vector3d(0, 0, 7.0);
    const Eigen::Vector3d off_b = b.corners[i] - Eigen::Vector3d(0, 0, 14.0);
    CHECK((off_b - off_a).norm() < 1e-12);
    CHECK((b.corners[i] - a.corners[i] - Eigen::Vector3d(0, 0, 7.0)).norm() < 1e-12);
  }
}

TEST_CASE("lift matches an explicit rotation-matrix oracle") {
  const ExtentStats stats(1.9, 1.6, 4.2, 0.15, 0.12, 0.4);
  Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    LiftParams p;
    p.q_allo = random_unit_quaternion(rng);
    p.u = rng.uniform(100.0, 900.0);
    p.v = rng.uniform(50.0, 350.0);
    p.z = rng.uniform(4.0, 60.0);
    p.extent_dev = Eigen::Vector3d(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                   rng.uniform(-1.5, 1.5));
    const Box3D box = lift(p, stats, kK);

    const Eigen::Vector3d t = kK.matrix().inverse() * Eigen::Vector3d(p.u * p.z, p.v * p.z, p.z);
    const Eigen::Quaterniond qv = Eigen::Quaterniond::FromTwoVectors(
        Eigen::Vector3d(0, 0, 1), kK.pixel_direction(p.u, p.v).normalized());
    const Eigen::Quaterniond qe =
        qv * Eigen::Quaterniond(p.q_allo.w, p.q_allo.x, p.q_allo.y, p.q_allo.z);
    const Eigen::Matrix3d R = qe.toRotationMatrix();
    const Eigen::Vector3d half = 0.5 * stats.resolve(p.extent_dev);
    for (int c = 0; c < 8; ++c) {
      const Eigen::Vector3d expect = R * corner_sign(c).cwiseProduct(half) + t;
      CHECK((box.corners[c] - expect).norm() < 1e-9);
    }
  }
}

TEST_CASE("lift is invariant to quaternion sign") {
  const ExtentStats stats(1.9, 1.6, 4.2, 0.15, 0.12, 0.4);
  Rng rng(22);
  LiftParams p;
  p.q_allo = random_unit_quaternion(rng);
  p.u = 640.0;
  p.v = 180.0;
  p.z = 25.0;
  const Box3D a = lift(p, stats, kK);
  p.q_allo = -p.q_allo;
  const Box3D b = lift(p, stats, kK);
  for (int i = 0; i < 8; ++i) CHECK((a.corners[i] - b.corners[i]).norm() < 1e-12);
}

TEST_CASE("corner offsets in the ray-aligned frame do not depend on the ray") {
  const ExtentStats stats(1.9, 1.6, 4.2, 0.15, 0.12, 0.4);
  Rng rng(23);
  const Quaternion q_allo = random_unit_quaternion(rng);

  std::array<Eigen::Vector3d, 8> reference;
  bool have_reference = false;
  for (int trial = 0; trial < 20; ++trial) {
    LiftParams p;
    p.q_allo = q_allo;
    p.u = rng.uniform(50.0, 950.0);
    p.v = rng.uniform(20.0, 380.0);
    p.z = rng.uniform(5.0, 50.0);
    const Box3D box = lift(p, stats, kK);
    const Eigen::Vector3d c = box.centroid();
    const Eigen::Matrix3d R_view = view_rotation(c.normalized()).matrix();
    for (int i = 0; i < 8; ++i) {
      const Eigen::Vector3d local = R_view.transpose() * (box.corners[i] - c);
      if (!have_reference) {
        reference[i] = local;
      } else {
        CHECK((local - reference[i]).norm() < 1e-9);
      }
    }
    have_reference = true;
  }
}

TEST_CASE("Box3D pose recovery round trips") {
  Rng rng(24);
  for (int i = 0; i < 200; ++i) {
    const Quaternion q = random_unit_quaternion(rng);
    const Eigen::Vector3d center(rng.uniform(-20.0, 20.0), rng.uniform(-3.0, 3.0),
                                 rng.uniform(4.0, 70.0));
    const Eigen::Vector3d extents(rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0),
                                  rng.uniform(0.5, 6.0));
    const Box3D box = Box3D::from_pose(q, center, extents);

    // opposite corners straddle the centroid
    for (int c = 0; c < 4; ++c)
      CHECK((0.5 * (box.corners[c] + box.corners[7 - c]) - center).norm() < 1e-9);

    const BoxPose pose = box.recover_pose();
    const Box3D again = Box3D::from_pose(pose.rotation, pose.center, pose.extents);
    for (int c = 0; c < 8; ++c) CHECK((again.corners[c] - box.corners[c]).norm() < 1e-9);
  }
  CHECK_THROWS_AS(Box3D::from_pose(Quaternion::identity(), Eigen::Vector3d(0, 0, 5),
                                   Eigen::Vector3d(1.0, -0.2, 1.0)),
                  std::domain_error);
}

TEST_CASE("recover_pose rejects corner sets that are not rigid boxes") {
  Box3D box = Box3D::from_pose(Quaternion::identity(), Eigen::Vector3d(0, 0, 10),
                               Eigen::Vector3d(2, 2, 4));
  box.corners[3] += Eigen::Vector3d(0.3, 0.0, 0.0);
  CHECK_THROWS_AS(box.recover_pose(), std::domain_error);
}

TEST_CASE("project_box is symmetric for an on-axis box") {
  const Box3D box = Box3D::from_pose(Quaternion::identity(), Eigen::Vector3d(0, 0, 10),
                                     Eigen::Vector3d(2, 2, 4));
  const Rect2D r = project_box(box, kK);
  CHECK(r.left + r.right == Catch::Approx(2 * kK.cx).margin(1e-9));
  CHECK(r.top + r.bottom == Catch::Approx(2 * kK.cy).margin(1e-9));
}

TEST_CASE("project_box moves right under +x translation") {
  const Box3D box = Box3D::from_pose(Quaternion::from_yaw(0.4), Eigen::Vector3d(0, 0.5, 12),
                                     Eigen::Vector3d(1.8, 1.5, 4.1));
  const Rect2D a = project_box(box, kK);
  const Rect2D b = project_box(box.translated(Eigen::Vector3d(1.0, 0.0, 0.0)), kK);
  CHECK(b.left > a.left);
  CHECK(b.right > a.right);
  CHECK(b.top == Catch::Approx(a.top).margin(1e-12));
  CHECK(b.bottom == Catch::Approx(a.bottom).margin(1e-12));
}

TEST_CASE("project_box equals the per-corner projection oracle") {
  Rng rng(25);
  for (int i = 0; i < 200; ++i) {
    const Quaternion q = random_unit_quaternion(rng);
    const Box3D box = Box3D::from_pose(
        q,
        Eigen::Vector3d(rng.uniform(-15.0, 15.0), rng.uniform(-2.0, 2.0),
                        rng.uniform(8.0, 60.0)),
        Eigen::Vector3d(rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5), rng.uniform(0.5, 5.0)));
    const Rect2D r = project_box(box, kK);
    double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
    for (const auto& c : box.corners) {
      const Eigen::Vector2d uv = kK.project(c);
      lo_u = std::min(lo_u, uv.x());
      hi_u = std::max(hi_u, uv.x());
      lo_v = std::min(lo_v, uv.y());
      hi_v = std::max(hi_v, uv.y());
    }
    CHECK(r.left == Catch::Approx(lo_u).margin(1e-12));
    CHECK(r.right == Catch::Approx(hi_u).margin(1e-12));
    CHECK(r.top == Catch::Approx(lo_v).margin(1e-12));
    CHECK(r.bottom == Catch::Approx(hi_v).margin(1e-12));
  }

  const Box3D behind = Box3D::from_pose(Quaternion::identity(), Eigen::Vector3d(0, 0, 1),
                                        Eigen::Vector3d(1, 1, 4));
  CHECK_THROWS_AS(project_box(behind, kK), std::domain_error);
}

TEST_CASE("observation angle conversions") {
  CHECK(alpha_from_rotation_y(0.5, Eigen::Vector3d(0.0, 1.6, 10.0)) ==
        Catch::Approx(0.5).margin(1e-12));
  CHECK(alpha_from_rotation_y(M_PI / 4, Eigen::Vector3d(10.0, 1.6, 10.0)) ==
        Catch::Approx(0.0).margin(1e-12));
  CHECK_THROWS_AS(alpha_from_rotation_y(0.0, Eigen::Vector3d(1.0, 0.0, -2.0)),
                  std::domain_error);

  Rng rng(26);
  for (int i = 0; i < 300; ++i) {
    const double ry = rng.uniform(-M_PI, M_PI);
    const Eigen::Vector3d loc(rng.uniform(-30.0, 30.0), rng.uniform(-2.0, 2.0),
                              rng.uniform(1.0, 80.0));
    const double alpha = alpha_from_rotation_y(ry, loc);
    CHECK(alpha > -M_PI);
    CHECK(alpha <= M_PI);
    const double back = rotation_y_from_alpha(alpha, loc);
    CHECK(std::abs(wrap_angle(back - ry)) < 1e-12);
  }
}

TEST_CASE("ExtentStats resolves deviations and validates") {
  CHECK_THROWS_AS(ExtentStats(2.0, 2.0, 4.0, 0.0, 0.1, 0.1), std::domain_error);
  const ExtentStats stats(1.9, 1.6, 4.2, 0.2, 0.1, 0.5);
  const Eigen::Vector3d dev(1.0, -2.0, 0.5);
  const Eigen::Vector3d e = stats.resolve(dev);
  CHECK((e - Eigen::Vector3d(2.1, 1.4, 4.45)).norm() < 1e-12);
  CHECK((stats.deviation_of(e) - dev).norm() < 1e-12);
  CHECK_THROWS_AS(stats.resolve(Eigen::Vector3d(-20.0, 0.0, 0.0)), std::domain_error);
}

TEST_CASE("LiftParams validation") {
  const ExtentStats stats(1.9, 1.6, 4.2, 0.2, 0.1, 0.5);
  LiftParams p;
  p.u = 300.0;
  p.v = 150.0;
  p.z = 12.0;
  CHECK_NOTHROW(p.validate(stats));
  p.z = -1.0;
  CHECK_THROWS_AS(p.validate(stats), std::domain_error);
  p.z = 12.0;
  p.shape = Eigen::VectorXd::Zero(6);
  CHECK_THROWS_AS(p.validate(stats), std::domain_error);
  p.shape = LiftParams::unit_shape(6);
  p.q_allo = Quaternion(0.5, 0.5, 0.5, 0.6);
  CHECK_THROWS_AS(p.validate(stats), std::domain_error);
}
