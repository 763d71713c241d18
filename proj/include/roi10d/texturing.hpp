#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "roi10d/image.hpp"
#include "roi10d/mesh.hpp"
#include "roi10d/quaternion.hpp"

namespace roi10d {

struct RigidPose {
  Quaternion rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation.rotate(p) + translation;
  }
};

inline const Color3u kSentinelColor{255, 0, 0};

// Paints the mesh by projecting camera-facing vertices into the image.
// Vertices looking away from the camera (or projecting off the image) borrow
// the color of their mirror point across the object's x = 0 symmetry plane;
// when the mirror side is unresolvable too, they get the sentinel color.
inline TriMesh texture_mesh(const TriMesh& mesh, const RigidPose& pose,
                            const SceneImage& image) {
  image.validate();
  const std::vector<Eigen::Vector3d> normals = mesh.vertex_normals();
  const Eigen::Matrix3d R = pose.rotation.matrix();

  TriMesh out = mesh;
  out.colors.assign(mesh.vertices.size(), kSentinelColor);

  auto sample = [&](const Eigen::Vector3d& p_obj, const Eigen::Vector3d& n_obj,
                    Color3u* color) {
    const Eigen::Vector3d p_cam = R * p_obj + pose.translation;
    if (p_cam.z() <= 0.0)
      throw std::domain_error("texture_mesh: mesh is not fully in front of the camera");
    const Eigen::Vector3d n_cam = R * n_obj;
    if (n_cam.dot(p_cam.normalized()) >= 0.0) return false;  // facing away
    const Eigen::Vector2d uv = image.calibration.project(p_cam);
    if (!in_image(image.rgb, uv.x(), uv.y())) return false;
    const Eigen::Vector3d c = bilinear_sample(image.rgb, uv.x(), uv.y());
    for (int a = 0; a < 3; ++a)
      (*color)[a] = static_cast<unsigned char>(std::clamp(std::lround(c[a]), 0l, 255l));
    return true;
  };

  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Eigen::Vector3d& p = mesh.vertices[i];
    const Eigen::Vector3d& n = normals[i];
    if (sample(p, n, &out.colors[i])) continue;
    const Eigen::Vector3d p_mirror(-p.x(), p.y(), p.z());
    const Eigen::Vector3d n_mirror(-n.x(), n.y(), n.z());
    sample(p_mirror, n_mirror, &out.colors[i]);
  }
  return out;
}

namespace detail {

struct ScreenVertex {
  Eigen::Vector2d uv;
  double z;
  Eigen::Vector3d color;
};

}  // namespace detail

// Draws the colored mesh into a copy of the scene with a per-pixel depth
// test. Colors interpolate perspective-correctly across each triangle; when
// the scene has a depth channel it doubles as the z-buffer and is updated.
inline SceneImage rasterize(const TriMesh& mesh, const RigidPose& pose,
                            const SceneImage& image) {
  image.validate();
  if (!mesh.has_colors()) throw std::domain_error("rasterize: mesh has no vertex colors");

  SceneImage out = image;
  const bool keep_depth = out.depth.has_value();
  if (!keep_depth)
    out.depth = DepthMap(out.rgb.width, out.rgb.height, std::numeric_limits<float>::infinity());
  DepthMap& zbuf = *out.depth;

  const Eigen::Matrix3d R = pose.rotation.matrix();
  std::vector<detail::ScreenVertex> screen(mesh.vertices.size());
  std::vector<bool> in_front(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Eigen::Vector3d p = R * mesh.vertices[i] + pose.translation;
    in_front[i] = p.z() > 1e-6;
    if (!in_front[i]) continue;
    screen[i] = {image.calibration.project(p), p.z(), mesh.colors[i].cast<double>()};
  }

  for (const auto& t : mesh.triangles) {
    if (!in_front[t[0]] || !in_front[t[1]] || !in_front[t[2]]) continue;
    const detail::ScreenVertex& a = screen[t[0]];
    const detail::ScreenVertex& b = screen[t[1]];
    const detail::ScreenVertex& c = screen[t[2]];

    const double area2 = (b.uv - a.uv).x() * (c.uv - a.uv).y() -
                         (b.uv - a.uv).y() * (c.uv - a.uv).x();
    if (std::abs(area2) < 1e-12) continue;

    const int x_lo = std::max(0, static_cast<int>(std::floor(
                                     std::min({a.uv.x(), b.uv.x(), c.uv.x()}) - 0.5)));
    const int x_hi = std::min(out.rgb.width - 1,
                              static_cast<int>(std::ceil(
                                  std::max({a.uv.x(), b.uv.x(), c.uv.x()}) - 0.5)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(
                                     std::min({a.uv.y(), b.uv.y(), c.uv.y()}) - 0.5)));
    const int y_hi = std::min(out.rgb.height - 1,
                              static_cast<int>(std::ceil(
                                  std::max({a.uv.y(), b.uv.y(), c.uv.y()}) - 0.5)));

    for (int y = y_lo; y <= y_hi; ++y) {
      for (int x = x_lo; x <= x_hi; ++x) {
        const Eigen::Vector2d p(x + 0.5, y + 0.5);
        const double w0 = ((b.uv - p).x() * (c.uv - p).y() - (b.uv - p).y() * (c.uv - p).x()) / area2;
        const double w1 = ((c.uv - p).x() * (a.uv - p).y() - (c.uv - p).y() * (a.uv - p).x()) / area2;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;

        const double inv_z = w0 / a.z + w1 / b.z + w2 / c.z;
        const double z = 1.0 / inv_z;
        if (z >= zbuf.at(x, y)) continue;
        const Eigen::Vector3d color =
            (w0 * a.color / a.z + w1 * b.color / b.z + w2 * c.color / c.z) * z;
        Color3u pixel;
        for (int ch = 0; ch < 3; ++ch)
          pixel[ch] = static_cast<unsigned char>(std::clamp(std::lround(color[ch]), 0l, 255l));
        out.rgb.set(x, y, pixel);
        zbuf.set(x, y, static_cast<float>(z));
      }
    }
  }

  if (!keep_depth) out.depth.reset();
  return out;
}

namespace detail {

// Möller-Trumbore ray/triangle intersection; returns the ray parameter or
// a negative value on miss.
inline double ray_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                           const Eigen::Vector3d& v0, const Eigen::Vector3d& v1,
                           const Eigen::Vector3d& v2, double* bary_u, double* bary_v) {
  const Eigen::Vector3d e1 = v1 - v0, e2 = v2 - v0;
  const Eigen::Vector3d pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-14) return -1.0;
  const double inv_det = 1.0 / det;
  const Eigen::Vector3d tvec = origin - v0;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return -1.0;
  const Eigen::Vector3d qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return -1.0;
  *bary_u = u;
  *bary_v = v;
  return e2.dot(qvec) * inv_det;
}

}  // namespace detail

// Reference renderer: one ray through each pixel center, nearest hit wins.
// Slow but independent of the incremental rasterizer above.
inline SceneImage raycast_reference(const TriMesh& mesh, const RigidPose& pose,
                                    const SceneImage& image) {
  image.validate();
  if (!mesh.has_colors()) throw std::domain_error("raycast: mesh has no vertex colors");
  SceneImage out = image;
  const bool keep_depth = out.depth.has_value();
  if (!keep_depth)
    out.depth = DepthMap(out.rgb.width, out.rgb.height, std::numeric_limits<float>::infinity());
  DepthMap& zbuf = *out.depth;

  std::vector<Eigen::Vector3d> world(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) world[i] = pose.apply(mesh.vertices[i]);

  for (int y = 0; y < out.rgb.height; ++y) {
    for (int x = 0; x < out.rgb.width; ++x) {
      const Eigen::Vector3d dir = image.calibration.pixel_direction(x + 0.5, y + 0.5);
      double best_z = zbuf.at(x, y);
      Eigen::Vector3d best_color = Eigen::Vector3d::Zero();
      bool hit = false;
      for (const auto& t : mesh.triangles) {
        double u, v;
        const double s = detail::ray_triangle(Eigen::Vector3d::Zero(), dir, world[t[0]],
                                              world[t[1]], world[t[2]], &u, &v);
        if (s <= 0.0) continue;
        const double z = s * dir.z();  // dir has z component 1
        if (z >= best_z) continue;
        best_z = z;
        best_color = (1.0 - u - v) * mesh.colors[t[0]].cast<double>() +
                     u * mesh.colors[t[1]].cast<double>() + v * mesh.colors[t[2]].cast<double>();
        hit = true;
      }
      if (hit) {
        Color3u pixel;
        for (int ch = 0; ch < 3; ++ch)
          pixel[ch] = static_cast<unsigned char>(std::clamp(std::lround(best_color[ch]), 0l, 255l));
        out.rgb.set(x, y, pixel);
        zbuf.set(x, y, static_cast<float>(best_z));
      }
    }
  }
  if (!keep_depth) out.depth.reset();
  return out;
}

}  // namespace roi10d
