#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "roi10d/mesh.hpp"
#include "roi10d/tsdf.hpp"

namespace roi10d {

// Raised when the inside/outside ray test finds rays that cross the surface
// an odd number of times, which a closed mesh cannot produce.
class SignAmbiguityError : public std::runtime_error {
 public:
  SignAmbiguityError(std::string message, std::vector<Eigen::Vector2i> rays)
      : std::runtime_error(std::move(message)), offending_rays(std::move(rays)) {}
  std::vector<Eigen::Vector2i> offending_rays;  // (j, k) lattice rows
};

namespace detail {

inline Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p,
                                                 const Eigen::Vector3d& a,
                                                 const Eigen::Vector3d& b,
                                                 const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double sum = va + vb + vc;
  if (sum <= 1e-300) {
    // Degenerate triangle: fall back to the nearest point on its edges.
    auto on_segment = [&](const Eigen::Vector3d& s, const Eigen::Vector3d& e) {
      const Eigen::Vector3d d = e - s;
      const double len2 = d.squaredNorm();
      const double t = len2 > 0.0 ? std::clamp((p - s).dot(d) / len2, 0.0, 1.0) : 0.0;
      return Eigen::Vector3d(s + t * d);
    };
    Eigen::Vector3d best = on_segment(a, b);
    for (const Eigen::Vector3d& q : {on_segment(b, c), on_segment(c, a)})
      if ((p - q).squaredNorm() < (p - best).squaredNorm()) best = q;
    return best;
  }
  const double denom = 1.0 / sum;
  return a + ab * (vb * denom) + ac * (vc * denom);
}

inline double point_triangle_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                      const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  return (p - closest_point_on_triangle(p, a, b, c)).norm();
}

}  // namespace detail

// Exact point-to-surface distance queries against a triangle soup, bucketed
// on a uniform grid so nearby triangles are found without a full scan.
class MeshDistanceIndex {
 public:
  // Degenerate triangles are tolerated; they contribute edge distances.
  explicit MeshDistanceIndex(const TriMesh& mesh, double cell_size = -1.0) : mesh_(mesh) {
    if (mesh_.triangles.empty())
      throw std::domain_error("MeshDistanceIndex: mesh has no triangles");
    auto [lo, hi] = mesh_.bounds();
    lo_ = lo;
    const Eigen::Vector3d span = (hi - lo).cwiseMax(1e-9);
    if (cell_size <= 0.0) {
      const double target = std::cbrt(static_cast<double>(mesh_.triangles.size()));
      cell_ = span.maxCoeff() / std::max(1.0, target);
    } else {
      cell_ = cell_size;
    }
    for (int a = 0; a < 3; ++a)
      cells_[a] = std::max(1, static_cast<int>(std::ceil(span[a] / cell_)) + 1);
    buckets_.resize(static_cast<std::size_t>(cells_[0]) * cells_[1] * cells_[2]);
    for (int t = 0; t < static_cast<int>(mesh_.triangles.size()); ++t) {
      const auto& tri = mesh_.triangles[t];
      Eigen::Vector3d tlo = mesh_.vertices[tri[0]], thi = tlo;
      for (int a = 1; a < 3; ++a) {
        tlo = tlo.cwiseMin(mesh_.vertices[tri[a]]);
        thi = thi.cwiseMax(mesh_.vertices[tri[a]]);
      }
      const Eigen::Vector3i ilo = cell_of(tlo), ihi = cell_of(thi);
      for (int k = ilo.z(); k <= ihi.z(); ++k)
        for (int j = ilo.y(); j <= ihi.y(); ++j)
          for (int i = ilo.x(); i <= ihi.x(); ++i)
            buckets_[bucket_index(i, j, k)].push_back(t);
    }
  }

  // Smallest distance from p to any triangle, found by scanning growing
  // shells of buckets until no closer triangle can exist outside them.
  double distance(const Eigen::Vector3d& p) const {
    const Eigen::Vector3i home = cell_of(p);
    double best = std::numeric_limits<double>::infinity();
    const int max_ring = cells_.maxCoeff() + 2;
    for (int ring = 0; ring <= max_ring; ++ring) {
      if (best < (static_cast<double>(ring) - 1.0) * cell_) break;
      for (int k = home.z() - ring; k <= home.z() + ring; ++k) {
        if (k < 0 || k >= cells_.z()) continue;
        for (int j = home.y() - ring; j <= home.y() + ring; ++j) {
          if (j < 0 || j >= cells_.y()) continue;
          for (int i = home.x() - ring; i <= home.x() + ring; ++i) {
            if (i < 0 || i >= cells_.x()) continue;
            const bool on_shell = std::max({std::abs(i - home.x()), std::abs(j - home.y()),
                                            std::abs(k - home.z())}) == ring;
            if (!on_shell) continue;
            for (const int t : buckets_[bucket_index(i, j, k)]) {
              const auto& tri = mesh_.triangles[t];
              const double d = detail::point_triangle_distance(
                  p, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]], mesh_.vertices[tri[2]]);
              if (d < best) best = d;
            }
          }
        }
      }
    }
    return best;
  }

 private:
  Eigen::Vector3i cell_of(const Eigen::Vector3d& p) const {
    Eigen::Vector3i c;
    for (int a = 0; a < 3; ++a) {
      const int i = static_cast<int>(std::floor((p[a] - lo_[a]) / cell_));
      c[a] = std::clamp(i, 0, cells_[a] - 1);
    }
    return c;
  }

  std::size_t bucket_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(cells_.x()) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(cells_.y()) * k);
  }

  TriMesh mesh_;
  Eigen::Vector3d lo_;
  double cell_ = 1.0;
  Eigen::Vector3i cells_;
  std::vector<std::vector<int>> buckets_;
};

// Largest distance from either surface to the other, estimated at vertices,
// edge midpoints and triangle centroids.
inline double symmetric_hausdorff(const TriMesh& a, const TriMesh& b) {
  auto one_sided = [](const TriMesh& from, const TriMesh& to) {
    const MeshDistanceIndex index(to);
    double worst = 0.0;
    auto probe = [&](const Eigen::Vector3d& p) { worst = std::max(worst, index.distance(p)); };
    for (const auto& v : from.vertices) probe(v);
    for (const auto& t : from.triangles) {
      const auto& v0 = from.vertices[t[0]];
      const auto& v1 = from.vertices[t[1]];
      const auto& v2 = from.vertices[t[2]];
      probe((v0 + v1) / 2.0);
      probe((v1 + v2) / 2.0);
      probe((v2 + v0) / 2.0);
      probe((v0 + v1 + v2) / 3.0);
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

// Samples the mesh's signed distance on a lattice: unsigned distances inside
// a narrow band of one truncation around the surface, sign from the crossing
// parity of +x rays, clamp to the truncation everywhere else. The lattice is
// centered on the mesh bounding box unless an origin is given.
inline TsdfGrid mesh_to_tsdf(const TriMesh& mesh, const Eigen::Vector3i& dims,
                             double voxel_size, double truncation = -1.0,
                             std::optional<Eigen::Vector3d> origin = std::nullopt) {
  mesh.validate();
  if (mesh.triangles.empty()) throw std::domain_error("mesh_to_tsdf: mesh has no triangles");
  if (truncation <= 0.0) truncation = 3.0 * voxel_size;

  Eigen::Vector3d grid_origin;
  if (origin) {
    grid_origin = *origin;
  } else {
    const auto [lo, hi] = mesh.bounds();
    grid_origin = 0.5 * (lo + hi) - 0.5 * voxel_size * (dims - Eigen::Vector3i::Ones()).cast<double>();
  }
  TsdfGrid grid(dims, voxel_size, grid_origin, truncation);

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(grid.voxel_count(), inf);
  const double band = truncation + voxel_size;
  for (const auto& t : mesh.triangles) {
    const Eigen::Vector3d& a = mesh.vertices[t[0]];
    const Eigen::Vector3d& b = mesh.vertices[t[1]];
    const Eigen::Vector3d& c = mesh.vertices[t[2]];
    const Eigen::Vector3d lo = a.cwiseMin(b).cwiseMin(c).array() - band;
    const Eigen::Vector3d hi = a.cwiseMax(b).cwiseMax(c).array() + band;
    Eigen::Vector3i ilo, ihi;
    for (int axis = 0; axis < 3; ++axis) {
      ilo[axis] = std::max(0, static_cast<int>(std::ceil((lo[axis] - grid_origin[axis]) / voxel_size)));
      ihi[axis] = std::min(dims[axis] - 1,
                           static_cast<int>(std::floor((hi[axis] - grid_origin[axis]) / voxel_size)));
    }
    for (int k = ilo.z(); k <= ihi.z(); ++k)
      for (int j = ilo.y(); j <= ihi.y(); ++j)
        for (int i = ilo.x(); i <= ihi.x(); ++i) {
          const double d = detail::point_triangle_distance(grid.position(i, j, k), a, b, c);
          double& slot = dist[grid.index(i, j, k)];
          if (d < slot) slot = d;
        }
  }

  // Inside test per (j, k) row: collect the x coordinates where the +x ray
  // pierces the surface, then a node is inside iff an odd number of
  // crossings lie beyond it. The ray is nudged off the lattice so that it
  // cannot graze edges or axis-aligned faces.
  const double jitter_y = voxel_size * 1e-7;
  const double jitter_z = voxel_size * 1e-7 * std::sqrt(2.0);
  std::vector<Eigen::Vector2i> odd_rays;
  std::vector<double> crossings;
  for (int k = 0; k < dims.z(); ++k) {
    for (int j = 0; j < dims.y(); ++j) {
      const double ry = grid_origin.y() + voxel_size * j + jitter_y;
      const double rz = grid_origin.z() + voxel_size * k + jitter_z;
      crossings.clear();
      for (const auto& t : mesh.triangles) {
        const Eigen::Vector3d& a = mesh.vertices[t[0]];
        const Eigen::Vector3d& b = mesh.vertices[t[1]];
        const Eigen::Vector3d& c = mesh.vertices[t[2]];
        const double e1y = b.y() - a.y(), e1z = b.z() - a.z();
        const double e2y = c.y() - a.y(), e2z = c.z() - a.z();
        const double det = e1y * e2z - e1z * e2y;
        if (std::abs(det) < 1e-300) continue;  // triangle parallel to the ray
        const double py = ry - a.y(), pz = rz - a.z();
        const double v = (py * e2z - pz * e2y) / det;
        const double w = (e1y * pz - e1z * py) / det;
        if (v <= 0.0 || w <= 0.0 || v + w >= 1.0) continue;
        crossings.push_back(a.x() + v * (b.x() - a.x()) + w * (c.x() - a.x()));
      }
      if (crossings.size() % 2 != 0) {
        odd_rays.emplace_back(j, k);
        continue;
      }
      if (crossings.empty()) continue;
      std::sort(crossings.begin(), crossings.end());
      std::size_t next = 0;
      for (int i = 0; i < dims.x(); ++i) {
        const double x = grid_origin.x() + voxel_size * i;
        while (next < crossings.size() && crossings[next] <= x) ++next;
        if ((crossings.size() - next) % 2 == 1) {
          double& slot = dist[grid.index(i, j, k)];
          slot = -(slot == inf ? truncation : slot);
        }
      }
    }
  }
  if (!odd_rays.empty()) {
    std::ostringstream msg;
    msg << "mesh_to_tsdf: " << odd_rays.size()
        << " rays crossed the surface an odd number of times (mesh not watertight); first rows:";
    for (std::size_t i = 0; i < odd_rays.size() && i < 8; ++i)
      msg << " (" << odd_rays[i].x() << "," << odd_rays[i].y() << ")";
    throw SignAmbiguityError(msg.str(), std::move(odd_rays));
  }

  for (int k = 0; k < dims.z(); ++k)
    for (int j = 0; j < dims.y(); ++j)
      for (int i = 0; i < dims.x(); ++i) {
        const double d = dist[grid.index(i, j, k)];
        grid.set(i, j, k, std::isinf(d) ? truncation : d);
      }
  return grid;
}

}  // namespace roi10d
