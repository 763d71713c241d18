#pragma once

#include <cstdint>
#include <stdexcept>
#include <unordered_map>

#include "roi10d/marching_cubes_tables.hpp"
#include "roi10d/mesh.hpp"
#include "roi10d/tsdf.hpp"

namespace roi10d {

namespace detail {

// Cube corners in the order the tables expect: 0..3 ring the lower-z face
// counterclockwise, 4..7 the same ring shifted one voxel in z.
inline constexpr int kCubeCorner[8][3] = {
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

// Each cube edge as a pair of corner slots.
inline constexpr int kCubeEdge[12][2] = {
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace detail

// Triangulates the level set of a voxel grid. Vertices are interpolated
// linearly along lattice edges and expressed in the grid's metric frame;
// shared edge vertices are emitted once. With negative-inside distances the
// triangles wind so their normals point out of the shape.
inline TriMesh marching_cubes(const TsdfGrid& grid, double level = 0.0) {
  const Eigen::Vector3i d = grid.dims();
  TriMesh mesh;
  // A lattice edge is keyed by its lower node and axis, giving each
  // interpolated vertex a unique id across neighboring cubes.
  std::unordered_map<uint64_t, int> edge_vertex;
  auto edge_key = [&](int i, int j, int k, int axis) {
    const uint64_t node = static_cast<uint64_t>(i) +
                          static_cast<uint64_t>(d.x()) *
                              (static_cast<uint64_t>(j) + static_cast<uint64_t>(d.y()) * k);
    return node * 3 + axis;
  };

  for (int k = 0; k + 1 < d.z(); ++k) {
    for (int j = 0; j + 1 < d.y(); ++j) {
      for (int i = 0; i + 1 < d.x(); ++i) {
        double value[8];
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          value[c] = grid.at(i + detail::kCubeCorner[c][0], j + detail::kCubeCorner[c][1],
                             k + detail::kCubeCorner[c][2]);
          if (value[c] < level) cube |= 1 << c;
        }
        const uint16_t edges = mc::kEdgeTable[cube];
        if (edges == 0) continue;

        int vert_of_edge[12];
        for (int e = 0; e < 12; ++e) {
          if (!(edges & (1u << e))) continue;
          const int* ca = detail::kCubeCorner[detail::kCubeEdge[e][0]];
          const int* cb = detail::kCubeCorner[detail::kCubeEdge[e][1]];
          const int ai = i + ca[0], aj = j + ca[1], ak = k + ca[2];
          const int bi = i + cb[0], bj = j + cb[1], bk = k + cb[2];
          int axis = 0;
          if (aj != bj) axis = 1;
          if (ak != bk) axis = 2;
          const bool forward = (bi + bj + bk) > (ai + aj + ak);
          const uint64_t key =
              forward ? edge_key(ai, aj, ak, axis) : edge_key(bi, bj, bk, axis);
          auto it = edge_vertex.find(key);
          if (it == edge_vertex.end()) {
            const double va = value[detail::kCubeEdge[e][0]];
            const double vb = value[detail::kCubeEdge[e][1]];
            double t = 0.5;
            if (std::abs(vb - va) > 1e-300) t = (level - va) / (vb - va);
            if (t < 0.0) t = 0.0;
            if (t > 1.0) t = 1.0;
            const Eigen::Vector3d pa = grid.position(ai, aj, ak);
            const Eigen::Vector3d pb = grid.position(bi, bj, bk);
            mesh.vertices.push_back(pa + t * (pb - pa));
            it = edge_vertex.emplace(key, static_cast<int>(mesh.vertices.size()) - 1).first;
          }
          vert_of_edge[e] = it->second;
        }

        // The tables wind the other way for negative-inside fields, so the
        // last two indices are swapped to make normals face outward.
        const auto& tri = mc::kTriTable[cube];
        for (int t = 0; tri[t] != -1; t += 3)
          mesh.triangles.emplace_back(vert_of_edge[tri[t]], vert_of_edge[tri[t + 2]],
                                      vert_of_edge[tri[t + 1]]);
      }
    }
  }

  if (mesh.triangles.empty())
    throw std::runtime_error("marching_cubes: level set is empty (single-sign grid)");
  // Sliver triangles near grazing nodes are kept: dropping them would punch
  // pinholes into an otherwise watertight surface.
  return mesh;
}

}  // namespace roi10d
