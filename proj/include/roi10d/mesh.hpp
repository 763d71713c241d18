#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace roi10d {

using Color3u = Eigen::Matrix<unsigned char, 3, 1>;

// Indexed triangle soup in meters. Colors, when present, are per-vertex RGB.
struct TriMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3i> triangles;
  std::vector<Color3u> colors;

  bool has_colors() const { return !colors.empty(); }

  void validate() const {
    if (has_colors() && colors.size() != vertices.size())
      throw std::domain_error("mesh: color count does not match vertex count");
    const int n = static_cast<int>(vertices.size());
    for (const auto& t : triangles) {
      for (int a = 0; a < 3; ++a)
        if (t[a] < 0 || t[a] >= n) throw std::domain_error("mesh: triangle index out of range");
      if (triangle_area(t) <= 1e-12) throw std::domain_error("mesh: degenerate triangle");
    }
  }

  double triangle_area(const Eigen::Vector3i& t) const {
    const Eigen::Vector3d e1 = vertices[t[1]] - vertices[t[0]];
    const Eigen::Vector3d e2 = vertices[t[2]] - vertices[t[0]];
    return 0.5 * e1.cross(e2).norm();
  }

  Eigen::Vector3d triangle_normal(const Eigen::Vector3i& t) const {
    const Eigen::Vector3d e1 = vertices[t[1]] - vertices[t[0]];
    const Eigen::Vector3d e2 = vertices[t[2]] - vertices[t[0]];
    const Eigen::Vector3d n = e1.cross(e2);
    const double len = n.norm();
    if (len <= 1e-300) throw std::domain_error("mesh: degenerate triangle has no normal");
    return n / len;
  }

  void remove_degenerate_triangles(double area_eps = 1e-12) {
    std::vector<Eigen::Vector3i> kept;
    kept.reserve(triangles.size());
    for (const auto& t : triangles)
      if (triangle_area(t) > area_eps) kept.push_back(t);
    triangles = std::move(kept);
  }

  // Area-weighted vertex normals; zero for vertices touched by no triangle.
  std::vector<Eigen::Vector3d> vertex_normals() const {
    std::vector<Eigen::Vector3d> normals(vertices.size(), Eigen::Vector3d::Zero());
    for (const auto& t : triangles) {
      const Eigen::Vector3d e1 = vertices[t[1]] - vertices[t[0]];
      const Eigen::Vector3d e2 = vertices[t[2]] - vertices[t[0]];
      const Eigen::Vector3d n = e1.cross(e2);
      for (int a = 0; a < 3; ++a) normals[t[a]] += n;
    }
    for (auto& n : normals) {
      const double len = n.norm();
      if (len > 1e-300) n /= len;
    }
    return normals;
  }

  std::pair<Eigen::Vector3d, Eigen::Vector3d> bounds() const {
    if (vertices.empty()) throw std::domain_error("mesh: empty mesh has no bounds");
    Eigen::Vector3d lo = vertices.front(), hi = vertices.front();
    for (const auto& v : vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    return {lo, hi};
  }
};

inline void write_obj(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  char line[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(line, sizeof(line), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out << line;
  }
  for (const auto& t : mesh.triangles) {
    std::snprintf(line, sizeof(line), "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    out << line;
  }
  if (!out) throw std::runtime_error("short write: " + path);
}

inline void write_ply(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (mesh.has_colors())
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "element face " << mesh.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  char line[160];
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    if (mesh.has_colors()) {
      const auto& c = mesh.colors[i];
      std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %d %d %d\n", v.x(), v.y(), v.z(),
                    int(c[0]), int(c[1]), int(c[2]));
    } else {
      std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    }
    out << line;
  }
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
  if (!out) throw std::runtime_error("short write: " + path);
}

// Reads the ascii PLY subset produced by write_ply: float x/y/z, optional
// uchar red/green/blue in that order, triangular faces.
inline TriMesh read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw std::runtime_error("ply header truncated: " + path);
  };
  next_line();
  if (line != "ply") throw std::runtime_error("not a ply file: " + path);
  std::size_t n_vertices = 0, n_faces = 0;
  bool has_color = false;
  std::string element;
  std::vector<std::string> vertex_props;
  while (true) {
    next_line();
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "end_header") break;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw std::runtime_error("unsupported ply format: " + fmt);
    } else if (tok == "element") {
      std::size_t count;
      ss >> element >> count;
      if (element == "vertex") n_vertices = count;
      else if (element == "face") n_faces = count;
    } else if (tok == "property" && element == "vertex") {
      std::string type, name;
      ss >> type >> name;
      vertex_props.push_back(name);
      if (name == "red") has_color = true;
    }
  }
  const std::vector<std::string> want_xyz = {"x", "y", "z"};
  const std::vector<std::string> want_rgb = {"x", "y", "z", "red", "green", "blue"};
  if (vertex_props != (has_color ? want_rgb : want_xyz))
    throw std::runtime_error("unsupported ply vertex layout: " + path);

  TriMesh mesh;
  mesh.vertices.reserve(n_vertices);
  for (std::size_t i = 0; i < n_vertices; ++i) {
    next_line();
    std::istringstream ss(line);
    Eigen::Vector3d v;
    ss >> v.x() >> v.y() >> v.z();
    if (!ss) throw std::runtime_error("bad ply vertex line: " + line);
    if (has_color) {
      int r, g, b;
      ss >> r >> g >> b;
      if (!ss) throw std::runtime_error("bad ply color on line: " + line);
      mesh.colors.emplace_back(static_cast<unsigned char>(r), static_cast<unsigned char>(g),
                               static_cast<unsigned char>(b));
    }
    mesh.vertices.push_back(v);
  }
  for (std::size_t i = 0; i < n_faces; ++i) {
    next_line();
    std::istringstream ss(line);
    int count, a, b, c;
    ss >> count >> a >> b >> c;
    if (!ss || count != 3) throw std::runtime_error("only triangular ply faces supported");
    mesh.triangles.emplace_back(a, b, c);
  }
  mesh.validate();
  return mesh;
}

// Axis-aligned box with outward-facing triangles.
inline TriMesh make_box_mesh(const Eigen::Vector3d& half_extents,
                             const Eigen::Vector3d& center = Eigen::Vector3d::Zero()) {
  if (half_extents.minCoeff() <= 0.0)
    throw std::domain_error("box mesh: half extents must be positive");
  TriMesh mesh;
  for (int i = 0; i < 8; ++i)
    mesh.vertices.push_back(center + half_extents.cwiseProduct(Eigen::Vector3d(
                                         (i & 1) ? 1 : -1, (i & 2) ? 1 : -1, (i & 4) ? 1 : -1)));
  // Quads listed CCW as seen from outside, split along one diagonal.
  const int quads[6][4] = {
      {1, 3, 7, 5},  // +x
      {0, 4, 6, 2},  // -x
      {2, 6, 7, 3},  // +y
      {0, 1, 5, 4},  // -y
      {4, 5, 7, 6},  // +z
      {0, 2, 3, 1},  // -z
  };
  for (const auto& q : quads) {
    mesh.triangles.emplace_back(q[0], q[1], q[2]);
    mesh.triangles.emplace_back(q[0], q[2], q[3]);
  }
  return mesh;
}

// Icosahedron subdivided `subdivisions` times, vertices pushed to the sphere.
inline TriMesh make_icosphere(int subdivisions, double radius = 1.0,
                              const Eigen::Vector3d& center = Eigen::Vector3d::Zero()) {
  if (subdivisions < 0 || subdivisions > 7)
    throw std::domain_error("icosphere: subdivision count out of range");
  if (radius <= 0.0) throw std::domain_error("icosphere: radius must be positive");
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Eigen::Vector3i> tris = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Eigen::Vector3i> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      const int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
      next.emplace_back(t[0], ab, ca);
      next.emplace_back(t[1], bc, ab);
      next.emplace_back(t[2], ca, bc);
      next.emplace_back(ab, bc, ca);
    }
    tris = std::move(next);
  }
  TriMesh mesh;
  mesh.vertices.reserve(verts.size());
  for (const auto& v : verts) mesh.vertices.push_back(center + radius * v);
  mesh.triangles = std::move(tris);
  return mesh;
}

}  // namespace roi10d
