#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "roi10d/image.hpp"
#include "roi10d/kitti.hpp"
#include "roi10d/lifting.hpp"
#include "roi10d/mesh.hpp"
#include "roi10d/metrics.hpp"
#include "roi10d/random.hpp"
#include "roi10d/texturing.hpp"

namespace roi10d {

// KITTI boxes stay gravity aligned, so object moves use the azimuth of the
// viewing ray only: the ray is flattened onto the x-z plane before the
// allocentric conversion and every rotation remains a pure yaw.
inline Eigen::Vector3d azimuth_ray(const Eigen::Vector3d& ray) {
  const Eigen::Vector3d flat(ray.x(), 0.0, ray.z());
  const double norm = flat.norm();
  if (norm <= 1e-12) throw std::domain_error("azimuth_ray: ray is vertical");
  return flat / norm;
}

struct PlacementConfig {
  double depth_min = 5.0;    // meters along the ray
  double depth_max = 60.0;
  double max_perturbation = 10.0 * M_PI / 180.0;
  bool full_so3 = false;     // default perturbs yaw only
  int max_retries = 20;
};

struct PlacementSample {
  double u = 0.0;  // pixel the object center projects to
  double v = 0.0;
  double depth_along_ray = 0.0;
  double rotation_perturbation = 0.0;
  Quaternion source_allocentric;
};

struct PlacementResult {
  PlacementSample sample;
  BoxPose pose;  // egocentric, camera frame
};

// Deterministic core of a placement: move the object to the ray through
// (u, v) at the given range, keeping its allocentric orientation up to the
// requested perturbation.
inline BoxPose place_at(const BoxPose& source, double u, double v, double depth_along_ray,
                        const Quaternion& perturbation, const CameraIntrinsics& K) {
  if (depth_along_ray <= 0.0) throw std::domain_error("place_at: range must be positive");
  const Quaternion source_allo =
      ego_to_allo(source.rotation, azimuth_ray(source.center.normalized()));
  const Eigen::Vector3d ray = K.view_ray(u, v);
  BoxPose placed;
  placed.rotation = allo_to_ego(source_allo * perturbation, azimuth_ray(ray));
  placed.center = ray * depth_along_ray;
  placed.extents = source.extents;
  return placed;
}

// Draws rays and ranges until the placed box is clear of every existing box
// in bird's eye view; gives up after the configured number of retries.
inline std::optional<PlacementResult> sample_placement(Rng& rng, const SceneImage& image,
                                                       const std::vector<Box3D>& existing,
                                                       const BoxPose& source,
                                                       const PlacementConfig& config = {}) {
  image.validate();
  const Quaternion source_allo =
      ego_to_allo(source.rotation, azimuth_ray(source.center.normalized()));
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    PlacementSample sample;
    sample.u = rng.uniform(0.0, image.rgb.width);
    sample.v = rng.uniform(0.0, image.rgb.height);
    sample.depth_along_ray = rng.uniform(config.depth_min, config.depth_max);
    sample.source_allocentric = source_allo;

    Quaternion perturbation;
    if (config.full_so3) {
      const Eigen::Vector3d axis = rng.unit_vector3();
      sample.rotation_perturbation = rng.uniform(-config.max_perturbation, config.max_perturbation);
      perturbation = Quaternion::from_axis_angle(axis, sample.rotation_perturbation);
    } else {
      sample.rotation_perturbation = rng.uniform(-config.max_perturbation, config.max_perturbation);
      perturbation = Quaternion::from_yaw(sample.rotation_perturbation);
    }

    const BoxPose pose =
        place_at(source, sample.u, sample.v, sample.depth_along_ray, perturbation,
                 image.calibration);
    const Box3D box = Box3D::from_pose(pose.rotation, pose.center, pose.extents);

    bool clear = true;
    for (const auto& other : existing) {
      if (iou_bev(box, other) > 0.0) {
        clear = false;
        break;
      }
    }
    if (clear) return PlacementResult{sample, pose};
  }
  return std::nullopt;
}

struct MeshBankEntry {
  std::string id;
  Eigen::Vector3d extents;  // (w, h, l) meters
  std::string class_tag;
  TriMesh mesh;             // object frame, centered, x across, y down, z along
};

struct MeshBank {
  std::vector<MeshBankEntry> entries;
};

// Blocky stand-in car: body box plus a cabin, vertex-colored from the seed.
// Fits exactly inside the (w, h, l) extents box.
inline TriMesh make_demo_car_mesh(const Eigen::Vector3d& extents, std::uint64_t color_seed) {
  if (extents.minCoeff() <= 0.0)
    throw std::domain_error("make_demo_car_mesh: extents must be positive");
  const Eigen::Vector3d half = 0.5 * extents;
  TriMesh body = make_box_mesh(Eigen::Vector3d(half.x(), 0.55 * half.y(), half.z()),
                               Eigen::Vector3d(0.0, 0.45 * half.y(), 0.0));
  const TriMesh cabin =
      make_box_mesh(Eigen::Vector3d(0.8 * half.x(), 0.45 * half.y(), 0.45 * half.z()),
                    Eigen::Vector3d(0.0, -0.55 * half.y(), -0.1 * half.z()));
  const int base = static_cast<int>(body.vertices.size());
  body.vertices.insert(body.vertices.end(), cabin.vertices.begin(), cabin.vertices.end());
  for (const auto& t : cabin.triangles)
    body.triangles.emplace_back(t[0] + base, t[1] + base, t[2] + base);

  Rng rng(color_seed);
  const Color3u body_color(static_cast<unsigned char>(rng.uniform_int(40, 220)),
                           static_cast<unsigned char>(rng.uniform_int(40, 220)),
                           static_cast<unsigned char>(rng.uniform_int(40, 220)));
  const Color3u cabin_color(static_cast<unsigned char>(rng.uniform_int(120, 240)),
                            static_cast<unsigned char>(rng.uniform_int(120, 240)),
                            static_cast<unsigned char>(rng.uniform_int(120, 240)));
  body.colors.assign(body.vertices.size(), body_color);
  for (std::size_t i = base; i < body.vertices.size(); ++i) body.colors[i] = cabin_color;
  return body;
}

inline void write_mesh_bank(const MeshBank& bank, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  for (const auto& entry : bank.entries) {
    nlohmann::json item;
    item["id"] = entry.id;
    item["extents"] = {entry.extents.x(), entry.extents.y(), entry.extents.z()};
    item["class_tag"] = entry.class_tag;
    index.push_back(item);
    write_ply(entry.mesh, (fs::path(dir) / (entry.id + ".ply")).string());
  }
  std::ofstream out(fs::path(dir) / "index.json");
  if (!out) throw std::runtime_error("cannot write mesh bank index in " + dir);
  out << index.dump(2) << "\n";
}

inline MeshBank load_mesh_bank(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "index.json");
  if (!in) throw std::runtime_error("cannot open mesh bank index in " + dir);
  nlohmann::json index;
  in >> index;
  MeshBank bank;
  for (const auto& item : index) {
    MeshBankEntry entry;
    entry.id = item.at("id").get<std::string>();
    const auto e = item.at("extents").get<std::vector<double>>();
    if (e.size() != 3) throw std::runtime_error("mesh bank extents must have 3 entries");
    entry.extents = Eigen::Vector3d(e[0], e[1], e[2]);
    entry.class_tag = item.at("class_tag").get<std::string>();
    entry.mesh = read_ply((fs::path(dir) / (entry.id + ".ply")).string());
    bank.entries.push_back(std::move(entry));
  }
  if (bank.entries.empty()) throw std::runtime_error("mesh bank index is empty: " + dir);
  return bank;
}

struct AugmentConfig {
  int k_max = 3;
  PlacementConfig placement;
  bool fill_dont_care_noise = false;
};

struct AugmentResult {
  SceneImage image;
  std::vector<DetectionRecord> labels;
  std::vector<PlacementSample> placements;
};

// Composites up to k_max bank cars into the frame. Existing labels are left
// untouched; each successful placement appends one record with the projected
// 2D box, observation angle and the mesh's metric extents.
inline AugmentResult augment_frame(const SceneImage& image,
                                   const std::vector<DetectionRecord>& labels,
                                   const MeshBank& bank, int k_max, Rng& rng,
                                   const AugmentConfig& config = {}) {
  image.validate();
  if (bank.entries.empty()) throw std::domain_error("augment_frame: mesh bank is empty");
  if (k_max < 0) throw std::domain_error("augment_frame: k_max must be non-negative");

  AugmentResult result{image, labels, {}};

  if (config.fill_dont_care_noise) {
    for (const auto& record : labels) {
      if (!record.is_dont_care()) continue;
      const int x0 = std::max(0, static_cast<int>(std::floor(record.bbox2d.left)));
      const int x1 = std::min(result.image.rgb.width - 1,
                              static_cast<int>(std::ceil(record.bbox2d.right)));
      const int y0 = std::max(0, static_cast<int>(std::floor(record.bbox2d.top)));
      const int y1 = std::min(result.image.rgb.height - 1,
                              static_cast<int>(std::ceil(record.bbox2d.bottom)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
          result.image.rgb.set(x, y, Color3u(static_cast<unsigned char>(rng.uniform_int(0, 255)),
                                             static_cast<unsigned char>(rng.uniform_int(0, 255)),
                                             static_cast<unsigned char>(rng.uniform_int(0, 255))));
    }
  }

  std::vector<Box3D> occupied;
  for (const auto& record : labels) {
    if (record.is_dont_care()) continue;
    if (record.h <= 0.0 || record.w <= 0.0 || record.l <= 0.0) continue;
    occupied.push_back(record_to_box3d(record));
  }

  struct Pending {
    const MeshBankEntry* entry;
    PlacementResult placement;
  };
  std::vector<Pending> pending;
  for (int slot = 0; slot < k_max; ++slot) {
    const MeshBankEntry& entry =
        bank.entries[rng.uniform_int(0, static_cast<int>(bank.entries.size()) - 1)];
    BoxPose source;
    source.rotation = Quaternion::from_yaw(rng.uniform(-M_PI, M_PI));
    source.center = Eigen::Vector3d(0.0, 0.0, 0.5 * (config.placement.depth_min +
                                                     config.placement.depth_max));
    source.extents = entry.extents;
    const auto placed = sample_placement(rng, result.image, occupied, source, config.placement);
    if (!placed) continue;
    occupied.push_back(
        Box3D::from_pose(placed->pose.rotation, placed->pose.center, placed->pose.extents));
    pending.push_back({&entry, *placed});
  }

  // Far to near, sharing one depth buffer so mutual occlusion is resolved
  // even when the input frame carries no depth channel.
  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return a.placement.pose.center.z() > b.placement.pose.center.z();
  });
  const bool had_depth = result.image.depth.has_value();
  if (!had_depth)
    result.image.depth = DepthMap(result.image.rgb.width, result.image.rgb.height,
                                  std::numeric_limits<float>::infinity());
  for (const auto& p : pending) {
    const RigidPose pose{p.placement.pose.rotation, p.placement.pose.center};
    result.image = rasterize(p.entry->mesh, pose, result.image);
    const Box3D box =
        Box3D::from_pose(p.placement.pose.rotation, p.placement.pose.center, p.entry->extents);
    result.labels.push_back(record_from_box(box, "Car", result.image.calibration,
                                            result.image.rgb.width, result.image.rgb.height));
    result.placements.push_back(p.placement.sample);
  }
  if (!had_depth) result.image.depth.reset();
  return result;
}

}  // namespace roi10d
