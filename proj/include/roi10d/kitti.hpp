#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "roi10d/camera.hpp"
#include "roi10d/lifting.hpp"
#include "roi10d/quaternion.hpp"
#include "roi10d/rect.hpp"

namespace roi10d {

struct ParseError : std::runtime_error {
  int line = 0;
  ParseError(const std::string& msg, int line_no)
      : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

// One object row of a KITTI label or prediction file.
struct DetectionRecord {
  std::string class_name;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  Rect2D bbox2d{};
  double h = 0.0, w = 0.0, l = 0.0;       // meters
  Eigen::Vector3d location{0.0, 0.0, 0.0};  // bottom center, camera frame
  double rotation_y = 0.0;
  std::optional<double> score;

  bool is_dont_care() const { return class_name == "DontCare"; }
};

inline bool alpha_is_consistent(const DetectionRecord& r, double tol = 1e-2) {
  if (r.location.z() <= 0.0) return true;
  const double expect = wrap_angle(r.rotation_y - std::atan2(r.location.x(), r.location.z()));
  return std::abs(wrap_angle(r.alpha - expect)) <= tol;
}

inline std::vector<DetectionRecord> parse_label_file(const std::string& text) {
  std::vector<DetectionRecord> out;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> tok;
    std::string t;
    while (fields >> t) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() != 15 && tok.size() != 16)
      throw ParseError("expected 15 or 16 fields, got " + std::to_string(tok.size()), line_no);

    std::array<double, 15> v{};
    for (size_t i = 1; i < tok.size(); ++i) {
      size_t used = 0;
      try {
        v[i - 1] = std::stod(tok[i], &used);
      } catch (const std::exception&) {
        throw ParseError("non-numeric field '" + tok[i] + "'", line_no);
      }
      if (used != tok[i].size()) throw ParseError("non-numeric field '" + tok[i] + "'", line_no);
    }

    DetectionRecord r;
    r.class_name = tok[0];
    r.truncation = v[0];
    r.occlusion = static_cast<int>(std::lround(v[1]));
    r.alpha = v[2];
    r.bbox2d = Rect2D{v[3], v[4], v[5], v[6]};
    r.h = v[7];
    r.w = v[8];
    r.l = v[9];
    r.location = Eigen::Vector3d(v[10], v[11], v[12]);
    r.rotation_y = v[13];
    if (tok.size() == 16) r.score = v[14];
    if (!r.bbox2d.valid()) throw ParseError("degenerate 2D box", line_no);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string serialize_record(const DetectionRecord& r) {
  char buf[512];
  int n = std::snprintf(buf, sizeof(buf),
                        "%s %.2f %d %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f",
                        r.class_name.c_str(), r.truncation, r.occlusion, r.alpha, r.bbox2d.left,
                        r.bbox2d.top, r.bbox2d.right, r.bbox2d.bottom, r.h, r.w, r.l,
                        r.location.x(), r.location.y(), r.location.z(), r.rotation_y);
  std::string s(buf, static_cast<size_t>(n));
  if (r.score) {
    n = std::snprintf(buf, sizeof(buf), " %.2f", *r.score);
    s.append(buf, static_cast<size_t>(n));
  }
  return s;
}

inline std::string serialize_label_file(const std::vector<DetectionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

// ------------------------------------------------------------------------

struct FrameCalibration {
  Eigen::Matrix<double, 3, 4> P2 = Eigen::Matrix<double, 3, 4>::Zero();

  CameraIntrinsics intrinsics() const {
    const double s = P2(2, 2);
    if (std::abs(s - 1.0) > 1e-6)
      throw std::domain_error("FrameCalibration: P2 not normalized (P2[2][2] != 1)");
    return CameraIntrinsics(P2(0, 0), P2(1, 1), P2(0, 2), P2(1, 2));
  }
};

inline FrameCalibration parse_calibration(const std::string& text) {
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string key;
    if (!(fields >> key)) continue;
    if (key != "P2:" && key != "P2") continue;
    FrameCalibration calib;
    for (int i = 0; i < 12; ++i) {
      double v;
      if (!(fields >> v)) throw ParseError("P2 expects 12 values", line_no);
      calib.P2(i / 4, i % 4) = v;
    }
    return calib;
  }
  throw ParseError("calibration without P2 entry", line_no);
}

// ------------------------------------------------------------------------

enum class Difficulty { kEasy, kModerate, kHard, kIgnored };

inline const char* to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return "easy";
    case Difficulty::kModerate: return "moderate";
    case Difficulty::kHard: return "hard";
    default: return "ignored";
  }
}

inline Difficulty classify_difficulty(const DetectionRecord& r) {
  const double height = r.bbox2d.height();
  if (height >= 40.0 && r.occlusion <= 0 && r.truncation <= 0.15) return Difficulty::kEasy;
  if (height >= 25.0 && r.occlusion <= 1 && r.truncation <= 0.30) return Difficulty::kModerate;
  if (height >= 25.0 && r.occlusion <= 2 && r.truncation <= 0.50) return Difficulty::kHard;
  return Difficulty::kIgnored;
}

// Yaw-only box from the KITTI bottom-center convention; at rotation_y = 0 the
// width spans camera x and the length spans camera z.
inline Box3D record_to_box3d(const DetectionRecord& r) {
  if (r.h <= 0.0 || r.w <= 0.0 || r.l <= 0.0)
    throw std::domain_error("record_to_box3d: non-positive dimension");
  const Eigen::Vector3d centroid = r.location + Eigen::Vector3d(0.0, -r.h / 2.0, 0.0);
  return Box3D::from_pose(Quaternion::from_yaw(r.rotation_y), centroid,
                          Eigen::Vector3d(r.w, r.h, r.l));
}

// Inverse bridge for synthetic data: truncation is the clipped-away bbox area
// fraction, occlusion stays 0.
inline DetectionRecord record_from_box(const Box3D& box, const std::string& class_name,
                                       const CameraIntrinsics& K, double image_w,
                                       double image_h,
                                       std::optional<double> score = std::nullopt) {
  const BoxPose pose = box.recover_pose();
  const Eigen::Matrix3d R = pose.rotation.matrix();
  if (std::abs(R(1, 0)) > 1e-6 || std::abs(R(1, 2)) > 1e-6 || R(1, 1) < 0.0)
    throw std::domain_error("record_from_box: box is not gravity aligned");
  DetectionRecord r;
  r.class_name = class_name;
  r.w = pose.extents.x();
  r.h = pose.extents.y();
  r.l = pose.extents.z();
  r.location = pose.center + Eigen::Vector3d(0.0, r.h / 2.0, 0.0);
  r.rotation_y = std::atan2(R(0, 2), R(2, 2));
  r.alpha = alpha_from_rotation_y(r.rotation_y, r.location);
  const Rect2D full = project_box(box, K);
  const Rect2D clipped = full.intersect(Rect2D{0.0, 0.0, image_w, image_h});
  r.bbox2d = clipped.valid() ? clipped : Rect2D{0.0, 0.0, 0.0, 0.0};
  r.truncation = full.area() > 0.0 ? 1.0 - (clipped.valid() ? clipped.area() : 0.0) / full.area()
                                   : 0.0;
  r.score = score;
  return r;
}

// ------------------------------------------------------------------------

inline ExtentStats compute_extent_stats(const std::vector<DetectionRecord>& records,
                                        const std::string& class_name = "Car") {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d sq = Eigen::Vector3d::Zero();
  int n = 0;
  for (const auto& r : records) {
    if (r.class_name != class_name) continue;
    const Eigen::Vector3d whl(r.w, r.h, r.l);
    sum += whl;
    sq += whl.cwiseProduct(whl);
    ++n;
  }
  if (n < 2)
    throw std::domain_error("compute_extent_stats: need at least 2 '" + class_name +
                            "' records, got " + std::to_string(n));
  const Eigen::Vector3d mean = sum / n;
  const Eigen::Vector3d var = (sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0);
  const Eigen::Vector3d std = var.cwiseSqrt();
  if (std.minCoeff() <= 1e-12)
    throw std::domain_error("compute_extent_stats: degenerate stats (zero variance axis)");
  return ExtentStats(mean.x(), mean.y(), mean.z(), std.x(), std.y(), std.z());
}

inline std::string extent_stats_to_json(const ExtentStats& stats,
                                        const std::string& class_name) {
  nlohmann::json j;
  j["class"] = class_name;
  j["mean"] = {stats.mean_w, stats.mean_h, stats.mean_l};
  j["std"] = {stats.std_w, stats.std_h, stats.std_l};
  return j.dump(2);
}

inline ExtentStats extent_stats_from_json(const std::string& text,
                                          std::string* class_name = nullptr) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (class_name) *class_name = j.at("class").get<std::string>();
  const auto mean = j.at("mean");
  const auto std = j.at("std");
  return ExtentStats(mean.at(0), mean.at(1), mean.at(2), std.at(0), std.at(1), std.at(2));
}

// ------------------------------------------------------------------------

inline std::vector<std::string> parse_split(const std::string& text) {
  std::vector<std::string> ids;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    ids.push_back(line.substr(first, last - first + 1));
  }
  return ids;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

struct FrameData {
  std::string id;
  std::vector<DetectionRecord> labels;
  FrameCalibration calib;
};

// Layout: <root>/label_2/<id>.txt, <root>/calib/<id>.txt,
// <root>/ImageSets/<split>.txt; predictions live in a flat directory.
inline std::vector<FrameData> load_dataset(const std::filesystem::path& root,
                                           const std::string& split) {
  const auto split_path = root / "ImageSets" / (split + ".txt");
  const std::vector<std::string> ids = parse_split(read_file(split_path));
  std::vector<FrameData> frames;
  frames.reserve(ids.size());
  for (const auto& id : ids) {
    FrameData f;
    f.id = id;
    f.labels = parse_label_file(read_file(root / "label_2" / (id + ".txt")));
    f.calib = parse_calibration(read_file(root / "calib" / (id + ".txt")));
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace roi10d
