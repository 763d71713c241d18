#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "roi10d/kitti.hpp"
#include "roi10d/lifting.hpp"
#include "roi10d/rect.hpp"

namespace roi10d {

inline double iou_2d(const Rect2D& a, const Rect2D& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Ground-plane footprint: (x, z) center, (w, l) size, yaw about camera y.
struct RotatedRect {
  Eigen::Vector2d center{0.0, 0.0};
  double w = 0.0, l = 0.0;
  double yaw = 0.0;

  double area() const { return w * l; }

  // counter-clockwise in the (x, z) plane
  std::vector<Eigen::Vector2d> corners() const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const auto rot = [&](double x, double z) -> Eigen::Vector2d {
      return center + Eigen::Vector2d(c * x + s * z, -s * x + c * z);
    };
    return {rot(w / 2, l / 2), rot(-w / 2, l / 2), rot(-w / 2, -l / 2), rot(w / 2, -l / 2)};
  }

  static RotatedRect from_record(const DetectionRecord& r) {
    return RotatedRect{{r.location.x(), r.location.z()}, r.w, r.l, r.rotation_y};
  }
};

namespace detail {

inline double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  double s = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    s += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(s);
}

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Sutherland-Hodgman: clip `subject` against convex CCW polygon `clip`.
inline std::vector<Eigen::Vector2d> clip_polygon(std::vector<Eigen::Vector2d> subject,
                                                 const std::vector<Eigen::Vector2d>& clip) {
  for (size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Eigen::Vector2d a = clip[e];
    const Eigen::Vector2d b = clip[(e + 1) % clip.size()];
    const Eigen::Vector2d dir = b - a;
    std::vector<Eigen::Vector2d> out;
    out.reserve(subject.size() + 2);
    for (size_t i = 0; i < subject.size(); ++i) {
      const Eigen::Vector2d p = subject[i];
      const Eigen::Vector2d q = subject[(i + 1) % subject.size()];
      const double dp = cross2(dir, p - a);
      const double dq = cross2(dir, q - a);
      if (dp >= 0.0) out.push_back(p);
      if ((dp >= 0.0) != (dq >= 0.0)) out.push_back(p + (q - p) * (dp / (dp - dq)));
    }
    subject = std::move(out);
  }
  return subject;
}

// monotone chain, returns CCW hull
inline std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return a == b; }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = pts.size() - 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace detail

inline double polygon_intersection_area(const std::vector<Eigen::Vector2d>& a,
                                        const std::vector<Eigen::Vector2d>& b) {
  if (a.size() < 3 || b.size() < 3) return 0.0;
  const auto inter = detail::clip_polygon(a, b);
  return inter.size() < 3 ? 0.0 : detail::polygon_area(inter);
}

inline double iou_bev(const RotatedRect& a, const RotatedRect& b) {
  if (a.w <= 0.0 || a.l <= 0.0 || b.w <= 0.0 || b.l <= 0.0)
    throw std::domain_error("iou_bev: non-positive rect size");
  const double inter = polygon_intersection_area(a.corners(), b.corners());
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

// Footprint of a general box: convex hull of the corners dropped onto (x, z).
inline std::vector<Eigen::Vector2d> bev_footprint(const Box3D& box) {
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(8);
  for (const auto& c : box.corners) pts.emplace_back(c.x(), c.z());
  return detail::convex_hull(std::move(pts));
}

inline double iou_bev(const Box3D& a, const Box3D& b) {
  const auto fa = bev_footprint(a);
  const auto fb = bev_footprint(b);
  const double area_a = detail::polygon_area(fa);
  const double area_b = detail::polygon_area(fb);
  const double inter = polygon_intersection_area(fa, fb);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

namespace detail {

struct YawBox {
  RotatedRect footprint;
  double y_lo = 0.0, y_hi = 0.0;
};

inline YawBox to_yaw_box(const Box3D& box, double tol = 1e-6) {
  const BoxPose pose = box.recover_pose();
  const Eigen::Matrix3d R = pose.rotation.matrix();
  if (std::abs(R(1, 0)) > tol || std::abs(R(1, 2)) > tol || std::abs(R(0, 1)) > tol ||
      std::abs(R(2, 1)) > tol || R(1, 1) < 0.0)
    throw std::domain_error("iou_3d: box is not gravity aligned (yaw-only rotation required)");
  YawBox y;
  y.footprint = RotatedRect{{pose.center.x(), pose.center.z()},
                            pose.extents.x(),
                            pose.extents.z(),
                            std::atan2(R(0, 2), R(2, 2))};
  y.y_lo = pose.center.y() - pose.extents.y() / 2;
  y.y_hi = pose.center.y() + pose.extents.y() / 2;
  return y;
}

}  // namespace detail

inline double iou_3d(const Box3D& a, const Box3D& b) {
  const detail::YawBox ya = detail::to_yaw_box(a);
  const detail::YawBox yb = detail::to_yaw_box(b);
  const double foot = polygon_intersection_area(ya.footprint.corners(), yb.footprint.corners());
  const double dy = std::max(0.0, std::min(ya.y_hi, yb.y_hi) - std::max(ya.y_lo, yb.y_lo));
  const double inter = foot * dy;
  const double vol_a = ya.footprint.area() * (ya.y_hi - ya.y_lo);
  const double vol_b = yb.footprint.area() * (yb.y_hi - yb.y_lo);
  const double uni = vol_a + vol_b - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

// ------------------------------------------------------------------------
// Non-maximum suppression
// ------------------------------------------------------------------------

enum class NmsMode { kIou2D, kBev };

inline std::vector<DetectionRecord> nms(const std::vector<DetectionRecord>& dets, NmsMode mode,
                                        double threshold) {
  for (const auto& d : dets)
    if (!d.score) throw std::domain_error("nms: detection without score");

  std::vector<size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (*dets[a].score != *dets[b].score) return *dets[a].score > *dets[b].score;
    return a < b;
  });

  const auto overlap = [&](const DetectionRecord& a, const DetectionRecord& b) {
    return mode == NmsMode::kIou2D
               ? iou_2d(a.bbox2d, b.bbox2d)
               : iou_bev(RotatedRect::from_record(a), RotatedRect::from_record(b));
  };

  std::vector<size_t> kept_idx;
  for (const size_t i : order) {
    bool suppressed = false;
    for (const size_t k : kept_idx) {
      if (overlap(dets[i], dets[k]) > threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept_idx.push_back(i);
  }
  std::sort(kept_idx.begin(), kept_idx.end());

  std::vector<DetectionRecord> kept;
  kept.reserve(kept_idx.size());
  for (const size_t i : kept_idx) kept.push_back(dets[i]);
  return kept;
}

// ------------------------------------------------------------------------
// Average precision
// ------------------------------------------------------------------------

enum class Metric { k2D, kBev, k3D };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::k2D: return "2d";
    case Metric::kBev: return "bev";
    default: return "3d";
  }
}

struct EvalFrame {
  std::vector<DetectionRecord> gts;
  std::vector<DetectionRecord> preds;
};

struct PrCurve {
  std::vector<std::pair<double, double>> samples;  // (recall, precision)
  std::optional<double> ap;                        // empty when no ground truth
  int gt_count = 0;
  int ap_points = 11;
};

namespace detail {

inline double record_overlap(Metric metric, const DetectionRecord& pred,
                             const DetectionRecord& gt) {
  switch (metric) {
    case Metric::k2D:
      return iou_2d(pred.bbox2d, gt.bbox2d);
    case Metric::kBev:
      return iou_bev(RotatedRect::from_record(pred), RotatedRect::from_record(gt));
    default:
      return iou_3d(record_to_box3d(pred), record_to_box3d(gt));
  }
}

// interpolated precision: max precision among samples with recall >= r
inline double interpolated_precision(const std::vector<std::pair<double, double>>& samples,
                                     double r) {
  double best = 0.0;
  for (const auto& [recall, precision] : samples)
    if (recall >= r - 1e-12) best = std::max(best, precision);
  return best;
}

}  // namespace detail

inline double ap_from_samples(const std::vector<std::pair<double, double>>& samples,
                              int points) {
  double sum = 0.0;
  if (points == 11) {
    for (int i = 0; i <= 10; ++i) sum += detail::interpolated_precision(samples, i / 10.0);
    return sum / 11.0;
  }
  for (int i = 1; i <= points; ++i)
    sum += detail::interpolated_precision(samples, static_cast<double>(i) / points);
  return sum / points;
}

// Greedy per-frame matching, global score ordering, devkit-style ignore
// semantics: ground truth harder than the target difficulty is an ignore
// region, as are DontCare boxes (tested against the prediction's 2D bbox by
// intersection-over-prediction-area at the same threshold).
inline PrCurve average_precision(const std::vector<EvalFrame>& frames, Metric metric,
                                 Difficulty difficulty, double iou_threshold,
                                 int ap_points = 11, const std::string& class_name = "Car") {
  struct Pred {
    double score;
    size_t frame;
    size_t index;
  };
  std::vector<Pred> preds;
  PrCurve curve;
  curve.ap_points = ap_points;

  std::vector<std::vector<int>> gt_state(frames.size());  // 0 relevant, 1 ignored, 2 dontcare, 3 other
  for (size_t f = 0; f < frames.size(); ++f) {
    gt_state[f].resize(frames[f].gts.size(), 3);
    for (size_t g = 0; g < frames[f].gts.size(); ++g) {
      const auto& gt = frames[f].gts[g];
      if (gt.is_dont_care()) {
        gt_state[f][g] = 2;
      } else if (gt.class_name == class_name) {
        const Difficulty d = classify_difficulty(gt);
        const bool relevant =
            d != Difficulty::kIgnored && static_cast<int>(d) <= static_cast<int>(difficulty);
        gt_state[f][g] = relevant ? 0 : 1;
        if (relevant) ++curve.gt_count;
      }
    }
    for (size_t p = 0; p < frames[f].preds.size(); ++p) {
      const auto& pred = frames[f].preds[p];
      if (pred.class_name != class_name) continue;
      if (!pred.score) throw std::domain_error("average_precision: prediction without score");
      preds.push_back({*pred.score, f, p});
    }
  }

  if (curve.gt_count == 0) return curve;  // AP not available

  std::sort(preds.begin(), preds.end(), [](const Pred& a, const Pred& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.index < b.index;
  });

  std::vector<std::vector<bool>> matched(frames.size());
  for (size_t f = 0; f < frames.size(); ++f) matched[f].resize(frames[f].gts.size(), false);

  int tp = 0, fp = 0;
  for (const auto& pr : preds) {
    const auto& pred = frames[pr.frame].preds[pr.index];
    int best_gt = -1;
    double best_overlap = iou_threshold;
    bool ignored = false;
    for (size_t g = 0; g < frames[pr.frame].gts.size(); ++g) {
      const int state = gt_state[pr.frame][g];
      if (state == 3 || matched[pr.frame][g]) continue;
      const auto& gt = frames[pr.frame].gts[g];
      if (state == 2) {
        // DontCare region: image-plane intersection over prediction area
        const double pa = pred.bbox2d.area();
        if (pa > 0.0 && intersection_area(pred.bbox2d, gt.bbox2d) / pa >= iou_threshold)
          ignored = true;
        continue;
      }
      const double ov = detail::record_overlap(metric, pred, gt);
      if (ov < iou_threshold) continue;
      if (state == 1) {
        ignored = true;
      } else if (best_gt < 0 || ov > best_overlap) {
        best_gt = static_cast<int>(g);
        best_overlap = ov;
      }
    }
    if (best_gt >= 0) {
      matched[pr.frame][best_gt] = true;
      ++tp;
      curve.samples.emplace_back(static_cast<double>(tp) / curve.gt_count,
                                 static_cast<double>(tp) / (tp + fp));
    } else if (!ignored) {
      ++fp;
      curve.samples.emplace_back(static_cast<double>(tp) / curve.gt_count,
                                 static_cast<double>(tp) / (tp + fp));
    }
  }

  curve.ap = ap_from_samples(curve.samples, ap_points);
  return curve;
}

// ------------------------------------------------------------------------
// Binned recall
// ------------------------------------------------------------------------

enum class BinKind { kDepth, kAzimuth };

struct BinnedRecall {
  BinKind kind = BinKind::kDepth;
  std::vector<double> edges;                  // n + 1, strictly increasing
  std::vector<int> counts;                    // ground truth per bin
  std::vector<int> matched;                   // matched ground truth per bin
  std::vector<std::optional<double>> recall;  // empty for empty bins

  std::string to_csv() const {
    std::ostringstream os;
    os << "bin_lo,bin_hi,gt_count,matched,recall\n";
    for (size_t i = 0; i < counts.size(); ++i) {
      os << edges[i] << ',' << edges[i + 1] << ',' << counts[i] << ',' << matched[i] << ',';
      if (recall[i]) os << *recall[i];
      else os << "na";
      os << '\n';
    }
    return os.str();
  }
};

// A ground truth counts as recalled when any same-class prediction overlaps it
// with BEV IoU >= accept_iou. Depth bins use the camera-frame z of the box
// center; azimuth bins use rotation_y (0 faces camera right).
inline BinnedRecall binned_recall(const std::vector<EvalFrame>& frames, BinKind kind,
                                  const std::vector<double>& edges, double accept_iou = 0.5,
                                  Difficulty difficulty = Difficulty::kHard,
                                  const std::string& class_name = "Car") {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw std::domain_error("binned_recall: bin edges must be strictly increasing");

  BinnedRecall out;
  out.kind = kind;
  out.edges = edges;
  const size_t n = edges.size() - 1;
  out.counts.assign(n, 0);
  out.matched.assign(n, 0);
  out.recall.assign(n, std::nullopt);

  for (const auto& frame : frames) {
    for (const auto& gt : frame.gts) {
      if (gt.class_name != class_name) continue;
      const Difficulty d = classify_difficulty(gt);
      if (d == Difficulty::kIgnored || static_cast<int>(d) > static_cast<int>(difficulty))
        continue;
      const double value = kind == BinKind::kDepth ? gt.location.z() : gt.rotation_y;
      const auto it = std::upper_bound(edges.begin(), edges.end(), value);
      if (it == edges.begin() || it == edges.end()) continue;  // outside binned range
      const size_t bin = static_cast<size_t>(it - edges.begin()) - 1;
      ++out.counts[bin];

      const RotatedRect gt_rect = RotatedRect::from_record(gt);
      for (const auto& pred : frame.preds) {
        if (pred.class_name != class_name) continue;
        if (iou_bev(RotatedRect::from_record(pred), gt_rect) >= accept_iou) {
          ++out.matched[bin];
          break;
        }
      }
    }
  }
  for (size_t i = 0; i < n; ++i)
    if (out.counts[i] > 0)
      out.recall[i] = static_cast<double>(out.matched[i]) / out.counts[i];
  return out;
}

inline std::vector<double> uniform_edges(double lo, double hi, double width) {
  if (width <= 0.0 || hi <= lo) throw std::domain_error("uniform_edges: bad bin spec");
  std::vector<double> edges;
  for (double e = lo; e < hi - 1e-9; e += width) edges.push_back(e);
  edges.push_back(hi);
  return edges;
}

// ------------------------------------------------------------------------
// Evaluation report
// ------------------------------------------------------------------------

struct EvalReport {
  struct Row {
    Metric metric;
    Difficulty difficulty;
    PrCurve curve;
  };
  std::vector<Row> rows;

  std::string to_csv() const {
    std::ostringstream os;
    os << "metric,difficulty,ap,gt_count\n";
    for (const auto& r : rows) {
      os << to_string(r.metric) << ',' << to_string(r.difficulty) << ',';
      if (r.curve.ap) os << *r.curve.ap;
      else os << "na";
      os << ',' << r.curve.gt_count << '\n';
    }
    return os.str();
  }

  std::string to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json row;
      row["metric"] = to_string(r.metric);
      row["difficulty"] = to_string(r.difficulty);
      row["ap"] = r.curve.ap ? nlohmann::json(*r.curve.ap) : nlohmann::json();
      row["gt_count"] = r.curve.gt_count;
      row["ap_points"] = r.curve.ap_points;
      nlohmann::json pr = nlohmann::json::array();
      for (const auto& [recall, precision] : r.curve.samples)
        pr.push_back({{"recall", recall}, {"precision", precision}});
      row["pr"] = std::move(pr);
      j.push_back(std::move(row));
    }
    return j.dump(2);
  }
};

inline EvalReport evaluate_all(const std::vector<EvalFrame>& frames, double iou_threshold,
                               int ap_points = 11, const std::string& class_name = "Car") {
  EvalReport report;
  for (const Metric m : {Metric::k2D, Metric::kBev, Metric::k3D})
    for (const Difficulty d : {Difficulty::kEasy, Difficulty::kModerate, Difficulty::kHard})
      report.rows.push_back(
          {m, d, average_precision(frames, m, d, iou_threshold, ap_points, class_name)});
  return report;
}

}  // namespace roi10d
