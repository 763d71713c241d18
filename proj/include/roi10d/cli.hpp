#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "roi10d/augmentation.hpp"
#include "roi10d/camera.hpp"
#include "roi10d/image.hpp"
#include "roi10d/kitti.hpp"
#include "roi10d/lifting.hpp"
#include "roi10d/lifting_loss.hpp"
#include "roi10d/marching_cubes.hpp"
#include "roi10d/mesh.hpp"
#include "roi10d/mesh_sdf.hpp"
#include "roi10d/metrics.hpp"
#include "roi10d/quaternion.hpp"
#include "roi10d/random.hpp"
#include "roi10d/shape_space.hpp"
#include "roi10d/svg.hpp"
#include "roi10d/texturing.hpp"

// Subcommand drivers behind the roi10d tool. Each cmd_* function does the
// work of one subcommand from a filled-in RunConfig and returns a summary
// struct, so the drivers are directly testable and main() stays a thin
// argument-parsing shell around them.

namespace roi10d::cli {

// bad flag values / unusable configuration
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// missing or malformed inputs on disk
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// a computation failed to produce a usable result
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

struct RunConfig {
  std::string data_root;
  std::string split = "val";
  std::string predictions;
  std::string out = "roi10d_out";
  std::string class_name = "Car";

  double nms2d = 0.65;
  double nms_bev = 0.05;
  double iou = 0.7;
  int ap_points = 11;

  double depth_bin_m = 5.0;
  double depth_max_m = 70.0;
  double azimuth_bin_deg = 20.0;
  double recall_iou = 0.5;

  std::uint64_t seed = 0;
  int workers = 1;

  // optimize-demo
  std::string label_file;
  std::string calib_file;
  int num_seeds = 25;
  double image_w = 1242.0;
  double image_h = 375.0;

  // shape
  std::string codebook_dir;
  std::string shape_class;              // empty runs every tag in the codebook
  std::vector<std::string> slerp_ids;   // empty or exactly two entry ids

  // augment / demo-data
  std::string mesh_bank_dir;
  int k_max = 3;
  int demo_frames = 6;

  void validate() const {
    const auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in01(nms2d) || !in01(nms_bev))
      throw ConfigError("nms thresholds must lie in [0, 1]");
    if (iou <= 0.0 || iou > 1.0) throw ConfigError("iou threshold must lie in (0, 1]");
    if (recall_iou <= 0.0 || recall_iou > 1.0)
      throw ConfigError("recall iou threshold must lie in (0, 1]");
    if (ap_points != 11 && ap_points != 40) throw ConfigError("ap-points must be 11 or 40");
    if (depth_bin_m <= 0.0) throw ConfigError("depth bin width must be positive");
    if (depth_max_m <= depth_bin_m)
      throw ConfigError("depth range must exceed one bin width");
    if (azimuth_bin_deg <= 0.0 || azimuth_bin_deg > 360.0)
      throw ConfigError("azimuth bin width must lie in (0, 360] degrees");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (num_seeds < 1) throw ConfigError("num-seeds must be at least 1");
    if (image_w <= 0.0 || image_h <= 0.0) throw ConfigError("image size must be positive");
    if (k_max < 0) throw ConfigError("k-max must be non-negative");
    if (demo_frames < 1) throw ConfigError("frames must be at least 1");
    if (!slerp_ids.empty() && slerp_ids.size() != 2)
      throw ConfigError("--slerp takes exactly two codebook ids");
    if (class_name.empty()) throw ConfigError("class name must not be empty");
    if (out.empty()) throw ConfigError("output directory must not be empty");
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"data_root", data_root},
                          {"split", split},
                          {"predictions", predictions},
                          {"out", out},
                          {"class_name", class_name},
                          {"nms2d", nms2d},
                          {"nms_bev", nms_bev},
                          {"iou", iou},
                          {"ap_points", ap_points},
                          {"depth_bin_m", depth_bin_m},
                          {"depth_max_m", depth_max_m},
                          {"azimuth_bin_deg", azimuth_bin_deg},
                          {"recall_iou", recall_iou},
                          {"seed", seed},
                          {"workers", workers},
                          {"label_file", label_file},
                          {"calib_file", calib_file},
                          {"num_seeds", num_seeds},
                          {"image_w", image_w},
                          {"image_h", image_h},
                          {"codebook_dir", codebook_dir},
                          {"shape_class", shape_class},
                          {"slerp_ids", slerp_ids},
                          {"mesh_bank_dir", mesh_bank_dir},
                          {"k_max", k_max},
                          {"demo_frames", demo_frames}};
  }
};

namespace detail {

// Runs fn(0..n-1) on up to `workers` threads. Results must be written to
// per-index slots; the first exception is rethrown after all threads join.
template <typename Fn>
inline void parallel_frames(std::size_t n, int workers, Fn&& fn) {
  const int use = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (use == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(use);
  std::vector<std::thread> pool;
  pool.reserve(use);
  for (int t = 0; t < use; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Keeps at most `max_points` samples of a curve, always including the ends.
inline void thin_curve(const std::vector<double>& xs, const std::vector<double>& ys,
                       std::size_t max_points, std::vector<double>& out_x,
                       std::vector<double>& out_y) {
  out_x.clear();
  out_y.clear();
  if (xs.empty()) return;
  const std::size_t stride = std::max<std::size_t>(1, xs.size() / max_points);
  for (std::size_t i = 0; i < xs.size(); i += stride) {
    out_x.push_back(xs[i]);
    out_y.push_back(ys[i]);
  }
  if (out_x.back() != xs.back()) {
    out_x.push_back(xs.back());
    out_y.push_back(ys.back());
  }
}

// Class-aware two-stage suppression: image-plane boxes first, then the
// rotated footprints, within each class independently.
inline std::vector<DetectionRecord> suppress(std::vector<DetectionRecord> preds, double nms2d,
                                             double nms_bev) {
  std::map<std::string, std::vector<DetectionRecord>> by_class;
  for (auto& r : preds) by_class[r.class_name].push_back(std::move(r));
  std::vector<DetectionRecord> out;
  for (auto& [name, group] : by_class) {
    (void)name;
    auto kept = nms(group, NmsMode::kIou2D, nms2d);
    kept = nms(kept, NmsMode::kBev, nms_bev);
    for (auto& r : kept) out.push_back(std::move(r));
  }
  return out;
}

struct LoadedFrames {
  std::vector<std::string> ids;
  std::vector<EvalFrame> frames;
  std::vector<std::string> missing;  // ids without a prediction file
};

// Ground truth is mandatory per frame; a missing prediction file counts as
// zero detections and is reported, not an error.
inline LoadedFrames load_eval_frames(const RunConfig& config) {
  namespace fs = std::filesystem;
  const fs::path root = config.data_root;
  const fs::path split_file = root / "ImageSets" / (config.split + ".txt");
  if (!fs::exists(split_file))
    throw DataError("split file not found: " + split_file.string());
  const fs::path preds_dir = config.predictions;
  if (!fs::is_directory(preds_dir))
    throw DataError("prediction directory not found: " + preds_dir.string());

  LoadedFrames out;
  out.ids = parse_split(read_file(split_file));
  if (out.ids.empty()) throw DataError("split is empty: " + split_file.string());
  out.frames.resize(out.ids.size());
  std::vector<char> miss(out.ids.size(), 0);

  parallel_frames(out.ids.size(), config.workers, [&](std::size_t i) {
    const fs::path label = root / "label_2" / (out.ids[i] + ".txt");
    if (!fs::exists(label)) throw DataError("label file not found: " + label.string());
    out.frames[i].gts = parse_label_file(read_file(label));

    const fs::path pred = preds_dir / (out.ids[i] + ".txt");
    if (!fs::exists(pred)) {
      miss[i] = 1;
      return;
    }
    auto preds = parse_label_file(read_file(pred));
    for (const auto& p : preds)
      if (!p.score) throw DataError("prediction without a score in " + pred.string());
    out.frames[i].preds = suppress(std::move(preds), config.nms2d, config.nms_bev);
  });

  for (std::size_t i = 0; i < out.ids.size(); ++i)
    if (miss[i]) out.missing.push_back(out.ids[i]);
  return out;
}

inline std::string ap_cell(const std::optional<double>& ap) {
  if (!ap) return "na";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *ap);
  return buf;
}

}  // namespace detail

// ------------------------------------------------------------------------
// evaluate

struct EvaluateOutputs {
  std::vector<std::string> missing_frames;
  std::vector<std::pair<double, EvalReport>> reports;  // one per iou threshold
  std::filesystem::path json_path;
  std::filesystem::path csv_path;
  std::vector<std::filesystem::path> svg_paths;
};

inline EvaluateOutputs cmd_evaluate(const RunConfig& config) {
  namespace fs = std::filesystem;
  config.validate();
  const auto loaded = detail::load_eval_frames(config);
  fs::create_directories(config.out);

  std::vector<double> thresholds{0.5};
  if (std::abs(config.iou - 0.5) > 1e-12) thresholds.push_back(config.iou);

  EvaluateOutputs out;
  out.missing_frames = loaded.missing;
  for (double t : thresholds)
    out.reports.emplace_back(
        t, evaluate_all(loaded.frames, t, config.ap_points, config.class_name));

  std::ostringstream csv;
  csv << "iou,metric,difficulty,ap,gt_count\n";
  for (const auto& [t, report] : out.reports)
    for (const auto& row : report.rows)
      csv << t << ',' << to_string(row.metric) << ',' << to_string(row.difficulty) << ','
          << detail::ap_cell(row.curve.ap) << ',' << row.curve.gt_count << '\n';
  out.csv_path = fs::path(config.out) / "evaluation.csv";
  write_file(out.csv_path, csv.str());

  nlohmann::json j;
  j["command"] = "evaluate";
  j["config"] = config.to_json();
  j["missing_frames"] = loaded.missing;
  j["frame_count"] = loaded.frames.size();
  j["results"] = nlohmann::json::array();
  for (const auto& [t, report] : out.reports)
    j["results"].push_back({{"iou", t}, {"report", nlohmann::json::parse(report.to_json())}});
  out.json_path = fs::path(config.out) / "evaluation.json";
  write_file(out.json_path, j.dump(2) + "\n");

  const Metric metrics[] = {Metric::k2D, Metric::kBev, Metric::k3D};
  for (const auto& [t, report] : out.reports) {
    for (Metric m : metrics) {
      char title[96];
      std::snprintf(title, sizeof(title), "precision-recall, %s, iou >= %.2f", to_string(m), t);
      SvgPlot plot(title, "recall", "precision");
      plot.set_y_range(0.0, 1.05);
      for (const auto& row : report.rows) {
        if (row.metric != m) continue;
        std::vector<double> xs, ys;
        for (const auto& [recall, precision] : row.curve.samples) {
          xs.push_back(recall);
          ys.push_back(precision);
        }
        plot.add_series(to_string(row.difficulty), xs, ys);
      }
      char name[64];
      std::snprintf(name, sizeof(name), "pr_iou%02d_%s.svg",
                    static_cast<int>(std::lround(t * 100.0)), to_string(m));
      const fs::path path = fs::path(config.out) / name;
      plot.write(path.string());
      out.svg_paths.push_back(path);
    }
  }
  return out;
}

// ------------------------------------------------------------------------
// recall-bins

struct RecallBinsOutputs {
  BinnedRecall depth;
  BinnedRecall azimuth;
  std::vector<std::string> missing_frames;
  std::filesystem::path depth_csv;
  std::filesystem::path azimuth_csv;
  std::filesystem::path depth_svg;
  std::filesystem::path azimuth_svg;
};

namespace detail {

inline void write_recall_svg(const BinnedRecall& binned, const std::string& title,
                             const std::string& x_label, double x_scale,
                             const std::filesystem::path& path) {
  SvgPlot plot(title, x_label, "recall / share");
  plot.set_y_range(0.0, 1.05);
  const std::size_t n = binned.counts.size();
  std::vector<double> centers(n), recall(n), share(n);
  int max_count = 1;
  for (int c : binned.counts) max_count = std::max(max_count, c);
  for (std::size_t i = 0; i < n; ++i) {
    centers[i] = x_scale * 0.5 * (binned.edges[i] + binned.edges[i + 1]);
    recall[i] = binned.recall[i] ? *binned.recall[i]
                                 : std::numeric_limits<double>::quiet_NaN();
    share[i] = static_cast<double>(binned.counts[i]) / max_count;
  }
  plot.add_series("recall", centers, recall);
  plot.add_series("gt share", centers, share);
  plot.write(path.string());
}

}  // namespace detail

inline RecallBinsOutputs cmd_recall_bins(const RunConfig& config) {
  namespace fs = std::filesystem;
  config.validate();
  const auto loaded = detail::load_eval_frames(config);
  fs::create_directories(config.out);

  RecallBinsOutputs out;
  out.missing_frames = loaded.missing;

  const auto depth_edges = uniform_edges(0.0, config.depth_max_m, config.depth_bin_m);
  out.depth = binned_recall(loaded.frames, BinKind::kDepth, depth_edges, config.recall_iou,
                            Difficulty::kHard, config.class_name);

  const double bin_rad = config.azimuth_bin_deg * M_PI / 180.0;
  const auto azimuth_edges = uniform_edges(-M_PI, M_PI, bin_rad);
  out.azimuth = binned_recall(loaded.frames, BinKind::kAzimuth, azimuth_edges,
                              config.recall_iou, Difficulty::kHard, config.class_name);

  out.depth_csv = fs::path(config.out) / "recall_by_depth.csv";
  write_file(out.depth_csv, out.depth.to_csv());

  // orientation bins are computed in radians; the csv reports degrees
  std::ostringstream az;
  az << "bin_lo_deg,bin_hi_deg,gt_count,matched,recall\n";
  const double deg = 180.0 / M_PI;
  for (std::size_t i = 0; i < out.azimuth.counts.size(); ++i) {
    az << deg * out.azimuth.edges[i] << ',' << deg * out.azimuth.edges[i + 1] << ','
       << out.azimuth.counts[i] << ',' << out.azimuth.matched[i] << ',';
    if (out.azimuth.recall[i]) az << *out.azimuth.recall[i];
    else az << "na";
    az << '\n';
  }
  out.azimuth_csv = fs::path(config.out) / "recall_by_azimuth.csv";
  write_file(out.azimuth_csv, az.str());

  out.depth_svg = fs::path(config.out) / "recall_by_depth.svg";
  detail::write_recall_svg(out.depth, "recall by ground-truth depth", "depth (m)", 1.0,
                           out.depth_svg);
  out.azimuth_svg = fs::path(config.out) / "recall_by_azimuth.svg";
  detail::write_recall_svg(out.azimuth, "recall by ground-truth yaw", "yaw (deg)", deg,
                           out.azimuth_svg);

  nlohmann::json j;
  j["command"] = "recall-bins";
  j["config"] = config.to_json();
  j["missing_frames"] = loaded.missing;
  write_file(fs::path(config.out) / "recall_bins.json", j.dump(2) + "\n");
  return out;
}

// ------------------------------------------------------------------------
// optimize-demo

struct OptimizeDemoOutputs {
  std::vector<OptimTrace> traces;
  int converged = 0;
  std::filesystem::path summary_csv;
  std::filesystem::path loss_svg;
  std::filesystem::path gradient_svg;
  std::vector<std::filesystem::path> trace_csvs;
};

inline OptimizeDemoOutputs cmd_optimize_demo(const RunConfig& config) {
  namespace fs = std::filesystem;
  config.validate();
  if (config.label_file.empty()) throw ConfigError("--label-file is required");
  if (config.calib_file.empty()) throw ConfigError("--calib is required");
  if (!fs::exists(config.label_file))
    throw DataError("label file not found: " + config.label_file);
  if (!fs::exists(config.calib_file))
    throw DataError("calibration file not found: " + config.calib_file);

  const auto records = parse_label_file(read_file(config.label_file));
  const DetectionRecord* target_record = nullptr;
  for (const auto& r : records)
    if (!r.is_dont_care() && r.h > 0.0 && r.w > 0.0 && r.l > 0.0) {
      target_record = &r;
      break;
    }
  if (!target_record) throw DataError("label file has no usable object");

  const CameraIntrinsics K = parse_calibration(read_file(config.calib_file)).intrinsics();

  // Extent statistics from the dataset when one is given, otherwise a
  // nominal spread centered on the target itself.
  ExtentStats stats;
  if (!config.data_root.empty()) {
    const auto dataset = load_dataset(config.data_root, config.split);
    std::vector<DetectionRecord> all;
    for (const auto& frame : dataset)
      for (const auto& r : frame.labels) all.push_back(r);
    try {
      stats = compute_extent_stats(all, config.class_name);
    } catch (const std::domain_error& e) {
      throw DataError(std::string("extent statistics: ") + e.what());
    }
  } else {
    stats = ExtentStats(target_record->w, target_record->h, target_record->l, 0.1, 0.1, 0.2);
  }

  const Box3D target = record_to_box3d(*target_record);
  const BoxPose target_pose = target.recover_pose();
  const Rect2D roi =
      project_box(target, K).intersect(Rect2D{0.0, 0.0, config.image_w, config.image_h});
  if (!roi.valid()) throw DataError("target box projects outside the image");

  LiftParams truth;
  const Eigen::Vector2d uv = K.project(target_pose.center);
  truth.u = uv.x();
  truth.v = uv.y();
  truth.z = target_pose.center.z();
  truth.q_allo = ego_to_allo(target_pose.rotation, target_pose.center.normalized());
  truth.extent_dev = stats.deviation_of(target_pose.extents);

  fs::create_directories(config.out);
  OptimizeDemoOutputs out;
  OptimizerConfig opt_config;

  std::ostringstream summary;
  summary << "seed,final_loss,diverged,converged\n";
  for (int i = 0; i < config.num_seeds; ++i) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(i)));
    LiftParams init = truth;
    const double angle = rng.uniform(-20.0, 20.0) * M_PI / 180.0;
    init.q_allo =
        (Quaternion::from_axis_angle(rng.unit_vector3(), angle) * truth.q_allo).normalized();
    init.u += rng.uniform(-0.3, 0.3) * roi.width();
    init.v += rng.uniform(-0.3, 0.3) * roi.height();
    init.z *= rng.uniform(0.7, 1.3);

    OptimTrace trace = optimize_instance(init, target, stats, K, roi, opt_config);
    const bool converged = !trace.diverged && trace.final_loss() < 1e-3;
    if (converged) ++out.converged;
    summary << i << ',' << trace.final_loss() << ',' << (trace.diverged ? 1 : 0) << ','
            << (converged ? 1 : 0) << '\n';

    std::ostringstream body;
    trace.to_csv(body);
    const fs::path trace_path = fs::path(config.out) / ("trace_seed" + std::to_string(i) + ".csv");
    write_file(trace_path, body.str());
    out.trace_csvs.push_back(trace_path);
    out.traces.push_back(std::move(trace));
  }
  out.summary_csv = fs::path(config.out) / "summary.csv";
  write_file(out.summary_csv, summary.str());

  SvgPlot loss_plot("objective per iteration", "iteration", "corner loss");
  loss_plot.set_log_y(true);
  for (int i = 0; i < static_cast<int>(out.traces.size()); ++i) {
    std::vector<double> xs, ys;
    for (const auto& r : out.traces[i].records) {
      xs.push_back(r.iter);
      ys.push_back(r.loss);
    }
    std::vector<double> tx, ty;
    detail::thin_curve(xs, ys, 240, tx, ty);
    loss_plot.add_series("seed " + std::to_string(i), tx, ty);
  }
  out.loss_svg = fs::path(config.out) / "loss_curves.svg";
  loss_plot.write(out.loss_svg.string());

  SvgPlot grad_plot("gradient magnitudes, seed 0", "iteration", "magnitude");
  grad_plot.set_log_y(true);
  const char* grad_names[4] = {"rotation", "centroid", "depth", "extents"};
  for (int g = 0; g < 4; ++g) {
    std::vector<double> xs, ys;
    for (const auto& r : out.traces.front().records) {
      xs.push_back(r.iter);
      ys.push_back(r.grad_magnitudes[g]);
    }
    std::vector<double> tx, ty;
    detail::thin_curve(xs, ys, 240, tx, ty);
    grad_plot.add_series(grad_names[g], tx, ty);
  }
  out.gradient_svg = fs::path(config.out) / "gradient_magnitudes.svg";
  grad_plot.write(out.gradient_svg.string());

  nlohmann::json j;
  j["command"] = "optimize-demo";
  j["config"] = config.to_json();
  j["converged"] = out.converged;
  j["num_seeds"] = config.num_seeds;
  write_file(fs::path(config.out) / "optimize_demo.json", j.dump(2) + "\n");
  return out;
}

// ------------------------------------------------------------------------
// shape

struct ShapeOutputs {
  std::vector<std::pair<std::string, Eigen::VectorXd>> medians;  // tag, median latent
  std::vector<std::filesystem::path> median_meshes;
  std::vector<std::filesystem::path> strip_meshes;
  std::filesystem::path medians_json;
};

inline ShapeOutputs cmd_shape(const RunConfig& config) {
  namespace fs = std::filesystem;
  config.validate();
  if (config.codebook_dir.empty()) throw ConfigError("--codebook is required");
  if (!config.shape_class.empty()) {
    try {
      validate_class_tag(config.shape_class);
    } catch (const std::domain_error& e) {
      throw ConfigError(e.what());
    }
  }

  Codebook codebook;
  try {
    codebook = load_codebook(config.codebook_dir);
  } catch (const std::exception& e) {
    throw DataError(std::string("codebook: ") + e.what());
  }

  std::vector<std::string> tags;
  if (config.shape_class.empty()) {
    for (const auto& tag : codebook_class_tags())
      for (const auto& entry : codebook.entries)
        if (entry.class_tag == tag) {
          tags.push_back(tag);
          break;
        }
  } else {
    tags.push_back(config.shape_class);
  }

  fs::create_directories(config.out);
  ShapeOutputs out;
  nlohmann::json medians_json;
  medians_json["command"] = "shape";
  medians_json["config"] = config.to_json();
  medians_json["medians"] = nlohmann::json::object();

  for (const auto& tag : tags) {
    std::vector<Eigen::VectorXd> latents;
    std::string nearest_id;
    for (const auto& entry : codebook.entries)
      if (entry.class_tag == tag) latents.push_back(entry.latent);
    if (latents.empty()) throw DataError("codebook has no " + tag + " entries");

    const Eigen::VectorXd median = latent_median(latents);
    const CodebookEntry& nearest = codebook.nearest(median);
    const TriMesh mesh = marching_cubes(nearest.tsdf);
    const fs::path path = fs::path(config.out) / ("median_" + tag + ".ply");
    write_ply(mesh, path.string());
    out.median_meshes.push_back(path);
    out.medians.emplace_back(tag, median);

    nlohmann::json m;
    m["latent"] = std::vector<double>(median.data(), median.data() + median.size());
    m["nearest_id"] = nearest.id;
    m["objective"] = median_objective(latents, median);
    m["count"] = latents.size();
    medians_json["medians"][tag] = m;
  }

  if (config.slerp_ids.size() == 2) {
    const auto find = [&](const std::string& id) -> const CodebookEntry& {
      for (const auto& entry : codebook.entries)
        if (entry.id == id) return entry;
      throw DataError("codebook has no entry with id " + id);
    };
    const CodebookEntry& a = find(config.slerp_ids[0]);
    const CodebookEntry& b = find(config.slerp_ids[1]);
    const char* suffix[5] = {"t000", "t025", "t050", "t075", "t100"};
    for (int k = 0; k < 5; ++k) {
      const Eigen::VectorXd latent = slerp(a.latent, b.latent, 0.25 * k);
      const TriMesh mesh = marching_cubes(latent_to_tsdf(latent, codebook));
      const fs::path path = fs::path(config.out) /
                            ("slerp_" + a.id + "_" + b.id + "_" + suffix[k] + ".ply");
      write_ply(mesh, path.string());
      out.strip_meshes.push_back(path);
    }
  }

  out.medians_json = fs::path(config.out) / "medians.json";
  write_file(out.medians_json, medians_json.dump(2) + "\n");
  return out;
}

// ------------------------------------------------------------------------
// augment

struct AugmentOutputs {
  int frames_written = 0;
  int total_placements = 0;
  std::filesystem::path manifest_path;
};

inline AugmentOutputs cmd_augment(const RunConfig& config) {
  namespace fs = std::filesystem;
  config.validate();
  if (config.mesh_bank_dir.empty()) throw ConfigError("--mesh-bank is required");
  if (fs::weakly_canonical(fs::path(config.out)) ==
      fs::weakly_canonical(fs::path(config.data_root)))
    throw ConfigError("output directory must differ from the data root");

  MeshBank bank;
  try {
    bank = load_mesh_bank(config.mesh_bank_dir);
  } catch (const std::exception& e) {
    throw DataError(std::string("mesh bank: ") + e.what());
  }
  if (bank.entries.empty()) throw DataError("mesh bank is empty");

  const fs::path root = config.data_root;
  const fs::path split_file = root / "ImageSets" / (config.split + ".txt");
  if (!fs::exists(split_file))
    throw DataError("split file not found: " + split_file.string());
  const auto ids = parse_split(read_file(split_file));
  if (ids.empty()) throw DataError("split is empty: " + split_file.string());

  const fs::path out_root = config.out;
  fs::create_directories(out_root / "image_2");
  fs::create_directories(out_root / "label_2");

  AugmentOutputs out;
  out.manifest_path = out_root / "manifest.json";
  nlohmann::json manifest;
  manifest["command"] = "augment";
  manifest["config"] = config.to_json();
  manifest["seed"] = config.seed;
  manifest["aborted"] = false;
  nlohmann::json frames_json = nlohmann::json::array();

  // Frames are processed in split order; on any failure the manifest is
  // still written with what finished, flagged aborted.
  try {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::string& id = ids[i];
      const fs::path image_in = root / "image_2" / (id + ".png");
      const fs::path label_in = root / "label_2" / (id + ".txt");
      const fs::path calib_in = root / "calib" / (id + ".txt");
      const fs::path depth_in = root / "depth_2" / (id + ".bin");
      for (const fs::path* p : {&image_in, &label_in, &calib_in})
        if (!fs::exists(*p)) throw DataError("input not found: " + p->string());
      const bool has_depth = fs::exists(depth_in);

      nlohmann::json fj;
      fj["id"] = id;
      fj["placements"] = nlohmann::json::array();

      const fs::path image_out = out_root / "image_2" / (id + ".png");
      const fs::path label_out = out_root / "label_2" / (id + ".txt");
      const fs::path depth_out = out_root / "depth_2" / (id + ".bin");
      if (has_depth) fs::create_directories(out_root / "depth_2");

      if (config.k_max == 0) {
        fs::copy_file(image_in, image_out, fs::copy_options::overwrite_existing);
        fs::copy_file(label_in, label_out, fs::copy_options::overwrite_existing);
        if (has_depth)
          fs::copy_file(depth_in, depth_out, fs::copy_options::overwrite_existing);
      } else {
        SceneImage scene{read_png(image_in.string()),
                         has_depth ? std::optional<DepthMap>(read_depth_raster(depth_in.string()))
                                   : std::nullopt,
                         parse_calibration(read_file(calib_in)).intrinsics()};
        const auto labels = parse_label_file(read_file(label_in));
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(i)));
        const AugmentResult result = augment_frame(scene, labels, bank, config.k_max, rng);

        write_png(result.image.rgb, image_out.string());
        write_file(label_out, serialize_label_file(result.labels));
        if (result.image.depth) write_depth_raster(*result.image.depth, depth_out.string());
        for (const auto& p : result.placements) {
          fj["placements"].push_back({{"u", p.u},
                                      {"v", p.v},
                                      {"depth", p.depth_along_ray},
                                      {"yaw_perturbation", p.rotation_perturbation}});
          ++out.total_placements;
        }
      }
      frames_json.push_back(fj);
      ++out.frames_written;
    }
  } catch (...) {
    manifest["aborted"] = true;
    manifest["frames"] = frames_json;
    write_file(out.manifest_path, manifest.dump(2) + "\n");
    throw;
  }

  manifest["frames"] = frames_json;
  write_file(out.manifest_path, manifest.dump(2) + "\n");
  return out;
}

// ------------------------------------------------------------------------
// demo-data

struct DemoDataOutputs {
  std::filesystem::path root;
  std::vector<std::string> frame_ids;
  int total_objects = 0;
};

namespace detail {

inline std::string calibration_text(const CameraIntrinsics& K) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "P2: %.17g 0 %.17g 0 0 %.17g %.17g 0 0 0 1 0\n", K.fx, K.cx,
                K.fy, K.cy);
  return buf;
}

}  // namespace detail

// Writes a small self-contained dataset: composited frames with matching
// labels, calibration, depth, mock detections, a mesh bank and a codebook.
// Everything downstream (evaluate, recall-bins, augment, shape) runs on it.
inline DemoDataOutputs cmd_demo_data(const RunConfig& config) {
  namespace fs = std::filesystem;
  config.validate();
  const fs::path root = config.out;
  for (const char* d : {"image_2", "label_2", "calib", "depth_2", "preds", "ImageSets"})
    fs::create_directories(root / d);

  const int w = 384;
  const int h = 128;
  const CameraIntrinsics K{210.0, 210.0, 192.0, 64.0};

  struct TagSpec {
    const char* tag;
    Eigen::Vector3d extents;
  };
  const TagSpec specs[] = {{"SmallCar", {1.48, 1.40, 3.42}},
                           {"Car", {1.63, 1.53, 3.88}},
                           {"LargeCar", {1.76, 1.62, 4.36}},
                           {"SUV", {1.92, 1.78, 4.66}}};

  MeshBank bank;
  Codebook codebook;
  for (std::size_t t = 0; t < 4; ++t) {
    const Eigen::VectorXd base = Rng(mix_seed(config.seed, 500 + t)).unit_vector(6);
    Rng rng(mix_seed(config.seed, 4000 + t));
    // The tag's entries sit at 120 degree steps around the base direction, so
    // their geometric median is interior (a median at a data point makes the
    // fixed-point iteration sublinear).
    Eigen::VectorXd spread_u = rng.unit_vector(6);
    spread_u -= spread_u.dot(base) * base;
    spread_u.normalize();
    Eigen::VectorXd spread_w = rng.unit_vector(6);
    spread_w -= spread_w.dot(base) * base;
    spread_w -= spread_w.dot(spread_u) * spread_u;
    spread_w.normalize();
    for (int e = 0; e < 3; ++e) {
      const Eigen::Vector3d extents = (0.94 + 0.05 * e) * specs[t].extents;
      const std::string id = std::string(specs[t].tag) + "_" + std::to_string(e);
      TriMesh mesh = make_demo_car_mesh(extents, mix_seed(config.seed, 100 * t + e));
      if (e == 0) bank.entries.push_back({id, extents, specs[t].tag, mesh});

      CodebookEntry entry;
      entry.id = id;
      entry.class_tag = specs[t].tag;
      const double phi = 2.0 * M_PI * e / 3.0;
      entry.latent =
          (base + 0.22 * (std::cos(phi) * spread_u + std::sin(phi) * spread_w)).normalized();
      const double voxel =
          std::max({extents.x() / 8.0, extents.y() / 8.0, extents.z() / 16.0});
      entry.tsdf = mesh_to_tsdf(mesh, Eigen::Vector3i(18, 18, 26), voxel);
      codebook.entries.push_back(std::move(entry));
    }
  }
  write_mesh_bank(bank, (root / "mesh_bank").string());
  write_codebook(codebook, (root / "codebook").string());

  AugmentConfig acfg;
  acfg.placement.depth_min = 6.0;   // keeps projected boxes big enough to matter
  acfg.placement.depth_max = 16.0;

  DemoDataOutputs out;
  out.root = root;
  std::string split_text;
  for (int f = 0; f < config.demo_frames; ++f) {
    char id_buf[16];
    std::snprintf(id_buf, sizeof(id_buf), "%06d", f);
    const std::string id = id_buf;
    out.frame_ids.push_back(id);
    split_text += id + "\n";

    ImageU8 bg(w, h, Color3u(0, 0, 0));
    Rng noise(mix_seed(config.seed, 9000 + static_cast<std::uint64_t>(f)));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int base = 55 + (115 * y) / h + noise.uniform_int(-8, 8);
        const auto ch = [](int v) {
          return static_cast<unsigned char>(std::clamp(v, 0, 255));
        };
        bg.set(x, y, Color3u(ch(base), ch(base + 12), ch(base + 28)));
      }

    SceneImage scene{std::move(bg),
                     DepthMap(w, h, std::numeric_limits<float>::infinity()), K};
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(f)));
    const AugmentResult result = augment_frame(scene, {}, bank, 3, rng, acfg);
    out.total_objects += static_cast<int>(result.labels.size());

    write_png(result.image.rgb, (root / "image_2" / (id + ".png")).string());
    if (result.image.depth)
      write_depth_raster(*result.image.depth, (root / "depth_2" / (id + ".bin")).string());
    write_file(root / "label_2" / (id + ".txt"), serialize_label_file(result.labels));
    write_file(root / "calib" / (id + ".txt"), detail::calibration_text(K));

    // mock detector: jittered copies of the labels, a dropout, a stray box
    Rng prng(mix_seed(config.seed, 50000 + static_cast<std::uint64_t>(f)));
    std::vector<DetectionRecord> preds;
    for (const auto& gt : result.labels) {
      if (prng.uniform(0.0, 1.0) > 0.85) continue;
      DetectionRecord p = gt;
      p.location.x() += 0.12 * prng.normal();
      p.location.z() += 0.20 * prng.normal();
      p.rotation_y = wrap_angle(p.rotation_y + 0.04 * prng.normal());
      p.alpha = alpha_from_rotation_y(p.rotation_y, p.location);
      p.score = prng.uniform(0.55, 0.99);
      preds.push_back(std::move(p));
    }
    if (prng.uniform(0.0, 1.0) < 0.35) {
      const Box3D stray = Box3D::from_pose(
          Quaternion::from_yaw(prng.uniform(-M_PI, M_PI)),
          Eigen::Vector3d(prng.uniform(-3.0, 3.0), prng.uniform(-0.3, 1.2),
                          prng.uniform(7.0, 14.0)),
          Eigen::Vector3d(1.6, 1.5, 3.9));
      DetectionRecord rec = record_from_box(stray, "Car", K, w, h, prng.uniform(0.5, 0.8));
      if (rec.bbox2d.valid() && rec.bbox2d.area() >= 40.0) preds.push_back(std::move(rec));
    }
    write_file(root / "preds" / (id + ".txt"), serialize_label_file(preds));
  }
  write_file(root / "ImageSets" / "val.txt", split_text);

  nlohmann::json j;
  j["command"] = "demo-data";
  j["config"] = config.to_json();
  j["frames"] = out.frame_ids;
  j["total_objects"] = out.total_objects;
  write_file(root / "demo_data.json", j.dump(2) + "\n");
  return out;
}

}  // namespace roi10d::cli
