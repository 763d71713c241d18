#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <stdexcept>

#include "roi10d/cli.hpp"

// Thin shell over the subcommand drivers in roi10d/cli.hpp. Exit codes:
// 0 success, 2 bad configuration, 3 missing or malformed data, 4 numerical
// failure.

namespace {

using roi10d::cli::RunConfig;

void add_shared(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--out", cfg.out, "output directory")->envname("ROI10D_OUT");
  cmd->add_option("--seed", cfg.seed, "rng seed")->envname("ROI10D_SEED");
  cmd->add_option("--workers", cfg.workers, "worker threads")->envname("ROI10D_WORKERS");
}

void add_dataset(CLI::App* cmd, RunConfig& cfg, bool required) {
  auto* root = cmd->add_option("--data-root", cfg.data_root, "dataset root directory")
                   ->envname("ROI10D_DATA_ROOT");
  if (required) root->required();
  cmd->add_option("--split", cfg.split, "split name under ImageSets/")
      ->envname("ROI10D_SPLIT");
}

void add_matching(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--class", cfg.class_name, "class to evaluate")->envname("ROI10D_CLASS");
  cmd->add_option("--nms2d", cfg.nms2d, "2d overlap suppression threshold")
      ->envname("ROI10D_NMS2D");
  cmd->add_option("--nms-bev", cfg.nms_bev, "bird's-eye overlap suppression threshold")
      ->envname("ROI10D_NMS_BEV");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"monocular 3d box lifting toolkit"};
  app.require_subcommand(1);
  RunConfig cfg;

  CLI::App* evaluate = app.add_subcommand("evaluate", "score detections against labels");
  add_dataset(evaluate, cfg, true);
  evaluate->add_option("--predictions", cfg.predictions, "directory of detection files")
      ->required()
      ->envname("ROI10D_PREDICTIONS");
  add_matching(evaluate, cfg);
  evaluate->add_option("--iou", cfg.iou, "strict iou threshold (0.5 is always reported)")
      ->envname("ROI10D_IOU");
  evaluate->add_option("--ap-points", cfg.ap_points, "interpolation points, 11 or 40")
      ->envname("ROI10D_AP_POINTS");
  add_shared(evaluate, cfg);

  CLI::App* recall = app.add_subcommand("recall-bins", "recall by depth and yaw bins");
  add_dataset(recall, cfg, true);
  recall->add_option("--predictions", cfg.predictions, "directory of detection files")
      ->required()
      ->envname("ROI10D_PREDICTIONS");
  add_matching(recall, cfg);
  recall->add_option("--recall-iou", cfg.recall_iou, "match threshold for recall")
      ->envname("ROI10D_RECALL_IOU");
  recall->add_option("--depth-bin-m", cfg.depth_bin_m, "depth bin width, meters")
      ->envname("ROI10D_DEPTH_BIN_M");
  recall->add_option("--depth-max", cfg.depth_max_m, "depth range upper edge, meters")
      ->envname("ROI10D_DEPTH_MAX");
  recall->add_option("--azimuth-bin-deg", cfg.azimuth_bin_deg, "yaw bin width, degrees")
      ->envname("ROI10D_AZIMUTH_BIN_DEG");
  add_shared(recall, cfg);

  CLI::App* optimize = app.add_subcommand("optimize-demo", "fit boxes from random starts");
  optimize->add_option("--label-file", cfg.label_file, "label file with the target object")
      ->required()
      ->envname("ROI10D_LABEL_FILE");
  optimize->add_option("--calib", cfg.calib_file, "calibration file for the frame")
      ->required()
      ->envname("ROI10D_CALIB");
  add_dataset(optimize, cfg, false);
  optimize->add_option("--class", cfg.class_name, "class for extent statistics")
      ->envname("ROI10D_CLASS");
  optimize->add_option("--num-seeds", cfg.num_seeds, "number of random starts")
      ->envname("ROI10D_NUM_SEEDS");
  optimize->add_option("--image-w", cfg.image_w, "image width for roi clipping");
  optimize->add_option("--image-h", cfg.image_h, "image height for roi clipping");
  add_shared(optimize, cfg);

  CLI::App* shape = app.add_subcommand("shape", "latent medians and interpolation meshes");
  shape->add_option("--codebook", cfg.codebook_dir, "codebook directory")
      ->required()
      ->envname("ROI10D_CODEBOOK");
  shape->add_option("--class", cfg.shape_class, "single class tag (default: all present)")
      ->envname("ROI10D_SHAPE_CLASS");
  shape->add_option("--slerp", cfg.slerp_ids, "two entry ids to interpolate")
      ->expected(2);
  add_shared(shape, cfg);

  CLI::App* augment = app.add_subcommand("augment", "composite bank cars into frames");
  add_dataset(augment, cfg, true);
  augment->add_option("--mesh-bank", cfg.mesh_bank_dir, "mesh bank directory")
      ->required()
      ->envname("ROI10D_MESH_BANK");
  augment->add_option("--k-max", cfg.k_max, "placement attempts per frame")
      ->envname("ROI10D_K_MAX");
  add_shared(augment, cfg);

  CLI::App* demo = app.add_subcommand("demo-data", "write a small synthetic dataset");
  demo->add_option("--frames", cfg.demo_frames, "number of frames")->envname("ROI10D_FRAMES");
  add_shared(demo, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? roi10d::cli::kExitOk : roi10d::cli::kExitConfig;
  }

  try {
    if (app.got_subcommand(evaluate)) {
      const auto out = roi10d::cli::cmd_evaluate(cfg);
      for (const auto& [t, report] : out.reports)
        for (const auto& row : report.rows)
          std::printf("ap iou=%.2f %-3s %-8s %s (gt %d)\n", t, to_string(row.metric),
                      to_string(row.difficulty),
                      row.curve.ap ? std::to_string(*row.curve.ap).c_str() : "na",
                      row.curve.gt_count);
      if (!out.missing_frames.empty())
        std::printf("frames without predictions: %zu\n", out.missing_frames.size());
      std::printf("wrote %s\n", out.json_path.string().c_str());
    } else if (app.got_subcommand(recall)) {
      const auto out = roi10d::cli::cmd_recall_bins(cfg);
      std::printf("wrote %s\n", out.depth_csv.string().c_str());
      std::printf("wrote %s\n", out.azimuth_csv.string().c_str());
    } else if (app.got_subcommand(optimize)) {
      const auto out = roi10d::cli::cmd_optimize_demo(cfg);
      std::printf("converged %d/%d seeds\n", out.converged, cfg.num_seeds);
      std::printf("wrote %s\n", out.summary_csv.string().c_str());
    } else if (app.got_subcommand(shape)) {
      const auto out = roi10d::cli::cmd_shape(cfg);
      for (const auto& path : out.median_meshes)
        std::printf("wrote %s\n", path.string().c_str());
      for (const auto& path : out.strip_meshes)
        std::printf("wrote %s\n", path.string().c_str());
    } else if (app.got_subcommand(augment)) {
      const auto out = roi10d::cli::cmd_augment(cfg);
      std::printf("augmented %d frames, %d placements\n", out.frames_written,
                  out.total_placements);
      std::printf("wrote %s\n", out.manifest_path.string().c_str());
    } else if (app.got_subcommand(demo)) {
      const auto out = roi10d::cli::cmd_demo_data(cfg);
      std::printf("wrote %d frames, %d objects under %s\n",
                  static_cast<int>(out.frame_ids.size()), out.total_objects,
                  out.root.string().c_str());
    }
  } catch (const roi10d::cli::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return roi10d::cli::kExitConfig;
  } catch (const roi10d::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return roi10d::cli::kExitData;
  } catch (const roi10d::cli::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return roi10d::cli::kExitData;
  } catch (const roi10d::cli::NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return roi10d::cli::kExitNumerical;
  } catch (const roi10d::WeiszfeldNonConvergence& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return roi10d::cli::kExitNumerical;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return roi10d::cli::kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return roi10d::cli::kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return roi10d::cli::kExitData;
  }
  return roi10d::cli::kExitOk;
}
