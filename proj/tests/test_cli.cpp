#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "roi10d/cli.hpp"

using namespace roi10d;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = ROI10D_FIXTURE_DIR;

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("roi10d_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool file_bytes_equal(const fs::path& a, const fs::path& b) {
  return read_file(a) == read_file(b);
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// One shared synthetic dataset for the tests that need images on disk.
const fs::path& demo_root() {
  static const fs::path root = [] {
    const fs::path dir = temp_dir("demo_fixture") / "data";
    cli::RunConfig cfg;
    cfg.out = dir.string();
    cfg.seed = 7;
    cfg.demo_frames = 4;
    cli::cmd_demo_data(cfg);
    return dir;
  }();
  return root;
}

cli::RunConfig golden_eval_config(const fs::path& out) {
  cli::RunConfig cfg;
  cfg.data_root = (kFixtures / "golden").string();
  cfg.predictions = (kFixtures / "golden_preds").string();
  cfg.out = out.string();
  return cfg;
}

// The same load path the drivers use: ground truth plus suppressed
// detections, missing prediction files meaning zero detections.
std::vector<EvalFrame> load_frames_direct(const fs::path& root, const fs::path& preds,
                                          double nms2d, double nms_bev) {
  const auto ids = parse_split(read_file(root / "ImageSets" / "val.txt"));
  std::vector<EvalFrame> frames(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    frames[i].gts = parse_label_file(read_file(root / "label_2" / (ids[i] + ".txt")));
    const fs::path pred = preds / (ids[i] + ".txt");
    if (!fs::exists(pred)) continue;
    frames[i].preds = cli::detail::suppress(parse_label_file(read_file(pred)), nms2d, nms_bev);
  }
  return frames;
}

}  // namespace

TEST_CASE("run config validation rejects out-of-range values") {
  cli::RunConfig good;
  REQUIRE_NOTHROW(good.validate());

  const auto rejects = [](auto mutate) {
    cli::RunConfig cfg;
    mutate(cfg);
    REQUIRE_THROWS_AS(cfg.validate(), cli::ConfigError);
  };
  rejects([](cli::RunConfig& c) { c.nms2d = 1.5; });
  rejects([](cli::RunConfig& c) { c.nms_bev = -0.1; });
  rejects([](cli::RunConfig& c) { c.iou = 0.0; });
  rejects([](cli::RunConfig& c) { c.recall_iou = 1.2; });
  rejects([](cli::RunConfig& c) { c.ap_points = 12; });
  rejects([](cli::RunConfig& c) { c.depth_bin_m = 0.0; });
  rejects([](cli::RunConfig& c) { c.depth_max_m = 3.0; });
  rejects([](cli::RunConfig& c) { c.azimuth_bin_deg = 400.0; });
  rejects([](cli::RunConfig& c) { c.workers = 0; });
  rejects([](cli::RunConfig& c) { c.num_seeds = 0; });
  rejects([](cli::RunConfig& c) { c.k_max = -1; });
  rejects([](cli::RunConfig& c) { c.demo_frames = 0; });
  rejects([](cli::RunConfig& c) { c.image_w = -1.0; });
  rejects([](cli::RunConfig& c) { c.slerp_ids = {"only_one"}; });
  rejects([](cli::RunConfig& c) { c.class_name.clear(); });
  rejects([](cli::RunConfig& c) { c.out.clear(); });
}

TEST_CASE("demo data set is complete, consistent and deterministic") {
  const fs::path& root = demo_root();
  const auto ids = parse_split(read_file(root / "ImageSets" / "val.txt"));
  REQUIRE(ids.size() == 4);

  int objects = 0;
  for (const auto& id : ids) {
    REQUIRE(fs::exists(root / "image_2" / (id + ".png")));
    REQUIRE(fs::exists(root / "depth_2" / (id + ".bin")));
    const auto labels = parse_label_file(read_file(root / "label_2" / (id + ".txt")));
    objects += static_cast<int>(labels.size());
    const auto K = parse_calibration(read_file(root / "calib" / (id + ".txt"))).intrinsics();
    CHECK(K.fx == 210.0);
    for (const auto& r : labels) {
      CHECK(r.class_name == "Car");
      CHECK(r.bbox2d.valid());
      CHECK(r.location.z() > 0.0);
      CHECK_FALSE(r.score.has_value());
    }
    const auto preds = parse_label_file(read_file(root / "preds" / (id + ".txt")));
    for (const auto& p : preds) REQUIRE(p.score.has_value());
  }
  CHECK(objects > 0);
  CHECK(objects <= 3 * 4);

  const MeshBank bank = load_mesh_bank((root / "mesh_bank").string());
  REQUIRE(bank.entries.size() == 4);
  const Codebook codebook = load_codebook((root / "codebook").string());
  REQUIRE(codebook.entries.size() == 12);
  for (const auto& entry : codebook.entries) {
    CHECK(std::abs(entry.latent.norm() - 1.0) < 1e-12);
    REQUIRE_NOTHROW(validate_class_tag(entry.class_tag));
  }

  // same seed reproduces every byte; another seed moves the objects
  cli::RunConfig again;
  again.out = (temp_dir("demo_again") / "data").string();
  again.seed = 7;
  again.demo_frames = 4;
  cli::cmd_demo_data(again);
  for (const auto& id : ids) {
    CHECK(file_bytes_equal(root / "image_2" / (id + ".png"),
                           fs::path(again.out) / "image_2" / (id + ".png")));
    CHECK(file_bytes_equal(root / "label_2" / (id + ".txt"),
                           fs::path(again.out) / "label_2" / (id + ".txt")));
    CHECK(file_bytes_equal(root / "preds" / (id + ".txt"),
                           fs::path(again.out) / "preds" / (id + ".txt")));
  }

  cli::RunConfig other = again;
  other.out = (temp_dir("demo_other") / "data").string();
  other.seed = 8;
  cli::cmd_demo_data(other);
  bool any_difference = false;
  for (const auto& id : ids)
    if (!file_bytes_equal(root / "label_2" / (id + ".txt"),
                          fs::path(other.out) / "label_2" / (id + ".txt")))
      any_difference = true;
  CHECK(any_difference);
}

TEST_CASE("evaluate matches a direct computation on the bundled fixture") {
  const fs::path out = temp_dir("eval_golden");
  cli::RunConfig cfg = golden_eval_config(out);
  cfg.workers = 2;
  const auto result = cli::cmd_evaluate(cfg);

  CHECK(result.missing_frames.empty());
  REQUIRE(result.reports.size() == 2);
  CHECK(result.reports[0].first == 0.5);
  CHECK(result.reports[1].first == 0.7);

  const auto frames = load_frames_direct(kFixtures / "golden", kFixtures / "golden_preds",
                                         cfg.nms2d, cfg.nms_bev);
  for (const auto& [threshold, report] : result.reports) {
    const EvalReport direct = evaluate_all(frames, threshold, cfg.ap_points, cfg.class_name);
    REQUIRE(report.rows.size() == direct.rows.size());
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      CHECK(report.rows[i].metric == direct.rows[i].metric);
      CHECK(report.rows[i].difficulty == direct.rows[i].difficulty);
      CHECK(report.rows[i].curve.gt_count == direct.rows[i].curve.gt_count);
      REQUIRE(report.rows[i].curve.ap.has_value() == direct.rows[i].curve.ap.has_value());
      if (report.rows[i].curve.ap)
        CHECK(*report.rows[i].curve.ap == *direct.rows[i].curve.ap);
    }
  }

  const std::string csv = read_file(result.csv_path);
  CHECK(count_lines(csv) == 1 + 2 * 9);
  CHECK(csv.rfind("iou,metric,difficulty,ap,gt_count\n", 0) == 0);

  const auto j = nlohmann::json::parse(read_file(result.json_path));
  CHECK(j.at("command") == "evaluate");
  CHECK(j.at("config").at("iou") == 0.7);
  CHECK(j.at("results").size() == 2);
  CHECK(j.at("missing_frames").empty());

  REQUIRE(result.svg_paths.size() == 6);
  for (const auto& path : result.svg_paths) {
    const std::string svg = read_file(path);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("precision-recall") != std::string::npos);
  }

  // the parallel path must not change a single byte of the outputs
  cli::RunConfig serial = cfg;
  serial.workers = 1;
  serial.out = temp_dir("eval_golden_serial").string();
  const auto serial_result = cli::cmd_evaluate(serial);
  CHECK(read_file(serial_result.csv_path) == csv);
}

TEST_CASE("evaluate scores ground truth as a perfect detector") {
  const fs::path dir = temp_dir("eval_perfect");
  const fs::path preds = dir / "preds";
  fs::create_directories(preds);
  const auto ids = parse_split(read_file(kFixtures / "golden" / "ImageSets" / "val.txt"));
  for (const auto& id : ids) {
    auto records =
        parse_label_file(read_file(kFixtures / "golden" / "label_2" / (id + ".txt")));
    std::vector<DetectionRecord> kept;
    for (auto& r : records) {
      if (r.is_dont_care()) continue;
      r.score = 1.0;
      kept.push_back(r);
    }
    write_file(preds / (id + ".txt"), serialize_label_file(kept));
  }

  cli::RunConfig cfg = golden_eval_config(dir / "out");
  cfg.predictions = preds.string();
  const auto result = cli::cmd_evaluate(cfg);
  CHECK(result.missing_frames.empty());
  for (const auto& [threshold, report] : result.reports) {
    (void)threshold;
    for (const auto& row : report.rows) {
      if (row.curve.gt_count > 0) {
        REQUIRE(row.curve.ap.has_value());
        CHECK(*row.curve.ap == 1.0);
      }
    }
  }
}

TEST_CASE("evaluate treats an empty prediction directory as all misses") {
  const fs::path dir = temp_dir("eval_empty");
  fs::create_directories(dir / "preds");
  cli::RunConfig cfg = golden_eval_config(dir / "out");
  cfg.predictions = (dir / "preds").string();
  const auto result = cli::cmd_evaluate(cfg);
  CHECK(result.missing_frames.size() == 5);
  for (const auto& [threshold, report] : result.reports) {
    (void)threshold;
    for (const auto& row : report.rows) {
      if (row.curve.gt_count > 0) {
        REQUIRE(row.curve.ap.has_value());
        CHECK(*row.curve.ap == 0.0);
      } else {
        CHECK_FALSE(row.curve.ap.has_value());
      }
    }
  }
}

TEST_CASE("evaluate rejects unusable inputs") {
  cli::RunConfig cfg = golden_eval_config(temp_dir("eval_bad"));
  cfg.data_root = "/nonexistent_roi10d";
  CHECK_THROWS_AS(cli::cmd_evaluate(cfg), cli::DataError);

  cfg = golden_eval_config(temp_dir("eval_bad2"));
  cfg.predictions = "/nonexistent_roi10d_preds";
  CHECK_THROWS_AS(cli::cmd_evaluate(cfg), cli::DataError);

  // predictions without confidence scores cannot be ranked
  const fs::path dir = temp_dir("eval_noscore");
  fs::create_directories(dir / "preds");
  const auto ids = parse_split(read_file(kFixtures / "golden" / "ImageSets" / "val.txt"));
  for (const auto& id : ids)
    fs::copy_file(kFixtures / "golden" / "label_2" / (id + ".txt"),
                  dir / "preds" / (id + ".txt"));
  cfg = golden_eval_config(dir / "out");
  cfg.predictions = (dir / "preds").string();
  CHECK_THROWS_AS(cli::cmd_evaluate(cfg), cli::DataError);

  // a frame listed in the split must have ground truth
  const fs::path sparse = temp_dir("eval_sparse");
  fs::create_directories(sparse / "ImageSets");
  fs::create_directories(sparse / "label_2");
  write_file(sparse / "ImageSets" / "val.txt", "999999\n");
  cfg = golden_eval_config(sparse / "out");
  cfg.data_root = sparse.string();
  CHECK_THROWS_AS(cli::cmd_evaluate(cfg), cli::DataError);
}

TEST_CASE("recall bins match a direct computation and report degrees") {
  const fs::path out = temp_dir("recall_golden");
  cli::RunConfig cfg = golden_eval_config(out);
  cfg.depth_bin_m = 5.0;
  cfg.depth_max_m = 30.0;
  cfg.azimuth_bin_deg = 45.0;
  const auto result = cli::cmd_recall_bins(cfg);

  const auto frames = load_frames_direct(kFixtures / "golden", kFixtures / "golden_preds",
                                         cfg.nms2d, cfg.nms_bev);
  const auto depth_direct =
      binned_recall(frames, BinKind::kDepth, uniform_edges(0.0, 30.0, 5.0), cfg.recall_iou,
                    Difficulty::kHard, cfg.class_name);
  REQUIRE(result.depth.counts == depth_direct.counts);
  REQUIRE(result.depth.matched == depth_direct.matched);

  const double bin = 45.0 * M_PI / 180.0;
  const auto azimuth_direct =
      binned_recall(frames, BinKind::kAzimuth, uniform_edges(-M_PI, M_PI, bin),
                    cfg.recall_iou, Difficulty::kHard, cfg.class_name);
  REQUIRE(result.azimuth.counts == azimuth_direct.counts);
  REQUIRE(result.azimuth.matched == azimuth_direct.matched);
  CHECK(result.azimuth.counts.size() == 8);

  const std::string depth_csv = read_file(result.depth_csv);
  CHECK(depth_csv.rfind("bin_lo,bin_hi,gt_count,matched,recall\n", 0) == 0);
  CHECK(count_lines(depth_csv) == 1 + 6);

  const std::string az_csv = read_file(result.azimuth_csv);
  CHECK(az_csv.rfind("bin_lo_deg,bin_hi_deg,gt_count,matched,recall\n", 0) == 0);
  CHECK(az_csv.find("\n-180,-135,") != std::string::npos);

  CHECK(read_file(result.depth_svg).find("<svg") != std::string::npos);
  CHECK(read_file(result.azimuth_svg).find("gt share") != std::string::npos);
}

TEST_CASE("optimizer demo converges and writes one trace per seed", "[slow]") {
  const fs::path out = temp_dir("optimize_demo");
  cli::RunConfig cfg;
  cfg.label_file = (kFixtures / "golden" / "label_2" / "000000.txt").string();
  cfg.calib_file = (kFixtures / "golden" / "calib" / "000000.txt").string();
  cfg.data_root = (kFixtures / "golden").string();
  cfg.num_seeds = 3;
  cfg.out = out.string();
  const auto result = cli::cmd_optimize_demo(cfg);

  REQUIRE(result.traces.size() == 3);
  CHECK(result.converged == 3);
  for (const auto& trace : result.traces) {
    CHECK_FALSE(trace.diverged);
    REQUIRE_FALSE(trace.records.empty());
    CHECK(trace.records.size() == 2001);
  }

  const std::string summary = read_file(result.summary_csv);
  CHECK(summary.rfind("seed,final_loss,diverged,converged\n", 0) == 0);
  CHECK(count_lines(summary) == 4);

  REQUIRE(result.trace_csvs.size() == 3);
  const std::string trace_csv = read_file(result.trace_csvs[0]);
  CHECK(trace_csv.rfind("iter,loss,grad_q,grad_uv,grad_z,grad_whl,", 0) == 0);
  CHECK(count_lines(trace_csv) == 1 + 2001);

  CHECK(read_file(result.loss_svg).find("seed 2") != std::string::npos);
  CHECK(read_file(result.gradient_svg).find("extents") != std::string::npos);

  // without a dataset the extent spread is centered on the target itself
  cli::RunConfig lone = cfg;
  lone.data_root.clear();
  lone.num_seeds = 1;
  lone.out = temp_dir("optimize_lone").string();
  const auto lone_result = cli::cmd_optimize_demo(lone);
  REQUIRE(lone_result.traces.size() == 1);
  CHECK_FALSE(lone_result.traces[0].diverged);
}

TEST_CASE("optimizer demo rejects a label file with no usable object") {
  const fs::path dir = temp_dir("optimize_bad");
  write_file(dir / "labels.txt",
             "DontCare -1 -1 -10 0.00 0.00 50.00 50.00 -1 -1 -1 -1000 -1000 -1000 -10\n");
  cli::RunConfig cfg;
  cfg.label_file = (dir / "labels.txt").string();
  cfg.calib_file = (kFixtures / "golden" / "calib" / "000000.txt").string();
  cfg.out = (dir / "out").string();
  CHECK_THROWS_AS(cli::cmd_optimize_demo(cfg), cli::DataError);
}

TEST_CASE("shape command writes medians and an interpolation strip") {
  const fs::path out = temp_dir("shape_demo");
  cli::RunConfig cfg;
  cfg.codebook_dir = (demo_root() / "codebook").string();
  cfg.slerp_ids = {"SmallCar_0", "SUV_2"};
  cfg.out = out.string();
  const auto result = cli::cmd_shape(cfg);

  REQUIRE(result.medians.size() == 4);
  for (const auto& [tag, median] : result.medians) {
    REQUIRE_NOTHROW(validate_class_tag(tag));
    CHECK(std::abs(median.norm() - 1.0) < 1e-9);
  }
  REQUIRE(result.median_meshes.size() == 4);
  for (const auto& path : result.median_meshes) CHECK(fs::file_size(path) > 0);

  // endpoints of the strip reproduce the stored entries exactly
  REQUIRE(result.strip_meshes.size() == 5);
  const Codebook codebook = load_codebook(cfg.codebook_dir);
  const auto entry_mesh = [&](const std::string& id) {
    for (const auto& entry : codebook.entries)
      if (entry.id == id) return marching_cubes(entry.tsdf);
    FAIL("missing entry " + id);
    return TriMesh{};
  };
  const fs::path ref_dir = temp_dir("shape_ref");
  write_ply(entry_mesh("SmallCar_0"), (ref_dir / "a.ply").string());
  write_ply(entry_mesh("SUV_2"), (ref_dir / "b.ply").string());
  CHECK(file_bytes_equal(result.strip_meshes[0], ref_dir / "a.ply"));
  CHECK(file_bytes_equal(result.strip_meshes[4], ref_dir / "b.ply"));

  const auto j = nlohmann::json::parse(read_file(result.medians_json));
  REQUIRE(j.at("medians").contains("Car"));
  CHECK(j.at("medians").at("Car").at("count") == 3);
  CHECK(j.at("medians").at("Car").at("objective").get<double>() > 0.0);

  // restricting to one tag produces only that median
  cli::RunConfig single = cfg;
  single.slerp_ids.clear();
  single.shape_class = "SUV";
  single.out = temp_dir("shape_single").string();
  const auto single_result = cli::cmd_shape(single);
  REQUIRE(single_result.medians.size() == 1);
  CHECK(single_result.medians[0].first == "SUV");
  CHECK(single_result.strip_meshes.empty());
}

TEST_CASE("shape command distinguishes unknown tags from absent ones") {
  cli::RunConfig cfg;
  cfg.codebook_dir = (demo_root() / "codebook").string();
  cfg.out = temp_dir("shape_err").string();

  cfg.shape_class = "Sedan";  // not a codebook tag at all
  CHECK_THROWS_AS(cli::cmd_shape(cfg), cli::ConfigError);

  // a valid tag that this codebook simply lacks
  Codebook cars_only;
  for (const auto& entry : load_codebook(cfg.codebook_dir).entries)
    if (entry.class_tag == "Car") cars_only.entries.push_back(entry);
  const fs::path partial = temp_dir("shape_partial") / "codebook";
  write_codebook(cars_only, partial.string());
  cfg.codebook_dir = partial.string();
  cfg.shape_class = "SUV";
  CHECK_THROWS_AS(cli::cmd_shape(cfg), cli::DataError);

  cfg.shape_class.clear();
  cfg.slerp_ids = {"Car_0", "NoSuchEntry"};
  CHECK_THROWS_AS(cli::cmd_shape(cfg), cli::DataError);

  cfg.slerp_ids.clear();
  cfg.codebook_dir = (temp_dir("shape_missing") / "codebook").string();
  CHECK_THROWS_AS(cli::cmd_shape(cfg), cli::DataError);
}

TEST_CASE("augment composites frames with reproducible placements") {
  const fs::path& root = demo_root();
  cli::RunConfig cfg;
  cfg.data_root = root.string();
  cfg.mesh_bank_dir = (root / "mesh_bank").string();
  cfg.seed = 5;
  cfg.k_max = 2;
  cfg.out = temp_dir("augment_a").string();
  const auto result = cli::cmd_augment(cfg);

  CHECK(result.frames_written == 4);
  CHECK(result.total_placements <= 2 * 4);
  CHECK(result.total_placements > 0);

  const auto manifest = nlohmann::json::parse(read_file(result.manifest_path));
  CHECK(manifest.at("aborted") == false);
  REQUIRE(manifest.at("frames").size() == 4);
  int listed = 0;
  for (const auto& frame : manifest.at("frames")) listed += frame.at("placements").size();
  CHECK(listed == result.total_placements);

  const auto ids = parse_split(read_file(root / "ImageSets" / "val.txt"));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto before = parse_label_file(read_file(root / "label_2" / (ids[i] + ".txt")));
    const auto after =
        parse_label_file(read_file(fs::path(cfg.out) / "label_2" / (ids[i] + ".txt")));
    const std::size_t added = manifest.at("frames")[i].at("placements").size();
    REQUIRE(after.size() == before.size() + added);
    for (std::size_t k = before.size(); k < after.size(); ++k) {
      CHECK(after[k].class_name == "Car");
      CHECK(after[k].bbox2d.valid());
    }
    if (added > 0)
      CHECK_FALSE(file_bytes_equal(root / "image_2" / (ids[i] + ".png"),
                                   fs::path(cfg.out) / "image_2" / (ids[i] + ".png")));
  }

  // the same seed reproduces the run, another seed moves the placements
  cli::RunConfig rerun = cfg;
  rerun.out = temp_dir("augment_b").string();
  const auto rerun_result = cli::cmd_augment(rerun);
  const auto manifest_b = nlohmann::json::parse(read_file(rerun_result.manifest_path));
  CHECK(manifest.at("frames") == manifest_b.at("frames"));
  for (const auto& id : ids)
    CHECK(file_bytes_equal(fs::path(cfg.out) / "image_2" / (id + ".png"),
                           fs::path(rerun.out) / "image_2" / (id + ".png")));

  cli::RunConfig reseeded = cfg;
  reseeded.out = temp_dir("augment_c").string();
  reseeded.seed = 6;
  const auto reseeded_result = cli::cmd_augment(reseeded);
  const auto manifest_c = nlohmann::json::parse(read_file(reseeded_result.manifest_path));
  CHECK(manifest.at("frames") != manifest_c.at("frames"));
}

TEST_CASE("augment with no placement budget copies frames byte for byte") {
  const fs::path& root = demo_root();
  cli::RunConfig cfg;
  cfg.data_root = root.string();
  cfg.mesh_bank_dir = (root / "mesh_bank").string();
  cfg.k_max = 0;
  cfg.out = temp_dir("augment_zero").string();
  const auto result = cli::cmd_augment(cfg);
  CHECK(result.total_placements == 0);

  const auto ids = parse_split(read_file(root / "ImageSets" / "val.txt"));
  for (const auto& id : ids) {
    CHECK(file_bytes_equal(root / "image_2" / (id + ".png"),
                           fs::path(cfg.out) / "image_2" / (id + ".png")));
    CHECK(file_bytes_equal(root / "label_2" / (id + ".txt"),
                           fs::path(cfg.out) / "label_2" / (id + ".txt")));
    CHECK(file_bytes_equal(root / "depth_2" / (id + ".bin"),
                           fs::path(cfg.out) / "depth_2" / (id + ".bin")));
  }
}

TEST_CASE("augment aborts mid-run with a partial manifest") {
  const fs::path broken = temp_dir("augment_broken") / "data";
  fs::copy(demo_root(), broken, fs::copy_options::recursive);
  fs::remove(broken / "image_2" / "000002.png");

  cli::RunConfig cfg;
  cfg.data_root = broken.string();
  cfg.mesh_bank_dir = (broken / "mesh_bank").string();
  cfg.out = temp_dir("augment_broken_out").string();
  REQUIRE_THROWS_AS(cli::cmd_augment(cfg), cli::DataError);

  const auto manifest =
      nlohmann::json::parse(read_file(fs::path(cfg.out) / "manifest.json"));
  CHECK(manifest.at("aborted") == true);
  CHECK(manifest.at("frames").size() == 2);  // 000000 and 000001 finished

  // output collisions are refused up front
  cli::RunConfig clobber = cfg;
  clobber.out = clobber.data_root;
  CHECK_THROWS_AS(cli::cmd_augment(clobber), cli::ConfigError);
}

#ifdef ROI10D_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string command = std::string(ROI10D_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cli binary maps failures to exit codes") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);                   // a subcommand is required
  CHECK(run_cli("evaluate") == 2);           // missing required flags
  CHECK(run_cli("no-such-command") == 2);

  const std::string golden = (kFixtures / "golden").string();
  const std::string preds = (kFixtures / "golden_preds").string();
  const std::string out = temp_dir("cli_exit").string();

  CHECK(run_cli("evaluate --data-root " + golden + " --predictions " + preds + " --out " +
                out + " --nms2d 2.0") == 2);
  CHECK(run_cli("evaluate --data-root /nonexistent_roi10d --predictions " + preds +
                " --out " + out) == 3);
  CHECK(run_cli("evaluate --data-root " + golden + " --predictions " + preds + " --out " +
                out) == 0);
  CHECK(run_cli("shape --codebook " + (demo_root() / "codebook").string() +
                " --class Sedan --out " + out) == 2);
  CHECK(run_cli("shape --codebook " + (demo_root() / "codebook").string() +
                " --slerp Car_0 NoSuchEntry --out " + out) == 3);
}
#endif
