// Drives the installed CLI binary end to end: artifact determinism, exit
// codes, and the invariants that tie subcommand outputs back to the library
// calls they wrap. The binary path comes in through GOCC_CLI_PATH.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gocc/attention.hpp"
#include "gocc/fit.hpp"
#include "gocc/io.hpp"
#include "gocc/scene.hpp"

namespace fs = std::filesystem;
using namespace gocc;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / "gocc_cli_logs";
  fs::create_directories(dir);
  const fs::path out = dir / ("out_" + std::to_string(counter) + ".txt");
  const fs::path err = dir / ("err_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string(GOCC_CLI_PATH) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return file_bytes(a) == file_bytes(b);
}

// One scratch area per test-program run; tests use disjoint subdirectories.
fs::path scratch_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "gocc_pipeline_XXXXXX";
    std::string templ = p.string();
    if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
    return fs::path(templ);
  }();
  return root;
}

fs::path scratch(const std::string& name) {
  const fs::path p = scratch_root() / name;
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

const char* kSceneConfig = R"(grid_min = -4 -4 -1
grid_resolution = 0.5
grid_counts = 16 16 4
classes = 3
seed = 7

primitive = ground -0.65 1
primitive = box 1.25 0.25 -0.25 1.1 0.6 0.6 0.35 2

camera = 64 48 40 -3.5 0 0.4 0
lidar_pose = -2 -2 0.75 0.6
lidar_beams = 14
lidar_azimuth_steps = 120
lidar_elevation = -0.6 0.05
lidar_max_range = 30
)";

const char* kFitConfig = R"(iterations = 40
n_gaussians = 48
eval_every = 20
seed = 4
lr_mean = 3.0
lr_scale_log = 3.0
lr_rotation = 0.3
lr_opacity_logit = 3.0
lr_logits = 15.0
)";

// Forward configs share the scene block so the camera rig matches synth.
std::string forward_config(int blocks, const std::string& weights) {
  std::string cfg = kSceneConfig;
  cfg += "\nm = 12\nhidden = 16\nn_gaussians = 32\n";
  cfg += "pyramid_scales = 4\ndepth_bins = 32\ndepth_max = 30\n";
  cfg += "blocks = " + std::to_string(blocks) + "\n";
  cfg += "weights = " + weights + "\n";
  return cfg;
}

// Synthesizes the shared scene once; everything downstream reads it.
const fs::path& scene_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("scene");
    write_text(scratch_root() / "scene.cfg", kSceneConfig);
    const RunResult r = run_cli("synth --config " +
                                (scratch_root() / "scene.cfg").string() +
                                " --out " + d.string() + " --threads 1");
    if (r.exit_code != 0) throw std::runtime_error("synth failed: " + r.err);
    return d;
  }();
  return dir;
}

PointCloud scene_cloud() {
  return read_point_cloud((scene_dir() / "sweep_000.lpc1").string());
}

TEST(Synth, ArtifactsAreBytewiseReproducible) {
  scene_dir();  // writes scene.cfg and the first artifact set
  const fs::path again = scratch("scene_again");
  const RunResult r = run_cli("synth --config " +
                              (scratch_root() / "scene.cfg").string() +
                              " --out " + again.string() + " --threads 1");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  for (const char* name : {"gt.ogr1", "sweep_000.lpc1", "cam_000.fpy1"})
    EXPECT_TRUE(same_bytes(scene_dir() / name, again / name)) << name;

  const OccupancyGrid gt = read_grid((scene_dir() / "gt.ogr1").string());
  EXPECT_TRUE(gt.is_labels());
  EXPECT_EQ(gt.n_classes, 3u);
  EXPECT_EQ(gt.spec.counts[0], 16);
}

TEST(Synth, EmptyConfigStillYieldsAScene) {
  // Every scene key has a default, so a bare config synthesizes an empty
  // default grid with one identity sweep.
  write_text(scratch_root() / "empty.cfg", "# nothing here\n");
  const fs::path out = scratch("default_scene");
  const RunResult r = run_cli("synth --config " + (scratch_root() / "empty.cfg").string() +
                              " --out " + out.string() + " --threads 1");
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "gt.ogr1"));
  EXPECT_TRUE(fs::exists(out / "sweep_000.lpc1"));
}

TEST(Fit, MissingKeyNamesItAndExitsTwo) {
  write_text(scratch_root() / "empty.cfg", "# nothing here\n");
  const RunResult r = run_cli("fit --config " + (scratch_root() / "empty.cfg").string() +
                              " --scene " + scene_dir().string() + " --out " +
                              scratch("junk").string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("iterations"), std::string::npos) << r.err;
}

TEST(Fit, WritesArtifactsRerunsIdenticallyAndLogsProgress) {
  write_text(scratch_root() / "fit.cfg", kFitConfig);
  const fs::path out1 = scratch("fit1");
  const fs::path out2 = scratch("fit2");
  const std::string base = "fit --config " + (scratch_root() / "fit.cfg").string() +
                           " --scene " + scene_dir().string() + " --dump-trace --threads 1";
  const RunResult r1 = run_cli(base + " --out " + out1.string());
  ASSERT_EQ(r1.exit_code, 0) << r1.err;
  const RunResult r2 = run_cli(base + " --out " + out2.string());
  ASSERT_EQ(r2.exit_code, 0) << r2.err;

  for (const char* name : {"gaussians.goc1", "pred.ogr1", "metrics.csv", "trace.csv"}) {
    EXPECT_TRUE(fs::exists(out1 / name)) << name;
    EXPECT_TRUE(same_bytes(out1 / name, out2 / name)) << name;
  }
  EXPECT_NE(r1.out.find("iteration 0:"), std::string::npos);
  EXPECT_NE(r1.out.find("iteration 40:"), std::string::npos);
  EXPECT_NE(r1.out.find("geometry IoU"), std::string::npos);
  EXPECT_EQ(r1.out, r2.out);
}

TEST(Fit, InfiniteRateAbortsWithExitFour) {
  std::string cfg = kFitConfig;
  cfg.replace(cfg.find("lr_mean = 3.0"), 13, "lr_mean = inf");
  write_text(scratch_root() / "fit_inf.cfg", cfg);
  const RunResult r = run_cli("fit --config " + (scratch_root() / "fit_inf.cfg").string() +
                              " --scene " + scene_dir().string() + " --out " +
                              scratch("fit_inf").string() + " --threads 1");
  EXPECT_EQ(r.exit_code, 4);
  EXPECT_NE(r.err.find("iteration 1"), std::string::npos) << r.err;
}

TEST(Fit, MissingSceneDirectoryExitsThree) {
  write_text(scratch_root() / "fit.cfg", kFitConfig);
  const RunResult r = run_cli("fit --config " + (scratch_root() / "fit.cfg").string() +
                              " --scene /nonexistent/scene --out " +
                              scratch("fit_io").string());
  EXPECT_EQ(r.exit_code, 3);
}

TEST(Forward, ZeroWeightsLeaveTheInitializedSplatIntact) {
  write_text(scratch_root() / "fwd_zero.cfg", forward_config(1, "zero"));
  const fs::path out = scratch("fwd_zero");
  const RunResult r = run_cli("forward --config " + (scratch_root() / "fwd_zero.cfg").string() +
                              " --scene " + scene_dir().string() + " --out " + out.string() +
                              " --threads 1");
  ASSERT_EQ(r.exit_code, 0) << r.err;

  // The library-side reference: initialize from the voxelized sweeps with
  // the same count and seed, splat on the GT lattice.
  const OccupancyGrid gt = read_grid((scene_dir() / "gt.ogr1").string());
  FitConfig fc;
  fc.n_gaussians = 32;
  fc.rng_seed = 7;
  const auto init = init_gaussians(voxelize(scene_cloud(), gt.spec),
                                   fit_init_config(gt.spec, gt.n_classes, fc));
  const SpatialIndex index = build_index(init, 3.0, 3.5);
  const OccupancyGrid direct = splat(init, index, gt.spec, gt.n_classes, 0, 1.0, 1);

  // Zero-weight refinement re-parameterizes scale through exp(log(s)) and
  // opacity through the logistic roundtrip, so values agree to rounding and
  // both land on the same stored single-precision grid almost everywhere.
  const OccupancyGrid pred = read_grid((out / "pred.ogr1").string());
  ASSERT_EQ(pred.values.size(), direct.values.size());
  for (std::size_t i = 0; i < direct.values.size(); ++i) {
    const double tol = 1e-6 * std::max(1.0, std::abs(direct.values[i]));
    ASSERT_NEAR(pred.values[i], direct.values[i], tol) << "voxel-channel " << i;
  }

  const auto refined = read_gaussians((out / "gaussians.goc1").string());
  ASSERT_EQ(refined.size(), init.size());
  for (std::size_t i = 0; i < init.size(); ++i) {
    EXPECT_NEAR((refined[i].mean - init[i].mean).norm(), 0.0, 1e-6);
    EXPECT_NEAR((refined[i].scale - init[i].scale).norm(), 0.0, 1e-6);
    EXPECT_NEAR(refined[i].opacity, init[i].opacity, 1e-6);
  }
}

TEST(Forward, ThreeBlocksEqualThreeChainedSingleBlockRuns) {
  // One weight file shared by every block keeps the two routes comparable.
  const OccupancyGrid gt = read_grid((scene_dir() / "gt.ogr1").string());
  AttentionDims dims;
  dims.m = 12;
  dims.m_c = 3;
  dims.hidden = 16;
  dims.n_classes = static_cast<int>(gt.n_classes);
  dims.n_cameras = 1;
  dims.n_scales = 4;
  dims.n_r1 = 4;
  dims.n_r2 = 2;
  RngSequence rng(21);
  BlockWeights bw = random_block_weights(dims, rng, 0.05);
  const fs::path wpath = scratch_root() / "shared.gw3d";
  write_block_weights(wpath.string(), dims, bw);

  write_text(scratch_root() / "fwd_b3.cfg", forward_config(3, wpath.string()));
  write_text(scratch_root() / "fwd_b1.cfg", forward_config(1, wpath.string()));

  const fs::path direct = scratch("fwd_direct");
  const std::string scene_arg = " --scene " + scene_dir().string();
  ASSERT_EQ(run_cli("forward --config " + (scratch_root() / "fwd_b3.cfg").string() +
                    scene_arg + " --out " + direct.string() + " --threads 1")
                .exit_code,
            0);

  const fs::path s1 = scratch_root() / "s1.gst1";
  const fs::path s2 = scratch_root() / "s2.gst1";
  const fs::path stage1 = scratch("fwd_stage1");
  const fs::path stage2 = scratch("fwd_stage2");
  const fs::path stage3 = scratch("fwd_stage3");
  const std::string b1 = "forward --config " + (scratch_root() / "fwd_b1.cfg").string() + scene_arg;
  ASSERT_EQ(run_cli(b1 + " --out " + stage1.string() + " --dump-state " + s1.string() +
                    " --threads 1")
                .exit_code,
            0);
  ASSERT_EQ(run_cli(b1 + " --out " + stage2.string() + " --init-state " + s1.string() +
                    " --dump-state " + s2.string() + " --threads 1")
                .exit_code,
            0);
  ASSERT_EQ(run_cli(b1 + " --out " + stage3.string() + " --init-state " + s2.string() +
                    " --threads 1")
                .exit_code,
            0);

  EXPECT_TRUE(same_bytes(direct / "gaussians.goc1", stage3 / "gaussians.goc1"));
  EXPECT_TRUE(same_bytes(direct / "pred.ogr1", stage3 / "pred.ogr1"));
  // Each stage moved the state: stage outputs differ from the final one.
  EXPECT_FALSE(same_bytes(stage1 / "gaussians.goc1", stage3 / "gaussians.goc1"));
}

TEST(Forward, RandomWeightsRerunIsBytewiseIdentical) {
  std::string cfg = forward_config(2, "random");
  cfg += "weights_seed = 11\n";
  write_text(scratch_root() / "fwd_rand.cfg", cfg);
  const fs::path out1 = scratch("fwd_rand1");
  const fs::path out2 = scratch("fwd_rand2");
  const std::string base = "forward --config " + (scratch_root() / "fwd_rand.cfg").string() +
                           " --scene " + scene_dir().string() + " --threads 1";
  ASSERT_EQ(run_cli(base + " --out " + out1.string()).exit_code, 0);
  ASSERT_EQ(run_cli(base + " --out " + out2.string()).exit_code, 0);
  EXPECT_TRUE(same_bytes(out1 / "gaussians.goc1", out2 / "gaussians.goc1"));
  EXPECT_TRUE(same_bytes(out1 / "pred.ogr1", out2 / "pred.ogr1"));
}

TEST(Forward, WeightShapeMismatchExitsTwo) {
  const OccupancyGrid gt = read_grid((scene_dir() / "gt.ogr1").string());
  AttentionDims dims;
  dims.m = 12;
  dims.m_c = 3;
  dims.hidden = 17;  // config says 16
  dims.n_classes = static_cast<int>(gt.n_classes);
  dims.n_cameras = 1;
  dims.n_scales = 4;
  dims.n_r1 = 4;
  dims.n_r2 = 2;
  RngSequence rng(5);
  write_block_weights((scratch_root() / "bad.gw3d").string(), dims,
                      random_block_weights(dims, rng, 0.05));
  write_text(scratch_root() / "fwd_bad.cfg",
             forward_config(1, (scratch_root() / "bad.gw3d").string()));
  const RunResult r = run_cli("forward --config " + (scratch_root() / "fwd_bad.cfg").string() +
                              " --scene " + scene_dir().string() + " --out " +
                              scratch("fwd_bad").string() + " --threads 1");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("disagree"), std::string::npos) << r.err;
}

TEST(Eval, ReproducesTheMetricsTheFitReported) {
  write_text(scratch_root() / "fit.cfg", kFitConfig);
  const fs::path fit_out = scratch("fit_for_eval");
  ASSERT_EQ(run_cli("fit --config " + (scratch_root() / "fit.cfg").string() + " --scene " +
                    scene_dir().string() + " --out " + fit_out.string() + " --threads 1")
                .exit_code,
            0);
  const fs::path csv = scratch_root() / "eval_metrics.csv";
  const RunResult r = run_cli("eval --pred " + (fit_out / "pred.ogr1").string() + " --gt " +
                              (scene_dir() / "gt.ogr1").string() + " --out " + csv.string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(same_bytes(csv, fit_out / "metrics.csv"));
  EXPECT_NE(r.out.find("geometry IoU"), std::string::npos);
}

TEST(Eval, GridShapeMismatchExitsTwo) {
  // A grid with different counts cannot be scored against the scene GT.
  GridSpec other;
  other.origin = Vec3(-4, -4, -1);
  other.resolution = Vec3(0.5, 0.5, 0.5);
  other.counts = {8, 8, 4};
  const OccupancyGrid small = OccupancyGrid::empty_labels(other, 3);
  write_grid((scratch_root() / "small.ogr1").string(), small);
  const RunResult r = run_cli("eval --pred " + (scratch_root() / "small.ogr1").string() +
                              " --gt " + (scene_dir() / "gt.ogr1").string());
  EXPECT_EQ(r.exit_code, 2);
}

TEST(SplatMultires, SharedExtentRunsAndMismatchExitsTwo) {
  write_text(scratch_root() / "fit.cfg", kFitConfig);
  const fs::path fit_out = scratch("fit_for_multires");
  ASSERT_EQ(run_cli("fit --config " + (scratch_root() / "fit.cfg").string() + " --scene " +
                    scene_dir().string() + " --out " + fit_out.string() + " --threads 1")
                .exit_code,
            0);
  const std::string gpath = (fit_out / "gaussians.goc1").string();

  std::string cfg = "gaussians = " + gpath + "\n";
  cfg += "grid_min = -4 -4 -1\n";
  cfg += "multires = 0.5 0.5 0.5 16 16 4\n";
  cfg += "multires = 0.25 0.25 0.25 32 32 8\n";
  write_text(scratch_root() / "mr.cfg", cfg);
  const fs::path out = scratch("mr");
  const RunResult r = run_cli("splat-multires --config " + (scratch_root() / "mr.cfg").string() +
                              " --out " + out.string() + " --threads 1");
  ASSERT_EQ(r.exit_code, 0) << r.err;

  // The coarse output must match a direct library splat byte for byte.
  const auto gaussians = read_gaussians(gpath);
  const SpatialIndex index = build_index(gaussians, 3.0, 3.5);
  GridSpec coarse;
  coarse.origin = Vec3(-4, -4, -1);
  coarse.resolution = Vec3(0.5, 0.5, 0.5);
  coarse.counts = {16, 16, 4};
  write_grid((scratch_root() / "direct.ogr1").string(),
             splat(gaussians, index, coarse, 3, 0, 1.0, 1));
  EXPECT_TRUE(same_bytes(scratch_root() / "direct.ogr1", out / "pred_000.ogr1"));

  const OccupancyGrid fine = read_grid((out / "pred_001.ogr1").string());
  EXPECT_EQ(fine.spec.counts[0], 32);

  std::string bad = "gaussians = " + gpath + "\n";
  bad += "grid_min = -4 -4 -1\n";
  bad += "multires = 0.5 0.5 0.5 16 16 4\n";
  bad += "multires = 0.25 0.25 0.25 32 32 4\n";  // half the height
  write_text(scratch_root() / "mr_bad.cfg", bad);
  const RunResult rb = run_cli("splat-multires --config " +
                               (scratch_root() / "mr_bad.cfg").string() + " --out " +
                               scratch("mr_bad").string());
  EXPECT_EQ(rb.exit_code, 2);
  EXPECT_NE(rb.err.find("extent"), std::string::npos) << rb.err;
}

TEST(ExportPly, VertexCountsTrackTheInputs) {
  write_text(scratch_root() / "fit.cfg", kFitConfig);
  const fs::path fit_out = scratch("fit_for_ply");
  ASSERT_EQ(run_cli("fit --config " + (scratch_root() / "fit.cfg").string() + " --scene " +
                    scene_dir().string() + " --out " + fit_out.string() + " --threads 1")
                .exit_code,
            0);

  const fs::path gply = scratch_root() / "g.ply";
  ASSERT_EQ(run_cli("export-ply --gaussians " + (fit_out / "gaussians.goc1").string() +
                    " --out " + gply.string())
                .exit_code,
            0);
  EXPECT_NE(slurp(gply).find("element vertex 48"), std::string::npos);

  const OccupancyGrid gt = read_grid((scene_dir() / "gt.ogr1").string());
  std::size_t occupied = 0;
  for (std::uint16_t label : gt.labels) occupied += label != 0;
  const fs::path vply = scratch_root() / "v.ply";
  ASSERT_EQ(run_cli("export-ply --grid " + (scene_dir() / "gt.ogr1").string() + " --out " +
                    vply.string())
                .exit_code,
            0);
  EXPECT_NE(slurp(vply).find("element vertex " + std::to_string(occupied)),
            std::string::npos);

  // Exactly one input source is allowed.
  EXPECT_EQ(run_cli("export-ply --gaussians " + (fit_out / "gaussians.goc1").string() +
                    " --grid " + (scene_dir() / "gt.ogr1").string() + " --out " +
                    (scratch_root() / "both.ply").string())
                .exit_code,
            2);
  EXPECT_EQ(run_cli("export-ply --out " + (scratch_root() / "none.ply").string()).exit_code, 2);
}

TEST(Usage, BadFlagsExitTwoAndHelpExitsZero) {
  EXPECT_EQ(run_cli("--help").exit_code, 0);
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
  EXPECT_EQ(run_cli("fit").exit_code, 2);  // required flags missing
}

}  // namespace
