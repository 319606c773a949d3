// gocc: scene synthesis, Gaussian fitting, forward refinement, evaluation
// and exports for semantic occupancy experiments, driven by plain-text
// configs. Exit codes: 0 success, 2 configuration or usage error, 3 I/O
// error, 4 numerical abort.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "gocc/attention.hpp"
#include "gocc/config.hpp"
#include "gocc/fit.hpp"
#include "gocc/io.hpp"
#include "gocc/scene.hpp"

namespace fs = std::filesystem;
using namespace gocc;

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  std::string scene;
  std::int64_t seed = -1;  // negative keeps the config's seed
  int threads = 0;         // 0 asks the hardware
  bool dump_trace = false;
};

int resolved_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::uint64_t resolved_seed(const KeyValueConfig& cfg, const CommonOpts& opts) {
  if (opts.seed >= 0) return static_cast<std::uint64_t>(opts.seed);
  return static_cast<std::uint64_t>(cfg.get_int_or("seed", 0));
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_out_dir(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  fs::create_directories(out);
}

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu.%s", stem, i, ext);
  return buf;
}

// Collects scene artifacts written by `synth` back into memory.
struct SceneArtifacts {
  OccupancyGrid gt;
  PointCloud cloud;                        // world frame, sweeps concatenated
  std::vector<std::vector<FeatureMap>> pyramids;  // one per camera
};

SceneArtifacts load_scene_dir(const std::string& dir) {
  if (!fs::is_directory(dir))
    throw std::runtime_error("scene directory not found: " + dir);
  SceneArtifacts art;
  art.gt = read_grid(join(dir, "gt.ogr1"));
  if (!art.gt.is_labels())
    throw std::runtime_error(dir + "/gt.ogr1: expected a label grid");

  std::vector<std::string> sweeps, cams;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("sweep_", 0) == 0 && entry.path().extension() == ".lpc1")
      sweeps.push_back(entry.path().string());
    if (name.rfind("cam_", 0) == 0 && entry.path().extension() == ".fpy1")
      cams.push_back(entry.path().string());
  }
  std::sort(sweeps.begin(), sweeps.end());
  std::sort(cams.begin(), cams.end());
  if (sweeps.empty()) throw std::runtime_error(dir + ": no sweep_*.lpc1 artifacts");
  for (const std::string& path : sweeps) {
    const PointCloud part = read_point_cloud(path);
    art.cloud.positions.insert(art.cloud.positions.end(), part.positions.begin(),
                               part.positions.end());
    art.cloud.intensities.insert(art.cloud.intensities.end(), part.intensities.begin(),
                                 part.intensities.end());
  }
  for (const std::string& path : cams) art.pyramids.push_back(read_pyramid(path));
  return art;
}

// ------------------------------------------------------------------- synth

int cmd_synth(const CommonOpts& opts) {
  const KeyValueConfig cfg = KeyValueConfig::parse_file(opts.config);
  SceneSpec spec = scene_from_config(cfg);
  spec.rng_seed = resolved_seed(cfg, opts);
  const int threads = resolved_threads(opts.threads);
  ensure_out_dir(opts.out);

  const OccupancyGrid gt = rasterize_gt(spec);
  write_grid(join(opts.out, "gt.ogr1"), gt);

  const std::vector<LidarSweep> sweeps = simulate_lidar(spec, threads);
  std::size_t total_points = 0;
  for (std::size_t s = 0; s < sweeps.size(); ++s) {
    PointCloud world;
    for (const LidarPoint& pt : sweeps[s].points) {
      world.positions.push_back(sweeps[s].rot * pt.position + sweeps[s].trans);
      world.intensities.push_back(pt.intensity);
    }
    total_points += world.size();
    write_point_cloud(join(opts.out, numbered("sweep", s, "lpc1")), world);
  }

  const int channels =
      static_cast<int>(cfg.get_int_or("feature_channels", static_cast<long long>(spec.n_classes)));
  const int n_scales = static_cast<int>(cfg.get_int_or("pyramid_scales", 4));
  for (std::size_t c = 0; c < spec.rig.size(); ++c) {
    const auto pyr = render_feature_pyramid(spec, spec.rig[c], channels, n_scales,
                                            spec.lidar.max_range, threads);
    write_pyramid(join(opts.out, numbered("cam", c, "fpy1")), pyr);
  }

  std::size_t occupied = 0;
  for (std::uint16_t label : gt.labels) occupied += label != 0;
  std::printf("scene: %lld x %lld x %lld voxels, %zu occupied\n",
              static_cast<long long>(spec.grid.counts[0]),
              static_cast<long long>(spec.grid.counts[1]),
              static_cast<long long>(spec.grid.counts[2]), occupied);
  std::printf("wrote gt grid, %zu sweeps (%zu points), %zu camera pyramids to %s\n",
              sweeps.size(), total_points, spec.rig.size(), opts.out.c_str());
  return 0;
}

// --------------------------------------------------------------------- fit

FitConfig fit_config_from(const KeyValueConfig& cfg, const CommonOpts& opts) {
  FitConfig fc;
  fc.iterations = static_cast<std::size_t>(cfg.get_int("iterations"));
  fc.n_gaussians = static_cast<std::size_t>(cfg.get_int("n_gaussians"));
  fc.lr_mean = cfg.get_double_or("lr_mean", fc.lr_mean);
  fc.lr_scale_log = cfg.get_double_or("lr_scale_log", fc.lr_scale_log);
  fc.lr_rotation = cfg.get_double_or("lr_rotation", fc.lr_rotation);
  fc.lr_opacity_logit = cfg.get_double_or("lr_opacity_logit", fc.lr_opacity_logit);
  fc.lr_logits = cfg.get_double_or("lr_logits", fc.lr_logits);
  fc.lovasz_weight = cfg.get_double_or("lambda", fc.lovasz_weight);
  fc.kappa = cfg.get_double_or("kappa", fc.kappa);
  fc.kappa_pad = cfg.get_double_or("kappa_pad", fc.kappa_pad);
  fc.b_empty = cfg.get_double_or("empty_bias", fc.b_empty);
  fc.eval_every = static_cast<std::size_t>(cfg.get_int_or("eval_every", 50));
  fc.empty_index = static_cast<std::size_t>(cfg.get_int_or("empty_index", 0));
  fc.rng_seed = resolved_seed(cfg, opts);
  fc.threads = resolved_threads(opts.threads);
  fc.validate();
  return fc;
}

bool gt_has_occupied(const OccupancyGrid& gt, std::size_t empty_index) {
  for (std::uint16_t label : gt.labels)
    if (label != empty_index) return true;
  return false;
}

void print_metrics(const MetricsResult& m, bool mious_defined) {
  if (mious_defined)
    std::printf("geometry IoU %.4f, mIoU %.4f\n", m.geometry_iou, m.miou);
  else
    std::printf("geometry IoU %.4f (mIoU undefined: no non-empty classes in GT)\n",
                m.geometry_iou);
}

int cmd_fit(const CommonOpts& opts) {
  const KeyValueConfig cfg = KeyValueConfig::parse_file(opts.config);
  const FitConfig fc = fit_config_from(cfg, opts);
  const SceneArtifacts art = load_scene_dir(opts.scene);
  ensure_out_dir(opts.out);

  const VoxelFeatureSet voxels = voxelize(art.cloud, art.gt.spec);
  const FitResult res = fit_gaussians(voxels, art.gt, fc);

  for (const TraceRow& row : res.trace)
    if (std::isfinite(row.iou))
      std::printf("iteration %zu: loss %.6f (ce %.6f, lovasz %.6f), mIoU %.4f\n",
                  row.iteration, row.total, row.ce, row.lovasz, row.miou);
  print_metrics(res.metrics, gt_has_occupied(art.gt, fc.empty_index));

  write_gaussians(join(opts.out, "gaussians.goc1"), res.gaussians);
  write_grid(join(opts.out, "pred.ogr1"), res.prediction);
  write_metrics_csv(join(opts.out, "metrics.csv"), res.metrics);
  if (opts.dump_trace) write_trace_csv(join(opts.out, "trace.csv"), res.trace);
  return 0;
}

// ----------------------------------------------------------------- forward

// Raw f64 optimizer state (Gaussians plus their queries), so staged runs
// compose exactly; the public GOC1 dump is f32 and would round.
void write_state(const std::string& path, const std::vector<SemanticGaussian>& gs,
                 const std::vector<VecX>& queries) {
  detail::FileWriter w(path);
  w.magic("GST1");
  w.u64(gs.size());
  w.u32(gs.empty() ? 0 : static_cast<std::uint32_t>(gs[0].logits.size()));
  w.u32(queries.empty() ? 0 : static_cast<std::uint32_t>(queries[0].size()));
  for (const auto& g : gs) {
    for (int a = 0; a < 3; ++a) w.f64(g.mean[a]);
    for (int a = 0; a < 4; ++a) w.f64(g.rotation[a]);
    for (int a = 0; a < 3; ++a) w.f64(g.scale[a]);
    w.f64(g.opacity);
    for (Eigen::Index c = 0; c < g.logits.size(); ++c) w.f64(g.logits[c]);
  }
  for (const VecX& q : queries)
    for (Eigen::Index k = 0; k < q.size(); ++k) w.f64(q[k]);
  w.finish();
}

std::pair<std::vector<SemanticGaussian>, std::vector<VecX>> read_state(
    const std::string& path) {
  detail::FileReader r(path);
  r.expect_magic("GST1");
  const std::uint64_t count = r.u64();
  const std::uint32_t n_classes = r.u32();
  const std::uint32_t m = r.u32();
  std::vector<SemanticGaussian> gs(count);
  for (auto& g : gs) {
    for (int a = 0; a < 3; ++a) g.mean[a] = r.f64();
    for (int a = 0; a < 4; ++a) g.rotation[a] = r.f64();
    for (int a = 0; a < 3; ++a) g.scale[a] = r.f64();
    g.opacity = r.f64();
    g.logits.resize(n_classes);
    for (std::uint32_t c = 0; c < n_classes; ++c) g.logits[c] = r.f64();
  }
  std::vector<VecX> queries(count, VecX::Zero(m));
  for (auto& q : queries)
    for (std::uint32_t k = 0; k < m; ++k) q[k] = r.f64();
  return {std::move(gs), std::move(queries)};
}

int cmd_forward(const CommonOpts& opts, const std::string& init_state,
                const std::string& dump_state) {
  const KeyValueConfig cfg = KeyValueConfig::parse_file(opts.config);
  const SceneArtifacts art = load_scene_dir(opts.scene);
  const SceneSpec scene = scene_from_config(cfg);
  const int threads = resolved_threads(opts.threads);
  const std::uint64_t seed = resolved_seed(cfg, opts);
  ensure_out_dir(opts.out);

  AttentionDims dims;
  dims.m = static_cast<int>(cfg.get_int("m"));
  dims.m_c = static_cast<int>(cfg.get_int_or("m_c", static_cast<long long>(art.gt.n_classes)));
  dims.hidden = static_cast<int>(cfg.get_int("hidden"));
  dims.n_classes = static_cast<int>(art.gt.n_classes);
  dims.n_cameras = static_cast<int>(art.pyramids.size());
  dims.n_scales = static_cast<int>(cfg.get_int_or("pyramid_scales", 4));
  dims.n_r1 = static_cast<int>(cfg.get_int_or("n_r1", 4));
  dims.n_r2 = static_cast<int>(cfg.get_int_or("n_r2", 2));
  dims.validate();

  if (scene.rig.size() != art.pyramids.size())
    throw std::invalid_argument("config lists " + std::to_string(scene.rig.size()) +
                                " cameras but the scene has " +
                                std::to_string(art.pyramids.size()) + " pyramids");
  for (const auto& pyr : art.pyramids) {
    if (static_cast<int>(pyr.size()) != dims.n_scales)
      throw std::invalid_argument("pyramid scale count does not match pyramid_scales");
    if (pyr[0].channels != dims.m_c)
      throw std::invalid_argument("pyramid channels do not match m_c");
  }

  // Depth distributions come from the sweeps: project the aggregate cloud
  // into each camera at each scale and one-hot the measured bins.
  const DepthBins bins =
      DepthBins::linear(static_cast<int>(cfg.get_int_or("depth_bins", 64)),
                        cfg.get_double_or("depth_max", 51.2));
  std::vector<CameraPyramid> pyramids(art.pyramids.size());
  for (std::size_t c = 0; c < art.pyramids.size(); ++c) {
    pyramids[c].features = art.pyramids[c];
    for (int k = 0; k < dims.n_scales; ++k) {
      const SparseDepthMap dm = project_depth(art.cloud, scene.rig[c], k, bins.d_max());
      pyramids[c].depths.push_back(build_depth_distribution(dm, bins));
    }
  }

  const int blocks_n = static_cast<int>(cfg.get_int("blocks"));
  if (blocks_n < 1) throw std::invalid_argument("blocks must be at least 1");
  const std::string weights = cfg.get_string("weights");
  std::vector<BlockWeights> blocks;
  if (weights == "zero") {
    BlockWeights bw = zero_block_weights(dims);
    bw.conv_cell_size = cfg.get_double_or("conv_cell_size", 1.0);
    blocks.assign(blocks_n, bw);
  } else if (weights == "random") {
    RngSequence rng(static_cast<std::uint64_t>(cfg.get_int_or("weights_seed",
                                                              static_cast<long long>(seed))));
    const double spread = cfg.get_double_or("weight_spread", 0.1);
    for (int b = 0; b < blocks_n; ++b) {
      BlockWeights bw = random_block_weights(dims, rng, spread);
      bw.conv_cell_size = cfg.get_double_or("conv_cell_size", 1.0);
      blocks.push_back(std::move(bw));
    }
  } else {
    const auto [file_dims, bw] = read_block_weights(weights);
    if (file_dims.m != dims.m || file_dims.m_c != dims.m_c ||
        file_dims.hidden != dims.hidden || file_dims.n_classes != dims.n_classes ||
        file_dims.n_cameras != dims.n_cameras || file_dims.n_scales != dims.n_scales ||
        file_dims.n_r1 != dims.n_r1 || file_dims.n_r2 != dims.n_r2)
      throw std::invalid_argument(weights + ": weight shapes disagree with the config");
    blocks.assign(blocks_n, bw);
  }

  std::vector<SemanticGaussian> gaussians;
  std::vector<VecX> queries;
  if (!init_state.empty()) {
    std::tie(gaussians, queries) = read_state(init_state);
    if (!gaussians.empty() &&
        (gaussians[0].logits.size() != dims.n_classes ||
         queries[0].size() != dims.m))
      throw std::invalid_argument(init_state + ": state shapes disagree with the config");
  } else {
    FitConfig fc;
    fc.n_gaussians = static_cast<std::size_t>(cfg.get_int("n_gaussians"));
    fc.rng_seed = seed;
    gaussians =
        init_gaussians(voxelize(art.cloud, art.gt.spec),
                       fit_init_config(art.gt.spec, art.gt.n_classes, fc));
    queries.assign(gaussians.size(), VecX::Zero(dims.m));
  }

  run_blocks(gaussians, queries, scene.rig, pyramids, blocks, dims, threads);

  const double kappa = cfg.get_double_or("kappa", 3.0);
  const double kappa_pad = cfg.get_double_or("kappa_pad", 3.5);
  const SpatialIndex index = build_index(gaussians, kappa, kappa_pad);
  const OccupancyGrid pred =
      splat(gaussians, index, art.gt.spec, art.gt.n_classes,
            static_cast<std::size_t>(cfg.get_int_or("empty_index", 0)),
            cfg.get_double_or("empty_bias", 1.0), threads);

  write_gaussians(join(opts.out, "gaussians.goc1"), gaussians);
  write_grid(join(opts.out, "pred.ogr1"), pred);
  if (!dump_state.empty()) write_state(dump_state, gaussians, queries);
  std::printf("refined %zu Gaussians through %d block(s)\n", gaussians.size(), blocks_n);
  return 0;
}

// -------------------------------------------------------------------- eval

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& out, std::size_t empty_index) {
  const OccupancyGrid pred = read_grid(pred_path);
  const OccupancyGrid gt = read_grid(gt_path);
  if (!gt.is_labels())
    throw std::invalid_argument(gt_path + ": ground truth must carry labels");
  const MetricsResult m = evaluate_prediction(pred, gt, empty_index);
  if (!out.empty()) write_metrics_csv(out, m);
  print_metrics(m, gt_has_occupied(gt, empty_index));
  return 0;
}

// ---------------------------------------------------------- splat-multires

int cmd_splat_multires(const CommonOpts& opts) {
  const KeyValueConfig cfg = KeyValueConfig::parse_file(opts.config);
  const auto gaussians = read_gaussians(cfg.get_string("gaussians"));
  const std::size_t n_classes =
      gaussians.empty() ? static_cast<std::size_t>(cfg.get_int("classes"))
                        : static_cast<std::size_t>(gaussians[0].logits.size());
  const std::vector<double> lo = cfg.get_doubles("grid_min", 3);
  ensure_out_dir(opts.out);

  std::vector<GridSpec> specs;
  for (const auto& e : cfg.all("multires")) {
    const std::vector<double> v = cfg.split_doubles(e);
    if (v.size() != 6)
      throw ConfigError(cfg.name() + " line " + std::to_string(e.line) +
                        ": multires expects rx ry rz nx ny nz");
    GridSpec spec;
    spec.origin = Vec3(lo[0], lo[1], lo[2]);
    spec.resolution = Vec3(v[0], v[1], v[2]);
    spec.counts = {static_cast<std::int64_t>(v[3]), static_cast<std::int64_t>(v[4]),
                   static_cast<std::int64_t>(v[5])};
    spec.validate();
    specs.push_back(spec);
  }
  if (specs.empty()) throw ConfigError(cfg.name() + ": needs at least one multires line");
  for (const GridSpec& spec : specs)
    if (!spec.max_corner().isApprox(specs[0].max_corner(), 1e-9))
      throw std::invalid_argument("multires grids must share one extent");

  const double kappa = cfg.get_double_or("kappa", 3.0);
  const double kappa_pad = cfg.get_double_or("kappa_pad", 3.5);
  const double b_empty = cfg.get_double_or("empty_bias", 1.0);
  const std::size_t empty_index = static_cast<std::size_t>(cfg.get_int_or("empty_index", 0));
  const int threads = resolved_threads(opts.threads);

  const SpatialIndex index = build_index(gaussians, kappa, kappa_pad);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const OccupancyGrid pred =
        splat(gaussians, index, specs[i], n_classes, empty_index, b_empty, threads);
    write_grid(join(opts.out, numbered("pred", i, "ogr1")), pred);
    std::printf("grid %zu: %lld x %lld x %lld at (%.3g, %.3g, %.3g) m\n", i,
                static_cast<long long>(specs[i].counts[0]),
                static_cast<long long>(specs[i].counts[1]),
                static_cast<long long>(specs[i].counts[2]),
                specs[i].resolution.x(), specs[i].resolution.y(),
                specs[i].resolution.z());
  }
  return 0;
}

// --------------------------------------------------------------- export-ply

int cmd_export_ply(const std::string& gaussians_path, const std::string& grid_path,
                   const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  if (gaussians_path.empty() == grid_path.empty())
    throw ConfigError("pass exactly one of --gaussians or --grid");
  if (!gaussians_path.empty()) {
    write_ply_gaussians(out, read_gaussians(gaussians_path));
  } else {
    write_ply_grid(out, read_grid(grid_path));
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian semantic occupancy toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string pred_path, gt_path, gaussians_path, grid_path;
  std::string init_state, dump_state;
  std::size_t eval_empty_index = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opts.config, "key = value configuration file");
    if (needs_config) c->required();
    sub->add_option("--out", opts.out, "output file or directory");
    sub->add_option("--seed", opts.seed, "override the config seed");
    sub->add_option("--threads", opts.threads, "worker threads (default: hardware)");
  };

  auto* synth = app.add_subcommand("synth", "generate scene artifacts");
  add_common(synth, true);

  auto* fit = app.add_subcommand("fit", "fit Gaussians to a synthesized scene");
  add_common(fit, true);
  fit->add_option("--scene", opts.scene, "directory written by synth")->required();
  fit->add_flag("--dump-trace", opts.dump_trace, "write the per-iteration loss CSV");

  auto* forward = app.add_subcommand("forward", "refine initialized Gaussians through blocks");
  add_common(forward, true);
  forward->add_option("--scene", opts.scene, "directory written by synth")->required();
  forward->add_option("--init-state", init_state, "resume from a state dump");
  forward->add_option("--dump-state", dump_state, "write the exact f64 state");

  auto* eval = app.add_subcommand("eval", "score a prediction against ground truth");
  eval->add_option("--pred", pred_path, "predicted grid (.ogr1)")->required();
  eval->add_option("--gt", gt_path, "ground-truth label grid (.ogr1)")->required();
  eval->add_option("--out", opts.out, "metrics CSV path");
  eval->add_option("--empty-index", eval_empty_index, "empty class index (default 0)");

  auto* multires = app.add_subcommand("splat-multires", "splat one Gaussian set at several resolutions");
  add_common(multires, true);

  auto* ply = app.add_subcommand("export-ply", "export Gaussians or a grid as ASCII PLY");
  ply->add_option("--gaussians", gaussians_path, "Gaussian set (.goc1)");
  ply->add_option("--grid", grid_path, "occupancy grid (.ogr1)");
  ply->add_option("--out", opts.out, "PLY path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(opts);
    if (fit->parsed()) return cmd_fit(opts);
    if (forward->parsed()) return cmd_forward(opts, init_state, dump_state);
    if (eval->parsed()) return cmd_eval(pred_path, gt_path, opts.out, eval_empty_index);
    if (multires->parsed()) return cmd_splat_multires(opts);
    if (ply->parsed()) return cmd_export_ply(gaussians_path, grid_path, opts.out);
  } catch (const NumericalAbort& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
