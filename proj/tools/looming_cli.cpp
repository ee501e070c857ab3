// looming: command-line driver for the looming pipeline.
//
//   looming simulate  --out DIR [--scene FILE] [--frames N] [--yaw-rate W] [--bin]
//   looming project   IN.bin OUT.rgrid [--reduce min|mean]
//   looming loom-grid PREV CURR OUT_PREFIX
//   looming loom-imu  SCAN OUT_PREFIX [--ego FILE [--time T] | --velocity X,Y,Z]
//   looming threat    IN.lgrid OUT.ppm
//   looming eval      EST.lgrid TRUTH.lgrid [--ranges TRUTH.rgrid] [--min-frac10 F] [--max-median M]
//   looming bench     [PREV.bin CURR.bin] [--iterations N] [--max-ms MS]
//
// Shared flags (also accepted as key=value lines in --config FILE; flags win):
//   --grid WxH --phi-span MIN,MAX --dt S --thresholds L1,L2,L3 --clamp L
//   --fill N --decimate A,B --scale L --noise SIGMA --seed N --edge N
//   --velocity X,Y,Z
//
// Exit codes: 0 success, 1 validation/parse error, 2 acceptance-bound failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "looming/looming.hpp"

namespace fs = std::filesystem;
using namespace looming;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitBound = 2;

bool has_extension(const fs::path& p, const char* ext) { return p.extension() == ext; }

RangeImage condition(RangeImage img, const RunConfig& cfg) {
  if (cfg.fill > 0) img = fill_gaps(img, cfg.fill);
  if (cfg.decimate_theta > 1 || cfg.decimate_phi > 1) img = decimate(img, cfg.decimate_theta, cfg.decimate_phi);
  return img;
}

// .bin scans are projected onto the configured grid; .rgrid files are read
// as-is. Either way the configured fill/decimation is applied.
RangeImage load_scan(const fs::path& path, const RunConfig& cfg, CellReduction reduction = CellReduction::Min) {
  if (has_extension(path, ".bin")) {
    return condition(project(io::read_velodyne_bin(path).cloud, cfg.grid, {kDefaultMaxRange, reduction}), cfg);
  }
  return condition(io::read_rgrid(path), cfg);
}

void write_map_outputs(const LoomingMap& map, const RunConfig& cfg, const std::string& prefix) {
  io::write_lgrid(map, prefix + ".lgrid");
  io::write_looming_ppm(map, cfg.scale, prefix + ".ppm");
  std::cout << "cells=" << map.valid_count() << " clamped=" << map.clamped << "\n";
}

std::string frame_name(const char* stem, int k, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03d%s", stem, k, ext);
  return buf;
}

int cmd_simulate(const RunConfig& cfg, const std::string& scene_file, const std::string& out_dir, int frames,
                 double yaw_rate, bool write_bin) {
  synth::Scene scene;
  if (scene_file.empty()) {
    scene = synth::demo_scene();
  } else {
    std::ifstream in(scene_file);
    if (!in) throw IoError("cannot open scene file '" + scene_file + "'");
    scene = synth::parse_scene(in);
  }
  if (frames < 1) throw InvalidInput("simulate: --frames must be >= 1");
  fs::create_directories(out_dir);

  synth::VehicleState state;
  state.t = cfg.velocity.value_or(Vec3{5.0, 0.0, 0.0});
  state.omega_z = yaw_rate;
  synth::SimOptions opts;
  opts.noise_sigma = cfg.noise;
  opts.clamp = cfg.clamp;
  for (int k = 0; k < frames; ++k) {
    const double time = k * cfg.dt;
    opts.seed = cfg.seed + static_cast<std::uint64_t>(k);
    const RangeImage scan = synth::simulate_scan(scene, state, cfg.grid, time, opts);
    const LoomingMap truth = synth::ground_truth_map(scene, state, cfg.grid, time, opts);
    const fs::path dir(out_dir);
    io::write_rgrid(scan, dir / frame_name("scan", k, ".rgrid"));
    io::write_lgrid(truth, dir / frame_name("truth", k, ".lgrid"));
    if (write_bin) io::write_velodyne_bin(points_of(scan), dir / frame_name("cloud", k, ".bin"));
    state = synth::advance(state, cfg.dt);
  }
  std::cout << "frames=" << frames << " dir=" << out_dir << "\n";
  return kExitOk;
}

int cmd_project(const RunConfig& cfg, const std::string& in, const std::string& out, const std::string& reduce) {
  if (reduce != "min" && reduce != "mean") throw InvalidInput("project: --reduce must be min or mean");
  const io::VelodyneScan scan = io::read_velodyne_bin(in);
  const auto reduction = reduce == "mean" ? CellReduction::Mean : CellReduction::Min;
  Projection p = project_with_stats(scan.cloud, cfg.grid, {kDefaultMaxRange, reduction});
  const RangeImage img = condition(std::move(p.image), cfg);
  io::write_rgrid(img, out);
  std::cout << "points=" << p.stats.total << " binned=" << p.stats.binned << " dropped=" << p.stats.dropped()
            << " nonfinite=" << scan.dropped_nonfinite << " valid_cells=" << img.valid_count() << "\n";
  return kExitOk;
}

int cmd_loom_grid(const RunConfig& cfg, const std::string& prev, const std::string& curr, const std::string& out) {
  const RangeImage a = load_scan(prev, cfg);
  const RangeImage b = load_scan(curr, cfg);
  write_map_outputs(loom_from_grids(a, b, cfg.dt, cfg.loom_options()), cfg, out);
  return kExitOk;
}

int cmd_loom_imu(const RunConfig& cfg, const std::string& scan_path, const std::string& out,
                 const std::string& ego_file, std::optional<double> at_time) {
  PointCloud cloud;
  if (has_extension(scan_path, ".bin")) {
    cloud = io::read_velodyne_bin(scan_path).cloud;
  } else {
    cloud = points_of(io::read_rgrid(scan_path));
  }
  Vec3 t;
  if (!ego_file.empty()) {
    t = io::read_ego_motion(ego_file).velocity_at(at_time.value_or(cloud.timestamp));
  } else if (cfg.velocity) {
    t = *cfg.velocity;
  } else {
    throw InvalidInput("loom-imu: give --ego FILE or --velocity X,Y,Z");
  }
  write_map_outputs(loom_from_velocity(cloud, t, cfg.grid, cfg.loom_options()), cfg, out);
  return kExitOk;
}

int cmd_threat(const RunConfig& cfg, const std::string& in, const std::string& out) {
  const ThreatMap threat = classify_threat(io::read_lgrid(in, cfg.clamp), cfg.thresholds);
  io::write_threat_ppm(threat, out);
  const auto c = threat.counts();
  std::cout << "none=" << c[0] << " low=" << c[1] << " medium=" << c[2] << " high=" << c[3] << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& est_path, const std::string& truth_path,
             const std::string& ranges_path, std::optional<double> min_frac10, std::optional<double> max_median) {
  const LoomingMap est = io::read_lgrid(est_path, cfg.clamp);
  LoomingMap truth = io::read_lgrid(truth_path, cfg.clamp);
  if (!ranges_path.empty()) {
    const RangeImage r = io::read_rgrid(ranges_path);
    if (!(r.spec() == truth.spec)) throw InvalidInput("eval: --ranges grid differs from the truth grid");
    truth.range.assign(r.ranges().begin(), r.ranges().end());
  }
  const ErrorStats s = compare_maps(est, truth, cfg.edge);
  std::printf("median=%.9g p90=%.9g frac10=%.9g cells=%zu clamped=%zu\n", s.median, s.p90, s.frac10, s.cells,
              s.clamped);
  if (s.empty) {
    std::cerr << "eval: no cell is VALID in both maps outside the edge band\n";
    return kExitBound;
  }
  bool ok = true;
  if (min_frac10 && s.frac10 < *min_frac10) {
    std::cerr << "eval: frac10 " << s.frac10 << " below bound " << *min_frac10 << "\n";
    ok = false;
  }
  if (max_median && s.median > *max_median) {
    std::cerr << "eval: median " << s.median << " above bound " << *max_median << "\n";
    ok = false;
  }
  return ok ? kExitOk : kExitBound;
}

// Dense street-like scene used when bench gets no scans: ground, two
// building rows and a few obstacles, giving ~1e5 returns per sweep.
synth::Scene bench_scene() {
  return synth::parse_scene(std::string(
      "PLANE 0 0 -1.73  0 0 1  0 0 0\n"
      "PLANE 0 12 0  0 -1 0  0 0 0\n"
      "PLANE 0 -12 0  0 1 0  0 0 0\n"
      "BOX 25 -3 -1.73  29 -1 0  0 0 0\n"
      "SPHERE 15 4 -0.5  1.2  0 0 0\n"
      "SPHERE -20 -5 -0.5  2.0  0 0 0\n"));
}

int cmd_bench(const RunConfig& cfg, const std::vector<std::string>& scans, int iterations,
              std::optional<double> max_ms) {
  if (iterations < 1) throw InvalidInput("bench: --iterations must be >= 1");
  PointCloud prev, curr;
  if (scans.size() == 2) {
    prev = io::read_velodyne_bin(scans[0]).cloud;
    curr = io::read_velodyne_bin(scans[1]).cloud;
  } else if (scans.empty()) {
    // Sensor-native azimuth resolution (0.09 deg -> 4000 columns).
    GridSpec native = cfg.grid;
    native.width = 4000;
    synth::VehicleState state;
    state.t = cfg.velocity.value_or(Vec3{5.0, 0.0, 0.0});
    const synth::Scene scene = bench_scene();
    prev = synth::simulate_cloud(scene, state, native, 0.0);
    curr = synth::simulate_cloud(scene, synth::advance(state, cfg.dt), native, cfg.dt);
  } else {
    throw InvalidInput("bench: give two .bin scans or none");
  }

  std::vector<double> ms;
  std::size_t sink = 0;
  for (int k = 0; k < iterations; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const RangeImage a = project(prev, cfg.grid);
    const RangeImage b = project(curr, cfg.grid);
    const LoomingMap map = loom_from_grids(a, b, cfg.dt, cfg.loom_options());
    const auto t1 = std::chrono::steady_clock::now();
    sink += map.valid_count();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  const double median = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  std::printf("median_ms=%.3f min_ms=%.3f max_ms=%.3f points=%zu,%zu iterations=%d cells=%zu\n", median, ms.front(),
              ms.back(), prev.size(), curr.size(), iterations, sink / n);
  if (max_ms && median > *max_ms) {
    std::cerr << "bench: median " << median << " ms above budget " << *max_ms << " ms\n";
    return kExitBound;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Looming estimation from LiDAR range data"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "Flat key=value config file");
  std::map<std::string, std::string> flag_values;
  const std::map<std::string, std::string> help = {
      {"grid", "Grid size WxH (default 2000x64)"},
      {"phi-span", "Elevation span MIN,MAX in degrees (default -24.8,2)"},
      {"dt", "Time between scans, s (default 0.1)"},
      {"thresholds", "Threat thresholds L1,L2,L3 in 1/s (default 0.2,0.5,1)"},
      {"clamp", "Looming magnitude clamp, 1/s (default 20)"},
      {"fill", "Fill EMPTY runs up to N cells along each row (default 0)"},
      {"decimate", "Block-min decimation factors A,B (default 1,1)"},
      {"scale", "|L| at full PPM color intensity (default 1)"},
      {"noise", "Simulated range noise sigma, m (default 0)"},
      {"seed", "Noise seed (default 0)"},
      {"edge", "Edge-exclusion radius for eval, cells (default 1)"},
      {"velocity", "Sensor-frame translation X,Y,Z in m/s"},
  };
  for (const std::string& key : config_keys()) {
    app.add_option("--" + key, flag_values[key], help.at(key));
  }

  auto* sim = app.add_subcommand("simulate", "Ray-cast scans and ground-truth looming for a scene");
  std::string scene_file, out_dir;
  int frames = 2;
  double yaw_rate = 0.0;
  bool write_bin = false;
  sim->add_option("--scene", scene_file, "Scene file (default: built-in demo scene)");
  sim->add_option("--out", out_dir, "Output directory")->required();
  sim->add_option("--frames", frames, "Number of frames");
  sim->add_option("--yaw-rate", yaw_rate, "Vehicle yaw rate, rad/s");
  sim->add_flag("--bin", write_bin, "Also write KITTI-format .bin clouds");

  auto* proj = app.add_subcommand("project", "Project a KITTI .bin scan into an RGRID range image");
  std::string proj_in, proj_out, reduce = "min";
  proj->add_option("input", proj_in)->required();
  proj->add_option("output", proj_out)->required();
  proj->add_option("--reduce", reduce, "Per-cell reduction: min or mean");

  auto* grid = app.add_subcommand("loom-grid", "Looming from two consecutive scans");
  std::string prev_scan, curr_scan, grid_out;
  grid->add_option("prev", prev_scan)->required();
  grid->add_option("curr", curr_scan)->required();
  grid->add_option("out", grid_out, "Output prefix (.lgrid and .ppm are appended)")->required();

  auto* imu = app.add_subcommand("loom-imu", "Looming from one scan and the translation velocity");
  std::string imu_scan, imu_out, ego_file;
  std::optional<double> imu_time;
  imu->add_option("scan", imu_scan)->required();
  imu->add_option("out", imu_out, "Output prefix (.lgrid and .ppm are appended)")->required();
  imu->add_option("--ego", ego_file, "Ego-motion CSV (timestamp,vx,vy,vz)");
  imu->add_option("--time", imu_time, "Query time in the ego-motion file (default: scan timestamp)");

  auto* threat = app.add_subcommand("threat", "Classify a looming grid into threat zones");
  std::string threat_in, threat_out;
  threat->add_option("input", threat_in)->required();
  threat->add_option("output", threat_out)->required();

  auto* eval = app.add_subcommand("eval", "Compare an estimated looming grid with ground truth");
  std::string est_path, truth_path, ranges_path;
  std::optional<double> min_frac10, max_median;
  eval->add_option("estimate", est_path)->required();
  eval->add_option("truth", truth_path)->required();
  eval->add_option("--ranges", ranges_path, "Truth RGRID used to locate range discontinuities");
  eval->add_option("--min-frac10", min_frac10, "Fail unless frac10 >= F");
  eval->add_option("--max-median", max_median, "Fail unless median <= M");

  auto* bench = app.add_subcommand("bench", "Time project + loom_from_grids for a scan pair");
  std::vector<std::string> bench_scans;
  int iterations = 20;
  std::optional<double> max_ms;
  bench->add_option("scans", bench_scans, "Two .bin scans (default: synthetic street pair)");
  bench->add_option("--iterations", iterations);
  bench->add_option("--max-ms", max_ms, "Fail if the median exceeds this budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    std::map<std::string, std::string> file_settings;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw IoError("cannot open config '" + config_path + "'");
      file_settings = parse_config(in);
    }
    std::map<std::string, std::string> given;
    for (const auto& [key, value] : flag_values) {
      if (app.count("--" + key) > 0) given[key] = value;
    }
    const RunConfig cfg = make_config(file_settings, given);

    if (*sim) return cmd_simulate(cfg, scene_file, out_dir, frames, yaw_rate, write_bin);
    if (*proj) return cmd_project(cfg, proj_in, proj_out, reduce);
    if (*grid) return cmd_loom_grid(cfg, prev_scan, curr_scan, grid_out);
    if (*imu) return cmd_loom_imu(cfg, imu_scan, imu_out, ego_file, imu_time);
    if (*threat) return cmd_threat(cfg, threat_in, threat_out);
    if (*eval) return cmd_eval(cfg, est_path, truth_path, ranges_path, min_frac10, max_median);
    if (*bench) return cmd_bench(cfg, bench_scans, iterations, max_ms);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
