// mio - mmWave-inertial odometry toolkit
//
// Subcommands: simulate, train, infer (offline), run (real time), serve
// (pose collector), eval. Exit codes: 0 success, 1 usage error, 2 runtime
// error. Diagnostics go to stderr; machine output goes to files.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mio/dataset.hpp"
#include "mio/eval.hpp"
#include "mio/model.hpp"
#include "mio/pipeline.hpp"
#include "mio/sequence.hpp"
#include "mio/wire.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};
void handle_sigint(int) { g_interrupted.store(true); }

json load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw mio::IoError("cannot open config file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw mio::IoError("config parse error in " + path + ": " + e.what());
  }
  return j;
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw CLI::ValidationError("unknown config key '" + key + "' in " + where);
  }
}

mio::Floorplan floorplan_from_json(const json& j) {
  reject_unknown_keys(j, {"bounds", "walls"}, "floorplan");
  mio::Floorplan plan;
  const auto& b = j.at("bounds");
  plan.bounds = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                 b.at(3).get<double>()};
  for (const auto& w : j.at("walls"))
    plan.walls.push_back({w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(),
                          w.at(3).get<double>(), w.at(4).get<double>()});
  return plan;
}

mio::MotionScript script_from_json(const json& j) {
  reject_unknown_keys(j, {"waypoints", "imu_rate", "radar_rate", "device_height"}, "script");
  mio::MotionScript s;
  for (const auto& w : j.at("waypoints"))
    s.waypoints.push_back(
        {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(), w.at(3).get<double>()});
  s.imu_rate = j.value("imu_rate", s.imu_rate);
  s.radar_rate = j.value("radar_rate", s.radar_rate);
  s.device_height = j.value("device_height", s.device_height);
  return s;
}

mio::SensorNoiseConfig noise_from_json(const json& j, mio::SensorNoiseConfig base) {
  reject_unknown_keys(j,
                      {"range_sigma", "angle_sigma", "detection_prob", "ghost_rate", "gyro_sigma",
                       "accel_sigma", "gyro_bias", "accel_bias"},
                      "noise");
  base.range_sigma = j.value("range_sigma", base.range_sigma);
  base.angle_sigma = j.value("angle_sigma", base.angle_sigma);
  base.detection_prob = j.value("detection_prob", base.detection_prob);
  base.ghost_rate = j.value("ghost_rate", base.ghost_rate);
  base.gyro_sigma = j.value("gyro_sigma", base.gyro_sigma);
  base.accel_sigma = j.value("accel_sigma", base.accel_sigma);
  if (j.contains("gyro_bias"))
    base.gyro_bias = {j["gyro_bias"].at(0).get<double>(), j["gyro_bias"].at(1).get<double>(),
                      j["gyro_bias"].at(2).get<double>()};
  if (j.contains("accel_bias"))
    base.accel_bias = {j["accel_bias"].at(0).get<double>(), j["accel_bias"].at(1).get<double>(),
                       j["accel_bias"].at(2).get<double>()};
  return base;
}

mio::RadarGeometry geometry_from_json(const json& j, mio::RadarGeometry base) {
  reject_unknown_keys(j, {"az_fov", "el_fov", "n_az", "n_el", "max_range", "max_points"},
                      "radar");
  base.az_fov = j.value("az_fov", base.az_fov);
  base.el_fov = j.value("el_fov", base.el_fov);
  base.n_az = j.value("n_az", base.n_az);
  base.n_el = j.value("n_el", base.n_el);
  base.max_range = j.value("max_range", base.max_range);
  base.max_points = j.value("max_points", base.max_points);
  return base;
}

std::vector<fs::path> split_paths(const std::vector<std::string>& args) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    std::size_t start = 0;
    while (start <= a.size()) {
      const auto comma = a.find(',', start);
      const std::string piece =
          a.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!piece.empty()) out.emplace_back(piece);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return out;
}

void require_readable(const fs::path& p, const std::string& flag) {
  if (!fs::exists(p)) throw CLI::ValidationError(flag + ": path does not exist: " + p.string());
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& args) {
  mio::Floorplan plan = mio::default_apartment();
  mio::MotionScript script = mio::default_search_script();
  mio::SensorNoiseConfig noise;
  mio::RadarGeometry geom;
  std::optional<std::uint64_t> seed = args.seed;

  if (!args.config_path.empty()) {
    const json cfg = load_config(args.config_path);
    reject_unknown_keys(cfg, {"seed", "floorplan", "script", "noise", "radar"},
                        args.config_path);
    if (cfg.contains("floorplan")) plan = floorplan_from_json(cfg["floorplan"]);
    if (cfg.contains("script")) script = script_from_json(cfg["script"]);
    if (cfg.contains("noise")) noise = noise_from_json(cfg["noise"], noise);
    if (cfg.contains("radar")) geom = geometry_from_json(cfg["radar"], geom);
    if (!seed && cfg.contains("seed")) seed = cfg["seed"].get<std::uint64_t>();
  }
  if (!seed)
    throw CLI::ValidationError("simulate needs an explicit seed (--seed or config \"seed\")");
  noise.rng_seed = *seed;

  const mio::SequenceData seq = mio::record_sequence(plan, script, geom, noise, args.out);
  std::cerr << "simulate: wrote " << seq.scans.size() << " radar frames, " << seq.imu.size()
            << " imu samples to " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::vector<std::string> data;
  std::string out;
  std::string loss_curve;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<double> lambda;
  std::optional<int> batch;
  std::optional<int> window;
  std::optional<int> height;
  std::optional<int> width;
};

int run_train(const TrainArgs& args) {
  mio::TrainingConfig tc;
  mio::ModelConfig mc;
  std::vector<fs::path> data = split_paths(args.data);
  std::optional<std::uint64_t> seed = args.seed;
  std::optional<int> epochs = args.epochs;

  if (!args.config_path.empty()) {
    const json cfg = load_config(args.config_path);
    reject_unknown_keys(
        cfg, {"seed", "epochs", "lr", "lambda", "batch", "window", "height", "width", "data"},
        args.config_path);
    if (cfg.contains("data"))
      for (const auto& d : cfg["data"]) data.emplace_back(d.get<std::string>());
    if (!seed && cfg.contains("seed")) seed = cfg["seed"].get<std::uint64_t>();
    if (!epochs && cfg.contains("epochs")) epochs = cfg["epochs"].get<int>();
    tc.learning_rate = cfg.value("lr", tc.learning_rate);
    tc.lambda = cfg.value("lambda", tc.lambda);
    tc.batch_size = cfg.value("batch", tc.batch_size);
    tc.tbptt_window = cfg.value("window", tc.tbptt_window);
    mc.image_height = cfg.value("height", mc.image_height);
    mc.image_width = cfg.value("width", mc.image_width);
  }
  if (args.lr) tc.learning_rate = *args.lr;
  if (args.lambda) tc.lambda = *args.lambda;
  if (args.batch) tc.batch_size = *args.batch;
  if (args.window) tc.tbptt_window = *args.window;
  if (args.height) mc.image_height = *args.height;
  if (args.width) mc.image_width = *args.width;
  if (data.empty()) throw CLI::ValidationError("train needs --data (or config \"data\")");
  if (!seed) throw CLI::ValidationError("train needs an explicit seed (--seed or config \"seed\")");
  if (!epochs) throw CLI::ValidationError("train needs --epochs (or config \"epochs\")");
  tc.rng_seed = *seed;
  tc.epochs = *epochs;

  for (const auto& d : data) require_readable(d, "--data");
  mio::Dataset dataset;
  mio::ImagingConfig icfg;
  for (const auto& d : data) {
    const mio::SequenceData seq = mio::read_sequence(d);
    icfg = mio::ImagingConfig::from_geometry(seq.geometry, mc.image_height, mc.image_width);
    dataset.push_back(mio::build_samples(seq, icfg));
    std::cerr << "train: loaded " << dataset.back().size() << " frame pairs from " << d << "\n";
  }

  mio::FusionModel model(mc, tc.rng_seed);
  const auto t0 = std::chrono::steady_clock::now();
  const mio::TrainResult result = mio::train(model, dataset, tc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  model.save(args.out);
  if (!args.loss_curve.empty()) mio::write_loss_curve(args.loss_curve, result.epoch_mean_loss);
  std::cerr << "train: " << tc.epochs << " epochs in " << secs << " s; loss "
            << result.epoch_mean_loss.front() << " -> " << result.epoch_mean_loss.back()
            << "; saved " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// infer / run
// ---------------------------------------------------------------------------

struct PipelineArgs {
  std::string data;
  std::string model;
  std::string out;
  std::string uplink;
  int overlay_depth = 3;
};

int run_pipeline_cmd(const PipelineArgs& args, mio::PipelineMode mode) {
  require_readable(args.data, "--data");
  require_readable(args.model, "--model");
  const mio::SequenceData seq = mio::read_sequence(args.data);
  const mio::FusionModel model = mio::FusionModel::load(args.model);

  mio::PipelineConfig cfg;
  cfg.mode = mode;
  cfg.overlay_depth = args.overlay_depth;
  cfg.image_height = model.config().image_height;
  cfg.image_width = model.config().image_width;
  cfg.uplink_addr = args.uplink;

  const mio::PipelineResult result = mio::run_pipeline(seq, model, cfg);

  fs::create_directories(args.out);
  mio::write_trajectory_csv(fs::path(args.out) / "trajectory.csv", result.trajectory);
  {
    std::ofstream f(fs::path(args.out) / "stats.json", std::ios::binary);
    f << result.stats.to_json().dump(2) << '\n';
  }
  std::cerr << (mode == mio::PipelineMode::offline ? "infer" : "run") << ": processed "
            << result.stats.processed << " frames, dropped " << result.stats.dropped << ", "
            << result.stats.fps << " fps\n";
  return 0;
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string bind = "127.0.0.1:9000";
  std::string out = ".";
  double duration = 0.0;  // 0 = run until interrupted
};

int run_serve(const ServeArgs& args) {
  const auto [host, port] = mio::parse_host_port(args.bind);
  mio::PoseCollector server(host, port, args.out);
  std::cerr << "serve: listening on " << host << ":" << server.port() << ", writing to "
            << args.out << "\n";
  std::signal(SIGINT, handle_sigint);
  std::signal(SIGTERM, handle_sigint);
  const auto t0 = std::chrono::steady_clock::now();
  while (!g_interrupted.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (args.duration > 0.0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >=
            args.duration)
      break;
  }
  server.stop();
  std::cerr << "serve: " << server.connections_served() << " connection(s) served\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string est;
  std::string truth;
  std::string out;
  std::string baseline;
  std::string seq;
  int delta = 10;
  double tol = 0.005;
};

int run_eval(const EvalArgs& args) {
  require_readable(args.est, "--est");
  require_readable(args.truth, "--truth");
  const mio::Trajectory est = mio::read_trajectory_csv(args.est);
  const mio::Trajectory truth = mio::read_trajectory_csv(args.truth);

  mio::Trajectory baseline;
  mio::ReportOptions opts;
  opts.rpe_delta = args.delta;
  opts.assoc_tol = args.tol;
  if (!args.baseline.empty()) {
    require_readable(args.baseline, "--baseline");
    baseline = mio::read_trajectory_csv(args.baseline);
    opts.baseline_kind = "trajectory_csv";
  } else if (!args.seq.empty()) {
    require_readable(args.seq, "--seq");
    const mio::SequenceData seq = mio::read_sequence(args.seq);
    baseline = mio::imu_dead_reckoning(seq.imu, truth.front().pose);
    opts.baseline_kind = "imu_dead_reckoning";
  } else {
    // static origin-hold baseline over the estimate's timestamps
    for (const mio::TimedPose& e : est) baseline.push_back({e.t, est.front().pose});
    opts.baseline_kind = "origin_hold";
  }

  const json metrics = mio::report(est, truth, baseline, args.out, opts);
  std::cout << metrics.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmWave-inertial indoor positioning toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "synthesize a sensor sequence into a directory");
  c_sim->add_option("--config", sim.config_path, "JSON config (floorplan, script, noise, radar)");
  c_sim->add_option("--out", sim.out, "output sequence directory")->required();
  c_sim->add_option("--seed", sim.seed, "rng seed (required here or in config)");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train the fusion model on recorded sequences");
  c_train->add_option("--config", tr.config_path, "JSON config mirroring these flags");
  c_train->add_option("--data", tr.data, "sequence directories (repeat or comma-separate)");
  c_train->add_option("--out", tr.out, "output checkpoint file")->required();
  c_train->add_option("--loss-curve", tr.loss_curve, "write per-epoch mean loss CSV here");
  c_train->add_option("--seed", tr.seed, "rng seed (required here or in config)");
  c_train->add_option("--epochs", tr.epochs, "training epochs (required here or in config)");
  c_train->add_option("--lr", tr.lr, "learning rate");
  c_train->add_option("--lambda", tr.lambda, "rotation loss weight");
  c_train->add_option("--batch", tr.batch, "windows per parameter update");
  c_train->add_option("--window", tr.window, "truncated-backprop window length");
  c_train->add_option("--height", tr.height, "panoramic image height");
  c_train->add_option("--width", tr.width, "panoramic image width");

  PipelineArgs inf;
  auto* c_infer = app.add_subcommand("infer", "offline pipeline over a recorded sequence");
  c_infer->add_option("--data", inf.data, "sequence directory")->required();
  c_infer->add_option("--model", inf.model, "model checkpoint")->required();
  c_infer->add_option("--out", inf.out, "output directory")->required();
  c_infer->add_option("--overlay-depth", inf.overlay_depth, "scans per overlay");

  PipelineArgs runp;
  auto* c_run = app.add_subcommand("run", "real-time pipeline with source-paced ingestion");
  c_run->add_option("--data", runp.data, "sequence directory")->required();
  c_run->add_option("--model", runp.model, "model checkpoint")->required();
  c_run->add_option("--out", runp.out, "output directory")->required();
  c_run->add_option("--uplink", runp.uplink, "pose sink host:port (MIO_UPLINK_ADDR overrides)");
  c_run->add_option("--overlay-depth", runp.overlay_depth, "scans per overlay");

  ServeArgs srv;
  auto* c_serve = app.add_subcommand("serve", "pose collection server");
  c_serve->add_option("--bind", srv.bind, "bind address host:port");
  c_serve->add_option("--out", srv.out, "directory for per-connection CSVs");
  c_serve->add_option("--duration", srv.duration, "stop after this many seconds (0 = run)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "trajectory metrics and plots");
  c_eval->add_option("--est", ev.est, "estimated trajectory CSV")->required();
  c_eval->add_option("--truth", ev.truth, "ground-truth trajectory CSV")->required();
  c_eval->add_option("--out", ev.out, "report directory")->required();
  c_eval->add_option("--baseline", ev.baseline, "baseline trajectory CSV");
  c_eval->add_option("--seq", ev.seq, "sequence directory for an IMU dead-reckoning baseline");
  c_eval->add_option("--delta", ev.delta, "RPE interval in frames");
  c_eval->add_option("--tol", ev.tol, "timestamp association tolerance (s)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    if (c_sim->parsed()) return run_simulate(sim);
    if (c_train->parsed()) return run_train(tr);
    if (c_infer->parsed()) return run_pipeline_cmd(inf, mio::PipelineMode::offline);
    if (c_run->parsed()) return run_pipeline_cmd(runp, mio::PipelineMode::realtime);
    if (c_serve->parsed()) return run_serve(srv);
    if (c_eval->parsed()) return run_eval(ev);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const mio::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
