#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mio/csvio.hpp"
#include "mio/errors.hpp"
#include "mio/world.hpp"

namespace mio {

// A recorded sequence: ground truth, IMU stream and radar scans, as laid out
// on disk by record_sequence (meta.json, truth.csv, imu.csv, radar/*.csv).
struct SequenceData {
  Floorplan plan;
  MotionScript script;
  SensorNoiseConfig noise;
  RadarGeometry geometry;
  Trajectory truth;
  std::vector<ImuSample> imu;
  std::vector<RadarScan> scans;
};

namespace detail {

inline nlohmann::json vec3_json(const Vec3& v) { return {v.x, v.y, v.z}; }

inline Vec3 vec3_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline nlohmann::json meta_json(const SequenceData& seq) {
  nlohmann::json j;
  j["format"] = "mio-sequence";
  j["version"] = 1;
  j["imu_rate"] = seq.script.imu_rate;
  j["radar_rate"] = seq.script.radar_rate;
  j["device_height"] = seq.script.device_height;

  nlohmann::json waypoints = nlohmann::json::array();
  for (const Waypoint& w : seq.script.waypoints) waypoints.push_back({w.t, w.x, w.y, w.yaw});
  j["script"]["waypoints"] = waypoints;

  nlohmann::json walls = nlohmann::json::array();
  for (const Wall& w : seq.plan.walls) walls.push_back({w.x1, w.y1, w.x2, w.y2, w.height});
  j["floorplan"]["walls"] = walls;
  j["floorplan"]["bounds"] = {seq.plan.bounds.min_x, seq.plan.bounds.min_y, seq.plan.bounds.max_x,
                              seq.plan.bounds.max_y};

  const SensorNoiseConfig& n = seq.noise;
  j["noise"] = {{"range_sigma", n.range_sigma},
                {"angle_sigma", n.angle_sigma},
                {"detection_prob", n.detection_prob},
                {"ghost_rate", n.ghost_rate},
                {"gyro_sigma", n.gyro_sigma},
                {"accel_sigma", n.accel_sigma},
                {"gyro_bias", vec3_json(n.gyro_bias)},
                {"accel_bias", vec3_json(n.accel_bias)},
                {"rng_seed", n.rng_seed}};

  const RadarGeometry& g = seq.geometry;
  j["radar"] = {{"az_fov", g.az_fov},   {"el_fov", g.el_fov},       {"n_az", g.n_az},
                {"n_el", g.n_el},       {"max_range", g.max_range}, {"max_points", g.max_points}};

  j["counts"] = {{"imu", seq.imu.size()}, {"radar", seq.scans.size()}};
  return j;
}

inline void meta_from_json(const nlohmann::json& j, SequenceData& seq) {
  if (j.value("format", "") != "mio-sequence")
    throw IoError("meta.json: not a mio-sequence directory");
  seq.script.imu_rate = j.at("imu_rate").get<double>();
  seq.script.radar_rate = j.at("radar_rate").get<double>();
  seq.script.device_height = j.at("device_height").get<double>();
  seq.script.waypoints.clear();
  for (const auto& w : j.at("script").at("waypoints"))
    seq.script.waypoints.push_back(
        {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(), w.at(3).get<double>()});
  seq.plan.walls.clear();
  for (const auto& w : j.at("floorplan").at("walls"))
    seq.plan.walls.push_back({w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(),
                              w.at(3).get<double>(), w.at(4).get<double>()});
  const auto& b = j.at("floorplan").at("bounds");
  seq.plan.bounds = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                     b.at(3).get<double>()};
  const auto& n = j.at("noise");
  seq.noise.range_sigma = n.at("range_sigma").get<double>();
  seq.noise.angle_sigma = n.at("angle_sigma").get<double>();
  seq.noise.detection_prob = n.at("detection_prob").get<double>();
  seq.noise.ghost_rate = n.at("ghost_rate").get<double>();
  seq.noise.gyro_sigma = n.at("gyro_sigma").get<double>();
  seq.noise.accel_sigma = n.at("accel_sigma").get<double>();
  seq.noise.gyro_bias = vec3_from_json(n.at("gyro_bias"));
  seq.noise.accel_bias = vec3_from_json(n.at("accel_bias"));
  seq.noise.rng_seed = n.at("rng_seed").get<std::uint64_t>();
  const auto& g = j.at("radar");
  seq.geometry.az_fov = g.at("az_fov").get<double>();
  seq.geometry.el_fov = g.at("el_fov").get<double>();
  seq.geometry.n_az = g.at("n_az").get<int>();
  seq.geometry.n_el = g.at("n_el").get<int>();
  seq.geometry.max_range = g.at("max_range").get<double>();
  seq.geometry.max_points = g.at("max_points").get<std::size_t>();
}

inline std::string scan_filename(std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu.csv", frame);
  return buf;
}

}  // namespace detail

// Simulates the full sequence (truth + sensors) in memory.
inline SequenceData simulate_sequence(const Floorplan& plan, const MotionScript& script,
                                      const RadarGeometry& geom, const SensorNoiseConfig& cfg) {
  SequenceData seq;
  seq.plan = plan;
  seq.script = script;
  seq.noise = cfg;
  seq.geometry = geom;
  seq.truth = generate_trajectory(script, plan);
  if (seq.truth.size() < 3) throw TrajectoryTooShort("sequence shorter than 3 IMU samples");
  seq.imu = imu_stream(seq.truth, cfg);

  const double t0 = seq.truth.front().t;
  const double t1 = seq.truth.back().t;
  const double dt = 1.0 / script.radar_rate;
  // endpoint-exclusive: a 60 s script at 10 Hz yields 600 frames
  const std::size_t frames =
      std::max<long long>(1, std::llround((t1 - t0) * script.radar_rate));
  seq.scans.reserve(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    seq.scans.push_back(radar_scan(plan, script_pose_at(script, std::min(t, t1)), geom, cfg, t));
  }
  return seq;
}

inline void write_sequence(const SequenceData& seq, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "radar", ec);
  if (ec) throw IoError("cannot create sequence directory: " + dir.string());

  {
    auto f = open_out(dir / "meta.json");
    f << detail::meta_json(seq).dump(2) << '\n';
  }
  write_trajectory_csv(dir / "truth.csv", seq.truth);
  {
    auto f = open_out(dir / "imu.csv");
    f << "t,gx,gy,gz,ax,ay,az\n";
    for (const ImuSample& s : seq.imu)
      f << fmt9(s.timestamp) << ',' << fmt9(s.gyro.x) << ',' << fmt9(s.gyro.y) << ','
        << fmt9(s.gyro.z) << ',' << fmt9(s.accel.x) << ',' << fmt9(s.accel.y) << ','
        << fmt9(s.accel.z) << '\n';
  }
  {
    auto index = open_out(dir / "radar" / "index.csv");
    index << "frame,t,file\n";
    for (std::size_t k = 0; k < seq.scans.size(); ++k) {
      const std::string name = detail::scan_filename(k);
      index << k << ',' << fmt9(seq.scans[k].timestamp) << ',' << name << '\n';
      auto f = open_out(dir / "radar" / name);
      f << "x,y,z,intensity\n";
      for (const RadarPoint& p : seq.scans[k].points)
        f << fmt9(p.x) << ',' << fmt9(p.y) << ',' << fmt9(p.z) << ',' << fmt9(p.intensity) << '\n';
    }
  }
}

// Simulate and persist in one step; returns the in-memory sequence.
inline SequenceData record_sequence(const Floorplan& plan, const MotionScript& script,
                                    const RadarGeometry& geom, const SensorNoiseConfig& cfg,
                                    const std::filesystem::path& dir) {
  SequenceData seq = simulate_sequence(plan, script, geom, cfg);
  write_sequence(seq, dir);
  return seq;
}

inline SequenceData read_sequence(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  SequenceData seq;
  {
    auto f = open_in(dir / "meta.json");
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("meta.json parse error: " + std::string(e.what()));
    }
    detail::meta_from_json(j, seq);
  }
  seq.truth = read_trajectory_csv(dir / "truth.csv");
  {
    auto f = open_in(dir / "imu.csv");
    std::string line;
    if (!std::getline(f, line) || line.rfind("t,gx", 0) != 0)
      throw IoError("imu.csv: bad header");
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto c = split_csv(line);
      if (c.size() != 7) throw IoError("imu.csv: row needs 7 columns");
      ImuSample s;
      s.timestamp = parse_double(c[0]);
      s.gyro = {parse_double(c[1]), parse_double(c[2]), parse_double(c[3])};
      s.accel = {parse_double(c[4]), parse_double(c[5]), parse_double(c[6])};
      seq.imu.push_back(s);
    }
  }
  {
    auto index = open_in(dir / "radar" / "index.csv");
    std::string line;
    if (!std::getline(index, line) || line.rfind("frame,t,file", 0) != 0)
      throw IoError("radar/index.csv: bad header");
    while (std::getline(index, line)) {
      if (line.empty()) continue;
      const auto c = split_csv(line);
      if (c.size() != 3) throw IoError("radar/index.csv: row needs 3 columns");
      RadarScan scan;
      scan.timestamp = parse_double(c[1]);
      auto f = open_in(dir / "radar" / std::string(c[2]));
      std::string row;
      if (!std::getline(f, row) || row.rfind("x,y,z", 0) != 0)
        throw IoError("radar scan csv: bad header");
      while (std::getline(f, row)) {
        if (row.empty()) continue;
        const auto pc = split_csv(row);
        if (pc.size() != 4) throw IoError("radar scan csv: row needs 4 columns");
        scan.points.push_back(
            {parse_double(pc[0]), parse_double(pc[1]), parse_double(pc[2]), parse_double(pc[3])});
      }
      seq.scans.push_back(std::move(scan));
    }
  }
  return seq;
}

}  // namespace mio
