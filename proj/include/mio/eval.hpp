#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mio/csvio.hpp"
#include "mio/errors.hpp"
#include "mio/geometry.hpp"
#include "mio/world.hpp"

namespace mio {

// ============================================================================
// Trajectory metrics: ATE (start-pose alignment only, no least-squares fit)
// and RPE over fixed frame intervals.
// ============================================================================

struct AteResult {
  double rmse = 0.0;
  double mean = 0.0;
  double max = 0.0;
  std::vector<double> errors;
};

struct RpeResult {
  int delta = 1;
  double trans_mean = 0.0, trans_rmse = 0.0, trans_max = 0.0;
  double rot_mean = 0.0, rot_rmse = 0.0, rot_max = 0.0;
  std::vector<double> trans_errors;
  std::vector<double> rot_errors;
};

namespace detail {

// One truth pose per estimate entry, nearest timestamp within assoc_tol.
inline std::vector<PoseSE3> associate(const Trajectory& est, const Trajectory& truth,
                                      double assoc_tol) {
  if (est.empty() || truth.empty()) throw EmptyTrajectory("trajectory has no entries");
  std::vector<PoseSE3> out;
  out.reserve(est.size());
  for (const TimedPose& e : est) {
    const std::size_t idx = nearest_index(truth, e.t);
    if (std::abs(truth[idx].t - e.t) > assoc_tol)
      throw NoTemporalOverlap("estimate at t=" + std::to_string(e.t) +
                              " has no truth pose within tolerance");
    out.push_back(truth[idx].pose);
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double rmse_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

inline double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

}  // namespace detail

// Absolute trajectory error. Both paths are re-expressed relative to their
// first (associated) pose, so only the start is aligned and drift stays
// visible.
inline AteResult ate(const Trajectory& est, const Trajectory& truth, double assoc_tol = 0.005) {
  const auto truth_assoc = detail::associate(est, truth, assoc_tol);
  const PoseSE3 est_ref = invert(est.front().pose);
  const PoseSE3 truth_ref = invert(truth_assoc.front());
  AteResult r;
  r.errors.reserve(est.size());
  for (std::size_t k = 0; k < est.size(); ++k) {
    const Vec3 pe = compose(est_ref, est[k].pose).translation;
    const Vec3 pt = compose(truth_ref, truth_assoc[k]).translation;
    r.errors.push_back((pe - pt).norm());
  }
  r.rmse = detail::rmse_of(r.errors);
  r.mean = detail::mean_of(r.errors);
  r.max = detail::max_of(r.errors);
  return r;
}

// Relative pose error over intervals of delta frames:
// err_k = inv(rel_truth(k, k+delta)) o rel_est(k, k+delta)
inline RpeResult rpe(const Trajectory& est, const Trajectory& truth, int delta,
                     double assoc_tol = 0.005) {
  if (delta < 1) throw Error("rpe: delta must be >= 1");
  const auto truth_assoc = detail::associate(est, truth, assoc_tol);
  if (est.size() <= static_cast<std::size_t>(delta))
    throw TrajectoryTooShort("rpe: trajectory shorter than delta");
  RpeResult r;
  r.delta = delta;
  for (std::size_t k = 0; k + delta < est.size(); ++k) {
    const PoseSE3 rel_est = compose(invert(est[k].pose), est[k + delta].pose);
    const PoseSE3 rel_truth = compose(invert(truth_assoc[k]), truth_assoc[k + delta]);
    const PoseSE3 err = compose(invert(rel_truth), rel_est);
    r.trans_errors.push_back(err.translation.norm());
    r.rot_errors.push_back(err.rotation.angle());
  }
  r.trans_mean = detail::mean_of(r.trans_errors);
  r.trans_rmse = detail::rmse_of(r.trans_errors);
  r.trans_max = detail::max_of(r.trans_errors);
  r.rot_mean = detail::mean_of(r.rot_errors);
  r.rot_rmse = detail::rmse_of(r.rot_errors);
  r.rot_max = detail::max_of(r.rot_errors);
  return r;
}

// ============================================================================
// IMU-only dead reckoning - the baseline whose drift motivates the fusion.
// First-order strapdown: gyro-integrated attitude, gravity removal, double
// integration of acceleration.
// ============================================================================

inline Trajectory imu_dead_reckoning(const std::vector<ImuSample>& imu, const PoseSE3& origin) {
  if (imu.size() < 2) throw TrajectoryTooShort("dead reckoning needs at least 2 samples");
  const Vec3 gravity{0.0, 0.0, -kGravity};
  Trajectory traj;
  traj.reserve(imu.size());
  Quat q = origin.rotation;
  Vec3 p = origin.translation;
  Vec3 v = Vec3::zero();
  traj.push_back({imu.front().timestamp, {q, p}});
  for (std::size_t k = 1; k < imu.size(); ++k) {
    const double dt = imu[k].timestamp - imu[k - 1].timestamp;
    if (dt <= 0.0) throw NonMonotonicTimestamps("imu timestamps must strictly increase");
    const ImuSample& s = imu[k - 1];
    const Vec3 w = s.gyro;
    q = (q * Quat::from_axis_angle(w, w.norm() * dt)).normalized();
    const Vec3 a_world = q.rotate(s.accel) + gravity;
    v += a_world * dt;
    p += v * dt;
    traj.push_back({imu[k].timestamp, {q, p}});
  }
  return traj;
}

// ============================================================================
// Report: metrics JSON + trajectory CSVs + top-down SVG (truth dashed red,
// estimate solid blue, baseline grey; 1 m grid).
// ============================================================================

namespace detail {

inline nlohmann::json ate_json(const AteResult& a) {
  return {{"rmse", a.rmse}, {"mean", a.mean}, {"max", a.max}};
}

inline nlohmann::json rpe_json(const RpeResult& r) {
  return {{"delta", r.delta},
          {"trans_mean", r.trans_mean},
          {"trans_rmse", r.trans_rmse},
          {"rot_mean", r.rot_mean},
          {"rot_rmse", r.rot_rmse}};
}

inline std::string polyline_points(const Trajectory& traj, double ox, double oy, double scale,
                                   double svg_h) {
  std::string pts;
  char buf[64];
  for (const TimedPose& e : traj) {
    const double x = (e.pose.translation.x - ox) * scale;
    const double y = svg_h - (e.pose.translation.y - oy) * scale;
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
    pts += buf;
  }
  if (!pts.empty()) pts.pop_back();
  return pts;
}

}  // namespace detail

inline void write_trajectory_svg(const std::filesystem::path& path, const Trajectory& truth,
                                 const Trajectory& est, const Trajectory& baseline) {
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  for (const Trajectory* traj : {&truth, &est, &baseline})
    for (const TimedPose& e : *traj) {
      min_x = std::min(min_x, e.pose.translation.x);
      max_x = std::max(max_x, e.pose.translation.x);
      min_y = std::min(min_y, e.pose.translation.y);
      max_y = std::max(max_y, e.pose.translation.y);
    }
  if (min_x > max_x) {
    min_x = min_y = 0.0;
    max_x = max_y = 1.0;
  }
  const double pad = 1.0;
  min_x -= pad;
  min_y -= pad;
  max_x += pad;
  max_y += pad;
  const double scale = 40.0;  // px per metre
  const double w = (max_x - min_x) * scale;
  const double h = (max_y - min_y) * scale;

  auto f = open_out(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt9(w) << "\" height=\""
    << fmt9(h) << "\" viewBox=\"0 0 " << fmt9(w) << ' ' << fmt9(h) << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // 1 m grid
  for (double gx = std::ceil(min_x); gx <= max_x; gx += 1.0) {
    const double px = (gx - min_x) * scale;
    f << "<line x1=\"" << fmt9(px) << "\" y1=\"0\" x2=\"" << fmt9(px) << "\" y2=\"" << fmt9(h)
      << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
  }
  for (double gy = std::ceil(min_y); gy <= max_y; gy += 1.0) {
    const double py = h - (gy - min_y) * scale;
    f << "<line x1=\"0\" y1=\"" << fmt9(py) << "\" x2=\"" << fmt9(w) << "\" y2=\"" << fmt9(py)
      << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
  }
  f << "<polyline fill=\"none\" stroke=\"#888888\" stroke-width=\"1.5\" points=\""
    << detail::polyline_points(baseline, min_x, min_y, scale, h) << "\"/>\n";
  f << "<polyline fill=\"none\" stroke=\"#d02020\" stroke-width=\"2\" "
       "stroke-dasharray=\"8 5\" points=\""
    << detail::polyline_points(truth, min_x, min_y, scale, h) << "\"/>\n";
  f << "<polyline fill=\"none\" stroke=\"#2040d0\" stroke-width=\"2\" points=\""
    << detail::polyline_points(est, min_x, min_y, scale, h) << "\"/>\n";
  f << "</svg>\n";
}

struct ReportOptions {
  int rpe_delta = 10;
  double assoc_tol = 0.005;
  std::string baseline_kind = "imu_dead_reckoning";
};

// Writes metrics.json, truth/est/baseline CSVs and trajectory.svg.
inline nlohmann::json report(const Trajectory& est, const Trajectory& truth,
                             const Trajectory& baseline, const std::filesystem::path& out_dir,
                             const ReportOptions& opts = {}) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create report directory: " + out_dir.string());

  nlohmann::json metrics;
  metrics["ate"] = detail::ate_json(ate(est, truth, opts.assoc_tol));
  try {
    metrics["rpe"] = detail::rpe_json(rpe(est, truth, opts.rpe_delta, opts.assoc_tol));
  } catch (const TrajectoryTooShort&) {
    metrics["rpe"] = nullptr;  // shorter than delta: no intervals to score
  }
  metrics["baseline"]["kind"] = opts.baseline_kind;
  metrics["baseline"]["ate"] = detail::ate_json(ate(baseline, truth, opts.assoc_tol));
  try {
    metrics["baseline"]["rpe"] =
        detail::rpe_json(rpe(baseline, truth, opts.rpe_delta, opts.assoc_tol));
  } catch (const TrajectoryTooShort&) {
    metrics["baseline"]["rpe"] = nullptr;
  }

  {
    auto f = open_out(out_dir / "metrics.json");
    f << metrics.dump(2) << '\n';
  }
  write_trajectory_csv(out_dir / "est.csv", est);
  write_trajectory_csv(out_dir / "truth.csv", truth);
  write_trajectory_csv(out_dir / "baseline.csv", baseline);
  write_trajectory_svg(out_dir / "trajectory.svg", truth, est, baseline);
  return metrics;
}

}  // namespace mio
