#include "mio/eval.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mio/sequence.hpp"

using namespace mio;
namespace fs = std::filesystem;

namespace {

Trajectory straight_line(int n, double dt = 0.1, double speed = 1.0) {
  Trajectory traj;
  for (int k = 0; k < n; ++k)
    traj.push_back({k * dt, PoseSE3::from_translation(speed * k * dt, 0.0, 0.0)});
  return traj;
}

// ---------------------------------------------------------------------------
// ate
// ---------------------------------------------------------------------------

TEST(Ate, IdenticalTrajectoriesScoreZero) {
  const Trajectory t = straight_line(100);
  const AteResult r = ate(t, t);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(r.mean, 0.0);
  EXPECT_EQ(r.max, 0.0);
}

TEST(Ate, ConstantOffsetAfterFirstPose) {
  const Trajectory truth = straight_line(100);
  Trajectory est = truth;
  for (std::size_t k = 1; k < est.size(); ++k) est[k].pose.translation.y += 1.0;
  const AteResult r = ate(est, truth);
  // first pose aligned exactly, the remaining N-1 carry error 1.0
  const double expected = std::sqrt(99.0 / 100.0);
  EXPECT_NEAR(r.rmse, expected, 1e-12);
  EXPECT_NEAR(r.rmse, 1.0, 0.01);  // the large-N reading
  EXPECT_NEAR(r.max, 1.0, 1e-12);
}

TEST(Ate, SinglePoseEstimate) {
  const Trajectory truth = straight_line(50);
  const Trajectory est = {truth.front()};
  const AteResult r = ate(est, truth);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(r.max, 0.0);
}

TEST(Ate, SymmetricUnderSwap) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 0.3);
  const Trajectory truth = straight_line(200);
  Trajectory est = truth;
  for (std::size_t k = 0; k < est.size(); ++k) {
    est[k].pose.translation.x += n(gen);
    est[k].pose.translation.y += n(gen);
  }
  const AteResult ab = ate(est, truth);
  const AteResult ba = ate(truth, est);
  EXPECT_NEAR(ab.rmse, ba.rmse, 1e-9);
  EXPECT_NEAR(ab.max, ba.max, 1e-9);
}

TEST(Ate, InvariantToCommonRigidTransform) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0.0, 0.2);
  const Trajectory truth = straight_line(150);
  Trajectory est = truth;
  for (std::size_t k = 0; k < est.size(); ++k) est[k].pose.translation.y += n(gen);
  const AteResult base = ate(est, truth);

  const PoseSE3 rig = PoseSE3::from_yaw(0.7, {3.0, -2.0, 1.0});
  Trajectory est_t = est, truth_t = truth;
  for (auto& e : est_t) e.pose = compose(rig, e.pose);
  for (auto& e : truth_t) e.pose = compose(rig, e.pose);
  const AteResult moved = ate(est_t, truth_t);
  EXPECT_NEAR(base.rmse, moved.rmse, 1e-9);
  EXPECT_NEAR(base.max, moved.max, 1e-9);
}

TEST(Ate, Errors) {
  const Trajectory t = straight_line(10);
  EXPECT_THROW(ate({}, t), EmptyTrajectory);
  EXPECT_THROW(ate(t, {}), EmptyTrajectory);
  Trajectory far = {{99.0, PoseSE3::identity()}};
  EXPECT_THROW(ate(far, t), NoTemporalOverlap);
}

// ---------------------------------------------------------------------------
// rpe
// ---------------------------------------------------------------------------

TEST(Rpe, IdenticalTrajectoriesScoreZero) {
  const Trajectory t = straight_line(80);
  const RpeResult r = rpe(t, t, 5);
  EXPECT_EQ(r.trans_mean, 0.0);
  EXPECT_NEAR(r.rot_mean, 0.0, 1e-9);
}

TEST(Rpe, ConstantYawRateBias) {
  const double omega = 0.02;  // rad per frame
  const Trajectory truth = straight_line(120);
  Trajectory est;
  est.push_back(truth.front());
  for (std::size_t k = 1; k < truth.size(); ++k) {
    const PoseSE3 rel_truth = compose(invert(truth[k - 1].pose), truth[k].pose);
    const PoseSE3 rel_biased = compose(rel_truth, PoseSE3::from_yaw(omega));
    est.push_back({truth[k].t, compose(est.back().pose, rel_biased)});
  }
  const RpeResult r = rpe(est, truth, 1);
  for (double e : r.rot_errors) EXPECT_NEAR(e, omega, 1e-9);
  EXPECT_NEAR(r.rot_mean, omega, 1e-9);
}

TEST(Rpe, PerStepTranslationNoiseOracle) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.001, 0.05);
  const Trajectory truth = straight_line(100);
  Trajectory est;
  est.push_back(truth.front());
  std::vector<double> eps_norm;
  for (std::size_t k = 1; k < truth.size(); ++k) {
    const Vec3 eps{u(gen), u(gen), 0.0};
    eps_norm.push_back(eps.norm());
    const PoseSE3 rel_truth = compose(invert(truth[k - 1].pose), truth[k].pose);
    const PoseSE3 rel_noisy = compose(rel_truth, {Quat::identity(), eps});
    est.push_back({truth[k].t, compose(est.back().pose, rel_noisy)});
  }
  const RpeResult r = rpe(est, truth, 1);
  double expected = 0.0;
  for (double e : eps_norm) expected += e;
  expected /= static_cast<double>(eps_norm.size());
  EXPECT_NEAR(r.trans_mean, expected, 1e-9);
}

TEST(Rpe, DeltaLargerThanTrajectoryRaises) {
  const Trajectory t = straight_line(5);
  EXPECT_THROW(rpe(t, t, 10), TrajectoryTooShort);
}

// ---------------------------------------------------------------------------
// dead reckoning
// ---------------------------------------------------------------------------

std::vector<ImuSample> stationary_imu(double duration, const Vec3& gyro_bias = {},
                                      const Vec3& accel_bias = {}) {
  std::vector<ImuSample> out;
  const double dt = 0.01;
  for (int k = 0; k <= static_cast<int>(duration / dt); ++k) {
    ImuSample s;
    s.timestamp = k * dt;
    s.gyro = gyro_bias;
    s.accel = Vec3{0.0, 0.0, kGravity} + accel_bias;
    out.push_back(s);
  }
  return out;
}

TEST(DeadReckoning, CleanStationaryStaysPut) {
  const Trajectory traj = imu_dead_reckoning(stationary_imu(10.0), PoseSE3::identity());
  EXPECT_EQ(traj.size(), 1001u);
  for (const TimedPose& e : traj) ASSERT_LT(e.pose.translation.norm(), 1e-6);
}

TEST(DeadReckoning, GyroBiasDriftsYawLinearly) {
  const double b = 0.05;
  const Trajectory traj =
      imu_dead_reckoning(stationary_imu(10.0, {0.0, 0.0, b}), PoseSE3::identity());
  for (std::size_t k = 100; k < traj.size(); k += 100) {
    const double t = traj[k].t;
    const Quat& q = traj[k].pose.rotation;
    const double yaw = 2.0 * std::atan2(q.z, q.w);
    EXPECT_NEAR(yaw, b * t, 0.01 + 0.01 * b * t);  // first-order integrator
  }
}

TEST(DeadReckoning, AccelBiasDivergesSuperlinearly) {
  const Vec3 bias{0.1, 0.0, 0.0};
  const Trajectory traj = imu_dead_reckoning(stationary_imu(40.0, {}, bias), PoseSE3::identity());
  const auto pos_err = [&](double t) {
    return traj[nearest_index(traj, t)].pose.translation.norm();
  };
  EXPECT_GT(pos_err(20.0), 1.0);                  // exceeds a metre well before a minute
  EXPECT_GT(pos_err(40.0), 2.0 * pos_err(20.0));  // superlinear growth
}

TEST(DeadReckoning, BiasedWalkExceedsOneMetre) {
  SensorNoiseConfig cfg;  // default biases on
  cfg.rng_seed = 9;
  const Trajectory truth = generate_trajectory(default_search_script(), default_apartment());
  const auto imu = imu_stream(truth, cfg);
  const Trajectory dr = imu_dead_reckoning(imu, truth.front().pose);
  const AteResult r = ate(dr, truth);
  EXPECT_GT(r.rmse, 1.0);
}

TEST(DeadReckoning, Errors) {
  EXPECT_THROW(imu_dead_reckoning({}, PoseSE3::identity()), TrajectoryTooShort);
  ImuSample one;
  EXPECT_THROW(imu_dead_reckoning({one}, PoseSE3::identity()), TrajectoryTooShort);
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

TEST(Report, WritesMetricsCsvsAndSvg) {
  const Trajectory truth = straight_line(591, 0.01);
  Trajectory est = truth;
  for (std::size_t k = 1; k < est.size(); ++k) est[k].pose.translation.y += 0.05;
  const Trajectory baseline =
      imu_dead_reckoning(stationary_imu(5.9, {0.0, 0.0, 0.02}, {0.05, 0, 0}),
                         truth.front().pose);
  const auto dir = fs::temp_directory_path() / "mio_test_eval" / "report";
  fs::remove_all(dir);
  const auto metrics = report(est, truth, baseline, dir);

  EXPECT_TRUE(fs::exists(dir / "metrics.json"));
  EXPECT_TRUE(fs::exists(dir / "est.csv"));
  EXPECT_TRUE(fs::exists(dir / "truth.csv"));
  EXPECT_TRUE(fs::exists(dir / "baseline.csv"));
  EXPECT_TRUE(fs::exists(dir / "trajectory.svg"));

  // metrics round-trip through a parser
  std::ifstream mf(dir / "metrics.json");
  nlohmann::json parsed;
  mf >> parsed;
  EXPECT_EQ(parsed["ate"]["rmse"], metrics["ate"]["rmse"]);
  EXPECT_TRUE(parsed.contains("rpe"));
  EXPECT_TRUE(parsed["rpe"].contains("delta"));
  EXPECT_TRUE(parsed["rpe"].contains("trans_mean"));
  EXPECT_TRUE(parsed["rpe"].contains("rot_mean"));
  EXPECT_TRUE(parsed["baseline"].contains("ate"));

  // svg structure: exactly three polylines, dashed red truth, solid blue est
  std::ifstream sf(dir / "trajectory.svg");
  std::stringstream ss;
  ss << sf.rdbuf();
  const std::string svg = ss.str();
  std::size_t polylines = 0, pos = 0;
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    ++polylines;
    pos += 9;
  }
  EXPECT_EQ(polylines, 3u);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
  EXPECT_NE(svg.find("#d02020"), std::string::npos);
  EXPECT_NE(svg.find("#2040d0"), std::string::npos);
  EXPECT_NE(svg.find("<line"), std::string::npos);  // 1 m grid
}

TEST(Report, IdenticalTrajectoriesGiveZeroRmse) {
  const Trajectory truth = straight_line(30);
  const auto dir = fs::temp_directory_path() / "mio_test_eval" / "zero";
  fs::remove_all(dir);
  const auto metrics = report(truth, truth, truth, dir);
  EXPECT_EQ(metrics["ate"]["rmse"].get<double>(), 0.0);
}

}  // namespace
