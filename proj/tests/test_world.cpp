#include "mio/world.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mio;

namespace {

Floorplan square_room(double side = 8.0, double height = 2.6) {
  Floorplan plan;
  plan.bounds = {0.0, 0.0, side, side};
  plan.walls = {{0, 0, side, 0, height},
                {side, 0, side, side, height},
                {side, side, 0, side, height},
                {0, side, 0, 0, height}};
  return plan;
}

SensorNoiseConfig noiseless() {
  SensorNoiseConfig cfg;
  cfg.range_sigma = 0.0;
  cfg.angle_sigma = 0.0;
  cfg.detection_prob = 1.0;
  cfg.ghost_rate = 0.0;
  cfg.gyro_sigma = 0.0;
  cfg.accel_sigma = 0.0;
  cfg.gyro_bias = {0, 0, 0};
  cfg.accel_bias = {0, 0, 0};
  cfg.rng_seed = 1;
  return cfg;
}

// ---------------------------------------------------------------------------
// generate_trajectory
// ---------------------------------------------------------------------------

TEST(GenerateTrajectory, StationaryScript) {
  MotionScript s;
  s.waypoints = {{0.0, 2.0, 2.0, 0.3}, {10.0, 2.0, 2.0, 0.3}};
  const Trajectory traj = generate_trajectory(s, square_room());
  ASSERT_EQ(traj.size(), 1001u);
  for (const TimedPose& e : traj) {
    EXPECT_DOUBLE_EQ(e.pose.translation.x, 2.0);
    EXPECT_DOUBLE_EQ(e.pose.translation.y, 2.0);
  }
  EXPECT_DOUBLE_EQ(traj.back().t, 10.0);
}

TEST(GenerateTrajectory, ConstantVelocity) {
  MotionScript s;
  s.waypoints = {{0.0, 0.5, 4.0, 0.0}, {10.0, 5.5, 4.0, 0.0}};
  const Trajectory traj = generate_trajectory(s, square_room());
  ASSERT_EQ(traj.size(), 1001u);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = 0.01 * static_cast<double>(k);
    EXPECT_NEAR(traj[k].pose.translation.x, 0.5 + 0.5 * t, 1e-9);
  }
}

TEST(GenerateTrajectory, ClosedLoopReturnsToStart) {
  MotionScript s;
  s.waypoints = {{0, 2, 2, 0},  {5, 6, 2, 0},  {10, 6, 6, M_PI_2},
                 {15, 2, 6, M_PI}, {20, 2, 2, 0}};
  const Trajectory traj = generate_trajectory(s, square_room());
  EXPECT_NEAR((traj.back().pose.translation - traj.front().pose.translation).norm(), 0.0, 1e-9);
}

TEST(GenerateTrajectory, Errors) {
  MotionScript s;
  s.waypoints = {};
  EXPECT_THROW(generate_trajectory(s, square_room()), TrajectoryTooShort);
  s.waypoints = {{0, -1, 2, 0}, {5, 2, 2, 0}};
  EXPECT_THROW(generate_trajectory(s, square_room()), WaypointOutsideBounds);

  Floorplan plan = square_room();
  plan.walls.push_back({4, 0, 4, 8, 2.6});  // dividing wall
  s.waypoints = {{0, 2, 2, 0}, {5, 6, 2, 0}};
  EXPECT_THROW(generate_trajectory(s, plan), PathCrossesWall);

  s.waypoints = {{0, 2, 2, 0}, {0, 2, 3, 0}};  // non-increasing times
  EXPECT_THROW(generate_trajectory(s, square_room()), NonMonotonicTimestamps);
}

TEST(GenerateTrajectory, DefaultWorldIsValid) {
  const Trajectory traj = generate_trajectory(default_search_script(), default_apartment());
  EXPECT_EQ(traj.size(), 6001u);  // 60 s at 100 Hz
  for (std::size_t k = 1; k < traj.size(); ++k) ASSERT_GT(traj[k].t, traj[k - 1].t);
}

// ---------------------------------------------------------------------------
// radar_scan
// ---------------------------------------------------------------------------

TEST(RadarScan, SingleRayAnalyticHit) {
  // sensor at the centre of an 8x8 room facing +x, noise off: the boresight
  // ray hits the x=8 wall at range 4
  RadarGeometry geom;
  geom.n_az = 1;
  geom.n_el = 1;
  const PoseSE3 pose = PoseSE3::from_yaw(0.0, {4.0, 4.0, 1.0});
  const RadarScan scan = radar_scan(square_room(), pose, geom, noiseless(), 0.0);
  ASSERT_EQ(scan.points.size(), 1u);
  EXPECT_NEAR(scan.points[0].x, 4.0, 1e-12);
  EXPECT_NEAR(scan.points[0].y, 0.0, 1e-12);
  EXPECT_NEAR(scan.points[0].z, 0.0, 1e-12);
  EXPECT_NEAR(scan.points[0].intensity, 0.5, 1e-12);
}

TEST(RadarScan, YawRotatesHits) {
  RadarGeometry geom;
  geom.n_az = 1;
  geom.n_el = 1;
  const PoseSE3 pose = PoseSE3::from_yaw(M_PI_2, {4.0, 4.0, 1.0});
  const RadarScan scan = radar_scan(square_room(), pose, geom, noiseless(), 0.0);
  ASSERT_EQ(scan.points.size(), 1u);
  // hit on the y=8 wall, still (4,0,0) in the sensor frame
  EXPECT_NEAR(scan.points[0].x, 4.0, 1e-12);
  EXPECT_NEAR(scan.points[0].y, 0.0, 1e-12);
}

TEST(RadarScan, DetectionZeroGivesEmptyScan) {
  SensorNoiseConfig cfg = noiseless();
  cfg.detection_prob = 0.0;
  const PoseSE3 pose = PoseSE3::from_yaw(0.0, {4.0, 4.0, 1.0});
  const RadarScan scan = radar_scan(square_room(), pose, RadarGeometry{}, cfg, 0.0);
  EXPECT_TRUE(scan.points.empty());
}

TEST(RadarScan, DeterministicInSeedAndTime) {
  SensorNoiseConfig cfg;
  cfg.rng_seed = 77;
  const PoseSE3 pose = PoseSE3::from_yaw(0.3, {4.0, 4.0, 1.0});
  const RadarScan a = radar_scan(square_room(), pose, RadarGeometry{}, cfg, 1.5);
  const RadarScan b = radar_scan(square_room(), pose, RadarGeometry{}, cfg, 1.5);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].x, b.points[i].x);
    EXPECT_EQ(a.points[i].y, b.points[i].y);
    EXPECT_EQ(a.points[i].z, b.points[i].z);
  }
  const RadarScan c = radar_scan(square_room(), pose, RadarGeometry{}, cfg, 1.6);
  EXPECT_NE(a.points.size() == c.points.size() &&
                (a.points.empty() || a.points[0].x == c.points[0].x),
            true);
}

TEST(RadarScan, AllPointsWithinRangeGate) {
  SensorNoiseConfig cfg;
  cfg.rng_seed = 5;
  cfg.range_sigma = 0.5;  // exaggerated noise
  const RadarGeometry geom;
  const Floorplan plan = square_room();
  for (int frame = 0; frame < 50; ++frame) {
    const PoseSE3 pose = PoseSE3::from_yaw(0.1 * frame, {4.0, 4.0, 1.0});
    const RadarScan scan = radar_scan(plan, pose, geom, cfg, 0.1 * frame);
    for (const RadarPoint& p : scan.points) {
      const double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
      ASSERT_LE(r, geom.max_range + 4.0 * cfg.range_sigma);
      ASSERT_LE(r, geom.max_range + 1e-12);  // range gate keeps the type invariant
      ASSERT_GE(p.intensity, 0.0);
      ASSERT_LE(p.intensity, 1.0);
    }
    ASSERT_LE(scan.points.size(), geom.max_points);
  }
}

TEST(RadarScan, PoseOutsideBoundsRaises) {
  EXPECT_THROW(radar_scan(square_room(), PoseSE3::from_translation(9.0, 4.0, 1.0),
                          RadarGeometry{}, noiseless(), 0.0),
               PoseOutsideBounds);
}

// ---------------------------------------------------------------------------
// imu_stream
// ---------------------------------------------------------------------------

Trajectory stationary_traj(double duration = 10.0, double rate = 100.0) {
  Trajectory traj;
  const auto n = static_cast<std::size_t>(duration * rate) + 1;
  for (std::size_t k = 0; k < n; ++k)
    traj.push_back({k / rate, PoseSE3::from_yaw(0.4, {2.0, 3.0, 1.0})});
  return traj;
}

TEST(ImuStream, StationarySpecificForceConvention) {
  const auto samples = imu_stream(stationary_traj(), noiseless());
  ASSERT_EQ(samples.size(), 1001u);
  for (const ImuSample& s : samples) {
    EXPECT_NEAR(s.gyro.norm(), 0.0, 1e-12);
    EXPECT_NEAR(s.accel.x, 0.0, 1e-9);
    EXPECT_NEAR(s.accel.y, 0.0, 1e-9);
    EXPECT_NEAR(s.accel.z, 9.81, 1e-9);
  }
}

TEST(ImuStream, ConstantYawRate) {
  const double omega = 0.5;
  Trajectory traj;
  for (int k = 0; k <= 1000; ++k) {
    const double t = 0.01 * k;
    traj.push_back({t, PoseSE3::from_yaw(omega * t, {2.0, 2.0, 1.0})});
  }
  const auto samples = imu_stream(traj, noiseless());
  for (std::size_t k = 1; k + 1 < samples.size(); ++k) {
    EXPECT_NEAR(samples[k].gyro.z, omega, 1e-6);  // O(dt^2) finite differences
    EXPECT_NEAR(samples[k].gyro.x, 0.0, 1e-9);
  }
}

TEST(ImuStream, GyroBiasAppearsVerbatim) {
  SensorNoiseConfig cfg = noiseless();
  cfg.gyro_bias = {0.02, 0.0, 0.0};
  const auto samples = imu_stream(stationary_traj(), cfg);
  for (const ImuSample& s : samples) EXPECT_DOUBLE_EQ(s.gyro.x, 0.02);
}

TEST(ImuStream, TooShortRaises) {
  Trajectory traj = {{0.0, PoseSE3::identity()}, {0.01, PoseSE3::identity()}};
  EXPECT_THROW(imu_stream(traj, noiseless()), TrajectoryTooShort);
}

TEST(ImuStream, DeterministicGivenSeed) {
  SensorNoiseConfig cfg;
  cfg.rng_seed = 1234;
  const auto a = imu_stream(stationary_traj(), cfg);
  const auto b = imu_stream(stationary_traj(), cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].gyro.x, b[k].gyro.x);
    EXPECT_EQ(a[k].accel.z, b[k].accel.z);
  }
}

// Integrating world-frame acceleration (accel rotated to world + gravity)
// with noise and bias off recovers the ground-truth velocity to O(dt).
TEST(ImuStream, SpecificForceConsistency) {
  const Trajectory traj = generate_trajectory(default_search_script(), default_apartment());
  const auto samples = imu_stream(traj, noiseless());
  const Vec3 gravity{0.0, 0.0, -kGravity};
  const double dt = 0.01;
  auto v_true = [&](std::size_t k) {
    return (traj[k + 1].pose.translation - traj[k - 1].pose.translation) / (2.0 * dt);
  };
  Vec3 v = v_true(1);
  double worst = 0.0;
  for (std::size_t k = 2; k + 1 < samples.size(); ++k) {
    const Quat& q = traj[k - 1].pose.rotation;
    v += (q.rotate(samples[k - 1].accel) + gravity) * dt;
    // waypoint corners carry the velocity-jump impulse; compare mid-segment
    bool near_corner = false;
    for (const Waypoint& w : default_search_script().waypoints)
      if (std::abs(traj[k].t - w.t) < 0.05) near_corner = true;
    if (!near_corner) worst = std::max(worst, (v - v_true(k)).norm());
  }
  EXPECT_LT(worst, 0.05);
}

}  // namespace
