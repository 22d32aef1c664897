#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mio/errors.hpp"
#include "mio/geometry.hpp"
#include "mio/imaging.hpp"
#include "mio/model.hpp"
#include "mio/sequence.hpp"
#include "mio/sync.hpp"
#include "mio/wire.hpp"

namespace mio {

// ============================================================================
// Bounded SPSC queue with two backpressure policies: block (offline) or
// drop-oldest (real time). close() unblocks everything.
// ============================================================================

template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : cap_(capacity) {}

  bool push_blocking(T v) {
    std::unique_lock<std::mutex> lock(m_);
    cv_push_.wait(lock, [this] { return q_.size() < cap_ || closed_; });
    if (closed_) return false;
    q_.push_back(std::move(v));
    high_water_ = std::max(high_water_, q_.size());
    cv_pop_.notify_one();
    return true;
  }

  // Returns the number of entries evicted to make room (0 or 1).
  std::size_t push_drop_oldest(T v) {
    std::lock_guard<std::mutex> lock(m_);
    if (closed_) return 0;
    std::size_t drops = 0;
    if (q_.size() >= cap_) {
      q_.pop_front();
      drops = 1;
    }
    q_.push_back(std::move(v));
    high_water_ = std::max(high_water_, q_.size());
    cv_pop_.notify_one();
    return drops;
  }

  std::optional<T> pop() {
    std::unique_lock<std::mutex> lock(m_);
    cv_pop_.wait(lock, [this] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    cv_push_.notify_one();
    return v;
  }

  void close() {
    std::lock_guard<std::mutex> lock(m_);
    closed_ = true;
    cv_pop_.notify_all();
    cv_push_.notify_all();
  }

  std::size_t high_water() const {
    std::lock_guard<std::mutex> lock(m_);
    return high_water_;
  }

 private:
  mutable std::mutex m_;
  std::condition_variable cv_push_, cv_pop_;
  std::deque<T> q_;
  std::size_t cap_;
  std::size_t high_water_ = 0;
  bool closed_ = false;
};

// ============================================================================
// Config / stats
// ============================================================================

enum class PipelineMode { offline, realtime };

struct PipelineConfig {
  PipelineMode mode = PipelineMode::offline;
  std::size_t queue_capacity = 4;
  int overlay_depth = 3;
  int image_height = 16;
  int image_width = 64;
  std::string uplink_addr;  // "host:port"; empty disables; MIO_UPLINK_ADDR overrides
  double artificial_inference_delay_s = 0.0;  // test hook for backpressure behaviour
};

struct StageLatency {
  double mean_s = 0.0;
  double p95_s = 0.0;
};

struct PipelineStats {
  std::size_t offered = 0;    // SyncedFrames produced by the synchronizer
  std::size_t processed = 0;  // frames that completed inference
  std::size_t dropped = 0;    // frames evicted by backpressure
  std::size_t uplink_sent = 0;
  std::size_t uplink_dropped = 0;  // poses lost to a full queue or a dead link
  StageLatency ingest, imaging, inference, uplink;
  double fps = 0.0;
  double wall_time_s = 0.0;
  std::size_t max_queue_occupancy = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["processed"] = processed;
    j["dropped"] = dropped;
    j["offered"] = offered;
    j["fps"] = fps;
    j["wall_time_s"] = wall_time_s;
    j["uplink_sent"] = uplink_sent;
    j["uplink_dropped"] = uplink_dropped;
    j["max_queue_occupancy"] = max_queue_occupancy;
    j["latency_ingest_mean_s"] = ingest.mean_s;
    j["latency_ingest_p95_s"] = ingest.p95_s;
    j["latency_imaging_mean_s"] = imaging.mean_s;
    j["latency_imaging_p95_s"] = imaging.p95_s;
    j["latency_inference_mean_s"] = inference.mean_s;
    j["latency_inference_p95_s"] = inference.p95_s;
    j["latency_uplink_mean_s"] = uplink.mean_s;
    j["latency_uplink_p95_s"] = uplink.p95_s;
    return j;
  }
};

struct PipelineResult {
  Trajectory trajectory;  // one pose per processed frame (origin not emitted)
  PipelineStats stats;
};

namespace detail {

inline StageLatency summarize(std::vector<double> samples) {
  StageLatency s;
  if (samples.empty()) return s;
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean_s = sum / static_cast<double>(samples.size());
  std::sort(samples.begin(), samples.end());
  const std::size_t idx =
      std::min(samples.size() - 1,
               static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(samples.size()))) -
                   1);
  s.p95_s = samples[idx];
  return s;
}

}  // namespace detail

// ============================================================================
// run_pipeline - four workers (ingest+sync, imaging, inference+accumulate,
// uplink) joined by bounded queues of capacity cfg.queue_capacity.
// ============================================================================

inline PipelineResult run_pipeline(const SequenceData& source, const FusionModel& model,
                                   const PipelineConfig& cfg) {
  if (model.config().image_height != cfg.image_height ||
      model.config().image_width != cfg.image_width)
    throw CheckpointMismatch("model image dims do not match pipeline config");

  struct InferenceJob {
    std::size_t frame_index;
    double t_prev, t_curr;
    ImagePairTensor pair;
    std::vector<ImuSample> imu_window;
  };

  const ImagingConfig icfg =
      ImagingConfig::from_geometry(source.geometry, cfg.image_height, cfg.image_width,
                                   cfg.overlay_depth);
  const bool realtime = cfg.mode == PipelineMode::realtime;

  std::string uplink_addr = cfg.uplink_addr;
  if (const char* env = std::getenv("MIO_UPLINK_ADDR")) uplink_addr = env;

  BoundedQueue<SyncedFrame> q_frames(cfg.queue_capacity);
  BoundedQueue<InferenceJob> q_pairs(cfg.queue_capacity);
  BoundedQueue<PoseMessage> q_uplink(cfg.queue_capacity);

  std::atomic<std::size_t> offered{0}, dropped{0}, uplink_dropped{0};
  std::vector<double> lat_ingest, lat_imaging, lat_inference, lat_uplink;
  std::vector<TimedPose> rel_motions;
  double first_frame_t = 0.0;
  std::size_t uplink_sent = 0;

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto fail = [&](std::exception_ptr ep) {
    {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = ep;
    }
    q_frames.close();
    q_pairs.close();
    q_uplink.close();
  };

  using clock = std::chrono::steady_clock;
  const auto wall_start = clock::now();
  auto seconds_since = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };

  // --- ingest + synchronize ---
  std::thread ingest_thread([&] {
    try {
      Synchronizer sync(cfg.overlay_depth);
      std::size_t ri = 0, ii = 0;
      const double t0 = source.scans.empty() ? 0.0 : source.scans.front().timestamp;
      auto emit_ready = [&](clock::time_point op_start) {
        while (auto frame = sync.poll()) {
          ++offered;
          lat_ingest.push_back(seconds_since(op_start, clock::now()));
          if (realtime)
            dropped += q_frames.push_drop_oldest(std::move(*frame));
          else if (!q_frames.push_blocking(std::move(*frame)))
            return;  // pipeline shutting down
          op_start = clock::now();
        }
      };
      while (ri < source.scans.size() || ii < source.imu.size()) {
        const bool take_radar = ii >= source.imu.size() ||
                                (ri < source.scans.size() &&
                                 source.scans[ri].timestamp <= source.imu[ii].timestamp);
        const double t = take_radar ? source.scans[ri].timestamp : source.imu[ii].timestamp;
        if (realtime) {
          const auto target =
              wall_start + std::chrono::duration_cast<clock::duration>(
                               std::chrono::duration<double>(t - t0));
          std::this_thread::sleep_until(target);
        }
        const auto op_start = clock::now();
        if (take_radar)
          sync.push_radar(source.scans[ri++]);
        else
          sync.push_imu(source.imu[ii++]);
        emit_ready(op_start);
      }
      const auto op_start = clock::now();
      sync.finish();
      emit_ready(op_start);
      q_frames.close();
    } catch (...) {
      fail(std::current_exception());
    }
  });

  // --- imaging ---
  std::thread imaging_thread([&] {
    try {
      std::optional<PanoramicImage> prev;
      while (auto frame = q_frames.pop()) {
        const auto op_start = clock::now();
        if (!prev) {
          // image of the very first radar frame, from everything before curr
          if (frame->scans.size() >= 2) {
            std::vector<RadarScan> boot(frame->scans.begin(), frame->scans.end() - 1);
            prev = project(overlay(boot, icfg), icfg);
          } else {
            prev = PanoramicImage(icfg.height, icfg.width, frame->t_prev);
          }
        }
        PanoramicImage curr = project(overlay(frame->scans, icfg), icfg);
        InferenceJob job{frame->frame_index, frame->t_prev, frame->t_curr,
                         image_pair(*prev, curr), std::move(frame->imu_window)};
        prev = std::move(curr);
        lat_imaging.push_back(seconds_since(op_start, clock::now()));
        if (realtime)
          dropped += q_pairs.push_drop_oldest(std::move(job));
        else if (!q_pairs.push_blocking(std::move(job)))
          break;
      }
      q_pairs.close();
    } catch (...) {
      fail(std::current_exception());
    }
  });

  // --- inference + accumulate ---
  std::thread inference_thread([&] {
    try {
      TensorPtr hidden = model.initial_hidden();
      PoseSE3 pose;  // running accumulation for live uplink
      std::uint32_t seq = 0;
      bool first = true;
      while (auto job = q_pairs.pop()) {
        const auto op_start = clock::now();
        if (cfg.artificial_inference_delay_s > 0.0)
          std::this_thread::sleep_for(
              std::chrono::duration<double>(cfg.artificial_inference_delay_s));
        TensorPtr next_hidden;
        auto out =
            model.forward_pair_tolerant(nullptr, job->pair, job->imu_window, hidden, &next_hidden);
        hidden = next_hidden;
        const PoseSE3 rel = pose_from_6dof(FusionModel::to_sixdof(out));
        if (first) {
          first_frame_t = job->t_prev;
          first = false;
        }
        rel_motions.push_back({job->t_curr, rel});
        pose = compose(pose, rel);
        PoseMessage msg{seq++, job->t_curr, pose.translation, pose.rotation};
        lat_inference.push_back(seconds_since(op_start, clock::now()));
        if (realtime)
          uplink_dropped += q_uplink.push_drop_oldest(msg);
        else if (!q_uplink.push_blocking(msg))
          break;
      }
      q_uplink.close();
    } catch (...) {
      fail(std::current_exception());
    }
  });

  // --- uplink ---
  std::thread uplink_thread([&] {
    try {
      std::unique_ptr<UplinkClient> client;
      if (!uplink_addr.empty()) {
        auto [host, port] = parse_host_port(uplink_addr);
        client = std::make_unique<UplinkClient>(host, port);
      }
      while (auto msg = q_uplink.pop()) {
        const auto op_start = clock::now();
        if (client) {
          if (client->send(*msg))
            ++uplink_sent;
          else
            ++uplink_dropped;  // fire and forget: dead link drops, never blocks
        }
        lat_uplink.push_back(seconds_since(op_start, clock::now()));
      }
    } catch (...) {
      fail(std::current_exception());
    }
  });

  ingest_thread.join();
  imaging_thread.join();
  inference_thread.join();
  uplink_thread.join();
  const double wall = seconds_since(wall_start, clock::now());

  if (failure) std::rethrow_exception(failure);

  PipelineResult result;
  if (!rel_motions.empty()) {
    Trajectory full = accumulate(PoseSE3::identity(), first_frame_t, rel_motions);
    result.trajectory.assign(full.begin() + 1, full.end());
  }
  result.stats.offered = offered;
  result.stats.processed = rel_motions.size();
  result.stats.dropped = dropped;
  result.stats.uplink_sent = uplink_sent;
  result.stats.uplink_dropped = uplink_dropped;
  result.stats.ingest = detail::summarize(std::move(lat_ingest));
  result.stats.imaging = detail::summarize(std::move(lat_imaging));
  result.stats.inference = detail::summarize(std::move(lat_inference));
  result.stats.uplink = detail::summarize(std::move(lat_uplink));
  result.stats.wall_time_s = wall;
  result.stats.fps = wall > 0.0 ? static_cast<double>(result.stats.processed) / wall : 0.0;
  result.stats.max_queue_occupancy =
      std::max({q_frames.high_water(), q_pairs.high_water(), q_uplink.high_water()});
  return result;
}

}  // namespace mio
