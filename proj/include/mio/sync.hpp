#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <vector>

#include "mio/errors.hpp"
#include "mio/world.hpp"

namespace mio {

// One radar frame paired with the IMU samples covering exactly
// (t_prev_frame, t_curr_frame]. Emitted from the second radar frame onward.
struct SyncedFrame {
  std::size_t frame_index = 0;          // global index of the current radar frame
  std::vector<RadarScan> scans;         // up to overlay_depth most recent, oldest first
  std::vector<ImuSample> imu_window;    // sorted, strictly inside (t_prev, t_curr]
  double t_prev = 0.0;
  double t_curr = 0.0;
  bool imu_gap = false;                 // window came up empty
};

// Merges two individually timestamp-ordered streams. A frame becomes ready
// once an IMU timestamp >= t_curr has been seen (strictly increasing streams
// make that a completeness proof) or the streams are finished.
class Synchronizer {
 public:
  explicit Synchronizer(int overlay_depth = 3) : depth_(overlay_depth) {}

  void push_radar(RadarScan scan) {
    if (seen_radar_ > 0 && scan.timestamp <= last_radar_t_)
      throw NonMonotonicStream("radar stream timestamp regression");
    last_radar_t_ = scan.timestamp;
    ++seen_radar_;
    scans_.push_back(std::move(scan));
  }

  void push_imu(ImuSample sample) {
    if (seen_imu_ > 0 && sample.timestamp <= last_imu_t_)
      throw NonMonotonicStream("imu stream timestamp regression");
    last_imu_t_ = sample.timestamp;
    ++seen_imu_;
    imu_.push_back(sample);
  }

  // Declare both streams ended; pending frames become ready.
  void finish() { finished_ = true; }

  std::optional<SyncedFrame> poll() {
    const std::size_t next = emitted_curr_ + 1;  // global index of the next curr frame
    if (next < base_ + 1) return std::nullopt;   // defensive; base_ only moves past emitted
    const std::size_t rel = next - base_;
    if (rel >= scans_.size()) return std::nullopt;  // curr frame not arrived yet
    const double t_prev = scans_[rel - 1].timestamp;
    const double t_curr = scans_[rel].timestamp;
    if (!finished_ && !(seen_imu_ > 0 && last_imu_t_ >= t_curr)) return std::nullopt;

    SyncedFrame frame;
    frame.frame_index = next;
    frame.t_prev = t_prev;
    frame.t_curr = t_curr;
    while (!imu_.empty() && imu_.front().timestamp <= t_prev) imu_.pop_front();
    while (!imu_.empty() && imu_.front().timestamp <= t_curr) {
      frame.imu_window.push_back(imu_.front());
      imu_.pop_front();
    }
    frame.imu_gap = frame.imu_window.empty();

    const std::size_t depth = static_cast<std::size_t>(depth_);
    const std::size_t first = (next + 1 >= depth) ? next + 1 - depth : 0;
    for (std::size_t g = first; g <= next; ++g) frame.scans.push_back(scans_[g - base_]);

    emitted_curr_ = next;
    // keep only scans the next emission can still reference; the previous
    // frame is always needed for its timestamp
    std::size_t keep_from = (next + 2 >= depth) ? next + 2 - depth : 0;
    keep_from = std::min(keep_from, next);
    while (base_ < keep_from && !scans_.empty()) {
      scans_.pop_front();
      ++base_;
    }
    return frame;
  }

 private:
  int depth_;
  std::deque<RadarScan> scans_;  // scans_[i] has global index base_ + i
  std::size_t base_ = 0;
  std::deque<ImuSample> imu_;
  std::size_t emitted_curr_ = 0;  // global index of the last emitted curr frame
  std::size_t seen_radar_ = 0;
  std::size_t seen_imu_ = 0;
  double last_radar_t_ = 0.0;
  double last_imu_t_ = 0.0;
  bool finished_ = false;
};

// Offline convenience: run a whole recorded sequence through the
// synchronizer in timestamp order.
inline std::vector<SyncedFrame> synchronize_sequence(const std::vector<RadarScan>& scans,
                                                     const std::vector<ImuSample>& imu,
                                                     int overlay_depth = 3) {
  Synchronizer sync(overlay_depth);
  std::vector<SyncedFrame> out;
  std::size_t ri = 0, ii = 0;
  auto drain = [&] {
    while (auto f = sync.poll()) out.push_back(std::move(*f));
  };
  while (ri < scans.size() || ii < imu.size()) {
    const bool take_radar =
        ii >= imu.size() ||
        (ri < scans.size() && scans[ri].timestamp <= imu[ii].timestamp);
    if (take_radar)
      sync.push_radar(scans[ri++]);
    else
      sync.push_imu(imu[ii++]);
    drain();
  }
  sync.finish();
  drain();
  return out;
}

}  // namespace mio
