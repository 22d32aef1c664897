#pragma once

#include <cmath>
#include <filesystem>
#include <vector>

#include "mio/errors.hpp"
#include "mio/imaging.hpp"
#include "mio/model.hpp"
#include "mio/sequence.hpp"
#include "mio/sync.hpp"

namespace mio {

// Builds supervised frame pairs from a recorded sequence. Windows and images
// are produced exactly the way the runtime pipeline produces them, so trained
// models see the same distribution at inference time. Targets are the
// ground-truth relative motions in the previous frame's body frame.
inline SequenceSamples build_samples(const SequenceData& seq, const ImagingConfig& icfg) {
  const auto frames = synchronize_sequence(seq.scans, seq.imu, icfg.overlay_depth);
  SequenceSamples samples;
  samples.reserve(frames.size());

  const double assoc_tol = 0.5 / seq.script.imu_rate;
  PanoramicImage prev;
  bool have_prev = false;
  for (const SyncedFrame& f : frames) {
    if (!have_prev) {
      if (f.scans.size() >= 2) {
        std::vector<RadarScan> boot(f.scans.begin(), f.scans.end() - 1);
        prev = project(overlay(boot, icfg), icfg);
      } else {
        prev = PanoramicImage(icfg.height, icfg.width, f.t_prev);
      }
      have_prev = true;
    }
    PanoramicImage curr = project(overlay(f.scans, icfg), icfg);

    const std::size_t i_prev = nearest_index(seq.truth, f.t_prev);
    const std::size_t i_curr = nearest_index(seq.truth, f.t_curr);
    if (std::abs(seq.truth[i_prev].t - f.t_prev) > assoc_tol ||
        std::abs(seq.truth[i_curr].t - f.t_curr) > assoc_tol)
      throw NoTemporalOverlap("build_samples: radar frame has no ground-truth pose");
    const PoseSE3 rel =
        compose(invert(seq.truth[i_prev].pose), seq.truth[i_curr].pose);

    FramePairSample s;
    s.images = image_pair(prev, curr);
    s.imu_window = f.imu_window;
    s.target = sixdof_from_pose(rel);
    s.t = f.t_curr;
    samples.push_back(std::move(s));
    prev = std::move(curr);
  }
  return samples;
}

inline Dataset load_dataset(const std::vector<std::filesystem::path>& sequence_dirs,
                            const ImagingConfig& icfg) {
  Dataset ds;
  ds.reserve(sequence_dirs.size());
  for (const auto& dir : sequence_dirs) ds.push_back(build_samples(read_sequence(dir), icfg));
  return ds;
}

}  // namespace mio
