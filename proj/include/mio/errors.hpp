#pragma once

#include <stdexcept>
#include <string>

namespace mio {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- geometry ---
struct GimbalLock : Error {
  using Error::Error;
};
struct NonMonotonicTimestamps : Error {
  using Error::Error;
};

// --- world / simulation ---
struct WaypointOutsideBounds : Error {
  using Error::Error;
};
struct PathCrossesWall : Error {
  using Error::Error;
};
struct PoseOutsideBounds : Error {
  using Error::Error;
};
struct TrajectoryTooShort : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// --- imaging ---
struct EmptyInput : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};

// --- model ---
struct EmptyWindow : Error {
  using Error::Error;
};
struct GraphNotRecorded : Error {
  using Error::Error;
};
struct EmptyDataset : Error {
  using Error::Error;
};
struct DivergedLoss : Error {
  using Error::Error;
};
struct CheckpointMismatch : Error {
  using Error::Error;
};

// --- pipeline / wire ---
struct NonMonotonicStream : Error {
  using Error::Error;
};
struct BadMagic : Error {
  using Error::Error;
};
struct TruncatedFrame : Error {
  using Error::Error;
};
struct BindFailure : Error {
  using Error::Error;
};
struct UplinkUnavailable : Error {
  using Error::Error;
};

// --- evaluation ---
struct EmptyTrajectory : Error {
  using Error::Error;
};
struct NoTemporalOverlap : Error {
  using Error::Error;
};

}  // namespace mio
