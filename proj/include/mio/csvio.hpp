#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mio/errors.hpp"
#include "mio/geometry.hpp"

namespace mio {

// All file formats use 9 significant digits, '.' decimal point, LF endings.
inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw IoError("bad numeric field: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  return f;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  return f;
}

// ----------------------------------------------------------------------------
// Trajectory CSV: header `t,x,y,z,qw,qx,qy,qz`, one row per entry.
// ----------------------------------------------------------------------------

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,x,y,z,qw,qx,qy,qz\n";
  for (const TimedPose& e : traj) {
    const Quat& q = e.pose.rotation;
    const Vec3& t = e.pose.translation;
    os << fmt9(e.t) << ',' << fmt9(t.x) << ',' << fmt9(t.y) << ',' << fmt9(t.z) << ','
       << fmt9(q.w) << ',' << fmt9(q.x) << ',' << fmt9(q.y) << ',' << fmt9(q.z) << '\n';
  }
}

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  auto f = open_out(path);
  write_trajectory_csv(f, traj);
}

inline Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("t,x,y,z", 0) != 0)
    throw IoError("not a trajectory CSV: " + path.string());
  Trajectory traj;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 8) throw IoError("trajectory row needs 8 columns: " + path.string());
    TimedPose e;
    e.t = parse_double(cols[0]);
    e.pose.translation = {parse_double(cols[1]), parse_double(cols[2]), parse_double(cols[3])};
    e.pose.rotation = {parse_double(cols[4]), parse_double(cols[5]), parse_double(cols[6]),
                       parse_double(cols[7])};
    if (!traj.empty() && e.t <= traj.back().t)
      throw NonMonotonicTimestamps("trajectory CSV timestamps must strictly increase");
    traj.push_back(e);
  }
  return traj;
}

}  // namespace mio
