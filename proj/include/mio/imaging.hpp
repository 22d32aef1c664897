#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "mio/csvio.hpp"
#include "mio/errors.hpp"
#include "mio/world.hpp"

namespace mio {

// ============================================================================
// PanoramicImage - azimuth x elevation grid of normalized inverse depth.
// 0 = no return; nearer returns are brighter (1 - r/max_range).
// ============================================================================

struct PanoramicImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // row-major, row 0 = top (max elevation)
  double frame_timestamp = 0.0;

  PanoramicImage() = default;
  PanoramicImage(int h, int w, double t = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0.0), frame_timestamp(t) {}

  double& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
};

struct ImagingConfig {
  int height = 16;
  int width = 64;
  double az_fov = 120.0 * M_PI / 180.0;
  double el_fov = 30.0 * M_PI / 180.0;
  double max_range = 8.0;
  int overlay_depth = 3;

  static ImagingConfig from_geometry(const RadarGeometry& g, int h = 16, int w = 64,
                                     int overlay = 3) {
    ImagingConfig cfg;
    cfg.height = h;
    cfg.width = w;
    cfg.az_fov = g.az_fov;
    cfg.el_fov = g.el_fov;
    cfg.max_range = g.max_range;
    cfg.overlay_depth = overlay;
    return cfg;
  }
};

// ============================================================================
// Operations
// ============================================================================

// Union of up to overlay_depth consecutive scans, taken as-is in the newest
// scan's sensor frame (no motion compensation, no dedup).
inline RadarScan overlay(const std::vector<RadarScan>& scans, const ImagingConfig& cfg) {
  if (scans.empty()) throw EmptyInput("overlay: no scans");
  if (scans.size() > static_cast<std::size_t>(cfg.overlay_depth))
    throw Error("overlay: more scans than overlay_depth");
  for (std::size_t i = 1; i < scans.size(); ++i)
    if (scans[i].timestamp <= scans[i - 1].timestamp)
      throw NonMonotonicTimestamps("overlay: scan timestamps must strictly increase");
  RadarScan out;
  out.timestamp = scans.back().timestamp;
  for (const RadarScan& s : scans)
    out.points.insert(out.points.end(), s.points.begin(), s.points.end());
  return out;
}

// Spherical projection with nearest-return (min range) pixel rule.
inline PanoramicImage project(const RadarScan& scan, const ImagingConfig& cfg) {
  PanoramicImage img(cfg.height, cfg.width, scan.timestamp);
  for (const RadarPoint& p : scan.points) {
    const double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    if (r > cfg.max_range) continue;
    const double az = std::atan2(p.y, p.x);
    const double el = std::atan2(p.z, std::hypot(p.x, p.y));
    if (std::abs(az) > 0.5 * cfg.az_fov || std::abs(el) > 0.5 * cfg.el_fov) continue;
    int col = static_cast<int>(std::floor((az + 0.5 * cfg.az_fov) / cfg.az_fov * cfg.width));
    col = std::clamp(col, 0, cfg.width - 1);
    int row = static_cast<int>(std::floor((0.5 * cfg.el_fov - el) / cfg.el_fov * cfg.height));
    row = std::clamp(row, 0, cfg.height - 1);
    const double value = 1.0 - r / cfg.max_range;
    if (value > img.at(row, col)) img.at(row, col) = value;  // nearest return wins
  }
  return img;
}

// Two-channel network input: channel 0 = previous frame, channel 1 = current.
struct ImagePairTensor {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // 2 * H * W, channel-major

  double at(int c, int row, int col) const {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }
};

inline ImagePairTensor image_pair(const PanoramicImage& prev, const PanoramicImage& curr) {
  if (prev.height != curr.height || prev.width != curr.width)
    throw ShapeMismatch("image_pair: image dimensions differ");
  ImagePairTensor out;
  out.height = prev.height;
  out.width = prev.width;
  out.data.reserve(prev.data.size() * 2);
  out.data.insert(out.data.end(), prev.data.begin(), prev.data.end());
  out.data.insert(out.data.end(), curr.data.begin(), curr.data.end());
  return out;
}

// Debug dump for visual inspection (P2, maxval 255).
inline void write_pgm(const PanoramicImage& img, const std::filesystem::path& path) {
  auto f = open_out(path);
  f << "P2\n" << img.width << ' ' << img.height << "\n255\n";
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      f << static_cast<int>(std::lround(255.0 * img.at(r, c)));
      f << (c + 1 == img.width ? '\n' : ' ');
    }
  }
}

}  // namespace mio
