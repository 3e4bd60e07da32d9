#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "alt/geo.hpp"
#include "alt/track.hpp"

namespace alt::raster {

inline constexpr std::array<std::uint8_t, 3> kBackground = {255, 255, 255};
inline constexpr std::array<std::uint8_t, 3> kTargetColor = {255, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kOtherColor = {0, 0, 255};

// Fixed-size RGB8 raster, row-major, top row first.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // width * height * 3

  void fill(const std::array<std::uint8_t, 3>& c);
  void set(int px, int py, const std::array<std::uint8_t, 3>& c);
  std::array<std::uint8_t, 3> get(int px, int py) const;
};

// Equirectangular projection into pixel coordinates, clamped to the raster.
// North is up.
std::pair<int, int> project(double lat, double lon,
                            const geo::AirspaceGeometry& geom, int width,
                            int height);

// Trajectory image for one capture window: points within
// [t_ref - tau, t_ref] and inside the research circle, background aircraft
// in blue first, target in red on top, white background. Consecutive points
// are joined with 1-px integer line segments; segments straddling the
// circle are clipped at the boundary. Byte-deterministic.
ImageU8 render(const Trajectory& target,
               const std::vector<const Trajectory*>& others,
               const geo::AirspaceGeometry& geom, std::int64_t t_ref,
               std::int64_t tau_s, int width, int height);

// FNV-1a over the pixel buffer; used for golden-image checks.
std::uint64_t pixel_hash(const ImageU8& img);

std::string image_filename(const std::string& aircraft_id, std::int64_t t_ref);

}  // namespace alt::raster
