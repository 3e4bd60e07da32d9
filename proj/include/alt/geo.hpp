#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "alt/track.hpp"

namespace alt::geo {

// Mean-sphere radius in nautical miles.
inline constexpr double kEarthRadiusNm = 3440.065;

// Research-circle geometry around the airport reference point. Defaults
// describe a Changi-like terminal area.
struct AirspaceGeometry {
  double center_lat = 1.3644;
  double center_lon = 103.9915;
  double trc_radius_nm = 50.0;   // research circle, anchors labels
  double tbx_radius_nm = 60.0;   // extended boundary
  double bbox_lon_min = 103.0;
  double bbox_lon_max = 105.0;
  double bbox_lat_min = 0.5;
  double bbox_lat_max = 2.25;

  // Throws ConfigError on violated invariants.
  void validate() const;
};

struct RunwayThreshold {
  std::string name;  // e.g. "02L"
  double lat = 0.0;
  double lon = 0.0;
  double bearing_deg = 0.0;     // landing direction
  double capture_radius_nm = 0.5;
};

struct RunwayLayout {
  std::vector<RunwayThreshold> thresholds;

  void validate() const;

  // Physical runway name for a threshold: opposite-end thresholds (bearing
  // ~180 deg apart, within 3 NM) are paired and named by concatenation with
  // the lower-numbered end first ("02L" + "20R" -> "02L20R"). Unpaired
  // thresholds keep their own name.
  std::string physical_runway_of(const std::string& threshold_name) const;

  const RunwayThreshold* find(const std::string& name) const;

  static RunwayLayout from_json_file(const std::string& path);
  static RunwayLayout from_json_text(const std::string& text);
};

struct RunwayOpsFeatures {
  // (physical runway name, arrival count in window), sorted by name
  std::vector<std::pair<std::string, int>> arrivals_per_runway;
  int runway_change_label = 0;  // 1 iff a runway's threshold changed in window
};

double great_circle_nm(double lat1, double lon1, double lat2, double lon2);

// Initial great-circle bearing from (lat1,lon1) to (lat2,lon2), [0, 360).
double bearing_deg(double lat1, double lon1, double lat2, double lon2);

enum class Boundary { kTrc, kTbx };
enum class CrossDirection { kInbound, kOutbound };

struct BoundaryCrossing {
  std::int64_t time = 0;  // rounded to nearest second
  CrossDirection direction = CrossDirection::kInbound;
  double lat = 0.0;
  double lon = 0.0;
};

// All boundary crossings in time order. A point exactly on the boundary
// counts as crossing at that point's timestamp.
std::vector<BoundaryCrossing> boundary_crossings(const Trajectory& traj,
                                                 const AirspaceGeometry& geom,
                                                 Boundary boundary);

// First crossing in the requested direction, or nullopt.
std::optional<std::int64_t> crossing_time(const Trajectory& traj,
                                          const AirspaceGeometry& geom,
                                          Boundary boundary,
                                          CrossDirection direction);

EntryZone zone_of_bearing(double bearing);

// Zone of the inbound TRC crossing. Uses the last inbound crossing strictly
// before `before_time` when given, else the first one. Throws DataError if
// the trajectory never crosses inbound.
EntryZone entry_zone(const Trajectory& traj, const AirspaceGeometry& geom,
                     std::optional<std::int64_t> before_time = std::nullopt);

// Earliest point within a threshold's capture radius that is below the
// altitude and speed gates; among simultaneous candidates the closest
// threshold wins.
std::optional<std::pair<std::string, std::int64_t>> match_threshold(
    const Trajectory& traj, const RunwayLayout& runways,
    double max_alt_ft = 1000.0, double max_gs_kt = 200.0);

// Arrival counts per physical runway with t_thr in [t_ref - delta, t_ref],
// and the threshold-change label over that window.
RunwayOpsFeatures runway_ops_features(const std::vector<ArrivalRecord>& arrivals,
                                      std::int64_t t_ref, std::int64_t delta_s);

}  // namespace alt::geo
