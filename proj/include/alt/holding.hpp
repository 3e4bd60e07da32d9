#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "alt/geo.hpp"
#include "alt/track.hpp"

namespace alt::holding {

// Cumulative-heading-change holding detector. An aircraft is holding when
// the signed heading change over some sliding window reaches a full turn
// while it flies in the detection band around the airport.
struct DetectorParams {
  std::int64_t window_s = 600;
  double threshold_deg = 360.0;
  double band_inner_nm = 20.0;  // band outer edge is the TBX radius
  // 1 Hz sampling hides the fractional-second turn adjacent to the window
  // extremes, so a sampled full orbit can fall a few degrees short of the
  // threshold. Detection uses threshold_deg - sampling_slack_deg.
  double sampling_slack_deg = 8.0;
};

struct HoldingResult {
  int holding = 0;  // 0/1
  std::vector<std::pair<std::int64_t, std::int64_t>> intervals;  // merged
};

HoldingResult detect_holding(const Trajectory& traj,
                             const geo::AirspaceGeometry& geom,
                             const DetectorParams& params = {});

// The arrival with the largest t_trc strictly before the target's, among
// aircraft still airborne at that moment (t_thr > target.t_trc). Ties by
// aircraft id. nullopt when the target has no airborne predecessor.
std::optional<ArrivalRecord> leading_aircraft(
    const ArrivalRecord& target, const std::vector<ArrivalRecord>& all);

// Mean ground speed over points inside the 50-60 NM annulus, or nullopt if
// the track never touches it (caller substitutes the windowed fleet mean).
std::optional<double> tbe_mean_speed(const Trajectory& traj,
                                     const geo::AirspaceGeometry& geom);

// Tabular inputs of the holding featurization head.
struct HoldingFeatures {
  std::optional<std::string> leading_id;
  double dt_trc = 0.0;    // target TRC time minus leading TRC time, s
  double dv_avg = 0.0;    // entry speed minus windowed fleet mean, kt
  double dv_lead = 0.0;   // entry speed minus leading entry speed, kt
  int lead_holding = 0;   // 0/1
  int total_arrivals = 0; // landings within the window

  // Vector layout consumed by the model head.
  std::vector<double> as_vector() const {
    return {static_cast<double>(total_arrivals), dt_trc, dv_avg, dv_lead,
            static_cast<double>(lead_holding)};
  }
};

// speeds: entry-annulus mean speed per aircraft where known; holdings:
// detector output per aircraft. The fleet mean is taken over aircraft whose
// TRC arrival falls inside [t_trc - delta, t_trc]; missing speeds are
// substituted with that mean. Without a leading aircraft all gap fields
// are zero.
HoldingFeatures holding_features(
    const ArrivalRecord& target, const std::vector<ArrivalRecord>& all,
    const std::map<std::string, std::optional<double>>& speeds,
    const std::map<std::string, int>& holdings, std::int64_t delta_s);

}  // namespace alt::holding
