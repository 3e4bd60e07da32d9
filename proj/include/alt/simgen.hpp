#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "alt/geo.hpp"
#include "alt/track.hpp"

namespace alt::sim {

// Synthetic terminal-area arrival scenario. Aircraft spawn outside the
// extended boundary on a zone radial, fly a dog-leg to final approach with
// constant-per-segment speeds, and may fly racetrack holds when arrival
// pressure is high. All randomness is derived from the seed.
struct ScenarioConfig {
  std::uint64_t seed = 1;
  double duration_hours = 2.0;
  double arrival_rate_per_hour = 30.0;
  std::array<double, 4> zone_weights = {0.25, 0.25, 0.25, 0.25};  // N,E,S,W
  double rate_wave_amplitude = 0.0;  // 0..1, sinusoidal traffic banks
  double speed_min_kt = 235.0;
  double speed_max_kt = 285.0;
  double hold_prob_base = 0.0;
  double hold_congestion_coupling = 0.0;  // prob per aircraft above threshold
  int hold_congestion_threshold = 6;      // airborne-in-TRC count
  std::int64_t hold_leg_s = 60;
  int hold_max_orbits = 2;
  double congestion_slowdown_kt = 0.0;  // entry-speed cut per airborne aircraft
  std::vector<std::int64_t> runway_change_times;  // relative seconds
  std::array<double, 6> recat_weights = {0.02, 0.10, 0.48, 0.20, 0.15, 0.05};
  std::int64_t start_time = 1700000000;

  void validate() const;
};

struct TruthRecord {
  std::string aircraft_id;
  std::string actype;
  int recat = 2;
  std::string threshold;
  std::int64_t t_trc = 0;
  std::int64_t t_thr = 0;
  double label_s = 0.0;
  double label_nohold_s = 0.0;  // counterfactual without the hold
  int hold_orbits = 0;
  EntryZone zone = EntryZone::kNorth;
  double tbe_speed_kt = 0.0;
};

struct Scenario {
  std::vector<Trajectory> tracks;  // clean 1 Hz tracks, ordered by id
  std::vector<TruthRecord> truth;  // same order
};

// Two parallel runways on a 020/200 axis near the geometry center,
// thresholds 02L/20R and 02C/20C.
geo::RunwayLayout default_runway_layout(const geo::AirspaceGeometry& geom);

Scenario generate(const ScenarioConfig& cfg, const geo::AirspaceGeometry& geom,
                  const geo::RunwayLayout& runways);

// Deterministically deletes interior points per aircraft (track endpoints
// are never dropped). rate must be in [0, 0.2].
std::vector<AdsbPoint> inject_gaps(const std::vector<AdsbPoint>& points,
                                   double rate, std::uint64_t seed);

// CSV emission; rows sorted by (time, id). Byte-deterministic per seed.
void write_adsb_csv(const Scenario& s, const std::string& path);
void write_adsb_points_csv(const std::vector<AdsbPoint>& points,
                           const std::string& path);
void write_truth_csv(const Scenario& s, const std::string& path);
void write_fpl_csv(const Scenario& s, const std::string& path);
void write_recat_map_csv(const std::string& path);
void write_metar_csv(const ScenarioConfig& cfg, const std::string& path);

// Flattened 1 Hz point stream of a scenario, sorted (time, id).
std::vector<AdsbPoint> flatten_points(const Scenario& s);

}  // namespace alt::sim
