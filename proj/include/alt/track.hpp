#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace alt {

// One ADS-B position report (1 Hz after imputation).
struct AdsbPoint {
  std::string aircraft_id;
  std::int64_t timestamp = 0;  // UTC epoch seconds
  double lat = 0.0;            // degrees, [-90, 90]
  double lon = 0.0;            // degrees, [-180, 180]
  double alt_ft = 0.0;
  double gs_kt = 0.0;          // ground speed, >= 0
  double heading_deg = 0.0;    // [0, 360)
  bool imputed = false;
};

// Per-aircraft 1 Hz track, strictly increasing timestamps with 1 s spacing
// after imputation.
struct Trajectory {
  std::string aircraft_id;
  std::vector<AdsbPoint> points;
};

enum class EntryZone { kNorth, kEast, kSouth, kWest };

const char* entry_zone_name(EntryZone z);
EntryZone entry_zone_from_name(const std::string& s);

// One labeled arrival: research-circle crossing, threshold arrival, and the
// landing-time label in between.
struct ArrivalRecord {
  std::string aircraft_id;
  std::string runway;     // physical runway, e.g. "02L20R"
  std::string threshold;  // e.g. "02L"
  std::int64_t t_trc = 0;
  std::int64_t t_thr = 0;
  double label_seconds = 0.0;  // t_thr - t_trc, > 0
  EntryZone entry_zone = EntryZone::kNorth;
  int recat = 2;  // 0 (light) .. 5 (super heavy)
};

}  // namespace alt
