#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "alt/geo.hpp"
#include "alt/track.hpp"

namespace alt::ingest {

// Logical column -> CSV column name. Defaults match OpenSky-style exports.
struct AdsbSchema {
  std::string id = "id";
  std::string time = "time";
  std::string lat = "lat";
  std::string lon = "lon";
  std::string alt = "alt";
  std::string gs = "gs";
  std::string trk = "trk";
};

struct ParseResult {
  std::vector<AdsbPoint> points;
  std::size_t rows_skipped = 0;
};

// Parses an ADS-B CSV. Malformed rows (bad numbers, out-of-range lat/lon,
// negative speed) are counted and skipped. Throws ConfigError when a
// required column is missing and DataError when the stream is unreadable.
ParseResult parse_adsb(std::istream& in, const AdsbSchema& schema = {});
ParseResult parse_adsb_file(const std::string& path,
                            const AdsbSchema& schema = {});

struct AssembleStats {
  std::size_t imputed_points = 0;
  std::size_t linear_fallbacks = 0;  // gaps filled linearly (< 3 real points)
  std::size_t splits = 0;            // gaps > max_gap that cut a track
};

struct AssembleResult {
  std::vector<Trajectory> trajectories;
  AssembleStats stats;
};

// Groups points per aircraft, sorts by time, fills 2..max_gap second gaps
// (quadratic lat/lon over the three nearest real points, linear for
// speed/altitude, shortest-arc for heading) and splits tracks at larger
// gaps. Output is ordered by aircraft id, then time.
AssembleResult assemble_trajectories(const std::vector<AdsbPoint>& points,
                                     std::int64_t max_gap = 10);

// Arrivals: last inbound TRC crossing before the threshold arrival.
// Trajectories that never reach a threshold (or never cross inbound) are
// excluded.
std::vector<ArrivalRecord> extract_arrivals(
    const std::vector<Trajectory>& trajectories,
    const geo::AirspaceGeometry& geometry, const geo::RunwayLayout& runways);

// Removes records whose label deviates from the mean by more than three
// standard deviations. Statistics are computed once over the input set;
// zero variance keeps everything. Throws DataError for fewer than 2 records.
std::vector<ArrivalRecord> remove_outliers(
    const std::vector<ArrivalRecord>& records);

}  // namespace alt::ingest
