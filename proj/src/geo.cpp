#include "alt/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "alt/util/errors.hpp"

namespace alt {

const char* entry_zone_name(EntryZone z) {
  switch (z) {
    case EntryZone::kNorth: return "N";
    case EntryZone::kEast: return "E";
    case EntryZone::kSouth: return "S";
    case EntryZone::kWest: return "W";
  }
  return "?";
}

EntryZone entry_zone_from_name(const std::string& s) {
  if (s == "N") return EntryZone::kNorth;
  if (s == "E") return EntryZone::kEast;
  if (s == "S") return EntryZone::kSouth;
  if (s == "W") return EntryZone::kWest;
  throw DataError("unknown entry zone: " + s);
}

}  // namespace alt

namespace alt::geo {

namespace {
constexpr double kDegToRad = M_PI / 180.0;

double wrap360(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d < 0.0) d += 360.0;
  return d;
}
}  // namespace

void AirspaceGeometry::validate() const {
  if (!(trc_radius_nm > 0.0 && trc_radius_nm < tbx_radius_nm))
    throw ConfigError("geometry: need 0 < trc_radius < tbx_radius");
  if (!(bbox_lon_min < bbox_lon_max && bbox_lat_min < bbox_lat_max))
    throw ConfigError("geometry: degenerate raster bbox");
  // The bbox must contain the TRC disc projection.
  const double lat_margin = trc_radius_nm / 60.0;
  const double lon_margin =
      trc_radius_nm / (60.0 * std::cos(center_lat * kDegToRad));
  if (center_lat - lat_margin < bbox_lat_min ||
      center_lat + lat_margin > bbox_lat_max ||
      center_lon - lon_margin < bbox_lon_min ||
      center_lon + lon_margin > bbox_lon_max)
    throw ConfigError("geometry: raster bbox does not contain the TRC disc");
}

void RunwayLayout::validate() const {
  std::set<std::string> names;
  for (const auto& t : thresholds) {
    if (t.name.empty()) throw ConfigError("runway layout: empty threshold name");
    if (!names.insert(t.name).second)
      throw ConfigError("runway layout: duplicate threshold " + t.name);
    if (!(t.capture_radius_nm > 0.0))
      throw ConfigError("runway layout: capture_radius must be > 0");
  }
}

const RunwayThreshold* RunwayLayout::find(const std::string& name) const {
  for (const auto& t : thresholds)
    if (t.name == name) return &t;
  return nullptr;
}

std::string RunwayLayout::physical_runway_of(
    const std::string& threshold_name) const {
  const RunwayThreshold* self = find(threshold_name);
  if (!self) throw DataError("unknown threshold: " + threshold_name);
  const RunwayThreshold* mate = nullptr;
  double best = 3.0;  // pairing distance cap, NM
  for (const auto& t : thresholds) {
    if (t.name == self->name) continue;
    const double rel = std::fabs(wrap360(t.bearing_deg - self->bearing_deg) - 180.0);
    if (rel > 30.0) continue;
    const double d = great_circle_nm(self->lat, self->lon, t.lat, t.lon);
    if (d < best) {
      best = d;
      mate = &t;
    }
  }
  if (!mate) return self->name;
  auto num = [](const std::string& n) {
    int v = 0;
    for (char c : n) {
      if (c < '0' || c > '9') break;
      v = v * 10 + (c - '0');
    }
    return v;
  };
  const bool self_first = num(self->name) != num(mate->name)
                              ? num(self->name) < num(mate->name)
                              : self->name < mate->name;
  return self_first ? self->name + mate->name : mate->name + self->name;
}

RunwayLayout RunwayLayout::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("runway layout: bad json: ") + e.what());
  }
  if (!j.is_array()) throw ConfigError("runway layout: expected a json array");
  RunwayLayout layout;
  for (const auto& item : j) {
    RunwayThreshold t;
    try {
      t.name = item.at("name").get<std::string>();
      t.lat = item.at("lat").get<double>();
      t.lon = item.at("lon").get<double>();
      t.bearing_deg = item.at("bearing").get<double>();
      t.capture_radius_nm = item.value("capture_radius_nm", 0.5);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("runway layout: bad entry: ") + e.what());
    }
    layout.thresholds.push_back(std::move(t));
  }
  layout.validate();
  return layout;
}

RunwayLayout RunwayLayout::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("runway layout: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

double great_circle_nm(double lat1, double lon1, double lat2, double lon2) {
  const double phi1 = lat1 * kDegToRad;
  const double phi2 = lat2 * kDegToRad;
  const double dphi = (lat2 - lat1) * kDegToRad;
  const double dlam = (lon2 - lon1) * kDegToRad;
  const double a = std::sin(dphi / 2.0) * std::sin(dphi / 2.0) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlam / 2.0) *
                       std::sin(dlam / 2.0);
  return 2.0 * kEarthRadiusNm * std::asin(std::min(1.0, std::sqrt(a)));
}

double bearing_deg(double lat1, double lon1, double lat2, double lon2) {
  const double phi1 = lat1 * kDegToRad;
  const double phi2 = lat2 * kDegToRad;
  const double dlam = (lon2 - lon1) * kDegToRad;
  const double y = std::sin(dlam) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) -
                   std::sin(phi1) * std::cos(phi2) * std::cos(dlam);
  return wrap360(std::atan2(y, x) / kDegToRad);
}

std::vector<BoundaryCrossing> boundary_crossings(const Trajectory& traj,
                                                 const AirspaceGeometry& geom,
                                                 Boundary boundary) {
  const double radius =
      boundary == Boundary::kTrc ? geom.trc_radius_nm : geom.tbx_radius_nm;
  std::vector<BoundaryCrossing> out;
  if (traj.points.size() < 2) return out;

  auto signed_dist = [&](const AdsbPoint& p) {
    return great_circle_nm(p.lat, p.lon, geom.center_lat, geom.center_lon) -
           radius;
  };

  double s_prev = signed_dist(traj.points.front());
  for (std::size_t i = 1; i < traj.points.size(); ++i) {
    const double s_cur = signed_dist(traj.points[i]);
    const AdsbPoint& a = traj.points[i - 1];
    const AdsbPoint& b = traj.points[i];
    std::optional<CrossDirection> dir;
    if (s_prev > 0.0 && s_cur <= 0.0) dir = CrossDirection::kInbound;
    else if (s_prev <= 0.0 && s_cur > 0.0) dir = CrossDirection::kOutbound;
    if (dir) {
      const double f = s_prev / (s_prev - s_cur);
      BoundaryCrossing c;
      c.time = std::llround(static_cast<double>(a.timestamp) +
                            f * static_cast<double>(b.timestamp - a.timestamp));
      c.direction = *dir;
      c.lat = a.lat + f * (b.lat - a.lat);
      c.lon = a.lon + f * (b.lon - a.lon);
      if (out.empty() || out.back().time != c.time ||
          out.back().direction != c.direction)
        out.push_back(c);
    }
    s_prev = s_cur;
  }
  return out;
}

std::optional<std::int64_t> crossing_time(const Trajectory& traj,
                                          const AirspaceGeometry& geom,
                                          Boundary boundary,
                                          CrossDirection direction) {
  for (const auto& c : boundary_crossings(traj, geom, boundary))
    if (c.direction == direction) return c.time;
  return std::nullopt;
}

EntryZone zone_of_bearing(double bearing) {
  const double b = wrap360(bearing);
  if (b >= 315.0 || b < 45.0) return EntryZone::kNorth;
  if (b < 135.0) return EntryZone::kEast;
  if (b < 225.0) return EntryZone::kSouth;
  return EntryZone::kWest;
}

EntryZone entry_zone(const Trajectory& traj, const AirspaceGeometry& geom,
                     std::optional<std::int64_t> before_time) {
  const auto crossings = boundary_crossings(traj, geom, Boundary::kTrc);
  const BoundaryCrossing* chosen = nullptr;
  for (const auto& c : crossings) {
    if (c.direction != CrossDirection::kInbound) continue;
    if (before_time && c.time >= *before_time) continue;
    chosen = &c;
    if (!before_time) break;  // first inbound
  }
  if (!chosen) throw DataError("entry_zone: no inbound TRC crossing for " +
                               traj.aircraft_id);
  return zone_of_bearing(
      bearing_deg(geom.center_lat, geom.center_lon, chosen->lat, chosen->lon));
}

std::optional<std::pair<std::string, std::int64_t>> match_threshold(
    const Trajectory& traj, const RunwayLayout& runways, double max_alt_ft,
    double max_gs_kt) {
  for (const auto& p : traj.points) {
    if (!(p.alt_ft < max_alt_ft && p.gs_kt < max_gs_kt)) continue;
    const RunwayThreshold* best = nullptr;
    double best_d = 0.0;
    for (const auto& t : runways.thresholds) {
      const double d = great_circle_nm(p.lat, p.lon, t.lat, t.lon);
      if (d > t.capture_radius_nm) continue;
      if (!best || d < best_d) {
        best = &t;
        best_d = d;
      }
    }
    if (best) return std::make_pair(best->name, p.timestamp);
  }
  return std::nullopt;
}

RunwayOpsFeatures runway_ops_features(const std::vector<ArrivalRecord>& arrivals,
                                      std::int64_t t_ref, std::int64_t delta_s) {
  if (delta_s <= 0) throw ConfigError("runway_ops_features: delta must be > 0");
  std::map<std::string, int> counts;
  std::map<std::string, std::set<std::string>> thresholds_in_use;
  for (const auto& a : arrivals) {
    if (a.t_thr < t_ref - delta_s || a.t_thr > t_ref) continue;
    counts[a.runway] += 1;
    thresholds_in_use[a.runway].insert(a.threshold);
  }
  RunwayOpsFeatures f;
  for (const auto& [runway, n] : counts) f.arrivals_per_runway.emplace_back(runway, n);
  for (const auto& [runway, set] : thresholds_in_use)
    if (set.size() > 1) f.runway_change_label = 1;
  return f;
}

}  // namespace alt::geo
