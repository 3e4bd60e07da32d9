#include "alt/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

#include "alt/util/errors.hpp"
#include "alt/util/rng.hpp"

namespace alt::sim {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDegToNm = 60.0;  // one degree of latitude
constexpr double kHoldSpeedKt = 210.0;
constexpr double kMidSpeedKt = 190.0;
constexpr double kHoldRadiusNm = 1.5;
constexpr double kSpawnRadiusNm = 65.0;
constexpr double kTurnFixRadiusNm = 45.0;
constexpr double kFinalFixNm = 10.0;
constexpr double kShortFinalNm = 4.0;

struct Vec2 {
  double x = 0.0;  // east, NM
  double y = 0.0;  // north, NM
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Unit vector of a compass bearing (0 = north, 90 = east).
Vec2 unit(double bearing_deg) {
  double r = bearing_deg * kPi / 180.0;
  return {std::sin(r), std::cos(r)};
}

double course_of(Vec2 d) {
  double b = std::atan2(d.x, d.y) * 180.0 / kPi;
  if (b < 0.0) b += 360.0;
  return b;
}

struct Enu {
  double clat, clon, coslat;
  explicit Enu(const geo::AirspaceGeometry& g)
      : clat(g.center_lat), clon(g.center_lon),
        coslat(std::cos(g.center_lat * kPi / 180.0)) {}
  Vec2 to_enu(double lat, double lon) const {
    return {(lon - clon) * kDegToNm * coslat, (lat - clat) * kDegToNm};
  }
  void to_geo(Vec2 p, double& lat, double& lon) const {
    lat = clat + p.y / kDegToNm;
    lon = clon + p.x / (kDegToNm * coslat);
  }
};

// A path is a chain of straight legs and circular arcs flown at a constant
// per-segment ground speed.
struct Segment {
  bool arc = false;
  Vec2 a, b;          // straight endpoints
  Vec2 center;        // arc center
  double radius = 0.0;
  double phi0 = 0.0;   // bearing from center to arc start
  double sweep = 0.0;  // signed degrees, positive = clockwise
  double speed_kt = 0.0;
  double len_nm = 0.0;
  double course = 0.0;  // straight-leg course
};

Segment straight(Vec2 a, Vec2 b, double speed) {
  Segment s;
  s.a = a;
  s.b = b;
  s.speed_kt = speed;
  s.len_nm = norm(b - a);
  s.course = course_of(b - a);
  return s;
}

Segment arc(Vec2 center, double radius, double phi0, double sweep,
            double speed) {
  Segment s;
  s.arc = true;
  s.center = center;
  s.radius = radius;
  s.phi0 = phi0;
  s.sweep = sweep;
  s.speed_kt = speed;
  s.len_nm = radius * std::abs(sweep) * kPi / 180.0;
  return s;
}

// Position and heading at arc length u into the segment.
void sample_segment(const Segment& s, double u, Vec2& pos, double& heading) {
  if (!s.arc) {
    double f = s.len_nm > 0.0 ? u / s.len_nm : 0.0;
    pos = s.a + f * (s.b - s.a);
    heading = s.course;
    return;
  }
  double phi = s.phi0 + (s.sweep >= 0.0 ? 1.0 : -1.0) *
                            (u / s.radius) * 180.0 / kPi;
  pos = s.center + s.radius * unit(phi);
  heading = phi + (s.sweep >= 0.0 ? 90.0 : -90.0);
  heading = std::fmod(heading, 360.0);
  if (heading < 0.0) heading += 360.0;
}

struct Path {
  std::vector<Segment> segs;
  std::vector<double> t_end;  // cumulative seconds at segment ends
  double total_s = 0.0;

  void finish() {
    t_end.clear();
    double t = 0.0;
    for (const auto& s : segs) {
      t += s.len_nm / s.speed_kt * 3600.0;
      t_end.push_back(t);
    }
    total_s = t;
  }
  void sample(double elapsed_s, Vec2& pos, double& heading,
              double& speed) const {
    std::size_t i = 0;
    while (i + 1 < segs.size() && elapsed_s > t_end[i]) ++i;
    double t0 = i == 0 ? 0.0 : t_end[i - 1];
    double u = (elapsed_s - t0) / 3600.0 * segs[i].speed_kt;
    u = std::clamp(u, 0.0, segs[i].len_nm);
    sample_segment(segs[i], u, pos, heading);
    speed = segs[i].speed_kt;
  }
};

// One racetrack orbit entered at p with inbound course c: two 180-degree
// right turns joined by straight legs, returning to p on course c.
void append_orbit(Path& path, Vec2 p, double c, double leg_nm) {
  double r = kHoldRadiusNm;
  Vec2 c1 = p + r * unit(c + 90.0);
  path.segs.push_back(arc(c1, r, c - 90.0, 180.0, kHoldSpeedKt));
  Vec2 p2 = p + 2.0 * r * unit(c + 90.0);
  Vec2 p3 = p2 + leg_nm * unit(c + 180.0);
  path.segs.push_back(straight(p2, p3, kHoldSpeedKt));
  Vec2 c2 = p3 + r * unit(c - 90.0);
  path.segs.push_back(arc(c2, r, c + 90.0, 180.0, kHoldSpeedKt));
  Vec2 p4 = p + leg_nm * unit(c + 180.0);
  path.segs.push_back(straight(p4, p, kHoldSpeedKt));
}

struct Plan {
  Path path;
  double entry_speed = 0.0;
  double final_speed = 0.0;
  double hold_time_s = 0.0;
  double azimuth = 0.0;
};

Plan build_plan(double azimuth_deg, Vec2 thr, double landing_bearing,
                double entry_speed, double final_speed, int orbits,
                double leg_nm) {
  Plan plan;
  plan.entry_speed = entry_speed;
  plan.final_speed = final_speed;
  plan.azimuth = azimuth_deg;
  Vec2 radial = unit(azimuth_deg);
  Vec2 spawn = kSpawnRadiusNm * radial;
  Vec2 fix = kTurnFixRadiusNm * radial;
  Vec2 faf = thr - kFinalFixNm * unit(landing_bearing);
  Vec2 sfp = thr - kShortFinalNm * unit(landing_bearing);

  Path& p = plan.path;
  p.segs.push_back(straight(spawn, fix, entry_speed));
  if (orbits > 0) {
    double c = course_of(faf - fix);
    for (int i = 0; i < orbits; ++i) append_orbit(p, fix, c, leg_nm);
  }
  p.segs.push_back(straight(fix, faf, kHoldSpeedKt));
  p.segs.push_back(straight(faf, sfp, kMidSpeedKt));
  p.segs.push_back(straight(sfp, thr, final_speed));
  p.finish();
  if (orbits > 0) {
    double t = 0.0;
    // orbit segments are indices 1 .. 4*orbits
    for (int i = 1; i <= 4 * orbits; ++i)
      t += p.segs[i].len_nm / p.segs[i].speed_kt * 3600.0;
    plan.hold_time_s = t;
  }
  return plan;
}

std::string format_double(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  return out;
}

const char* const kActypeByRecat[6] = {"C172", "E190", "A320",
                                       "A333", "B77W", "A388"};

}  // namespace

void ScenarioConfig::validate() const {
  if (duration_hours <= 0.0) throw ConfigError("duration_hours must be > 0");
  if (arrival_rate_per_hour <= 0.0)
    throw ConfigError("arrival_rate_per_hour must be > 0");
  if (arrival_rate_per_hour > 80.0)
    throw ConfigError(
        "arrival_rate_per_hour exceeds two-runway capacity (80/h)");
  double wsum = 0.0;
  for (double w : zone_weights) {
    if (w < 0.0) throw ConfigError("zone weights must be >= 0");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw ConfigError("zone weights must sum to 1");
  if (rate_wave_amplitude < 0.0 || rate_wave_amplitude > 1.0)
    throw ConfigError("rate_wave_amplitude must be in [0,1]");
  if (speed_min_kt < 180.0 || speed_max_kt < speed_min_kt)
    throw ConfigError("entry speed range invalid");
  if (hold_prob_base < 0.0 || hold_prob_base > 1.0)
    throw ConfigError("hold_prob_base must be in [0,1]");
  if (hold_congestion_coupling < 0.0)
    throw ConfigError("hold_congestion_coupling must be >= 0");
  if (hold_leg_s < 10 || hold_leg_s > 300)
    throw ConfigError("hold_leg_s must be in [10,300]");
  if (hold_max_orbits < 1 || hold_max_orbits > 4)
    throw ConfigError("hold_max_orbits must be in [1,4]");
  if (congestion_slowdown_kt < 0.0)
    throw ConfigError("congestion_slowdown_kt must be >= 0");
  double rsum = 0.0;
  for (double w : recat_weights) {
    if (w < 0.0) throw ConfigError("recat weights must be >= 0");
    rsum += w;
  }
  if (std::abs(rsum - 1.0) > 1e-9)
    throw ConfigError("recat weights must sum to 1");
}

geo::RunwayLayout default_runway_layout(const geo::AirspaceGeometry& geom) {
  Enu enu(geom);
  double axis = 20.0;         // landing bearing of the 02 direction
  Vec2 u = unit(axis);
  Vec2 p = unit(axis + 90.0);  // across-track offset
  double half_len = 1.1, half_sep = 0.55;
  geo::RunwayLayout layout;
  auto add = [&](const std::string& name, Vec2 pos, double bearing) {
    geo::RunwayThreshold t;
    t.name = name;
    enu.to_geo(pos, t.lat, t.lon);
    t.bearing_deg = bearing;
    layout.thresholds.push_back(t);
  };
  Vec2 a = -half_sep * p;  // runway 02L/20R
  Vec2 b = half_sep * p;   // runway 02C/20C
  add("02L", a - half_len * u, axis);
  add("20R", a + half_len * u, axis + 180.0);
  add("02C", b - half_len * u, axis);
  add("20C", b + half_len * u, axis + 180.0);
  layout.validate();
  return layout;
}

Scenario generate(const ScenarioConfig& cfg, const geo::AirspaceGeometry& geom,
                  const geo::RunwayLayout& runways) {
  cfg.validate();
  geom.validate();
  Enu enu(geom);

  struct ThrInfo {
    std::string name;
    Vec2 pos;
    double bearing;
    double capture;
  };
  std::vector<ThrInfo> thr;
  for (const auto& t : runways.thresholds)
    thr.push_back(
        {t.name, enu.to_enu(t.lat, t.lon), t.bearing_deg, t.capture_radius_nm});
  if (thr.size() < 2) throw ConfigError("runway layout needs >= 2 thresholds");

  // Half the thresholds serve the "02" flow (bearing < 180), the other half
  // the "20" flow; a runway change flips which set is active.
  std::vector<int> flow_a, flow_b;
  for (int i = 0; i < static_cast<int>(thr.size()); ++i)
    (thr[i].bearing < 180.0 ? flow_a : flow_b).push_back(i);
  if (flow_a.empty() || flow_b.empty()) flow_a = flow_b;  // single-flow layout

  auto flow_at = [&](std::int64_t rel_s) {
    std::size_t flips = 0;
    for (auto t : cfg.runway_change_times)
      if (rel_s >= t) ++flips;
    return flips % 2 == 0 ? flow_a : flow_b;
  };

  Rng rng(cfg.seed);
  Rng rng_spawn = rng.fork(1);
  Rng rng_zone = rng.fork(2);
  Rng rng_speed = rng.fork(3);
  Rng rng_hold = rng.fork(4);
  Rng rng_recat = rng.fork(5);

  double duration_s = cfg.duration_hours * 3600.0;
  double zone_centers[4] = {0.0, 90.0, 180.0, 270.0};

  Scenario out;
  struct Pending {
    std::int64_t t0;
    double t_trc_f, t_thr_f;
  };
  std::vector<Pending> flown;  // for congestion pressure
  int alternate = 0;

  double t = 0.0;
  int index = 0;
  while (true) {
    double rate = cfg.arrival_rate_per_hour / 3600.0;
    rate *= 1.0 + cfg.rate_wave_amplitude * std::sin(2.0 * kPi * t / 3600.0);
    if (rate < 1e-9) rate = 1e-9;
    t += -std::log(1.0 - rng_spawn.uniform()) / rate;
    if (t >= duration_s) break;
    std::int64_t t0 = cfg.start_time + static_cast<std::int64_t>(std::ceil(t));

    // Zone radial.
    double zr = rng_zone.uniform();
    int zone_idx = 3;
    double acc = 0.0;
    for (int z = 0; z < 4; ++z) {
      acc += cfg.zone_weights[z];
      if (zr < acc) {
        zone_idx = z;
        break;
      }
    }
    double azimuth = zone_centers[zone_idx] + rng_zone.uniform(-40.0, 40.0);
    if (azimuth < 0.0) azimuth += 360.0;

    // Congestion pressure: aircraft airborne inside the TRC at spawn.
    int pressure = 0;
    for (const auto& f : flown)
      if (f.t_trc_f <= static_cast<double>(t0) &&
          f.t_thr_f > static_cast<double>(t0))
        ++pressure;

    double entry_speed = rng_speed.uniform(cfg.speed_min_kt, cfg.speed_max_kt);
    entry_speed -= cfg.congestion_slowdown_kt * pressure;
    if (entry_speed < 175.0) entry_speed = 175.0;

    double p_hold =
        cfg.hold_prob_base +
        cfg.hold_congestion_coupling *
            std::max(0, pressure - cfg.hold_congestion_threshold);
    p_hold = std::clamp(p_hold, 0.0, 0.95);
    int orbits = 0;
    if (rng_hold.bernoulli(p_hold))
      orbits = 1 + static_cast<int>(rng_hold.uniform_int(
                       static_cast<std::uint64_t>(cfg.hold_max_orbits)));

    int recat = 5;
    double rr = rng_recat.uniform();
    double racc = 0.0;
    for (int c = 0; c < 6; ++c) {
      racc += cfg.recat_weights[c];
      if (rr < racc) {
        recat = c;
        break;
      }
    }
    double final_speed = 145.0 - 2.0 * (recat - 2);

    // Alternate between active thresholds of the current flow.
    const auto& flow = flow_at(static_cast<std::int64_t>(t));
    int ti = flow[alternate % flow.size()];
    ++alternate;

    Plan plan = build_plan(azimuth, thr[ti].pos, thr[ti].bearing, entry_speed,
                           final_speed, orbits,
                           kHoldSpeedKt * cfg.hold_leg_s / 3600.0);

    // Continuous truth times. The entry leg is radial, so boundary
    // crossings are linear in time; threshold capture happens when the
    // final leg reaches the capture radius.
    double t_trc_f = (kSpawnRadiusNm - geom.trc_radius_nm) / entry_speed * 3600.0;
    double t_thr_f =
        plan.path.total_s - thr[ti].capture / final_speed * 3600.0;
    double label = t_thr_f - t_trc_f;
    double label_nohold = label - plan.hold_time_s;

    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "AC%04d", index);
    ++index;

    Trajectory traj;
    traj.aircraft_id = idbuf;
    std::int64_t n = static_cast<std::int64_t>(std::floor(plan.path.total_s));
    traj.points.reserve(static_cast<std::size_t>(n) + 1);
    for (std::int64_t e = 0; e <= n; ++e) {
      Vec2 pos;
      double heading, speed;
      plan.path.sample(static_cast<double>(e), pos, heading, speed);
      AdsbPoint pt;
      pt.aircraft_id = traj.aircraft_id;
      pt.timestamp = t0 + e;
      enu.to_geo(pos, pt.lat, pt.lon);
      pt.alt_ft = 200.0 + 300.0 * norm(pos);
      pt.gs_kt = speed;
      pt.heading_deg = heading;
      traj.points.push_back(pt);
    }

    TruthRecord tr;
    tr.aircraft_id = traj.aircraft_id;
    tr.actype = kActypeByRecat[recat];
    tr.recat = recat;
    tr.threshold = thr[ti].name;
    tr.t_trc = t0 + static_cast<std::int64_t>(std::llround(t_trc_f));
    tr.t_thr = t0 + static_cast<std::int64_t>(std::llround(t_thr_f));
    tr.label_s = label;
    tr.label_nohold_s = label_nohold;
    tr.hold_orbits = orbits;
    tr.zone = static_cast<EntryZone>(zone_idx);
    tr.tbe_speed_kt = entry_speed;

    flown.push_back({t0, static_cast<double>(t0) + t_trc_f,
                     static_cast<double>(t0) + t_thr_f});
    out.tracks.push_back(std::move(traj));
    out.truth.push_back(std::move(tr));
  }
  if (out.tracks.empty())
    throw DataError("scenario produced no arrivals; increase duration or rate");
  return out;
}

std::vector<AdsbPoint> inject_gaps(const std::vector<AdsbPoint>& points,
                                   double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate > 0.2)
    throw ConfigError("gap rate must be in [0, 0.2]");
  // Identify each aircraft's first and last report; those are kept.
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> range;
  for (const auto& p : points) {
    auto it = range.find(p.aircraft_id);
    if (it == range.end()) {
      range.emplace(p.aircraft_id, std::make_pair(p.timestamp, p.timestamp));
    } else {
      it->second.first = std::min(it->second.first, p.timestamp);
      it->second.second = std::max(it->second.second, p.timestamp);
    }
  }
  Rng rng(seed);
  std::vector<AdsbPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const auto& r = range.at(p.aircraft_id);
    bool endpoint = p.timestamp == r.first || p.timestamp == r.second;
    bool drop = !endpoint && rng.bernoulli(rate);
    if (!drop) out.push_back(p);
  }
  return out;
}

std::vector<AdsbPoint> flatten_points(const Scenario& s) {
  std::vector<AdsbPoint> all;
  std::size_t n = 0;
  for (const auto& t : s.tracks) n += t.points.size();
  all.reserve(n);
  for (const auto& t : s.tracks)
    all.insert(all.end(), t.points.begin(), t.points.end());
  std::stable_sort(all.begin(), all.end(),
                   [](const AdsbPoint& a, const AdsbPoint& b) {
                     if (a.timestamp != b.timestamp)
                       return a.timestamp < b.timestamp;
                     return a.aircraft_id < b.aircraft_id;
                   });
  return all;
}

void write_adsb_points_csv(const std::vector<AdsbPoint>& points,
                           const std::string& path) {
  auto out = open_out(path);
  out << "id,time,lat,lon,alt,gs,trk\n";
  for (const auto& p : points) {
    out << p.aircraft_id << ',' << p.timestamp << ','
        << format_double(p.lat, 6) << ',' << format_double(p.lon, 6) << ','
        << format_double(p.alt_ft, 1) << ',' << format_double(p.gs_kt, 1)
        << ',' << format_double(p.heading_deg, 1) << '\n';
  }
}

void write_adsb_csv(const Scenario& s, const std::string& path) {
  write_adsb_points_csv(flatten_points(s), path);
}

void write_truth_csv(const Scenario& s, const std::string& path) {
  auto out = open_out(path);
  out << "aircraft_id,actype,recat,threshold,t_trc,t_thr,label_s,"
         "label_nohold_s,hold_orbits,entry_zone,tbe_speed_kt\n";
  for (const auto& t : s.truth) {
    out << t.aircraft_id << ',' << t.actype << ',' << t.recat << ','
        << t.threshold << ',' << t.t_trc << ',' << t.t_thr << ','
        << format_double(t.label_s, 3) << ','
        << format_double(t.label_nohold_s, 3) << ',' << t.hold_orbits << ','
        << entry_zone_name(t.zone) << ',' << format_double(t.tbe_speed_kt, 1)
        << '\n';
  }
}

void write_fpl_csv(const Scenario& s, const std::string& path) {
  auto out = open_out(path);
  out << "aircraft_id,actype\n";
  for (const auto& t : s.truth) out << t.aircraft_id << ',' << t.actype << '\n';
}

void write_recat_map_csv(const std::string& path) {
  auto out = open_out(path);
  out << "actype,recat\n";
  for (int c = 0; c < 6; ++c)
    out << kActypeByRecat[c] << ',' << c << '\n';
}

void write_metar_csv(const ScenarioConfig& cfg, const std::string& path) {
  Rng rng(Rng::splitmix(cfg.seed ^ 0x4d45544152ULL));  // independent stream
  auto out = open_out(path);
  out << "time,drct,sknt,gust,vsby,skyl1,skyc1\n";
  int hours = static_cast<int>(std::ceil(cfg.duration_hours)) + 2;
  double drct = rng.uniform(0.0, 360.0);
  const char* cover[4] = {"FEW", "SCT", "BKN", "OVC"};
  for (int h = -1; h < hours; ++h) {
    std::int64_t ts = cfg.start_time + 3600LL * h;
    drct += rng.uniform(-25.0, 25.0);
    drct = std::fmod(drct + 360.0, 360.0);
    double sknt = rng.uniform(4.0, 18.0);
    double gust = rng.uniform() < 0.1 ? sknt + rng.uniform(5.0, 10.0) : 0.0;
    double vsby = rng.uniform() < 0.15 ? rng.uniform(5.0, 9.0) : 10.0;
    double skyl1 = std::floor(rng.uniform(12.0, 30.0)) * 100.0;
    int ci = static_cast<int>(rng.uniform_int(4));
    out << ts << ',' << format_double(drct, 0) << ',' << format_double(sknt, 1)
        << ',';
    if (gust > 0.0)
      out << format_double(gust, 1);
    else
      out << 'M';  // calm: gust reported missing, consumers fill 0
    out << ',' << format_double(vsby, 1) << ',' << format_double(skyl1, 0)
        << ',' << cover[ci] << '\n';
  }
}

}  // namespace alt::sim
