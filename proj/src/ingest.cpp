#include "alt/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "alt/util/csv.hpp"
#include "alt/util/errors.hpp"

namespace alt::ingest {

namespace {

double wrap360(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d < 0.0) d += 360.0;
  return d;
}

// Exact quadratic through three (t, y) samples, evaluated at tq. Times are
// centered on t0 by the caller so the fit stays well conditioned.
double lagrange3(double t0, double y0, double t1, double y1, double t2,
                 double y2, double tq) {
  const double l0 = (tq - t1) * (tq - t2) / ((t0 - t1) * (t0 - t2));
  const double l1 = (tq - t0) * (tq - t2) / ((t1 - t0) * (t1 - t2));
  const double l2 = (tq - t0) * (tq - t1) / ((t2 - t0) * (t2 - t1));
  return y0 * l0 + y1 * l1 + y2 * l2;
}

double lerp(double a, double b, double f) { return a + f * (b - a); }

// Shortest-arc heading interpolation.
double lerp_heading(double a, double b, double f) {
  double d = std::fmod(b - a, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return wrap360(a + f * d);
}

}  // namespace

ParseResult parse_adsb(std::istream& in, const AdsbSchema& schema) {
  CsvTable table = read_csv(in);
  auto need = [&](const std::string& name) {
    auto idx = table.column(name);
    if (!idx) throw ConfigError("adsb csv: missing required column '" + name + "'");
    return *idx;
  };
  const std::size_t c_id = need(schema.id);
  const std::size_t c_time = need(schema.time);
  const std::size_t c_lat = need(schema.lat);
  const std::size_t c_lon = need(schema.lon);
  const std::size_t c_alt = need(schema.alt);
  const std::size_t c_gs = need(schema.gs);
  const std::size_t c_trk = need(schema.trk);
  const std::size_t max_col =
      std::max({c_id, c_time, c_lat, c_lon, c_alt, c_gs, c_trk});

  ParseResult out;
  out.points.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.size() <= max_col) {
      ++out.rows_skipped;
      continue;
    }
    const auto time = parse_int(row[c_time]);
    const auto lat = parse_double(row[c_lat]);
    const auto lon = parse_double(row[c_lon]);
    const auto alt = parse_double(row[c_alt]);
    const auto gs = parse_double(row[c_gs]);
    const auto trk = parse_double(row[c_trk]);
    if (row[c_id].empty() || !time || !lat || !lon || !alt || !gs || !trk ||
        *lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0 ||
        *gs < 0.0) {
      ++out.rows_skipped;
      continue;
    }
    AdsbPoint p;
    p.aircraft_id = row[c_id];
    p.timestamp = *time;
    p.lat = *lat;
    p.lon = *lon;
    p.alt_ft = *alt;
    p.gs_kt = *gs;
    p.heading_deg = wrap360(*trk);
    p.imputed = false;
    out.points.push_back(std::move(p));
  }
  return out;
}

ParseResult parse_adsb_file(const std::string& path, const AdsbSchema& schema) {
  std::ifstream f(path);
  if (!f) throw DataError("adsb csv: cannot open " + path);
  return parse_adsb(f, schema);
}

AssembleResult assemble_trajectories(const std::vector<AdsbPoint>& points,
                                     std::int64_t max_gap) {
  if (max_gap < 1) throw ConfigError("assemble_trajectories: max_gap must be >= 1");
  AssembleResult out;

  std::map<std::string, std::vector<AdsbPoint>> by_aircraft;
  for (const auto& p : points) by_aircraft[p.aircraft_id].push_back(p);

  for (auto& [id, pts] : by_aircraft) {
    std::stable_sort(pts.begin(), pts.end(),
                     [](const AdsbPoint& a, const AdsbPoint& b) {
                       return a.timestamp < b.timestamp;
                     });
    // Drop duplicate timestamps, keeping the first report.
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const AdsbPoint& a, const AdsbPoint& b) {
                            return a.timestamp == b.timestamp;
                          }),
              pts.end());

    // Cut into segments at gaps larger than max_gap.
    std::vector<std::vector<AdsbPoint>> segments;
    std::vector<AdsbPoint> seg;
    for (const auto& p : pts) {
      if (!seg.empty() && p.timestamp - seg.back().timestamp > max_gap) {
        segments.push_back(std::move(seg));
        seg.clear();
        ++out.stats.splits;
      }
      seg.push_back(p);
    }
    if (!seg.empty()) segments.push_back(std::move(seg));

    for (const auto& real : segments) {
      if (real.size() < 2) continue;
      Trajectory traj;
      traj.aircraft_id = id;
      for (std::size_t i = 0; i + 1 < real.size(); ++i) {
        const AdsbPoint& a = real[i];
        const AdsbPoint& b = real[i + 1];
        traj.points.push_back(a);
        const std::int64_t dt = b.timestamp - a.timestamp;
        if (dt <= 1) continue;

        // Third fit point: the real neighbour nearest to the gap, earlier
        // side preferred on ties.
        const AdsbPoint* extra = nullptr;
        const AdsbPoint* prev = i > 0 ? &real[i - 1] : nullptr;
        const AdsbPoint* next = i + 2 < real.size() ? &real[i + 2] : nullptr;
        if (prev && next) {
          extra = (a.timestamp - prev->timestamp) <= (next->timestamp - b.timestamp)
                      ? prev
                      : next;
        } else {
          extra = prev ? prev : next;
        }
        if (!extra) ++out.stats.linear_fallbacks;

        const double t_base = static_cast<double>(a.timestamp);
        for (std::int64_t t = a.timestamp + 1; t < b.timestamp; ++t) {
          AdsbPoint q;
          q.aircraft_id = id;
          q.timestamp = t;
          const double f = static_cast<double>(t - a.timestamp) /
                           static_cast<double>(dt);
          if (extra) {
            q.lat = lagrange3(static_cast<double>(extra->timestamp) - t_base,
                              extra->lat, 0.0, a.lat,
                              static_cast<double>(dt), b.lat,
                              static_cast<double>(t) - t_base);
            q.lon = lagrange3(static_cast<double>(extra->timestamp) - t_base,
                              extra->lon, 0.0, a.lon,
                              static_cast<double>(dt), b.lon,
                              static_cast<double>(t) - t_base);
          } else {
            q.lat = lerp(a.lat, b.lat, f);
            q.lon = lerp(a.lon, b.lon, f);
          }
          q.alt_ft = lerp(a.alt_ft, b.alt_ft, f);
          q.gs_kt = lerp(a.gs_kt, b.gs_kt, f);
          q.heading_deg = lerp_heading(a.heading_deg, b.heading_deg, f);
          q.imputed = true;
          traj.points.push_back(std::move(q));
          ++out.stats.imputed_points;
        }
      }
      traj.points.push_back(real.back());
      out.trajectories.push_back(std::move(traj));
    }
  }
  return out;
}

std::vector<ArrivalRecord> extract_arrivals(
    const std::vector<Trajectory>& trajectories,
    const geo::AirspaceGeometry& geometry, const geo::RunwayLayout& runways) {
  geometry.validate();
  runways.validate();
  std::vector<ArrivalRecord> out;
  for (const auto& traj : trajectories) {
    const auto matched = geo::match_threshold(traj, runways);
    if (!matched) continue;
    const auto& [threshold, t_thr] = *matched;

    // Last inbound crossing before the threshold arrival.
    const auto crossings =
        geo::boundary_crossings(traj, geometry, geo::Boundary::kTrc);
    const geo::BoundaryCrossing* chosen = nullptr;
    for (const auto& c : crossings) {
      if (c.direction == geo::CrossDirection::kInbound && c.time < t_thr)
        chosen = &c;
    }
    if (!chosen) continue;

    ArrivalRecord rec;
    rec.aircraft_id = traj.aircraft_id;
    rec.threshold = threshold;
    rec.runway = runways.physical_runway_of(threshold);
    rec.t_trc = chosen->time;
    rec.t_thr = t_thr;
    rec.label_seconds = static_cast<double>(t_thr - chosen->time);
    rec.entry_zone = geo::zone_of_bearing(geo::bearing_deg(
        geometry.center_lat, geometry.center_lon, chosen->lat, chosen->lon));
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<ArrivalRecord> remove_outliers(
    const std::vector<ArrivalRecord>& records) {
  if (records.size() < 2)
    throw DataError("remove_outliers: need at least 2 records");
  double mean = 0.0;
  for (const auto& r : records) mean += r.label_seconds;
  mean /= static_cast<double>(records.size());
  double var = 0.0;
  for (const auto& r : records) {
    const double d = r.label_seconds - mean;
    var += d * d;
  }
  var /= static_cast<double>(records.size());
  const double sd = std::sqrt(var);
  if (sd == 0.0) return records;

  std::vector<ArrivalRecord> out;
  out.reserve(records.size());
  for (const auto& r : records)
    if (std::fabs(r.label_seconds - mean) <= 3.0 * sd) out.push_back(r);
  return out;
}

}  // namespace alt::ingest
