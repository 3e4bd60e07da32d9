#include <cmath>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "alt/geo.hpp"
#include "alt/ingest.hpp"
#include "alt/util/errors.hpp"

using namespace alt;

namespace {

AdsbPoint pt(const std::string& id, std::int64_t t, double lat, double lon,
             double alt = 10000, double gs = 250, double trk = 0) {
  return AdsbPoint{id, t, lat, lon, alt, gs, trk, false};
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("csv parsing skips malformed rows and counts them") {
  std::istringstream in(
      "id,time,lat,lon,alt,gs,trk\n"
      "AC1,100,1.5,103.5,12000,320,45\n"
      "AC1,101,1.5,103.5,12000,320,370\n"     // heading wraps to 10
      "AC1,abc,1.5,103.5,12000,320,45\n"      // bad time
      "AC1,102,95.0,103.5,12000,320,45\n"     // lat out of range
      "AC1,103,1.5,203.5,12000,320,45\n"      // lon out of range
      "AC1,104,1.5,103.5,12000,-5,45\n"       // negative speed
      ",105,1.5,103.5,12000,320,45\n"         // empty id
      "AC1,106,1.5\n"                         // short row
      "AC2,107,1.6,103.6,11000,310,90\n");
  const auto r = ingest::parse_adsb(in);
  CHECK(r.points.size() == 3);
  CHECK(r.rows_skipped == 6);
  CHECK(r.points[1].heading_deg == doctest::Approx(10.0));
  CHECK(r.points[2].aircraft_id == "AC2");
  CHECK(r.points[2].timestamp == 107);
}

TEST_CASE("csv parsing honours a remapped schema and rejects missing columns") {
  ingest::AdsbSchema schema;
  schema.id = "callsign";
  schema.time = "ts";
  std::istringstream in(
      "ts,callsign,lat,lon,alt,gs,trk\n"
      "50,XY1,1.0,103.0,5000,180,200\n");
  const auto r = ingest::parse_adsb(in, schema);
  REQUIRE(r.points.size() == 1);
  CHECK(r.points[0].aircraft_id == "XY1");
  CHECK(r.points[0].timestamp == 50);

  std::istringstream missing("id,time,lat,lon,alt,gs\n");
  CHECK_THROWS_AS(ingest::parse_adsb(missing), ConfigError);
}

TEST_CASE("gap filling reproduces an exact quadratic track") {
  // lat/lon follow quadratics in t; removing interior samples and refilling
  // them must reproduce the curve to numerical precision, because the fill
  // fits a quadratic through three real neighbours.
  auto lat_of = [](double t) { return 1.0 + 0.01 * t - 0.0004 * t * t; };
  auto lon_of = [](double t) { return 103.0 - 0.02 * t + 0.0007 * t * t; };
  std::vector<AdsbPoint> pts;
  for (int t = 0; t <= 10; ++t) {
    if (t >= 4 && t <= 6) continue;  // knock out a 4 s gap (t=3 -> t=7)
    pts.push_back(pt("Q1", t, lat_of(t), lon_of(t)));
  }
  const auto res = ingest::assemble_trajectories(pts);
  REQUIRE(res.trajectories.size() == 1);
  const auto& tr = res.trajectories[0];
  REQUIRE(tr.points.size() == 11);
  CHECK(res.stats.imputed_points == 3);
  CHECK(res.stats.linear_fallbacks == 0);
  CHECK(res.stats.splits == 0);
  for (int t = 0; t <= 10; ++t) {
    const auto& p = tr.points[t];
    CHECK(p.timestamp == t);
    CHECK(std::fabs(p.lat - lat_of(t)) < 1e-9);
    CHECK(std::fabs(p.lon - lon_of(t)) < 1e-9);
    CHECK(p.imputed == (t >= 4 && t <= 6));
  }
}

TEST_CASE("two-point segments fall back to linear fill") {
  std::vector<AdsbPoint> pts = {pt("L1", 0, 1.0, 103.0, 8000, 200, 350),
                                pt("L1", 4, 1.4, 103.8, 8800, 240, 10)};
  const auto res = ingest::assemble_trajectories(pts);
  REQUIRE(res.trajectories.size() == 1);
  const auto& p = res.trajectories[0].points;
  REQUIRE(p.size() == 5);
  CHECK(res.stats.linear_fallbacks == 1);
  CHECK(res.stats.imputed_points == 3);
  CHECK(p[2].lat == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(p[2].lon == doctest::Approx(103.4).epsilon(1e-12));
  CHECK(p[2].alt_ft == doctest::Approx(8400.0));
  CHECK(p[2].gs_kt == doctest::Approx(220.0));
  // Shortest-arc heading through north: 350 -> 10 passes 0, not 180.
  CHECK(p[2].heading_deg == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(p[1].heading_deg == doctest::Approx(355.0));
  CHECK(p[3].heading_deg == doctest::Approx(5.0));
}

TEST_CASE("large gaps split the track, short fragments are dropped") {
  std::vector<AdsbPoint> pts;
  for (int t = 0; t <= 5; ++t) pts.push_back(pt("S1", t, 1.0 + 0.001 * t, 103.0));
  for (int t = 100; t <= 103; ++t)
    pts.push_back(pt("S1", t, 1.2 + 0.001 * t, 103.2));
  pts.push_back(pt("S1", 500, 1.5, 103.5));  // lone point after another gap
  const auto res = ingest::assemble_trajectories(pts);
  CHECK(res.stats.splits == 2);
  REQUIRE(res.trajectories.size() == 2);  // the lone point is dropped
  CHECK(res.trajectories[0].points.size() == 6);
  CHECK(res.trajectories[1].points.size() == 4);
  CHECK(res.trajectories[0].aircraft_id == "S1");
}

TEST_CASE("duplicate timestamps keep the first report") {
  std::vector<AdsbPoint> pts = {pt("D1", 0, 1.0, 103.0), pt("D1", 1, 1.1, 103.1),
                                pt("D1", 1, 9.9, 109.9), pt("D1", 2, 1.2, 103.2)};
  const auto res = ingest::assemble_trajectories(pts);
  REQUIRE(res.trajectories.size() == 1);
  REQUIRE(res.trajectories[0].points.size() == 3);
  CHECK(res.trajectories[0].points[1].lat == doctest::Approx(1.1));
}

TEST_CASE("max_gap validation") {
  CHECK_THROWS_AS(ingest::assemble_trajectories({}, 0), ConfigError);
  CHECK(ingest::assemble_trajectories({}, 1).trajectories.empty());
}

TEST_CASE("arrival extraction labels the last inbound crossing") {
  geo::AirspaceGeometry g;
  geo::RunwayLayout rl;
  rl.thresholds = {{"02L", g.center_lat, g.center_lon, 23.0, 0.5}};
  const double deg_per_nm = 1.0 / 60.0404;

  // Inbound radial from 55 NM to overhead at 0.5 NM/s, descending/slowing
  // so the threshold gates open well before the capture radius.
  Trajectory inbound;
  inbound.aircraft_id = "ARR1";
  for (int i = 0; i <= 110; ++i) {
    const double d = 55.0 - 0.5 * i;
    AdsbPoint p = pt("ARR1", 1000 + i, g.center_lat + d * deg_per_nm,
                     g.center_lon, std::max(200.0, 12000.0 - 120.0 * i),
                     std::max(140.0, 300.0 - 2.0 * i), 180);
    inbound.points.push_back(p);
  }

  // Never descends nor slows: crosses the circle but cannot match a
  // threshold.
  Trajectory overflight = inbound;
  overflight.aircraft_id = "OVF1";
  for (auto& p : overflight.points) {
    p.aircraft_id = "OVF1";
    p.alt_ft = 30000;
    p.gs_kt = 450;
  }

  // Stays outside the circle entirely.
  Trajectory outside;
  outside.aircraft_id = "OUT1";
  for (int i = 0; i <= 20; ++i)
    outside.points.push_back(
        pt("OUT1", 1000 + i, g.center_lat + 58.0 * deg_per_nm,
           g.center_lon + 0.01 * i, 35000, 460, 90));

  const auto arrivals =
      ingest::extract_arrivals({inbound, overflight, outside}, g, rl);
  REQUIRE(arrivals.size() == 1);
  const auto& a = arrivals[0];
  CHECK(a.aircraft_id == "ARR1");
  CHECK(a.threshold == "02L");
  CHECK(a.runway == "02L");  // unpaired threshold keeps its own name
  // Crosses 50 NM at i = 10 exactly (55 - 0.5*10 = 50; on-boundary counts).
  CHECK(a.t_trc == 1010);
  CHECK(a.t_thr > a.t_trc);
  CHECK(a.label_seconds == doctest::Approx(double(a.t_thr - a.t_trc)));
  CHECK(a.entry_zone == EntryZone::kNorth);
}

TEST_CASE("re-entering the circle moves the label anchor to the later crossing") {
  geo::AirspaceGeometry g;
  geo::RunwayLayout rl;
  rl.thresholds = {{"02L", g.center_lat, g.center_lon, 23.0, 0.5}};
  const double deg_per_nm = 1.0 / 60.0404;

  Trajectory tr;
  tr.aircraft_id = "RE1";
  std::int64_t t = 0;
  auto at = [&](double d_nm, double alt, double gs) {
    tr.points.push_back(pt("RE1", t++, g.center_lat + d_nm * deg_per_nm,
                           g.center_lon, alt, gs, 180));
  };
  // In to 45 NM, back out to 55 NM, then all the way in.
  for (double d = 52; d >= 45; d -= 0.5) at(d, 12000, 280);
  for (double d = 45.5; d <= 55; d += 0.5) at(d, 12000, 280);
  for (double d = 54.5; d >= 0; d -= 0.5)
    at(d, std::min(12000.0, 300.0 + d * 250.0), std::min(280.0, 120.0 + d * 4.0));

  const auto arrivals = ingest::extract_arrivals({tr}, g, rl);
  REQUIRE(arrivals.size() == 1);
  // Three crossings: inbound, outbound, inbound. Label anchors on the last.
  const auto xs = geo::boundary_crossings(tr, g, geo::Boundary::kTrc);
  REQUIRE(xs.size() == 3);
  CHECK(arrivals[0].t_trc == xs[2].time);
}

TEST_CASE("outlier filter needs two records and keeps zero-variance sets") {
  std::vector<ArrivalRecord> one(1);
  one[0].label_seconds = 100;
  CHECK_THROWS_AS(ingest::remove_outliers(one), DataError);

  std::vector<ArrivalRecord> same(5);
  for (auto& r : same) r.label_seconds = 900;
  CHECK(ingest::remove_outliers(same).size() == 5);
}

TEST_CASE("outlier filter never fires on six records") {
  // With population statistics the largest possible deviation among n
  // values is (n-1)/sqrt(n) standard deviations; for n = 6 that is about
  // 2.04, so no six-record set can contain a 3-sigma outlier.
  std::vector<ArrivalRecord> recs(6);
  const double labels[6] = {600, 600, 600, 600, 600, 50000};
  for (int i = 0; i < 6; ++i) recs[i].label_seconds = labels[i];
  CHECK(ingest::remove_outliers(recs).size() == 6);
}

TEST_CASE("outlier filter removes a single extreme among eleven") {
  // Ten identical labels and one extreme: the extreme sits sqrt(10) ~ 3.16
  // standard deviations out and is dropped; the rest sit at ~0.32 sigma.
  std::vector<ArrivalRecord> recs(11);
  for (int i = 0; i < 10; ++i) {
    recs[i].aircraft_id = "K" + std::to_string(i);
    recs[i].label_seconds = 800;
  }
  recs[10].aircraft_id = "X";
  recs[10].label_seconds = 4000;
  const auto kept = ingest::remove_outliers(recs);
  REQUIRE(kept.size() == 10);
  for (const auto& r : kept) CHECK(r.aircraft_id != "X");

  // At exactly n = 10 the extreme sits at exactly 3.0 sigma, which the
  // <= 3 sigma rule keeps.
  recs.pop_back();
  recs[9].aircraft_id = "X";
  recs[9].label_seconds = 4000;
  CHECK(ingest::remove_outliers(recs).size() == 10);
}

}  // TEST_SUITE
