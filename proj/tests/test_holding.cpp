#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <doctest.h>

#include "alt/geo.hpp"
#include "alt/holding.hpp"
#include "alt/util/errors.hpp"

using namespace alt;

namespace {

constexpr double kDegPerNm = 1.0 / 60.0404;

// Flies a sequence of (duration_s, turn_rate_deg_per_s) legs at constant
// speed, integrating position in a local east/north frame anchored
// `start_north_nm` north of the airspace centre. 1 Hz samples.
Trajectory fly(const geo::AirspaceGeometry& g, double start_north_nm,
               const std::vector<std::pair<int, double>>& legs,
               double heading0 = 90.0, double gs_kt = 216.0,
               std::int64_t t0 = 5000) {
  Trajectory tr;
  tr.aircraft_id = "FLY";
  double x = 0.0, y = start_north_nm, h = heading0;
  const double v = gs_kt / 3600.0;  // NM per second
  std::int64_t t = t0;
  auto emit = [&] {
    AdsbPoint p;
    p.aircraft_id = tr.aircraft_id;
    p.timestamp = t++;
    p.lat = g.center_lat + y * kDegPerNm;
    p.lon = g.center_lon + x * kDegPerNm / std::cos(g.center_lat * M_PI / 180.0);
    p.alt_ft = 9000;
    p.gs_kt = gs_kt;
    p.heading_deg = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0);
    tr.points.push_back(p);
  };
  emit();
  for (const auto& [dur, rate] : legs)
    for (int s = 0; s < dur; ++s) {
      h += rate;
      x += v * std::sin(h * M_PI / 180.0);
      y += v * std::cos(h * M_PI / 180.0);
      emit();
    }
  return tr;
}

// Standard racetrack legs: two 180-degree turns at 3 deg/s joined by
// straights. One orbit accumulates 360 degrees of same-direction turn.
std::vector<std::pair<int, double>> racetrack(int orbits, int straight_s = 60) {
  std::vector<std::pair<int, double>> legs;
  for (int i = 0; i < orbits; ++i) {
    legs.push_back({60, 3.0});
    legs.push_back({straight_s, 0.0});
    legs.push_back({60, 3.0});
    legs.push_back({straight_s, 0.0});
  }
  return legs;
}

ArrivalRecord arr(const std::string& id, std::int64_t t_trc, std::int64_t t_thr) {
  ArrivalRecord r;
  r.aircraft_id = id;
  r.t_trc = t_trc;
  r.t_thr = t_thr;
  r.label_seconds = static_cast<double>(t_thr - t_trc);
  return r;
}

}  // namespace

TEST_SUITE("holding") {

TEST_CASE("single racetrack orbit in the band is detected") {
  geo::AirspaceGeometry g;
  for (double anchor : {25.0, 45.0, 55.0}) {
    CAPTURE(anchor);
    const auto tr = fly(g, anchor, racetrack(1));
    const auto r = holding::detect_holding(tr, g);
    CHECK(r.holding == 1);
    REQUIRE(!r.intervals.empty());
    CHECK(r.intervals.front().first >= 5000);
    CHECK(r.intervals.back().second <= tr.points.back().timestamp);
  }
}

TEST_CASE("multiple orbits merge into one interval") {
  geo::AirspaceGeometry g;
  const auto tr = fly(g, 45.0, racetrack(3));
  const auto r = holding::detect_holding(tr, g);
  CHECK(r.holding == 1);
  CHECK(r.intervals.size() == 1);
}

TEST_CASE("orbits separated by more than the window give two intervals") {
  geo::AirspaceGeometry g;
  auto legs = racetrack(1);
  legs.push_back({700, 0.0});  // longer than the 600 s window
  const auto second = racetrack(1);
  legs.insert(legs.end(), second.begin(), second.end());
  // Slow enough that the long straight (~21 NM) stays inside the band.
  const auto r = holding::detect_holding(fly(g, 45.0, legs, 90.0, 108.0), g);
  CHECK(r.holding == 1);
  CHECK(r.intervals.size() == 2);
  CHECK(r.intervals[0].second < r.intervals[1].first);
}

TEST_CASE("straight-in approach never flags") {
  geo::AirspaceGeometry g;
  // 58 NM north flying due south across the whole band.
  const auto tr = fly(g, 58.0, {{2400, 0.0}}, 180.0, 150.0);
  const auto r = holding::detect_holding(tr, g);
  CHECK(r.holding == 0);
  CHECK(r.intervals.empty());
}

TEST_CASE("single 180-degree procedure turn never flags") {
  geo::AirspaceGeometry g;
  const auto tr =
      fly(g, 45.0, {{120, 0.0}, {60, 3.0}, {300, 0.0}});
  CHECK(holding::detect_holding(tr, g).holding == 0);
}

TEST_CASE("alternating S-turns cancel and never flag") {
  geo::AirspaceGeometry g;
  std::vector<std::pair<int, double>> legs;
  for (int i = 0; i < 8; ++i) {
    legs.push_back({30, 3.0});   // +90
    legs.push_back({30, -3.0});  // -90
  }
  CHECK(holding::detect_holding(fly(g, 45.0, legs), g).holding == 0);
}

TEST_CASE("orbits outside the detection band never flag") {
  geo::AirspaceGeometry g;
  // Inside the inner edge (20 NM) and outside the outer edge (60 NM).
  CHECK(holding::detect_holding(fly(g, 8.0, racetrack(2)), g).holding == 0);
  CHECK(holding::detect_holding(fly(g, 75.0, racetrack(2)), g).holding == 0);
}

TEST_CASE("turn slower than the window allows never flags") {
  geo::AirspaceGeometry g;
  // 0.5 deg/s: a full circle takes 720 s, more than the 600 s window.
  const auto tr = fly(g, 45.0, {{1500, 0.5}});
  CHECK(holding::detect_holding(tr, g).holding == 0);
  // The same circle flown at 1 deg/s (360 s) flags.
  CHECK(holding::detect_holding(fly(g, 45.0, {{1500, 1.0}}), g).holding == 1);
}

TEST_CASE("sampling slack: a near-complete sampled orbit still counts") {
  geo::AirspaceGeometry g;
  // 1 Hz sampling can hide the last fraction of a turn, so the detector
  // accepts spreads within sampling_slack_deg (default 8) of a full turn.
  const auto almost = fly(g, 45.0, {{118, 3.0}, {200, 0.0}});  // 354 degrees
  CHECK(holding::detect_holding(almost, g).holding == 1);
  const auto clearly_short = fly(g, 45.0, {{113, 3.0}, {200, 0.0}});  // 339
  CHECK(holding::detect_holding(clearly_short, g).holding == 0);

  holding::DetectorParams strict;
  strict.sampling_slack_deg = 0.0;
  CHECK(holding::detect_holding(almost, g, strict).holding == 0);
  const auto full = fly(g, 45.0, {{120, 3.0}, {200, 0.0}});  // exactly 360
  CHECK(holding::detect_holding(full, g, strict).holding == 1);
}

TEST_CASE("left-hand holds are detected too") {
  geo::AirspaceGeometry g;
  std::vector<std::pair<int, double>> legs;
  for (int i = 0; i < 2; ++i) {
    legs.push_back({60, -3.0});
    legs.push_back({60, 0.0});
    legs.push_back({60, -3.0});
    legs.push_back({60, 0.0});
  }
  CHECK(holding::detect_holding(fly(g, 40.0, legs), g).holding == 1);
}

TEST_CASE("degenerate tracks never flag") {
  geo::AirspaceGeometry g;
  Trajectory empty;
  CHECK(holding::detect_holding(empty, g).holding == 0);
  // Under a minute of data is ignored even if it spins fast.
  const auto spin = fly(g, 45.0, {{50, 8.0}});
  CHECK(holding::detect_holding(spin, g).holding == 0);
}

TEST_CASE("leading aircraft: latest entry strictly before, still airborne") {
  const auto target = arr("T1", 1000, 1900);
  std::vector<ArrivalRecord> all = {
      target,
      arr("B1", 900, 1800),   // candidate
      arr("C1", 950, 990),    // landed before the target entered
      arr("D1", 900, 2000),   // ties B1 on entry time
      arr("E1", 1000, 2100),  // not strictly before
  };
  const auto lead = holding::leading_aircraft(target, all);
  REQUIRE(lead.has_value());
  CHECK(lead->aircraft_id == "B1");  // tie broken by smaller id

  // Make D1 enter later: it wins outright.
  all[3].t_trc = 980;
  CHECK(holding::leading_aircraft(target, all)->aircraft_id == "D1");

  // Earliest aircraft has no predecessor.
  CHECK(!holding::leading_aircraft(arr("A0", 800, 1700), all).has_value());
}

TEST_CASE("entry-annulus mean speed") {
  geo::AirspaceGeometry g;
  Trajectory tr;
  tr.aircraft_id = "V1";
  auto at = [&](double d_nm, double gs) {
    AdsbPoint p;
    p.aircraft_id = "V1";
    p.timestamp = static_cast<std::int64_t>(tr.points.size());
    p.lat = g.center_lat + d_nm * kDegPerNm;
    p.lon = g.center_lon;
    p.gs_kt = gs;
    tr.points.push_back(p);
  };
  at(65.0, 500.0);  // outside
  at(58.0, 300.0);  // inside
  at(52.0, 260.0);  // inside
  at(45.0, 100.0);  // inside the circle, outside the annulus
  const auto v = holding::tbe_mean_speed(tr, g);
  REQUIRE(v.has_value());
  CHECK(*v == doctest::Approx(280.0).epsilon(1e-12));

  Trajectory never;
  never.aircraft_id = "V2";
  AdsbPoint p;
  p.lat = g.center_lat;
  p.lon = g.center_lon;
  never.points = {p};
  CHECK(!holding::tbe_mean_speed(never, g).has_value());
}

TEST_CASE("holding features: hand-computed fixture") {
  const auto target = arr("T1", 2000, 2900);
  std::vector<ArrivalRecord> all = {
      target,
      arr("L1", 1900, 2700),  // leading
      arr("M1", 1700, 1950),  // lands inside the window
      arr("N1", 1800, 3000),
      arr("P1", 1000, 1500),  // entered before the window, lands inside it
  };
  std::map<std::string, std::optional<double>> speeds = {
      {"T1", 240.0}, {"L1", 220.0}, {"M1", std::nullopt}, {"N1", 260.0},
      {"P1", 200.0}};
  const std::map<std::string, int> holdings = {{"L1", 1}, {"T1", 0}};

  const auto f = holding::holding_features(target, all, speeds, holdings, 600);
  REQUIRE(f.leading_id.has_value());
  CHECK(*f.leading_id == "L1");
  CHECK(f.total_arrivals == 2);  // M1 and P1 land within [1400, 2000]
  CHECK(f.dt_trc == doctest::Approx(100.0));
  // Fleet mean over entries in [1400, 2000] with known speed:
  // (240 + 220 + 260) / 3 = 240.
  CHECK(f.dv_avg == doctest::Approx(0.0));
  CHECK(f.dv_lead == doctest::Approx(20.0));
  CHECK(f.lead_holding == 1);
  const auto v = f.as_vector();
  REQUIRE(v.size() == 5);
  CHECK(v[0] == 2.0);
  CHECK(v[1] == 100.0);
  CHECK(v[2] == 0.0);
  CHECK(v[3] == 20.0);
  CHECK(v[4] == 1.0);

  SUBCASE("missing leading speed substitutes the fleet mean") {
    speeds["L1"] = std::nullopt;
    const auto f2 =
        holding::holding_features(target, all, speeds, holdings, 600);
    // Fleet mean is now (240 + 260) / 2 = 250.
    CHECK(f2.dv_avg == doctest::Approx(-10.0));
    CHECK(f2.dv_lead == doctest::Approx(-10.0));
  }
  SUBCASE("no leader zeroes the gap fields but keeps the counts") {
    const auto first = arr("A0", 900, 1800);
    auto with = all;
    with.push_back(first);
    const auto f3 =
        holding::holding_features(first, with, speeds, holdings, 600);
    CHECK(!f3.leading_id.has_value());
    CHECK(f3.dt_trc == 0.0);
    CHECK(f3.dv_avg == 0.0);
    CHECK(f3.dv_lead == 0.0);
    CHECK(f3.lead_holding == 0);
  }
  SUBCASE("delta must be positive") {
    CHECK_THROWS_AS(holding::holding_features(target, all, speeds, holdings, 0),
                    ConfigError);
  }
}

}  // TEST_SUITE
