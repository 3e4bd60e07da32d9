#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <doctest.h>

#include "alt/geo.hpp"
#include "alt/image_io.hpp"
#include "alt/raster.hpp"
#include "alt/util/errors.hpp"

using namespace alt;

namespace {

constexpr double kDegPerNm = 1.0 / 60.0404;

// Straight east-west track at a fixed north offset, flying east at `gs_kt`,
// sampled 1 Hz over [t0, t1]. x0_nm is the starting east offset.
Trajectory straight_track(const std::string& id,
                          const geo::AirspaceGeometry& g, double north_nm,
                          double x0_nm, double gs_kt, std::int64_t t0,
                          std::int64_t t1) {
  Trajectory tr;
  tr.aircraft_id = id;
  const double v = gs_kt / 3600.0;
  for (std::int64_t t = t0; t <= t1; ++t) {
    AdsbPoint p;
    p.aircraft_id = id;
    p.timestamp = t;
    const double x = x0_nm + v * static_cast<double>(t - t0);
    p.lat = g.center_lat + north_nm * kDegPerNm;
    p.lon = g.center_lon + x * kDegPerNm / std::cos(g.center_lat * M_PI / 180.0);
    p.alt_ft = 8000;
    p.gs_kt = gs_kt;
    p.heading_deg = 90;
    tr.points.push_back(p);
  }
  return tr;
}

int count_color(const raster::ImageU8& img,
                const std::array<std::uint8_t, 3>& c) {
  int n = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (img.get(x, y) == c) ++n;
  return n;
}

// Geographic position of a pixel centre (inverse of the projection).
std::pair<double, double> pixel_center(const geo::AirspaceGeometry& g, int px,
                                       int py, int w, int h) {
  const double lon =
      g.bbox_lon_min + (px + 0.5) / w * (g.bbox_lon_max - g.bbox_lon_min);
  const double lat =
      g.bbox_lat_max - (py + 0.5) / h * (g.bbox_lat_max - g.bbox_lat_min);
  return {lat, lon};
}

}  // namespace

TEST_SUITE("raster") {

TEST_CASE("image primitives") {
  raster::ImageU8 img;
  img.width = 4;
  img.height = 3;
  img.rgb.assign(4 * 3 * 3, 0);
  img.fill(raster::kBackground);
  CHECK(img.get(0, 0) == raster::kBackground);
  img.set(2, 1, raster::kTargetColor);
  CHECK(img.get(2, 1) == raster::kTargetColor);
  CHECK(img.get(2, 0) == raster::kBackground);
}

TEST_CASE("projection: north is up, clamped to the raster") {
  geo::AirspaceGeometry g;
  const auto center = raster::project(g.center_lat, g.center_lon, g, 64, 64);
  CHECK(center.first > 16);
  CHECK(center.first < 48);
  CHECK(center.second > 16);
  CHECK(center.second < 48);
  const auto north = raster::project(g.center_lat + 0.3, g.center_lon, g, 64, 64);
  CHECK(north.second < center.second);
  CHECK(north.first == center.first);
  const auto east = raster::project(g.center_lat, g.center_lon + 0.3, g, 64, 64);
  CHECK(east.first > center.first);
  // Far outside the box clamps to the border.
  CHECK(raster::project(89.0, 10.0, g, 64, 64) == std::pair<int, int>(0, 0));
  CHECK(raster::project(-89.0, 170.0, g, 64, 64) ==
        std::pair<int, int>(63, 63));
}

TEST_CASE("target only: red on white, nothing else") {
  geo::AirspaceGeometry g;
  const auto tgt = straight_track("T", g, 10.0, -15.0, 240.0, 1000, 1600);
  const auto img = raster::render(tgt, {}, g, 1600, 600, 64, 64);
  const int red = count_color(img, raster::kTargetColor);
  const int blue = count_color(img, raster::kOtherColor);
  const int white = count_color(img, raster::kBackground);
  CHECK(red > 5);
  CHECK(blue == 0);
  CHECK(red + white == 64 * 64);
}

TEST_CASE("target is drawn over background aircraft") {
  geo::AirspaceGeometry g;
  // Two identical tracks: the shared pixels must come out red.
  const auto tgt = straight_track("T", g, 0.0, -15.0, 240.0, 1000, 1600);
  Trajectory other = tgt;
  other.aircraft_id = "O";
  const auto img = raster::render(tgt, {&other}, g, 1600, 600, 64, 64);
  CHECK(count_color(img, raster::kTargetColor) > 5);
  CHECK(count_color(img, raster::kOtherColor) == 0);

  // Disjoint second aircraft stays blue.
  const auto far_track = straight_track("O2", g, 20.0, -15.0, 240.0, 1000, 1600);
  const auto img2 = raster::render(tgt, {&far_track}, g, 1600, 600, 64, 64);
  CHECK(count_color(img2, raster::kOtherColor) > 5);
}

TEST_CASE("all drawn pixels stay inside the research circle") {
  geo::AirspaceGeometry g;
  const int w = 128, h = 128;
  // A 140 NM track crossing the whole circle and then some.
  const auto tgt = straight_track("T", g, 0.0, -70.0, 504.0, 0, 1000);
  // Another crossing on a chord near the top edge of the circle.
  const auto oth = straight_track("O", g, 48.0, -40.0, 504.0, 0, 571);
  const auto img = raster::render(tgt, {&oth}, g, 1000, 1000, w, h);
  REQUIRE(count_color(img, raster::kTargetColor) > 20);
  REQUIRE(count_color(img, raster::kOtherColor) > 3);
  // Pixel quantisation allows at most about one pixel of overshoot.
  const double px_nm =
      (g.bbox_lon_max - g.bbox_lon_min) / w * 60.0404 *
      std::cos(g.center_lat * M_PI / 180.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (img.get(x, y) == raster::kBackground) continue;
      const auto [lat, lon] = pixel_center(g, x, y, w, h);
      const double d = geo::great_circle_nm(lat, lon, g.center_lat, g.center_lon);
      CHECK(d <= g.trc_radius_nm + 2.0 * px_nm);
    }
}

TEST_CASE("points outside the capture window are invisible") {
  geo::AirspaceGeometry g;
  const auto base = straight_track("T", g, 5.0, -20.0, 300.0, 2000, 2600);

  // Same aircraft with an extra pre-window excursion and post-window tail.
  Trajectory extended = straight_track("T", g, -30.0, -20.0, 300.0, 1000, 1399);
  for (const auto& p : base.points) extended.points.push_back(p);
  auto tail = straight_track("T", g, 5.0, 30.0, 300.0, 2601, 2900);
  for (const auto& p : tail.points) extended.points.push_back(p);

  const auto img_a = raster::render(base, {}, g, 2600, 600, 96, 96);
  const auto img_b = raster::render(extended, {}, g, 2600, 600, 96, 96);
  CHECK(raster::pixel_hash(img_a) == raster::pixel_hash(img_b));
}

TEST_CASE("segments straddling the window edge are clipped in time") {
  geo::AirspaceGeometry g;
  // Sparse 2-point track: one sample before the window, one inside. The
  // drawn portion must start at the interpolated window-edge position, so
  // roughly half the segment is drawn compared to the full version.
  Trajectory sparse;
  sparse.aircraft_id = "T";
  auto mk = [&](std::int64_t t, double x_nm) {
    AdsbPoint p;
    p.aircraft_id = "T";
    p.timestamp = t;
    p.lat = g.center_lat;
    p.lon = g.center_lon + x_nm * kDegPerNm / std::cos(g.center_lat * M_PI / 180.0);
    return p;
  };
  sparse.points = {mk(1000, -40.0), mk(1200, 0.0)};
  // Window [1100, 1200]: only the second half (-20 NM .. 0) is visible.
  const auto img = raster::render(sparse, {}, g, 1200, 100, 256, 256);
  const int clipped = count_color(img, raster::kTargetColor);
  const auto img_full = raster::render(sparse, {}, g, 1200, 200, 256, 256);
  const int full = count_color(img_full, raster::kTargetColor);
  CHECK(clipped > 10);
  CHECK(std::fabs(clipped - full / 2.0) <= full * 0.1);
}

TEST_CASE("pixel footprint scales with ground speed on straight tracks") {
  geo::AirspaceGeometry g;
  const int w = 256, h = 256;
  for (double ratio : {2.0, 3.0}) {
    CAPTURE(ratio);
    const double v_slow = 120.0;
    const auto tgt = straight_track("T", g, -10.0, -22.0, v_slow, 0, 600);
    const auto oth =
        straight_track("O", g, 10.0, -22.0, v_slow * ratio, 0, 600);
    const auto img = raster::render(tgt, {&oth}, g, 600, 600, w, h);
    const int red = count_color(img, raster::kTargetColor);
    const int blue = count_color(img, raster::kOtherColor);
    REQUIRE(red > 10);
    const double got = static_cast<double>(blue) / red;
    CHECK(got == doctest::Approx(ratio).epsilon(0.15));
  }
}

TEST_CASE("render is byte-deterministic") {
  geo::AirspaceGeometry g;
  const auto tgt = straight_track("T", g, 3.0, -25.0, 280.0, 100, 700);
  const auto o1 = straight_track("O1", g, -12.0, -30.0, 350.0, 100, 700);
  const auto o2 = straight_track("O2", g, 25.0, -10.0, 200.0, 100, 700);
  const auto a = raster::render(tgt, {&o1, &o2}, g, 700, 600, 64, 64);
  const auto b = raster::render(tgt, {&o1, &o2}, g, 700, 600, 64, 64);
  REQUIRE(a.rgb.size() == b.rgb.size());
  CHECK(a.rgb == b.rgb);
  CHECK(raster::pixel_hash(a) == raster::pixel_hash(b));
}

TEST_CASE("golden pixel hash is stable across builds") {
  geo::AirspaceGeometry g;
  const auto tgt = straight_track("T", g, 3.0, -25.0, 280.0, 100, 700);
  const auto o1 = straight_track("O1", g, -12.0, -30.0, 350.0, 100, 700);
  const auto o2 = straight_track("O2", g, 25.0, -10.0, 200.0, 100, 700);
  const auto img = raster::render(tgt, {&o1, &o2}, g, 700, 600, 64, 64);
  // Frozen after first generation; any change to projection, clipping or
  // line drawing shows up here.
  const std::uint64_t kGolden = 0xD15CA465D51BA795ull;
  CHECK(raster::pixel_hash(img) == kGolden);
}

TEST_CASE("hash differs for a different scene") {
  geo::AirspaceGeometry g;
  const auto a = straight_track("T", g, 3.0, -25.0, 280.0, 100, 700);
  const auto b = straight_track("T", g, 4.0, -25.0, 280.0, 100, 700);
  CHECK(raster::pixel_hash(raster::render(a, {}, g, 700, 600, 64, 64)) !=
        raster::pixel_hash(raster::render(b, {}, g, 700, 600, 64, 64)));
}

TEST_CASE("a target absent from the window is an error") {
  geo::AirspaceGeometry g;
  const auto tgt = straight_track("T", g, 0.0, -10.0, 240.0, 5000, 5600);
  const auto oth = straight_track("O", g, 5.0, -10.0, 240.0, 100, 700);
  // Window long gone before the target's first sample.
  CHECK_THROWS_AS(raster::render(tgt, {&oth}, g, 700, 600, 64, 64), DataError);
  // A target far outside the circle is equally invisible.
  const auto far_away = straight_track("T", g, 70.0, -10.0, 240.0, 100, 700);
  CHECK_THROWS_AS(raster::render(far_away, {}, g, 700, 600, 64, 64), DataError);
}

TEST_CASE("the head position at t_ref is always drawn") {
  geo::AirspaceGeometry g;
  // Sparse samples bracketing t_ref: head interpolates between them.
  Trajectory tgt;
  tgt.aircraft_id = "T";
  AdsbPoint a, b;
  a.aircraft_id = b.aircraft_id = "T";
  a.timestamp = 990;
  b.timestamp = 1010;
  a.lat = g.center_lat;
  a.lon = g.center_lon - 10.0 * kDegPerNm;
  b.lat = g.center_lat;
  b.lon = g.center_lon + 10.0 * kDegPerNm;
  tgt.points = {a, b};
  const auto img = raster::render(tgt, {}, g, 1000, 600, 64, 64);
  const auto head = raster::project(g.center_lat, g.center_lon, g, 64, 64);
  CHECK(img.get(head.first, head.second) == raster::kTargetColor);
}

TEST_CASE("png encode/decode round trip") {
  geo::AirspaceGeometry g;
  const auto tgt = straight_track("T", g, 3.0, -25.0, 280.0, 100, 700);
  const auto img = raster::render(tgt, {}, g, 700, 600, 48, 32);
  const auto path =
      (std::filesystem::temp_directory_path() / "alt_raster_rt.png").string();
  raster::encode_png(img, path);
  const auto back = raster::decode_png(path);
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.rgb == img.rgb);
  std::filesystem::remove(path);
}

TEST_CASE("image filename embeds aircraft id and reference time") {
  CHECK(raster::image_filename("AB12", 1700000000) == "AB12_1700000000.png");
}

}  // TEST_SUITE
