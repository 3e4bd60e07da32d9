#include "alt/raster.hpp"

#include <algorithm>
#include <cmath>

#include "alt/util/errors.hpp"

namespace alt::raster {

void ImageU8::fill(const std::array<std::uint8_t, 3>& c) {
  for (std::size_t i = 0; i + 2 < rgb.size(); i += 3) {
    rgb[i] = c[0];
    rgb[i + 1] = c[1];
    rgb[i + 2] = c[2];
  }
}

void ImageU8::set(int px, int py, const std::array<std::uint8_t, 3>& c) {
  const std::size_t off = (static_cast<std::size_t>(py) * width + px) * 3;
  rgb[off] = c[0];
  rgb[off + 1] = c[1];
  rgb[off + 2] = c[2];
}

std::array<std::uint8_t, 3> ImageU8::get(int px, int py) const {
  const std::size_t off = (static_cast<std::size_t>(py) * width + px) * 3;
  return {rgb[off], rgb[off + 1], rgb[off + 2]};
}

std::pair<int, int> project(double lat, double lon,
                            const geo::AirspaceGeometry& geom, int width,
                            int height) {
  const double fx =
      (lon - geom.bbox_lon_min) / (geom.bbox_lon_max - geom.bbox_lon_min);
  const double fy =
      (geom.bbox_lat_max - lat) / (geom.bbox_lat_max - geom.bbox_lat_min);
  int px = static_cast<int>(std::floor(fx * width));
  int py = static_cast<int>(std::floor(fy * height));
  px = std::clamp(px, 0, width - 1);
  py = std::clamp(py, 0, height - 1);
  return {px, py};
}

namespace {

void draw_line(ImageU8& img, int x0, int y0, int x1, int y1,
               const std::array<std::uint8_t, 3>& c) {
  // Classic integer Bresenham, no anti-aliasing.
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  int x = x0, y = y0;
  while (true) {
    img.set(x, y, c);
    if (x == x1 && y == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

struct PlanarPoint {
  double lat, lon;
};

double dist_to_center(const geo::AirspaceGeometry& g, double lat, double lon) {
  return geo::great_circle_nm(lat, lon, g.center_lat, g.center_lon);
}

// Parameter f in [0,1] along a->b where the great-circle distance to the
// airport equals the TRC radius. Monotone along the segment at these scales,
// so bisection converges; endpoints must straddle the circle.
double clip_fraction(const geo::AirspaceGeometry& g, double alat, double alon,
                     double blat, double blon) {
  double lo = 0.0, hi = 1.0;
  const double sa = dist_to_center(g, alat, alon) - g.trc_radius_nm;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double lat = alat + mid * (blat - alat);
    const double lon = alon + mid * (blon - alon);
    const double s = dist_to_center(g, lat, lon) - g.trc_radius_nm;
    if ((s > 0.0) == (sa > 0.0))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Draws one aircraft's track restricted to the time window and the research
// circle. Segments straddling either limit are clipped: in time by linear
// interpolation between the samples, in space at the circle boundary. The
// clipping order (time first, then space) makes the target's last drawn
// pixel its boundary-crossing position when t_hi is the crossing time.
bool draw_track(ImageU8& img, const Trajectory& traj,
                const geo::AirspaceGeometry& geom, std::int64_t t_lo,
                std::int64_t t_hi, const std::array<std::uint8_t, 3>& color) {
  bool drew = false;
  auto inside = [&](double lat, double lon) {
    return dist_to_center(geom, lat, lon) <= geom.trc_radius_nm;
  };

  // Points are time-sorted, so start one before the window (that pair may
  // straddle t_lo) and stop once past it.
  const auto first = std::lower_bound(
      traj.points.begin(), traj.points.end(), t_lo,
      [](const AdsbPoint& p, std::int64_t t) { return p.timestamp < t; });
  const std::size_t begin_idx =
      first == traj.points.begin()
          ? 0
          : static_cast<std::size_t>(first - traj.points.begin()) - 1;

  for (std::size_t i = begin_idx; i < traj.points.size(); ++i) {
    const AdsbPoint& p = traj.points[i];
    if (p.timestamp > t_hi) break;
    if (p.timestamp >= t_lo && inside(p.lat, p.lon)) {
      const auto [px, py] = project(p.lat, p.lon, geom, img.width, img.height);
      img.set(px, py, color);
      drew = true;
    }
    if (i + 1 >= traj.points.size()) continue;
    const AdsbPoint& q = traj.points[i + 1];
    if (q.timestamp < t_lo) continue;

    // Clip the segment to the window in time.
    const double ta = static_cast<double>(p.timestamp);
    const double tb = static_cast<double>(q.timestamp);
    const double fa =
        p.timestamp < t_lo ? (static_cast<double>(t_lo) - ta) / (tb - ta) : 0.0;
    const double fb =
        q.timestamp > t_hi ? (static_cast<double>(t_hi) - ta) / (tb - ta) : 1.0;
    if (fb < fa) continue;
    double alat = p.lat + fa * (q.lat - p.lat);
    double alon = p.lon + fa * (q.lon - p.lon);
    double blat = p.lat + fb * (q.lat - p.lat);
    double blon = p.lon + fb * (q.lon - p.lon);

    // Then to the research circle in space.
    const bool ai = inside(alat, alon), bi = inside(blat, blon);
    if (!ai && !bi) continue;
    if (ai != bi) {
      const double f = clip_fraction(geom, alat, alon, blat, blon);
      const double clat = alat + f * (blat - alat);
      const double clon = alon + f * (blon - alon);
      if (ai) {
        blat = clat;
        blon = clon;
      } else {
        alat = clat;
        alon = clon;
      }
    }
    const auto [x0, y0] = project(alat, alon, geom, img.width, img.height);
    const auto [x1, y1] = project(blat, blon, geom, img.width, img.height);
    draw_line(img, x0, y0, x1, y1, color);
    drew = true;
  }
  return drew;
}

}  // namespace

ImageU8 render(const Trajectory& target,
               const std::vector<const Trajectory*>& others,
               const geo::AirspaceGeometry& geom, std::int64_t t_ref,
               std::int64_t tau_s, int width, int height) {
  if (width < 2 || height < 2) throw ConfigError("render: image too small");
  if (tau_s <= 0) throw ConfigError("render: tau must be > 0");

  ImageU8 img;
  img.width = width;
  img.height = height;
  img.rgb.assign(static_cast<std::size_t>(width) * height * 3, 0);
  img.fill(kBackground);

  const std::int64_t t_lo = t_ref - tau_s;

  // Background traffic in a fixed order, then the target on top.
  std::vector<const Trajectory*> sorted(others);
  std::sort(sorted.begin(), sorted.end(),
            [](const Trajectory* a, const Trajectory* b) {
              return a->aircraft_id < b->aircraft_id;
            });
  for (const Trajectory* t : sorted) {
    if (t->aircraft_id == target.aircraft_id) continue;
    draw_track(img, *t, geom, t_lo, t_ref, kOtherColor);
  }
  bool drew = draw_track(img, target, geom, t_lo, t_ref, kTargetColor);

  // The target's head pixel at t_ref: for an arrival referenced at its
  // research-circle crossing this is the boundary entry point, which can
  // round to just outside the circle and would otherwise be clipped away.
  // Marginal overshoots are clamped onto the boundary; positions clearly
  // outside the circle stay hidden so every drawn pixel lies inside it.
  constexpr double kHeadSlackNm = 0.5;
  const auto& pts = target.points;
  const auto it = std::lower_bound(
      pts.begin(), pts.end(), t_ref,
      [](const AdsbPoint& p, std::int64_t t) { return p.timestamp < t; });
  bool have_head = false;
  double hlat = 0.0, hlon = 0.0;
  if (it != pts.end() && it != pts.begin()) {
    const AdsbPoint& b = *it;
    const AdsbPoint& a = *(it - 1);
    const double span = static_cast<double>(b.timestamp - a.timestamp);
    const double f =
        span > 0.0 ? static_cast<double>(t_ref - a.timestamp) / span : 0.0;
    hlat = a.lat + f * (b.lat - a.lat);
    hlon = a.lon + f * (b.lon - a.lon);
    have_head = true;
  } else if (it != pts.end() && it->timestamp == t_ref) {
    hlat = it->lat;
    hlon = it->lon;
    have_head = true;
  }
  if (have_head) {
    const double d = geo::great_circle_nm(hlat, hlon, geom.center_lat,
                                          geom.center_lon);
    if (d <= geom.trc_radius_nm + kHeadSlackNm) {
      if (d > geom.trc_radius_nm) {
        const double s = geom.trc_radius_nm / d;
        hlat = geom.center_lat + s * (hlat - geom.center_lat);
        hlon = geom.center_lon + s * (hlon - geom.center_lon);
      }
      const auto [px, py] = project(hlat, hlon, geom, width, height);
      img.set(px, py, kTargetColor);
      drew = true;
    }
  }

  if (!drew)
    throw DataError("render: target " + target.aircraft_id +
                    " has no drawable points in the capture window");
  return img;
}

std::uint64_t pixel_hash(const ImageU8& img) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint8_t b : img.rgb) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string image_filename(const std::string& aircraft_id, std::int64_t t_ref) {
  return aircraft_id + "_" + std::to_string(t_ref) + ".png";
}

}  // namespace alt::raster
