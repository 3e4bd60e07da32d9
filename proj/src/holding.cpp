#include "alt/holding.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "alt/util/errors.hpp"

namespace alt::holding {

namespace {

// Heading delta unwrapped to (-180, 180].
double heading_delta(double from, double to) {
  double d = std::fmod(to - from, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

}  // namespace

HoldingResult detect_holding(const Trajectory& traj,
                             const geo::AirspaceGeometry& geom,
                             const DetectorParams& params) {
  HoldingResult result;
  if (traj.points.size() < 2) return result;
  if (traj.points.back().timestamp - traj.points.front().timestamp < 60)
    return result;
  const double threshold =
      std::max(0.0, params.threshold_deg - params.sampling_slack_deg);

  // Runs of consecutive points inside the detection band.
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // [begin, end)
  std::size_t begin = 0;
  bool in_run = false;
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const auto& p = traj.points[i];
    const double d = geo::great_circle_nm(p.lat, p.lon, geom.center_lat,
                                          geom.center_lon);
    const bool inside = d >= params.band_inner_nm && d <= geom.tbx_radius_nm;
    if (inside && !in_run) {
      begin = i;
      in_run = true;
    } else if (!inside && in_run) {
      runs.emplace_back(begin, i);
      in_run = false;
    }
  }
  if (in_run) runs.emplace_back(begin, traj.points.size());

  for (const auto& [lo, hi] : runs) {
    const std::size_t n = hi - lo;
    if (n < 2) continue;
    // Prefix sums of signed heading change; S[k] covers deltas up to point
    // lo+k. Window condition: exists i with t_j - t_i <= window_s and
    // |S[j] - S[i]| >= threshold.
    std::vector<double> S(n, 0.0);
    std::vector<std::int64_t> T(n, 0);
    T[0] = traj.points[lo].timestamp;
    for (std::size_t k = 1; k < n; ++k) {
      S[k] = S[k - 1] + heading_delta(traj.points[lo + k - 1].heading_deg,
                                      traj.points[lo + k].heading_deg);
      T[k] = traj.points[lo + k].timestamp;
    }

    std::deque<std::size_t> min_q, max_q;  // indices, values monotone
    std::size_t left = 0;
    for (std::size_t j = 0; j < n; ++j) {
      while (!min_q.empty() && S[min_q.back()] >= S[j]) min_q.pop_back();
      min_q.push_back(j);
      while (!max_q.empty() && S[max_q.back()] <= S[j]) max_q.pop_back();
      max_q.push_back(j);
      while (T[j] - T[left] > params.window_s) {
        if (min_q.front() == left) min_q.pop_front();
        if (max_q.front() == left) max_q.pop_front();
        ++left;
      }
      const bool up = S[j] - S[min_q.front()] >= threshold;
      const bool down = S[max_q.front()] - S[j] >= threshold;
      if (up || down) {
        const std::size_t i = up ? min_q.front() : max_q.front();
        const std::int64_t t0 = T[i];
        const std::int64_t t1 = T[j];
        if (!result.intervals.empty() && t0 <= result.intervals.back().second)
          result.intervals.back().second =
              std::max(result.intervals.back().second, t1);
        else
          result.intervals.emplace_back(t0, t1);
        result.holding = 1;
      }
    }
  }
  return result;
}

std::optional<ArrivalRecord> leading_aircraft(
    const ArrivalRecord& target, const std::vector<ArrivalRecord>& all) {
  const ArrivalRecord* best = nullptr;
  for (const auto& r : all) {
    if (r.aircraft_id == target.aircraft_id) continue;
    if (r.t_trc >= target.t_trc) continue;
    if (r.t_thr <= target.t_trc) continue;  // already landed
    if (!best || r.t_trc > best->t_trc ||
        (r.t_trc == best->t_trc && r.aircraft_id < best->aircraft_id))
      best = &r;
  }
  if (!best) return std::nullopt;
  return *best;
}

std::optional<double> tbe_mean_speed(const Trajectory& traj,
                                     const geo::AirspaceGeometry& geom) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : traj.points) {
    const double d = geo::great_circle_nm(p.lat, p.lon, geom.center_lat,
                                          geom.center_lon);
    if (d >= geom.trc_radius_nm && d <= geom.tbx_radius_nm) {
      sum += p.gs_kt;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

HoldingFeatures holding_features(
    const ArrivalRecord& target, const std::vector<ArrivalRecord>& all,
    const std::map<std::string, std::optional<double>>& speeds,
    const std::map<std::string, int>& holdings, std::int64_t delta_s) {
  if (delta_s <= 0) throw ConfigError("holding_features: delta must be > 0");
  HoldingFeatures f;
  const std::int64_t w_lo = target.t_trc - delta_s;
  const std::int64_t w_hi = target.t_trc;

  // Fleet mean entry speed over the capture window.
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : all) {
    if (r.t_trc < w_lo || r.t_trc > w_hi) continue;
    auto it = speeds.find(r.aircraft_id);
    if (it == speeds.end() || !it->second) continue;
    sum += *it->second;
    ++n;
  }
  const double v_fleet = n > 0 ? sum / static_cast<double>(n) : 0.0;

  auto speed_of = [&](const std::string& id) {
    auto it = speeds.find(id);
    return it != speeds.end() && it->second ? *it->second : v_fleet;
  };

  for (const auto& r : all)
    if (r.t_thr >= w_lo && r.t_thr <= w_hi) ++f.total_arrivals;

  const auto lead = leading_aircraft(target, all);
  if (!lead) return f;  // gap fields stay zero

  f.leading_id = lead->aircraft_id;
  f.dt_trc = static_cast<double>(target.t_trc - lead->t_trc);
  const double v_target = speed_of(target.aircraft_id);
  f.dv_avg = v_target - v_fleet;
  f.dv_lead = v_target - speed_of(lead->aircraft_id);
  auto hit = holdings.find(lead->aircraft_id);
  f.lead_holding = hit != holdings.end() ? hit->second : 0;
  return f;
}

}  // namespace alt::holding
