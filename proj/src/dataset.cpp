#include "alt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "alt/image_io.hpp"
#include "alt/util/csv.hpp"
#include "alt/util/errors.hpp"
#include "alt/util/rng.hpp"

namespace alt::dataset {
namespace {

using nlohmann::json;

// Column index by name, -1 when absent.
int col_of(const CsvTable& t, const std::string& name) {
  const auto c = t.column(name);
  return c ? static_cast<int>(*c) : -1;
}

double field_or_nan(const CsvTable& t, std::size_t row, int col) {
  if (col < 0) return std::nan("");
  const std::string& s = t.rows[row][static_cast<std::size_t>(col)];
  if (s.empty() || s == "M" || s == "NA" || s == "null") return std::nan("");
  const auto v = parse_double(s);
  return v ? *v : std::nan("");
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
  return a - floor_div(a, b) * b;
}

}  // namespace

std::vector<MetarRow> load_metar(std::istream& in) {
  CsvTable table = read_csv(in);
  int c_time = col_of(table, "time");
  if (c_time < 0) throw ConfigError("METAR CSV is missing the time column");
  int c_drct = col_of(table, "drct");
  int c_sknt = col_of(table, "sknt");
  int c_gust = col_of(table, "gust");
  int c_vsby = col_of(table, "vsby");
  int c_skyl1 = col_of(table, "skyl1");
  int c_skyc1 = col_of(table, "skyc1");
  std::vector<MetarRow> rows;
  rows.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    MetarRow r;
    const auto tv =
        parse_int(table.rows[i][static_cast<std::size_t>(c_time)]);
    if (!tv) continue;  // unusable without a timestamp
    r.time = *tv;
    r.drct = field_or_nan(table, i, c_drct);
    r.sknt = field_or_nan(table, i, c_sknt);
    r.gust = field_or_nan(table, i, c_gust);
    r.vsby = field_or_nan(table, i, c_vsby);
    r.skyl1 = field_or_nan(table, i, c_skyl1);
    if (c_skyc1 >= 0) r.skyc1 = table.rows[i][static_cast<std::size_t>(c_skyc1)];
    rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const MetarRow& a, const MetarRow& b) {
                     return a.time < b.time;
                   });
  return rows;
}

std::vector<MetarRow> load_metar_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open METAR file: " + path);
  return load_metar(in);
}

std::array<double, 6> join_weather(std::int64_t t_ref,
                                   const std::vector<MetarRow>& metar) {
  const MetarRow* best = nullptr;
  for (const auto& r : metar) {
    if (r.time <= t_ref) best = &r;
    else break;
  }
  if (best == nullptr || t_ref - best->time > 7200)
    throw DataError("no METAR observation within 2 h before the reference time");
  auto fill = [](double v, double dflt) {
    return std::isnan(v) ? dflt : v;
  };
  double skyc1 = (best->skyc1 == "BKN" || best->skyc1 == "OVC") ? 1.0 : 0.0;
  return {fill(best->drct, 0.0), fill(best->sknt, 0.0), fill(best->gust, 0.0),
          fill(best->vsby, 10.0), fill(best->skyl1, 0.0), skyc1};
}

std::pair<int, int> seasonality(std::int64_t t_ref, int tz_offset_hours) {
  std::int64_t local = t_ref + 3600LL * tz_offset_hours;
  std::int64_t days = floor_div(local, 86400);
  int dow = static_cast<int>(floor_mod(days + 4, 7));  // 0 = Sunday
  int hour = static_cast<int>(floor_mod(local, 86400) / 3600);
  int weekday = (dow >= 1 && dow <= 5) ? 1 : 0;
  int peak = ((hour >= 7 && hour < 10) || (hour >= 17 && hour < 21)) ? 1 : 0;
  return {peak, weekday};
}

std::map<std::string, int> load_recat_lookup(const std::string& fpl_csv,
                                             const std::string& mapping_csv) {
  CsvTable fpl = read_csv_file(fpl_csv);
  int f_id = col_of(fpl, "aircraft_id");
  int f_type = col_of(fpl, "actype");
  if (f_id < 0 || f_type < 0)
    throw ConfigError("flight-plan CSV needs aircraft_id and actype columns");
  CsvTable mapping = read_csv_file(mapping_csv);
  int m_type = col_of(mapping, "actype");
  int m_code = col_of(mapping, "recat");
  if (m_code < 0) m_code = col_of(mapping, "recat_code");
  if (m_type < 0 || m_code < 0)
    throw ConfigError("type-mapping CSV needs actype and recat columns");

  std::map<std::string, int> code_by_type;
  for (const auto& row : mapping.rows) {
    const auto cv = parse_int(row[static_cast<std::size_t>(m_code)]);
    if (!cv) throw DataError("malformed RECAT code in mapping table");
    const int code = static_cast<int>(*cv);
    if (code < 0 || code > 5)
      throw DataError("RECAT code out of range 0..5 in mapping table");
    code_by_type[row[static_cast<std::size_t>(m_type)]] = code;
  }
  std::map<std::string, int> out;
  for (const auto& row : fpl.rows) {
    auto it = code_by_type.find(row[static_cast<std::size_t>(f_type)]);
    if (it != code_by_type.end())
      out[row[static_cast<std::size_t>(f_id)]] = it->second;
  }
  return out;
}

BuildResult build_samples(const std::vector<ArrivalRecord>& arrivals,
                          const std::vector<Trajectory>& trajs,
                          const std::vector<MetarRow>& metar,
                          const std::map<std::string, int>& recat_by_id,
                          const geo::AirspaceGeometry& geom,
                          const geo::RunwayLayout& runways,
                          const BuildOptions& opt) {
  geom.validate();
  runways.validate();
  if (opt.tau_s <= 0 || opt.delta_s <= 0)
    throw ConfigError("tau and delta must be positive");
  if (opt.image_width < 8 || opt.image_height < 8)
    throw ConfigError("image size must be at least 8x8");

  std::map<std::string, const Trajectory*> traj_by_id;
  for (const auto& t : trajs) traj_by_id.emplace(t.aircraft_id, &t);

  // Stable physical-runway slots from the layout, sorted by name.
  std::set<std::string> runway_names;
  for (const auto& t : runways.thresholds)
    runway_names.insert(runways.physical_runway_of(t.name));
  std::vector<std::string> slots(runway_names.begin(), runway_names.end());

  // Detector and entry-speed caches for the holding featurization.
  std::map<std::string, int> holdings;
  std::map<std::string, std::optional<double>> speeds;
  for (const auto& a : arrivals) {
    auto it = traj_by_id.find(a.aircraft_id);
    if (it == traj_by_id.end()) continue;
    if (!holdings.count(a.aircraft_id)) {
      holdings[a.aircraft_id] =
          holding::detect_holding(*it->second, geom, opt.detector).holding;
      speeds[a.aircraft_id] = holding::tbe_mean_speed(*it->second, geom);
    }
  }

  std::vector<ArrivalRecord> ordered = arrivals;
  std::sort(ordered.begin(), ordered.end(),
            [](const ArrivalRecord& a, const ArrivalRecord& b) {
              if (a.aircraft_id != b.aircraft_id)
                return a.aircraft_id < b.aircraft_id;
              return a.t_trc < b.t_trc;
            });

  BuildResult out;
  for (const auto& a : ordered) {
    auto ti = traj_by_id.find(a.aircraft_id);
    if (ti == traj_by_id.end()) {
      ++out.skipped;
      out.skipped_detail.emplace_back(a.aircraft_id, "no trajectory");
      continue;
    }
    try {
      std::vector<const Trajectory*> others;
      others.reserve(trajs.size());
      for (const auto& t : trajs)
        if (&t != ti->second) others.push_back(&t);

      raster::ImageU8 img =
          raster::render(*ti->second, others, geom, a.t_trc, opt.tau_s,
                         opt.image_width, opt.image_height);

      ArrivalSample s;
      s.aircraft_id = a.aircraft_id;
      s.t_ref = a.t_trc;
      s.image = raster::image_filename(a.aircraft_id, a.t_trc);
      s.label_seconds = a.label_seconds;

      geo::RunwayOpsFeatures ops =
          geo::runway_ops_features(arrivals, a.t_trc, opt.delta_s);
      auto count_of = [&](const std::string& name) {
        for (const auto& [rw, n] : ops.arrivals_per_runway)
          if (rw == name) return n;
        return 0;
      };
      s.tabular[0] = slots.size() > 0 ? count_of(slots[0]) : 0.0;
      s.tabular[1] = slots.size() > 1 ? count_of(slots[1]) : 0.0;
      s.tabular[2] = ops.runway_change_label;

      std::array<double, 6> wx = join_weather(a.t_trc, metar);
      for (int i = 0; i < 6; ++i) s.tabular[3 + i] = wx[static_cast<std::size_t>(i)];

      auto [peak, weekday] = seasonality(a.t_trc, opt.tz_offset_hours);
      s.tabular[9] = peak;
      s.tabular[10] = weekday;

      auto ri = recat_by_id.find(a.aircraft_id);
      if (ri != recat_by_id.end()) {
        s.tabular[11] = ri->second;
      } else {
        s.tabular[11] = 2;  // Upper Medium, the most common class
        s.recat_defaulted = true;
        ++out.recat_defaulted;
      }

      holding::HoldingFeatures hf = holding::holding_features(
          a, arrivals, speeds, holdings, opt.delta_s);
      std::vector<double> hv = hf.as_vector();
      for (int i = 0; i < kHoldingDim; ++i)
        s.holding_vec[static_cast<std::size_t>(i)] =
            hv[static_cast<std::size_t>(i)];

      for (double v : s.tabular)
        if (!std::isfinite(v)) throw DataError("non-finite tabular feature");
      for (double v : s.holding_vec)
        if (!std::isfinite(v)) throw DataError("non-finite holding feature");

      if (!opt.image_dir.empty())
        raster::encode_png(img, opt.image_dir + "/" + s.image);

      out.samples.push_back(std::move(s));
      out.images.push_back(std::move(img));
    } catch (const DataError& e) {
      ++out.skipped;
      out.skipped_detail.emplace_back(a.aircraft_id, e.what());
    }
  }
  return out;
}

SplitIndices split(std::size_t n, std::array<double, 3> ratios,
                   std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0 ||
      std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");
  if (n < 3) throw DataError("need at least 3 samples to split");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::size_t n_val = static_cast<std::size_t>(
      std::floor(ratios[1] * static_cast<double>(n)));
  std::size_t n_test = static_cast<std::size_t>(
      std::floor(ratios[2] * static_cast<double>(n)));
  std::size_t n_train = n - n_val - n_test;  // floor(train) + remainder

  SplitIndices out;
  out.train.assign(order.begin(),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                  order.end());
  return out;
}

Normalizer Normalizer::fit(const std::vector<ArrivalSample>& train) {
  if (train.empty()) throw DataError("cannot fit a normalizer on no samples");
  Normalizer n;
  double count = static_cast<double>(train.size());
  for (int f = 0; f < kTabularDim; ++f) {
    double m = 0.0;
    for (const auto& s : train) m += s.tabular[static_cast<std::size_t>(f)];
    m /= count;
    double v = 0.0;
    for (const auto& s : train) {
      double d = s.tabular[static_cast<std::size_t>(f)] - m;
      v += d * d;
    }
    double sd = std::sqrt(v / count);
    n.tab_mean[static_cast<std::size_t>(f)] = m;
    n.tab_std[static_cast<std::size_t>(f)] = sd > 0.0 ? sd : 1.0;
  }
  for (int f = 0; f < kHoldingDim; ++f) {
    double m = 0.0;
    for (const auto& s : train) m += s.holding_vec[static_cast<std::size_t>(f)];
    m /= count;
    double v = 0.0;
    for (const auto& s : train) {
      double d = s.holding_vec[static_cast<std::size_t>(f)] - m;
      v += d * d;
    }
    double sd = std::sqrt(v / count);
    n.hold_mean[static_cast<std::size_t>(f)] = m;
    n.hold_std[static_cast<std::size_t>(f)] = sd > 0.0 ? sd : 1.0;
  }
  return n;
}

void Normalizer::apply(ArrivalSample& s) const {
  for (int f = 0; f < kTabularDim; ++f) {
    auto i = static_cast<std::size_t>(f);
    s.tabular[i] = (s.tabular[i] - tab_mean[i]) / tab_std[i];
  }
  for (int f = 0; f < kHoldingDim; ++f) {
    auto i = static_cast<std::size_t>(f);
    s.holding_vec[i] = (s.holding_vec[i] - hold_mean[i]) / hold_std[i];
  }
}

void Normalizer::apply(std::vector<ArrivalSample>& v) const {
  for (auto& s : v) apply(s);
}

std::string Normalizer::to_json_text() const {
  json j;
  j["tab_mean"] = tab_mean;
  j["tab_std"] = tab_std;
  j["hold_mean"] = hold_mean;
  j["hold_std"] = hold_std;
  return j.dump(2);
}

Normalizer Normalizer::from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("malformed normalizer JSON");
  try {
    Normalizer n;
    for (int i = 0; i < kTabularDim; ++i) {
      auto k = static_cast<std::size_t>(i);
      n.tab_mean[k] = j.at("tab_mean").at(k).get<double>();
      n.tab_std[k] = j.at("tab_std").at(k).get<double>();
    }
    for (int i = 0; i < kHoldingDim; ++i) {
      auto k = static_cast<std::size_t>(i);
      n.hold_mean[k] = j.at("hold_mean").at(k).get<double>();
      n.hold_std[k] = j.at("hold_std").at(k).get<double>();
    }
    return n;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid normalizer JSON: ") + e.what());
  }
}

void write_manifest(const std::vector<ArrivalSample>& samples,
                    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open manifest for writing: " + path);
  for (const auto& s : samples) {
    json j;
    j["id"] = s.aircraft_id;
    j["image"] = s.image;
    j["tabular"] = s.tabular;
    j["holding"] = s.holding_vec;
    j["label_s"] = s.label_seconds;
    out << j.dump() << '\n';
  }
}

std::vector<ArrivalSample> read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest: " + path);
  std::vector<ArrivalSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("malformed manifest line");
    ArrivalSample s;
    s.aircraft_id = j.at("id").get<std::string>();
    s.image = j.at("image").get<std::string>();
    auto tab = j.at("tabular");
    auto hold = j.at("holding");
    if (tab.size() != static_cast<std::size_t>(kTabularDim) ||
        hold.size() != static_cast<std::size_t>(kHoldingDim))
      throw DataError("manifest feature vectors have the wrong length");
    for (std::size_t i = 0; i < static_cast<std::size_t>(kTabularDim); ++i)
      s.tabular[i] = tab.at(i).get<double>();
    for (std::size_t i = 0; i < static_cast<std::size_t>(kHoldingDim); ++i)
      s.holding_vec[i] = hold.at(i).get<double>();
    s.label_seconds = j.at("label_s").get<double>();
    // t_ref is recoverable from the image name "<id>_<t>.png".
    auto us = s.image.rfind('_');
    auto dot = s.image.rfind(".png");
    if (us != std::string::npos && dot != std::string::npos && dot > us) {
      const auto tv = parse_int(s.image.substr(us + 1, dot - us - 1));
      s.t_ref = tv ? *tv : 0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace alt::dataset
