#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "alt/geo.hpp"
#include "alt/holding.hpp"
#include "alt/raster.hpp"
#include "alt/track.hpp"

namespace alt::dataset {

inline constexpr int kTabularDim = 12;
inline constexpr int kHoldingDim = 5;

// Raw METAR row; NaN / empty string mark missing values.
struct MetarRow {
  std::int64_t time = 0;
  double drct = 0.0;
  double sknt = 0.0;
  double gust = 0.0;
  double vsby = 0.0;
  double skyl1 = 0.0;
  std::string skyc1;
};

std::vector<MetarRow> load_metar(std::istream& in);
std::vector<MetarRow> load_metar_file(const std::string& path);

// Most recent row at or before t_ref (within 2 h), with missing-value
// fills applied: drct/sknt/gust/skyl1 -> 0, vsby -> 10, skyc1 -> 1 only
// for BKN/OVC. Returns [drct, sknt, gust, vsby, skyl1, skyc1].
std::array<double, 6> join_weather(std::int64_t t_ref,
                                   const std::vector<MetarRow>& metar);

// (is_peakhour, is_weekday) in local time. Peak hours are [7,10) and
// [17,21); weekdays are Monday through Friday.
std::pair<int, int> seasonality(std::int64_t t_ref, int tz_offset_hours);

// aircraft_id -> RECAT code via the flight-plan and type-mapping tables.
// Aircraft whose type has no mapping are absent from the result.
std::map<std::string, int> load_recat_lookup(const std::string& fpl_csv,
                                             const std::string& mapping_csv);

// Tabular slot order: arrivals_runway_1, arrivals_runway_2,
// runway_change_label, drct, sknt, gust, vsby, skyl1, skyc1, is_peakhour,
// is_weekday, recat.
struct ArrivalSample {
  std::string aircraft_id;
  std::int64_t t_ref = 0;
  std::string image;  // relative image filename
  std::array<double, kTabularDim> tabular{};
  std::array<double, kHoldingDim> holding_vec{};
  double label_seconds = 0.0;
  bool recat_defaulted = false;
};

struct BuildOptions {
  std::int64_t tau_s = 600;      // image capture window
  std::int64_t delta_s = 1800;   // feature look-back window
  int tz_offset_hours = 8;
  int image_width = 64;
  int image_height = 64;
  std::string image_dir;  // when non-empty, PNGs are written there
  holding::DetectorParams detector{};
};

struct BuildResult {
  std::vector<ArrivalSample> samples;        // sorted by (aircraft_id, t_ref)
  std::vector<raster::ImageU8> images;       // parallel to samples
  std::size_t skipped = 0;
  std::size_t recat_defaulted = 0;
  // (aircraft id, reason) for every skipped arrival.
  std::vector<std::pair<std::string, std::string>> skipped_detail;
};

BuildResult build_samples(const std::vector<ArrivalRecord>& arrivals,
                          const std::vector<Trajectory>& trajs,
                          const std::vector<MetarRow>& metar,
                          const std::map<std::string, int>& recat_by_id,
                          const geo::AirspaceGeometry& geom,
                          const geo::RunwayLayout& runways,
                          const BuildOptions& opt);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Deterministic shuffled partition. Sizes are floor(ratio * n) with the
// remainder going to train. Throws for n < 3 or invalid ratios.
SplitIndices split(std::size_t n, std::array<double, 3> ratios,
                   std::uint64_t seed);

// Per-feature z-score statistics fitted on the training split only.
struct Normalizer {
  std::array<double, kTabularDim> tab_mean{}, tab_std{};
  std::array<double, kHoldingDim> hold_mean{}, hold_std{};

  static Normalizer fit(const std::vector<ArrivalSample>& train);
  void apply(ArrivalSample& s) const;
  void apply(std::vector<ArrivalSample>& v) const;

  std::string to_json_text() const;
  static Normalizer from_json_text(const std::string& text);
};

// JSONL manifest: {"id", "image", "tabular":[12], "holding":[5], "label_s"}
// per line, in input order.
void write_manifest(const std::vector<ArrivalSample>& samples,
                    const std::string& path);
std::vector<ArrivalSample> read_manifest(const std::string& path);

}  // namespace alt::dataset
