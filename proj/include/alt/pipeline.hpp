#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "alt/dataset.hpp"
#include "alt/geo.hpp"
#include "alt/holding.hpp"
#include "alt/ingest.hpp"
#include "alt/nn/model.hpp"
#include "alt/nn/train.hpp"
#include "alt/simgen.hpp"

namespace alt::pipeline {

// One configuration drives every subcommand. All fields have working
// defaults; a JSON config file overrides them, and CLI flags override the
// file. `to_json_text()` round-trips exactly, so the `config.resolved.json`
// written next to each artifact reproduces the run.
struct PipelineConfig {
  std::uint64_t seed = 1;
  int threads = 1;

  // Input files. Empty entries resolve to the conventional name inside
  // out_dir (adsb.csv, metar.csv, fpl.csv, recat_map.csv, runways.json);
  // an empty runways path with no out_dir/runways.json falls back to the
  // built-in two-runway layout.
  std::string adsb_path;
  std::string metar_path;
  std::string fpl_path;
  std::string recat_map_path;
  std::string runways_path;
  std::string out_dir = "artifacts";

  geo::AirspaceGeometry geometry{};
  sim::ScenarioConfig scenario{};
  double gap_rate = 0.0;  // applied by `simulate` to the emitted ADS-B CSV

  std::int64_t tau_s = 600;     // image capture window, seconds
  std::int64_t delta_min = 30;  // tabular look-back window, minutes
  int tz_offset_hours = 8;
  int image_width = 64;
  int image_height = 64;
  holding::DetectorParams detector{};
  std::array<double, 3> split_ratios = {0.70, 0.15, 0.15};
  double gamma = 0.3;  // bad-ratio threshold for evaluation

  nn::ModelConfig model = nn::ModelConfig();
  nn::TrainHyper train{};

  // Throws ConfigError on out-of-range values.
  void validate() const;

  std::string to_json_text() const;
  static PipelineConfig from_json_text(const std::string& text);
  static PipelineConfig from_json_file(const std::string& path);
};

// Effective input path: explicit field if set, else out_dir/<name>.
std::string resolve_input(const PipelineConfig& cfg, const std::string& field,
                          const std::string& conventional_name);

geo::RunwayLayout resolve_runways(const PipelineConfig& cfg);
void write_runways_json(const geo::RunwayLayout& layout,
                        const std::string& path);

// Inputs shared by ingest, build-dataset, rasterize and report.
struct LoadedInputs {
  std::vector<Trajectory> trajectories;
  std::vector<ArrivalRecord> arrivals;  // outlier-filtered, named runways
  std::vector<dataset::MetarRow> metar;
  std::map<std::string, int> recat_by_id;
  geo::RunwayLayout runways;
  std::size_t points_parsed = 0;
  std::size_t rows_skipped = 0;
  std::size_t arrivals_raw = 0;  // before outlier removal
  ingest::AssembleStats assemble_stats{};
};

// with_tables=false skips METAR / flight-plan loading (rasterize only
// needs tracks and arrivals).
LoadedInputs load_inputs(const PipelineConfig& cfg, bool with_tables = true);

// Subcommand bodies. Each writes its artifacts plus config.resolved.json
// into its directory and throws ConfigError / DataError / TrainError on
// failure; nothing is written when computation fails first.
void run_simulate(const PipelineConfig& cfg);
void run_ingest(const PipelineConfig& cfg);
void run_build_dataset(const PipelineConfig& cfg);
void run_rasterize(const PipelineConfig& cfg);
// tag, when non-empty, suffixes the artifact directory (train-<tag>,
// eval-<tag>) so full and ablated runs can coexist.
void run_train(const PipelineConfig& cfg, const std::string& tag = "");
void run_evaluate(const PipelineConfig& cfg, const std::string& model_path,
                  const std::string& baseline_model_path = "",
                  const std::string& tag = "");
void run_report(const PipelineConfig& cfg);
void run_grid(const PipelineConfig& cfg, const std::vector<std::int64_t>& taus_s,
              const std::vector<std::int64_t>& deltas_min);

// Maps an exception to the documented exit code: ConfigError 2, DataError 3,
// TrainError 4, anything else 1.
int exit_code_for(const std::exception& e);

}  // namespace alt::pipeline
