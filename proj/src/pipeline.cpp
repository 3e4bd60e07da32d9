#include "alt/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "alt/eval.hpp"
#include "alt/image_io.hpp"
#include "alt/raster.hpp"
#include "alt/util/errors.hpp"

namespace alt::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text_or(const std::string& path, const char* who,
                         bool config_class) {
  std::ifstream f(path);
  if (!f) {
    const std::string msg = std::string(who) + ": cannot open " + path;
    if (config_class) throw ConfigError(msg);
    throw DataError(msg);
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path + " for writing");
  f << text;
  if (!f.good()) throw DataError("write failed: " + path);
}

void require_keys(const json& j, const char* ctx,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError(std::string("config: ") + ctx + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError(std::string("config: unknown key \"") + it.key() +
                        "\" in " + ctx);
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <std::size_t N>
void maybe_array(const json& j, const char* key, std::array<double, N>& out) {
  if (!j.contains(key)) return;
  auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != N)
    throw ConfigError(std::string("config: \"") + key + "\" must have " +
                      std::to_string(N) + " entries");
  std::copy(v.begin(), v.end(), out.begin());
}

// Index-parallel loop with a bounded pool; results must be written to
// per-index slots so the output is identical for any thread count.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

json geometry_to_json(const geo::AirspaceGeometry& g) {
  return json{{"center_lat", g.center_lat},
              {"center_lon", g.center_lon},
              {"trc_radius_nm", g.trc_radius_nm},
              {"tbx_radius_nm", g.tbx_radius_nm},
              {"bbox_lon_min", g.bbox_lon_min},
              {"bbox_lon_max", g.bbox_lon_max},
              {"bbox_lat_min", g.bbox_lat_min},
              {"bbox_lat_max", g.bbox_lat_max}};
}

void geometry_from_json(const json& j, geo::AirspaceGeometry& g) {
  require_keys(j, "geometry",
               {"center_lat", "center_lon", "trc_radius_nm", "tbx_radius_nm",
                "bbox_lon_min", "bbox_lon_max", "bbox_lat_min", "bbox_lat_max"});
  maybe(j, "center_lat", g.center_lat);
  maybe(j, "center_lon", g.center_lon);
  maybe(j, "trc_radius_nm", g.trc_radius_nm);
  maybe(j, "tbx_radius_nm", g.tbx_radius_nm);
  maybe(j, "bbox_lon_min", g.bbox_lon_min);
  maybe(j, "bbox_lon_max", g.bbox_lon_max);
  maybe(j, "bbox_lat_min", g.bbox_lat_min);
  maybe(j, "bbox_lat_max", g.bbox_lat_max);
}

json scenario_to_json(const sim::ScenarioConfig& s) {
  return json{{"duration_hours", s.duration_hours},
              {"arrival_rate_per_hour", s.arrival_rate_per_hour},
              {"zone_weights", s.zone_weights},
              {"rate_wave_amplitude", s.rate_wave_amplitude},
              {"speed_min_kt", s.speed_min_kt},
              {"speed_max_kt", s.speed_max_kt},
              {"hold_prob_base", s.hold_prob_base},
              {"hold_congestion_coupling", s.hold_congestion_coupling},
              {"hold_congestion_threshold", s.hold_congestion_threshold},
              {"hold_leg_s", s.hold_leg_s},
              {"hold_max_orbits", s.hold_max_orbits},
              {"congestion_slowdown_kt", s.congestion_slowdown_kt},
              {"runway_change_times", s.runway_change_times},
              {"recat_weights", s.recat_weights},
              {"start_time", s.start_time}};
}

void scenario_from_json(const json& j, sim::ScenarioConfig& s) {
  require_keys(
      j, "scenario",
      {"duration_hours", "arrival_rate_per_hour", "zone_weights",
       "rate_wave_amplitude", "speed_min_kt", "speed_max_kt", "hold_prob_base",
       "hold_congestion_coupling", "hold_congestion_threshold", "hold_leg_s",
       "hold_max_orbits", "congestion_slowdown_kt", "runway_change_times",
       "recat_weights", "start_time"});
  maybe(j, "duration_hours", s.duration_hours);
  maybe(j, "arrival_rate_per_hour", s.arrival_rate_per_hour);
  maybe_array(j, "zone_weights", s.zone_weights);
  maybe(j, "rate_wave_amplitude", s.rate_wave_amplitude);
  maybe(j, "speed_min_kt", s.speed_min_kt);
  maybe(j, "speed_max_kt", s.speed_max_kt);
  maybe(j, "hold_prob_base", s.hold_prob_base);
  maybe(j, "hold_congestion_coupling", s.hold_congestion_coupling);
  maybe(j, "hold_congestion_threshold", s.hold_congestion_threshold);
  maybe(j, "hold_leg_s", s.hold_leg_s);
  maybe(j, "hold_max_orbits", s.hold_max_orbits);
  maybe(j, "congestion_slowdown_kt", s.congestion_slowdown_kt);
  maybe(j, "runway_change_times", s.runway_change_times);
  maybe_array(j, "recat_weights", s.recat_weights);
  maybe(j, "start_time", s.start_time);
}

std::string gather_dir(const std::string& out_dir, const std::string& leaf,
                       const std::string& tag) {
  return out_dir + "/" + leaf + (tag.empty() ? "" : "-" + tag);
}

void write_resolved(const PipelineConfig& cfg, const std::string& dir,
                    const std::string& command,
                    const json& extra_inputs = json::object()) {
  json j = json::parse(cfg.to_json_text());
  j["command"] = command;
  if (!extra_inputs.empty()) j["resolved_inputs"] = extra_inputs;
  write_text(dir + "/config.resolved.json", j.dump(2) + "\n");
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::map<std::string, int> detect_all_holdings(
    const std::vector<Trajectory>& trajs, const geo::AirspaceGeometry& geom,
    const holding::DetectorParams& params) {
  std::map<std::string, int> out;
  for (const auto& t : trajs)
    out[t.aircraft_id] = holding::detect_holding(t, geom, params).holding;
  return out;
}

void write_holdings_csv(const std::map<std::string, int>& holdings,
                        const std::string& path) {
  std::ostringstream os;
  os << "id,holding\n";
  for (const auto& [id, h] : holdings) os << id << ',' << h << '\n';
  write_text(path, os.str());
}

std::map<std::string, int> read_holdings_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("holdings table: cannot open " + path +
                          " (run build-dataset first)");
  std::map<std::string, int> out;
  std::string line;
  bool header = true;
  while (std::getline(f, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError("holdings table: malformed line: " + line);
    out[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
  }
  return out;
}

void write_splits_json(const dataset::SplitIndices& sp,
                       const std::string& path) {
  json j{{"train", sp.train}, {"val", sp.val}, {"test", sp.test}};
  write_text(path, j.dump() + "\n");
}

dataset::SplitIndices read_splits_json(const std::string& path,
                                       std::size_t n) {
  json j;
  try {
    j = json::parse(read_text_or(path, "splits", false));
  } catch (const json::exception& e) {
    throw DataError(std::string("splits: bad json: ") + e.what());
  }
  dataset::SplitIndices sp;
  try {
    sp.train = j.at("train").get<std::vector<std::size_t>>();
    sp.val = j.at("val").get<std::vector<std::size_t>>();
    sp.test = j.at("test").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("splits: bad content: ") + e.what());
  }
  for (const auto* part : {&sp.train, &sp.val, &sp.test})
    for (std::size_t i : *part)
      if (i >= n) throw DataError("splits: index out of range of manifest");
  if (sp.train.size() + sp.val.size() + sp.test.size() != n)
    throw DataError("splits: partition does not cover the manifest");
  return sp;
}

// Decodes the PNGs referenced by the manifest; when `only` is non-empty,
// just those indices are loaded and the rest stay empty.
std::vector<raster::ImageU8> load_images(
    const std::vector<dataset::ArrivalSample>& samples,
    const std::string& image_dir, int threads,
    const std::vector<std::size_t>& only = {}) {
  std::vector<raster::ImageU8> images(samples.size());
  std::vector<std::size_t> idx = only;
  if (idx.empty()) {
    idx.resize(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  }
  parallel_for(idx.size(), threads, [&](std::size_t k) {
    const std::size_t i = idx[k];
    images[i] = raster::decode_png(image_dir + "/" + samples[i].image);
  });
  return images;
}

std::vector<dataset::ArrivalSample> gather_samples(
    const std::vector<dataset::ArrivalSample>& all,
    const std::vector<std::size_t>& idx) {
  std::vector<dataset::ArrivalSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

nn::ModelConfig model_config_for(const PipelineConfig& cfg) {
  if (cfg.image_width != cfg.image_height)
    throw ConfigError("training requires square images (width == height)");
  nn::ModelConfig mc = cfg.model;
  mc.image_size = cfg.image_width;
  mc.tabular_dim = dataset::kTabularDim;
  mc.holding_dim = dataset::kHoldingDim;
  return mc;
}

void write_predictions_csv(const std::vector<dataset::ArrivalSample>& samples,
                           const std::vector<std::size_t>& idx,
                           const std::vector<double>& labels,
                           const std::vector<double>& preds,
                           const std::string& path) {
  std::ostringstream os;
  os << "id,t_ref,label_s,pred_s,abs_err_s,ape\n";
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& s = samples[idx[k]];
    const double err = std::abs(preds[k] - labels[k]);
    os << s.aircraft_id << ',' << s.t_ref << ',' << fmt(labels[k], 3) << ','
       << fmt(preds[k], 3) << ',' << fmt(err, 3) << ','
       << fmt(err / labels[k], 6) << '\n';
  }
  write_text(path, os.str());
}

struct DatasetOnDisk {
  std::vector<dataset::ArrivalSample> samples;  // normalized
  dataset::SplitIndices splits;
  std::string image_dir;
};

DatasetOnDisk load_dataset_dir(const PipelineConfig& cfg,
                               bool apply_normalizer) {
  const std::string ds = cfg.out_dir + "/dataset";
  DatasetOnDisk d;
  d.samples = dataset::read_manifest(ds + "/manifest.jsonl");
  if (d.samples.empty()) throw DataError("dataset: manifest is empty");
  d.splits = read_splits_json(ds + "/splits.json", d.samples.size());
  if (apply_normalizer) {
    const auto norm = dataset::Normalizer::from_json_text(
        read_text_or(ds + "/normalizer.json", "normalizer", false));
    norm.apply(d.samples);
  }
  d.image_dir = ds + "/images";
  return d;
}

}  // namespace

void PipelineConfig::validate() const {
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (tau_s <= 0) throw ConfigError("tau_s must be > 0");
  if (delta_min <= 0) throw ConfigError("delta_min must be > 0");
  if (image_width < 8 || image_height < 8)
    throw ConfigError("image size must be at least 8x8");
  if (gap_rate < 0.0 || gap_rate > 0.2)
    throw ConfigError("gap_rate must be in [0, 0.2]");
  if (gamma <= 0.0) throw ConfigError("gamma must be > 0");
  double ratio_sum = 0.0;
  for (double r : split_ratios) {
    if (r < 0.0) throw ConfigError("split ratios must be >= 0");
    ratio_sum += r;
  }
  if (std::abs(ratio_sum - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  if (train.lr <= 0.0) throw ConfigError("train.lr must be > 0");
  if (train.batch < 1) throw ConfigError("train.batch must be >= 1");
  if (train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (train.lr_decay <= 0.0) throw ConfigError("train.lr_decay must be > 0");
  if (detector.window_s <= 0)
    throw ConfigError("detector.window_s must be > 0");
  if (detector.threshold_deg <= 0.0)
    throw ConfigError("detector.threshold_deg must be > 0");
  if (detector.sampling_slack_deg < 0.0 ||
      detector.sampling_slack_deg >= detector.threshold_deg)
    throw ConfigError(
        "detector.sampling_slack_deg must be in [0, threshold_deg)");
  geometry.validate();
  scenario.validate();
}

std::string PipelineConfig::to_json_text() const {
  json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["paths"] = json{{"adsb", adsb_path},     {"metar", metar_path},
                    {"fpl", fpl_path},       {"recat_map", recat_map_path},
                    {"runways", runways_path}, {"out", out_dir}};
  j["geometry"] = geometry_to_json(geometry);
  j["scenario"] = scenario_to_json(scenario);
  j["gap_rate"] = gap_rate;
  j["tau_s"] = tau_s;
  j["delta_min"] = delta_min;
  j["tz_offset_hours"] = tz_offset_hours;
  j["image"] = json{{"width", image_width}, {"height", image_height}};
  j["detector"] = json{{"window_s", detector.window_s},
                       {"threshold_deg", detector.threshold_deg},
                       {"band_inner_nm", detector.band_inner_nm},
                       {"sampling_slack_deg", detector.sampling_slack_deg}};
  j["split_ratios"] = split_ratios;
  j["gamma"] = gamma;
  j["model"] = json::parse(model.to_json_text());
  j["train"] = json{{"lr", train.lr},
                    {"batch", train.batch},
                    {"epochs", train.epochs},
                    {"lr_decay", train.lr_decay},
                    {"calibrate_output", train.calibrate_output},
                    {"verbose", train.verbose}};
  return j.dump(2);
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad json: ") + e.what());
  }
  PipelineConfig cfg;
  try {
    require_keys(j, "config",
                 {"seed", "threads", "paths", "geometry", "scenario",
                  "gap_rate", "tau_s", "delta_min", "tz_offset_hours", "image",
                  "detector", "split_ratios", "gamma", "model", "train",
                  "command", "resolved_inputs"});
    maybe(j, "seed", cfg.seed);
    maybe(j, "threads", cfg.threads);
    if (j.contains("paths")) {
      const json& p = j.at("paths");
      require_keys(p, "paths",
                   {"adsb", "metar", "fpl", "recat_map", "runways", "out"});
      maybe(p, "adsb", cfg.adsb_path);
      maybe(p, "metar", cfg.metar_path);
      maybe(p, "fpl", cfg.fpl_path);
      maybe(p, "recat_map", cfg.recat_map_path);
      maybe(p, "runways", cfg.runways_path);
      maybe(p, "out", cfg.out_dir);
    }
    if (j.contains("geometry")) geometry_from_json(j.at("geometry"), cfg.geometry);
    if (j.contains("scenario")) scenario_from_json(j.at("scenario"), cfg.scenario);
    maybe(j, "gap_rate", cfg.gap_rate);
    maybe(j, "tau_s", cfg.tau_s);
    maybe(j, "delta_min", cfg.delta_min);
    maybe(j, "tz_offset_hours", cfg.tz_offset_hours);
    if (j.contains("image")) {
      const json& im = j.at("image");
      require_keys(im, "image", {"width", "height"});
      maybe(im, "width", cfg.image_width);
      maybe(im, "height", cfg.image_height);
    }
    if (j.contains("detector")) {
      const json& d = j.at("detector");
      require_keys(d, "detector",
                   {"window_s", "threshold_deg", "band_inner_nm",
                    "sampling_slack_deg"});
      maybe(d, "window_s", cfg.detector.window_s);
      maybe(d, "threshold_deg", cfg.detector.threshold_deg);
      maybe(d, "band_inner_nm", cfg.detector.band_inner_nm);
      maybe(d, "sampling_slack_deg", cfg.detector.sampling_slack_deg);
    }
    maybe_array(j, "split_ratios", cfg.split_ratios);
    maybe(j, "gamma", cfg.gamma);
    if (j.contains("model"))
      cfg.model = nn::ModelConfig::from_json_text(j.at("model").dump());
    if (j.contains("train")) {
      const json& t = j.at("train");
      require_keys(t, "train", {"lr", "batch", "epochs", "lr_decay",
                                "calibrate_output", "verbose"});
      maybe(t, "lr", cfg.train.lr);
      maybe(t, "batch", cfg.train.batch);
      maybe(t, "epochs", cfg.train.epochs);
      maybe(t, "lr_decay", cfg.train.lr_decay);
      maybe(t, "calibrate_output", cfg.train.calibrate_output);
      maybe(t, "verbose", cfg.train.verbose);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value: ") + e.what());
  }
  // One seed governs everything downstream.
  cfg.scenario.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
  return from_json_text(read_text_or(path, "config", true));
}

std::string resolve_input(const PipelineConfig& cfg, const std::string& field,
                          const std::string& conventional_name) {
  if (!field.empty()) return field;
  return cfg.out_dir + "/" + conventional_name;
}

geo::RunwayLayout resolve_runways(const PipelineConfig& cfg) {
  if (!cfg.runways_path.empty())
    return geo::RunwayLayout::from_json_file(cfg.runways_path);
  const std::string conventional = cfg.out_dir + "/runways.json";
  if (fs::exists(conventional))
    return geo::RunwayLayout::from_json_file(conventional);
  return sim::default_runway_layout(cfg.geometry);
}

void write_runways_json(const geo::RunwayLayout& layout,
                        const std::string& path) {
  json j = json::array();
  for (const auto& t : layout.thresholds)
    j.push_back(json{{"name", t.name},
                     {"lat", t.lat},
                     {"lon", t.lon},
                     {"bearing", t.bearing_deg},
                     {"capture_radius_nm", t.capture_radius_nm}});
  write_text(path, j.dump(2) + "\n");
}

LoadedInputs load_inputs(const PipelineConfig& cfg, bool with_tables) {
  LoadedInputs out;
  const std::string adsb = resolve_input(cfg, cfg.adsb_path, "adsb.csv");
  auto parsed = ingest::parse_adsb_file(adsb);
  out.points_parsed = parsed.points.size();
  out.rows_skipped = parsed.rows_skipped;
  auto assembled = ingest::assemble_trajectories(parsed.points);
  out.assemble_stats = assembled.stats;
  out.trajectories = std::move(assembled.trajectories);
  out.runways = resolve_runways(cfg);
  out.runways.validate();
  auto raw =
      ingest::extract_arrivals(out.trajectories, cfg.geometry, out.runways);
  out.arrivals_raw = raw.size();
  if (raw.empty()) throw DataError("ingest: no labeled arrivals in " + adsb);
  out.arrivals = ingest::remove_outliers(raw);
  if (with_tables) {
    out.metar = dataset::load_metar_file(
        resolve_input(cfg, cfg.metar_path, "metar.csv"));
    out.recat_by_id = dataset::load_recat_lookup(
        resolve_input(cfg, cfg.fpl_path, "fpl.csv"),
        resolve_input(cfg, cfg.recat_map_path, "recat_map.csv"));
  }
  return out;
}

void run_simulate(const PipelineConfig& cfg) {
  cfg.validate();
  sim::ScenarioConfig scen_cfg = cfg.scenario;
  scen_cfg.seed = cfg.seed;
  geo::RunwayLayout runways =
      cfg.runways_path.empty()
          ? sim::default_runway_layout(cfg.geometry)
          : geo::RunwayLayout::from_json_file(cfg.runways_path);
  runways.validate();
  const sim::Scenario scen = sim::generate(scen_cfg, cfg.geometry, runways);

  fs::create_directories(cfg.out_dir);
  if (cfg.gap_rate > 0.0) {
    auto degraded = sim::inject_gaps(sim::flatten_points(scen), cfg.gap_rate,
                                     cfg.seed ^ 0x67617073ULL);
    sim::write_adsb_points_csv(degraded, cfg.out_dir + "/adsb.csv");
  } else {
    sim::write_adsb_csv(scen, cfg.out_dir + "/adsb.csv");
  }
  sim::write_truth_csv(scen, cfg.out_dir + "/truth.csv");
  sim::write_fpl_csv(scen, cfg.out_dir + "/fpl.csv");
  sim::write_recat_map_csv(cfg.out_dir + "/recat_map.csv");
  sim::write_metar_csv(scen_cfg, cfg.out_dir + "/metar.csv");
  write_runways_json(runways, cfg.out_dir + "/runways.json");
  write_resolved(cfg, cfg.out_dir, "simulate",
                 json{{"aircraft", scen.tracks.size()}});
}

void run_ingest(const PipelineConfig& cfg) {
  cfg.validate();
  const LoadedInputs in = load_inputs(cfg, false);

  std::ostringstream arrivals_csv;
  arrivals_csv << "id,runway,threshold,t_trc,t_thr,label_s,entry_zone\n";
  for (const auto& a : in.arrivals)
    arrivals_csv << a.aircraft_id << ',' << a.runway << ',' << a.threshold
                 << ',' << a.t_trc << ',' << a.t_thr << ','
                 << fmt(a.label_seconds, 3) << ','
                 << entry_zone_name(a.entry_zone) << '\n';

  json stats{{"points_parsed", in.points_parsed},
             {"rows_skipped", in.rows_skipped},
             {"trajectories", in.trajectories.size()},
             {"imputed_points", in.assemble_stats.imputed_points},
             {"linear_fallbacks", in.assemble_stats.linear_fallbacks},
             {"track_splits", in.assemble_stats.splits},
             {"arrivals_raw", in.arrivals_raw},
             {"arrivals_kept", in.arrivals.size()},
             {"outliers_removed", in.arrivals_raw - in.arrivals.size()}};

  fs::create_directories(cfg.out_dir);
  write_text(cfg.out_dir + "/arrivals.csv", arrivals_csv.str());
  write_text(cfg.out_dir + "/ingest_stats.json", stats.dump(2) + "\n");
  write_resolved(cfg, cfg.out_dir, "ingest",
                 json{{"adsb", resolve_input(cfg, cfg.adsb_path, "adsb.csv")}});
}

void run_build_dataset(const PipelineConfig& cfg) {
  cfg.validate();
  const LoadedInputs in = load_inputs(cfg, true);

  const std::string ds = cfg.out_dir + "/dataset";
  fs::create_directories(ds + "/images");

  dataset::BuildOptions opt;
  opt.tau_s = cfg.tau_s;
  opt.delta_s = cfg.delta_min * 60;
  opt.tz_offset_hours = cfg.tz_offset_hours;
  opt.image_width = cfg.image_width;
  opt.image_height = cfg.image_height;
  opt.image_dir = ds + "/images";
  opt.detector = cfg.detector;

  auto built = dataset::build_samples(in.arrivals, in.trajectories, in.metar,
                                      in.recat_by_id, cfg.geometry, in.runways,
                                      opt);
  if (built.samples.empty())
    throw DataError("build-dataset: no usable samples");

  const auto sp =
      dataset::split(built.samples.size(), cfg.split_ratios, cfg.seed);
  const auto norm =
      dataset::Normalizer::fit(gather_samples(built.samples, sp.train));
  const auto holdings =
      detect_all_holdings(in.trajectories, cfg.geometry, cfg.detector);

  dataset::write_manifest(built.samples, ds + "/manifest.jsonl");
  write_splits_json(sp, ds + "/splits.json");
  write_text(ds + "/normalizer.json", norm.to_json_text() + "\n");
  write_holdings_csv(holdings, ds + "/holdings.csv");
  json stats{{"samples", built.samples.size()},
             {"skipped", built.skipped},
             {"recat_defaulted", built.recat_defaulted},
             {"train", sp.train.size()},
             {"val", sp.val.size()},
             {"test", sp.test.size()}};
  write_text(ds + "/build_stats.json", stats.dump(2) + "\n");
  write_resolved(cfg, ds, "build-dataset",
                 json{{"adsb", resolve_input(cfg, cfg.adsb_path, "adsb.csv")},
                      {"metar", resolve_input(cfg, cfg.metar_path, "metar.csv")},
                      {"fpl", resolve_input(cfg, cfg.fpl_path, "fpl.csv")},
                      {"recat_map", resolve_input(cfg, cfg.recat_map_path,
                                                  "recat_map.csv")}});
}

void run_rasterize(const PipelineConfig& cfg) {
  cfg.validate();
  const LoadedInputs in = load_inputs(cfg, false);

  std::map<std::string, const Trajectory*> traj_by_id;
  std::vector<const Trajectory*> all;
  all.reserve(in.trajectories.size());
  for (const auto& t : in.trajectories) {
    traj_by_id[t.aircraft_id] = &t;
    all.push_back(&t);
  }

  std::vector<ArrivalRecord> arrivals = in.arrivals;
  std::sort(arrivals.begin(), arrivals.end(),
            [](const ArrivalRecord& a, const ArrivalRecord& b) {
              return std::tie(a.aircraft_id, a.t_trc) <
                     std::tie(b.aircraft_id, b.t_trc);
            });

  const std::string dir = cfg.out_dir + "/raster";
  fs::create_directories(dir + "/images");

  struct Row {
    std::string file;
    std::uint64_t hash = 0;
  };
  std::vector<Row> rows(arrivals.size());
  parallel_for(arrivals.size(), cfg.threads, [&](std::size_t i) {
    const auto& a = arrivals[i];
    auto it = traj_by_id.find(a.aircraft_id);
    if (it == traj_by_id.end()) return;
    const auto img = raster::render(*it->second, all, cfg.geometry, a.t_trc,
                                    cfg.tau_s, cfg.image_width,
                                    cfg.image_height);
    rows[i].file = raster::image_filename(a.aircraft_id, a.t_trc);
    rows[i].hash = raster::pixel_hash(img);
    raster::encode_png(img, dir + "/images/" + rows[i].file);
  });

  std::ostringstream os;
  os << "image,pixel_hash\n" << std::hex;
  for (const auto& r : rows)
    if (!r.file.empty()) os << r.file << ',' << std::setw(16)
                            << std::setfill('0') << r.hash << '\n';
  write_text(dir + "/image_hashes.csv", os.str());
  write_resolved(cfg, dir, "rasterize",
                 json{{"adsb", resolve_input(cfg, cfg.adsb_path, "adsb.csv")},
                      {"images", rows.size()}});
}

void run_train(const PipelineConfig& cfg, const std::string& tag) {
  cfg.validate();
  const DatasetOnDisk d = load_dataset_dir(cfg, true);
  if (d.splits.train.empty() || d.splits.val.empty())
    throw DataError("train: empty train or val split");
  const auto images =
      load_images(d.samples, d.image_dir, cfg.threads);

  nn::AltModel model(model_config_for(cfg), cfg.seed);
  nn::TrainHyper hyper = cfg.train;
  hyper.seed = cfg.seed;
  const nn::DataView train_view{&d.samples, &images, d.splits.train};
  const nn::DataView val_view{&d.samples, &images, d.splits.val};
  const auto history = nn::train(model, train_view, val_view, hyper);

  const std::string dir = gather_dir(cfg.out_dir, "train", tag);
  fs::create_directories(dir);
  model.save_json(dir + "/model.json");
  nn::write_history_csv(history, dir + "/history.csv");
  json stats{{"best_epoch", history.best_epoch},
             {"best_val_mae_s", history.best_val_mae},
             {"train_samples", d.splits.train.size()},
             {"val_samples", d.splits.val.size()},
             {"ablate_holding", cfg.model.ablate_holding}};
  write_text(dir + "/train_stats.json", stats.dump(2) + "\n");
  write_resolved(cfg, dir, "train", json{{"dataset", cfg.out_dir + "/dataset"}});
}

void run_evaluate(const PipelineConfig& cfg, const std::string& model_path,
                  const std::string& baseline_model_path,
                  const std::string& tag) {
  cfg.validate();
  const DatasetOnDisk d = load_dataset_dir(cfg, true);
  if (d.splits.test.empty()) throw DataError("evaluate: empty test split");
  const auto images =
      load_images(d.samples, d.image_dir, cfg.threads, d.splits.test);

  const std::string mp =
      model_path.empty() ? cfg.out_dir + "/train/model.json" : model_path;
  nn::AltModel model = nn::AltModel::load_json(mp);
  const nn::DataView test_view{&d.samples, &images, d.splits.test};
  const auto preds = nn::predict(model, test_view, cfg.train.batch);
  const auto labels = nn::labels_of(test_view);
  const auto report = eval::metrics(labels, preds, cfg.gamma);
  const auto cdf = eval::ape_cdf(report);

  std::optional<eval::Comparison> comparison;
  if (!baseline_model_path.empty()) {
    nn::AltModel base = nn::AltModel::load_json(baseline_model_path);
    const auto base_preds = nn::predict(base, test_view, cfg.train.batch);
    const auto base_report = eval::metrics(labels, base_preds, cfg.gamma);
    comparison = eval::compare(base_report, report);
  }

  const std::string dir = gather_dir(cfg.out_dir, "eval", tag);
  fs::create_directories(dir);
  eval::write_metrics_csv(report, dir + "/metrics.csv");
  eval::write_ape_cdf_csv(cdf, dir + "/ape_cdf.csv");
  eval::write_cdf_svg(cdf, dir + "/ape_cdf.svg");
  write_predictions_csv(d.samples, d.splits.test, labels, preds,
                        dir + "/predictions.csv");
  if (comparison) write_text(dir + "/comparison.txt", comparison->format());
  write_resolved(cfg, dir, "evaluate",
                 json{{"model", mp}, {"baseline", baseline_model_path}});
}

void run_report(const PipelineConfig& cfg) {
  cfg.validate();
  const std::string ds = cfg.out_dir + "/dataset";
  const auto samples = dataset::read_manifest(ds + "/manifest.jsonl");
  if (samples.empty()) throw DataError("report: dataset manifest is empty");
  const auto holdings = read_holdings_csv(ds + "/holdings.csv");
  const auto analysis = eval::analysis_report(samples, holdings);

  const std::string dir = cfg.out_dir + "/report";
  fs::create_directories(dir);
  eval::write_analysis_csv(analysis, dir);
  eval::write_analysis_svg(analysis, dir);
  write_resolved(cfg, dir, "report", json{{"dataset", ds}});
}

void run_grid(const PipelineConfig& cfg,
              const std::vector<std::int64_t>& taus_s,
              const std::vector<std::int64_t>& deltas_min) {
  cfg.validate();
  if (taus_s.empty() || deltas_min.empty())
    throw ConfigError("grid: need at least one tau and one delta");
  for (auto t : taus_s)
    if (t <= 0) throw ConfigError("grid: tau values must be > 0");
  for (auto dm : deltas_min)
    if (dm <= 0) throw ConfigError("grid: delta values must be > 0");

  const LoadedInputs in = load_inputs(cfg, true);
  const nn::ModelConfig mc = model_config_for(cfg);

  struct Cell {
    std::int64_t tau_s = 0;
    std::int64_t delta_min = 0;
    eval::EvalReport report;
    std::size_t n_train = 0, n_test = 0;
  };
  std::vector<Cell> cells;

  for (std::int64_t tau : taus_s) {
    for (std::int64_t dm : deltas_min) {
      dataset::BuildOptions opt;
      opt.tau_s = tau;
      opt.delta_s = dm * 60;
      opt.tz_offset_hours = cfg.tz_offset_hours;
      opt.image_width = cfg.image_width;
      opt.image_height = cfg.image_height;
      opt.detector = cfg.detector;
      auto built = dataset::build_samples(in.arrivals, in.trajectories,
                                          in.metar, in.recat_by_id,
                                          cfg.geometry, in.runways, opt);
      if (built.samples.size() < 3)
        throw DataError("grid: not enough samples at tau=" +
                        std::to_string(tau) + " delta=" + std::to_string(dm));
      const auto sp =
          dataset::split(built.samples.size(), cfg.split_ratios, cfg.seed);
      const auto norm =
          dataset::Normalizer::fit(gather_samples(built.samples, sp.train));
      norm.apply(built.samples);

      nn::AltModel model(mc, cfg.seed);
      nn::TrainHyper hyper = cfg.train;
      hyper.seed = cfg.seed;
      const nn::DataView train_view{&built.samples, &built.images, sp.train};
      const nn::DataView val_view{&built.samples, &built.images, sp.val};
      const nn::DataView test_view{&built.samples, &built.images, sp.test};
      nn::train(model, train_view, val_view, hyper);
      const auto preds = nn::predict(model, test_view, cfg.train.batch);
      const auto labels = nn::labels_of(test_view);
      cells.push_back(Cell{tau, dm,
                           eval::metrics(labels, preds, cfg.gamma),
                           sp.train.size(), sp.test.size()});
    }
  }

  const std::string dir = cfg.out_dir + "/grid";
  fs::create_directories(dir);

  // MAE matrix: one row per tau, one column per delta.
  std::ostringstream mat;
  mat << "mae_s";
  for (auto dm : deltas_min) mat << ",delta_" << dm;
  mat << '\n';
  std::size_t k = 0;
  for (auto tau : taus_s) {
    mat << "tau_" << tau;
    for (std::size_t j = 0; j < deltas_min.size(); ++j)
      mat << ',' << fmt(cells[k + j].report.mae, 3);
    k += deltas_min.size();
    mat << '\n';
  }
  write_text(dir + "/grid_mae.csv", mat.str());

  std::ostringstream longf;
  longf << "tau_s,delta_min,n_train,n_test,rmse_s,mae_s,mape,bad_ratio\n";
  for (const auto& c : cells)
    longf << c.tau_s << ',' << c.delta_min << ',' << c.n_train << ','
          << c.n_test << ',' << fmt(c.report.rmse, 3) << ','
          << fmt(c.report.mae, 3) << ',' << fmt(c.report.mape, 6) << ','
          << fmt(c.report.bad_ratio, 6) << '\n';
  write_text(dir + "/grid_cells.csv", longf.str());

  json inputs{{"taus_s", taus_s}, {"deltas_min", deltas_min}};
  write_resolved(cfg, dir, "grid", inputs);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const TrainError*>(&e)) return 4;
  return 1;
}

}  // namespace alt::pipeline
