// altpipe: subcommand front-end for the synthetic-arrival landing-time
// pipeline. One JSON config drives every stage; flags override the file.
//
// Exit codes: 0 ok, 2 bad configuration or usage, 3 bad or missing data,
// 4 training divergence, 1 anything else.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alt/pipeline.hpp"
#include "alt/util/errors.hpp"

namespace {

struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  std::optional<std::string> adsb, metar, fpl, recat_map, runways;
  std::optional<std::int64_t> tau_s, delta_min;
  std::optional<int> image_size;
  std::optional<double> gamma, gap_rate;
  std::optional<double> lr;
  std::optional<int> epochs, batch;
  bool ablate_holding = false;
  std::optional<double> arrival_rate, duration_hours;
};

alt::pipeline::PipelineConfig build_config(const Overrides& o) {
  using alt::pipeline::PipelineConfig;
  PipelineConfig cfg = o.config_path
                           ? PipelineConfig::from_json_file(*o.config_path)
                           : PipelineConfig{};
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.adsb) cfg.adsb_path = *o.adsb;
  if (o.metar) cfg.metar_path = *o.metar;
  if (o.fpl) cfg.fpl_path = *o.fpl;
  if (o.recat_map) cfg.recat_map_path = *o.recat_map;
  if (o.runways) cfg.runways_path = *o.runways;
  if (o.tau_s) cfg.tau_s = *o.tau_s;
  if (o.delta_min) cfg.delta_min = *o.delta_min;
  if (o.image_size) {
    cfg.image_width = *o.image_size;
    cfg.image_height = *o.image_size;
  }
  if (o.gamma) cfg.gamma = *o.gamma;
  if (o.gap_rate) cfg.gap_rate = *o.gap_rate;
  if (o.lr) cfg.train.lr = *o.lr;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.batch) cfg.train.batch = *o.batch;
  if (o.ablate_holding) cfg.model.ablate_holding = true;
  if (o.arrival_rate) cfg.scenario.arrival_rate_per_hour = *o.arrival_rate;
  if (o.duration_hours) cfg.scenario.duration_hours = *o.duration_hours;
  // One seed governs the simulator, the split, init and dropout.
  cfg.scenario.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "altpipe: landing-time prediction pipeline on synthetic terminal-area "
      "traffic.\nStages: simulate -> ingest -> build-dataset -> train -> "
      "evaluate -> report."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "altpipe 1.0.0");

  Overrides o;
  app.add_option("-c,--config", o.config_path, "JSON config file");
  app.add_option("--seed", o.seed, "master seed (simulator, split, init)");
  app.add_option("--threads", o.threads, "worker pool size")
      ->envname("ALTPIPE_THREADS");
  app.add_option("-o,--out", o.out_dir, "artifact directory");
  app.add_option("--adsb", o.adsb, "ADS-B CSV (default <out>/adsb.csv)");
  app.add_option("--metar", o.metar, "METAR CSV (default <out>/metar.csv)");
  app.add_option("--fpl", o.fpl, "flight-plan CSV (default <out>/fpl.csv)");
  app.add_option("--recat-map", o.recat_map,
                 "aircraft-type wake-category CSV (default "
                 "<out>/recat_map.csv)");
  app.add_option("--runways", o.runways,
                 "runway layout JSON (default <out>/runways.json or "
                 "built-in)");
  app.add_option("--tau-s", o.tau_s, "image capture window, seconds");
  app.add_option("--delta-min", o.delta_min,
                 "tabular look-back window, minutes");
  app.add_option("--image-size", o.image_size,
                 "square image edge length, pixels");
  app.add_option("--gamma", o.gamma, "bad-ratio APE threshold");
  app.add_option("--gap-rate", o.gap_rate,
                 "fraction of interior ADS-B points the simulator drops");
  app.add_option("--lr", o.lr, "learning rate");
  app.add_option("--epochs", o.epochs, "training epochs");
  app.add_option("--batch", o.batch, "mini-batch size");
  app.add_flag("--ablate-holding", o.ablate_holding,
               "train/evaluate the model without the holding branch");
  app.add_option("--arrival-rate", o.arrival_rate,
                 "simulated arrivals per hour");
  app.add_option("--duration-hours", o.duration_hours,
                 "simulated scenario length, hours");

  auto* sim = app.add_subcommand(
      "simulate", "generate a synthetic scenario (ADS-B, METAR, flight "
                  "plans, truth table, runway layout)");
  auto* ing = app.add_subcommand(
      "ingest", "parse ADS-B, assemble 1 Hz tracks, extract labeled "
                "arrivals");
  auto* bld = app.add_subcommand(
      "build-dataset", "join features, render images, split and fit the "
                       "normalizer");
  auto* ras = app.add_subcommand(
      "rasterize", "render capture-window images and their pixel hashes");
  auto* trn = app.add_subcommand("train", "train the fusion regressor");
  auto* evl = app.add_subcommand("evaluate",
                                 "score a trained model on the test split");
  auto* rep = app.add_subcommand(
      "report", "dataset analysis: label stats by wake category and "
                "holding status");
  auto* grd = app.add_subcommand(
      "grid", "sweep (tau, delta) pairs and emit the test-MAE matrix");
  for (auto* sub : {sim, ing, bld, ras, trn, evl, rep, grd})
    sub->fallthrough();

  std::string train_tag, eval_tag;
  trn->add_option("--tag", train_tag,
                  "suffix for the train artifact directory");

  std::string model_path, baseline_path;
  evl->add_option("--model", model_path,
                  "model JSON (default <out>/train/model.json)");
  evl->add_option("--baseline", baseline_path,
                  "baseline model JSON to compare against");
  evl->add_option("--tag", eval_tag, "suffix for the eval artifact directory");

  std::vector<std::int64_t> grid_taus{600};
  std::vector<std::int64_t> grid_deltas{30};
  grd->add_option("--taus", grid_taus, "tau values, seconds")
      ->delimiter(',');
  grd->add_option("--deltas", grid_deltas, "delta values, minutes")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const alt::pipeline::PipelineConfig cfg = build_config(o);
    if (sim->parsed()) alt::pipeline::run_simulate(cfg);
    if (ing->parsed()) alt::pipeline::run_ingest(cfg);
    if (bld->parsed()) alt::pipeline::run_build_dataset(cfg);
    if (ras->parsed()) alt::pipeline::run_rasterize(cfg);
    if (trn->parsed()) alt::pipeline::run_train(cfg, train_tag);
    if (evl->parsed())
      alt::pipeline::run_evaluate(cfg, model_path, baseline_path, eval_tag);
    if (rep->parsed()) alt::pipeline::run_report(cfg);
    if (grd->parsed()) alt::pipeline::run_grid(cfg, grid_taus, grid_deltas);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "altpipe: error: " << e.what() << std::endl;
    return alt::pipeline::exit_code_for(e);
  }
}
