#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "uopf/checkpoint.hpp"
#include "uopf/config.hpp"
#include "uopf/evaluation.hpp"

namespace uopf {

struct PipelineOptions {
  int jobs = 1;
  bool provenance = true;
  bool tracking = false;  // use the expanding-day dataset and model
  bool separate = false;  // one standalone model per network
  bool resume = false;
  bool oracle_predictions = false;
  std::string checkpoint;  // overrides the default location when set
  std::string dataset;
  std::string output;
  std::ostream* log = nullptr;
};

/// File layout under RunConfig::output_dir.
struct RunPaths {
  std::string dataset;      // dataset/ or tracking/
  std::string checkpoint;   // unified.ckpt or tracking.ckpt
  std::string history;      // history.csv or tracking_history.csv
  std::string separate_dir; // separate/<name>.ckpt and <name>.history.csv
  std::string metrics;      // metrics.json
  std::string tracking_csv; // tracking.csv
};

RunPaths run_paths(const RunConfig& cfg, const PipelineOptions& opts);

/// The config's networks: the listed case files, or the feeders derived
/// from the expanding base (smallest first).
std::vector<NetworkCase> load_networks(const RunConfig& cfg);

/// Generates and writes the training dataset (or the tracking day).
Dataset run_gendata(const RunConfig& cfg, const PipelineOptions& opts);

/// Trains the unified model (or K separate ones) on the written dataset and
/// saves checkpoint(s) plus per-epoch history CSV. `train.epochs` is the
/// total; resuming runs only the epochs still missing.
void run_train(const RunConfig& cfg, const PipelineOptions& opts);

/// Evaluates the trained model(s) on the test sets and writes metrics.json.
MetricsReport run_eval(const RunConfig& cfg, const PipelineOptions& opts);

/// Runs the tracking model over the day and writes tracking.csv.
std::vector<TrackingPoint> run_track(const RunConfig& cfg, const PipelineOptions& opts);

/// Rows "epoch,lr,train_loss_<name>...,test_loss_<name>...".
std::string history_csv(const std::vector<EpochRecord>& history, const std::vector<std::string>& names);

}  // namespace uopf
