#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uopf/dataset.hpp"
#include "uopf/neuralnet.hpp"

namespace uopf {

/// Dispatch and loads implied by a voltage prediction.
struct Dispatch {
  Eigen::VectorXd pg;  // per generator, p.u.
  Eigen::VectorXd qg;
  Eigen::VectorXcd implied_loads;  // per bus; equals the request at generator buses
};

/// S = complex_injections(Y, V). Generator buses get Pg + jQg = S + load,
/// shared among co-located units in proportion to their (pmax - pmin) and
/// (qmax - qmin) ranges (equally when all ranges are zero). Other buses
/// imply a load of -S.
Dispatch postprocess_prediction(const NetworkCase& c, const AdmittanceMatrix& y, const VoltageSolution& v,
                                const Eigen::VectorXcd& loads);

struct PredictionRecord {
  int network_id = 0;
  int sample = 0;
  VoltageSolution v;
  Dispatch dispatch;
  double dnn_time = 0.0;  // forward + inverse scaling + post-processing, seconds
};

/// Runs the model on every sample of one network. The batched forward pass
/// is timed once and shared evenly; scaling and post-processing are timed
/// per sample.
std::vector<PredictionRecord> predict_network(const ElasticDnn<double>& dnn, const Scaler& scaler, int model_k,
                                              const NetworkCase& c, const std::vector<LoadSample>& samples);

/// Uses the oracle solution as the "prediction" (pipeline sanity check):
/// its voltages and dispatch, with loads implied by the voltages.
std::vector<PredictionRecord> oracle_predictions(const NetworkCase& c, const std::vector<LoadSample>& samples);

struct NetworkMetrics {
  std::string name;
  int samples = 0;
  double tolerance = 1e-4;
  double eta_opt = 0.0;
  double eta_v = 0.0;
  double eta_pg = 0.0;
  double eta_qg = 0.0;
  double eta_sl = 0.0;
  double eta_pd = 0.0;
  double eta_qd = 0.0;
  double mean_oracle_time = 0.0;
  double mean_dnn_time = 0.0;
  double speedup = 0.0;  // 0 when either time is unavailable
};

struct StorageComparison {
  std::int64_t unified_params = 0;
  std::int64_t separate_params = 0;
  int bytes_per_value = 4;
  std::int64_t unified_bytes = 0;
  std::int64_t separate_bytes = 0;
  double ratio = 0.0;
};

/// Payload sizes of the unified model and of one standalone MLP per network.
StorageComparison storage_comparison(const SlotMaps& slots, const std::vector<int>& hidden, int bytes_per_value = 4);

struct MetricsReport {
  std::vector<NetworkMetrics> networks;
  StorageComparison storage;
  std::optional<std::int64_t> unified_file_bytes;
  std::optional<std::int64_t> separate_file_bytes;
};

/// Load satisfaction of one bus: max(0, 1 - |implied - requested| / max(|requested|, 1e-3)).
double load_satisfaction(double implied, double requested);

/// Metrics of one network's test set. Throws MissingLabel for unlabeled
/// samples and LengthMismatch when predictions and samples disagree.
NetworkMetrics compute_network_metrics(const NetworkCase& c, const std::vector<LoadSample>& test,
                                       const std::vector<PredictionRecord>& predictions, double tol = 1e-4);

MetricsReport compute_metrics(const std::vector<NetworkCase>& cases,
                              const std::vector<std::vector<LoadSample>>& tests,
                              const std::vector<std::vector<PredictionRecord>>& predictions, double tol = 1e-4);

/// JSON text of a report; timing fields are left out when `provenance` is false.
std::string metrics_json(const MetricsReport& r, bool provenance = true);

struct TrackingPoint {
  int slot = 0;
  int network_id = 0;
  double scale = 1.0;
  double cost_pred = 0.0;
  double cost_oracle = 0.0;

  double gap() const { return std::abs(cost_pred - cost_oracle) / std::abs(cost_oracle); }
};

/// Predicts every slot of a tracking dataset with the active network's
/// slice of the model. Slots the oracle could not solve (test_index -1) are
/// left out; a test_index pointing at an unlabeled sample throws MissingLabel.
std::vector<TrackingPoint> tracking_eval(const ElasticDnn<double>& dnn, const Scaler& scaler, const Dataset& d);

/// Columns t, network_id, network, scale, cost_pred, cost_oracle.
std::string tracking_csv(const std::vector<TrackingPoint>& points, const std::vector<NetworkCase>& cases);

}  // namespace uopf
