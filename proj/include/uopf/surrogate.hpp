#pragma once

#include <vector>

#include <Eigen/Dense>

#include "uopf/dataset.hpp"
#include "uopf/neuralnet.hpp"

namespace uopf {

/// Scaled, packed training and test matrices for dataset network `k`,
/// laid out as network `model_k` of `slots`. `scaler` holds the ranges at
/// index `model_k`.
TrainSplit<double> prepare_split(const Dataset& d, int k, const Scaler& scaler, const SlotMaps& slots, int model_k);

/// One column per sample: scaled and packed inputs.
Mat<double> scaled_inputs(const std::vector<LoadSample>& samples, const Scaler& scaler, const SlotMaps& slots,
                          int model_k);

/// Physical [vm; va] (bus slot order) predicted for one sample.
Eigen::VectorXd predict_target(const ElasticDnn<double>& dnn, const Scaler& scaler, int model_k,
                               const LoadSample& s);

}  // namespace uopf
