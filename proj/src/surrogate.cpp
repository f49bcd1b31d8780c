#include "uopf/surrogate.hpp"

#include "uopf/error.hpp"

namespace uopf {

Mat<double> scaled_inputs(const std::vector<LoadSample>& samples, const Scaler& scaler, const SlotMaps& slots,
                          int model_k) {
  const auto perm = packed_order(slots.inputs, model_k);
  Mat<double> u(slots.inputs[model_k], static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i)
    u.col(static_cast<Eigen::Index>(i)) =
        pack(perm, apply_scaler(scaler, model_k, Scaler::Kind::input, sample_input(samples[i])));
  return u;
}

namespace {

Mat<double> scaled_targets(const NetworkCase& c, const std::vector<LoadSample>& samples, const Scaler& scaler,
                           const SlotMaps& slots, int model_k) {
  const auto perm = packed_order(slots.outputs, model_k);
  Mat<double> t(slots.outputs[model_k], static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].label) throw Error(ErrorCode::MissingLabel, c.name + ": sample " + std::to_string(i));
    t.col(static_cast<Eigen::Index>(i)) =
        pack(perm, apply_scaler(scaler, model_k, Scaler::Kind::output, sample_target(c, *samples[i].label)));
  }
  return t;
}

}  // namespace

TrainSplit<double> prepare_split(const Dataset& d, int k, const Scaler& scaler, const SlotMaps& slots, int model_k) {
  const auto& c = d.cases[k];
  const auto& nd = d.networks[k];
  if (slots.inputs[model_k] != 2 * static_cast<int>(c.load_buses().size()) ||
      slots.outputs[model_k] != 2 * c.num_buses())
    throw Error(ErrorCode::LengthMismatch, c.name + " does not fit slot " + std::to_string(model_k) + " of the model");
  TrainSplit<double> s;
  s.train_inputs = scaled_inputs(nd.train, scaler, slots, model_k);
  s.train_targets = scaled_targets(c, nd.train, scaler, slots, model_k);
  s.test_inputs = scaled_inputs(nd.test, scaler, slots, model_k);
  s.test_targets = scaled_targets(c, nd.test, scaler, slots, model_k);
  return s;
}

Eigen::VectorXd predict_target(const ElasticDnn<double>& dnn, const Scaler& scaler, int model_k,
                               const LoadSample& s) {
  const Eigen::VectorXd u = pack(packed_order(dnn.slots.inputs, model_k),
                                 apply_scaler(scaler, model_k, Scaler::Kind::input, sample_input(s)));
  const Eigen::VectorXd y = forward<double>(dnn, model_k, u);
  return invert_scaler(scaler, model_k, Scaler::Kind::output, unpack(packed_order(dnn.slots.outputs, model_k), y));
}

}  // namespace uopf
