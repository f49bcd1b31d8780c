#include "uopf/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>

#include <json.hpp>

#include "uopf/error.hpp"
#include "uopf/surrogate.hpp"

namespace uopf {

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

// Splits a bus total among units: lo_g + (total - sum lo) * range_g / sum range.
void split_share(double total, const std::vector<int>& units, const std::vector<double>& lo,
                 const std::vector<double>& hi, Eigen::VectorXd& out) {
  double lo_sum = 0.0, range_sum = 0.0;
  for (int g : units) {
    lo_sum += lo[g];
    range_sum += hi[g] - lo[g];
  }
  for (int g : units) {
    if (range_sum > 0.0)
      out[g] = lo[g] + (total - lo_sum) * (hi[g] - lo[g]) / range_sum;
    else
      out[g] = total / static_cast<double>(units.size());
  }
}

// Per-case data reused across samples.
struct Postprocessor {
  const NetworkCase& c;
  const AdmittanceMatrix& y;
  std::vector<std::vector<int>> at_bus;
  std::vector<double> pmin, pmax, qmin, qmax;

  Postprocessor(const NetworkCase& c_, const AdmittanceMatrix& y_) : c(c_), y(y_), at_bus(c_.generators_at_bus()) {
    for (const auto& g : c.generators) {
      pmin.push_back(g.pmin / c.base_mva);
      pmax.push_back(g.pmax / c.base_mva);
      qmin.push_back(g.qmin / c.base_mva);
      qmax.push_back(g.qmax / c.base_mva);
    }
  }

  Dispatch operator()(const VoltageSolution& v, const Eigen::VectorXcd& loads) const {
    const int n = c.num_buses();
    if (y.dim() != n || v.vm.size() != n || v.va.size() != n || loads.size() != n)
      throw Error(ErrorCode::DimensionMismatch, c.name + ": prediction does not match the bus count");
    const Eigen::VectorXcd s = complex_injections(y, v);
    Dispatch d{Eigen::VectorXd::Zero(c.num_generators()), Eigen::VectorXd::Zero(c.num_generators()),
               Eigen::VectorXcd(n)};
    for (int i = 0; i < n; ++i) {
      if (at_bus[i].empty()) {
        d.implied_loads[i] = -s[i];
        continue;
      }
      d.implied_loads[i] = loads[i];
      const Complex total = s[i] + loads[i];
      split_share(total.real(), at_bus[i], pmin, pmax, d.pg);
      split_share(total.imag(), at_bus[i], qmin, qmax, d.qg);
    }
    return d;
  }
};

}  // namespace

Dispatch postprocess_prediction(const NetworkCase& c, const AdmittanceMatrix& y, const VoltageSolution& v,
                                const Eigen::VectorXcd& loads) {
  return Postprocessor(c, y)(v, loads);
}

std::vector<PredictionRecord> predict_network(const ElasticDnn<double>& dnn, const Scaler& scaler, int model_k,
                                              const NetworkCase& c, const std::vector<LoadSample>& samples) {
  const auto y = build_admittance(c);
  const Postprocessor post(c, y);
  const auto out_perm = packed_order(dnn.slots.outputs, model_k);
  const auto n = static_cast<Eigen::Index>(samples.size());
  std::vector<PredictionRecord> out(samples.size());
  if (n == 0) return out;

  // One batched pass over the whole set; its cost is shared evenly.
  const auto t0 = Clock::now();
  const Mat<double> u = scaled_inputs(samples, scaler, dnn.slots, model_k);
  const Mat<double> pred = forward<double>(dnn, model_k, u);
  const double forward_share = std::chrono::duration<double>(Clock::now() - t0).count() / static_cast<double>(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto t1 = Clock::now();
    auto& r = out[i];
    r.network_id = samples[i].network_id;
    r.sample = static_cast<int>(i);
    r.v = target_voltages(
        c, invert_scaler(scaler, model_k, Scaler::Kind::output, unpack(out_perm, pred.col(i))));
    r.dispatch = post(r.v, bus_loads(c, samples[i]));
    r.dnn_time = forward_share + std::chrono::duration<double>(Clock::now() - t1).count();
  }
  return out;
}

std::vector<PredictionRecord> oracle_predictions(const NetworkCase& c, const std::vector<LoadSample>& samples) {
  const auto y = build_admittance(c);
  const Postprocessor post(c, y);
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].label) throw Error(ErrorCode::MissingLabel, c.name + ": sample " + std::to_string(i));
    const auto t0 = Clock::now();
    PredictionRecord r;
    r.network_id = samples[i].network_id;
    r.sample = static_cast<int>(i);
    r.v = samples[i].label->v;
    r.dispatch = post(r.v, bus_loads(c, samples[i]));
    r.dispatch.pg = samples[i].label->pg;
    r.dispatch.qg = samples[i].label->qg;
    r.dnn_time = std::chrono::duration<double>(Clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

StorageComparison storage_comparison(const SlotMaps& slots, const std::vector<int>& hidden, int bytes_per_value) {
  StorageComparison s;
  s.bytes_per_value = bytes_per_value;
  std::int64_t trunk = 0;
  for (std::size_t i = 0; i + 1 < hidden.size(); ++i)
    trunk += static_cast<std::int64_t>(hidden[i + 1]) * hidden[i] + hidden[i + 1];
  const int K = slots.size();
  s.unified_params = static_cast<std::int64_t>(slots.inputs[K - 1]) * hidden.front() + hidden.front() + trunk +
                     static_cast<std::int64_t>(slots.outputs[K - 1]) * hidden.back() + slots.outputs[K - 1];
  s.separate_params = param_count_separate(slots, hidden);
  s.unified_bytes = s.unified_params * bytes_per_value;
  s.separate_bytes = s.separate_params * bytes_per_value;
  s.ratio = static_cast<double>(s.unified_params) / static_cast<double>(s.separate_params);
  return s;
}

double load_satisfaction(double implied, double requested) {
  return std::max(0.0, 1.0 - std::abs(implied - requested) / std::max(std::abs(requested), 1e-3));
}

NetworkMetrics compute_network_metrics(const NetworkCase& c, const std::vector<LoadSample>& test,
                                       const std::vector<PredictionRecord>& predictions, double tol) {
  if (predictions.size() != test.size())
    throw Error(ErrorCode::LengthMismatch, c.name + ": " + std::to_string(predictions.size()) +
                                               " predictions for " + std::to_string(test.size()) + " samples");
  NetworkMetrics m;
  m.name = c.name;
  m.samples = static_cast<int>(test.size());
  m.tolerance = tol;
  if (test.empty()) return m;

  std::vector<int> load_only;
  const auto at_bus = c.generators_at_bus();
  for (int b : c.load_buses())
    if (at_bus[b].empty()) load_only.push_back(b);

  double gap = 0.0, pd = 0.0, qd = 0.0, oracle_time = 0.0, dnn_time = 0.0;
  std::int64_t v_ok = 0, v_n = 0, pg_ok = 0, pg_n = 0, qg_ok = 0, qg_n = 0, sl_ok = 0, sl_n = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& s = test[i];
    if (!s.label) throw Error(ErrorCode::MissingLabel, c.name + ": test sample " + std::to_string(i));
    const auto& p = predictions[i];
    const double reference = s.label->objective;
    gap += std::abs(objective(c, p.dispatch.pg) - reference) / std::abs(reference);

    const auto rep = evaluate_constraints(c, p.v, p.dispatch.pg, p.dispatch.qg, tol);
    v_ok += rep.v_limits.satisfied;
    v_n += rep.v_limits.count;
    pg_ok += rep.pg_limits.satisfied;
    pg_n += rep.pg_limits.count;
    qg_ok += rep.qg_limits.satisfied;
    qg_n += rep.qg_limits.count;
    sl_ok += rep.branch_limits.satisfied;
    sl_n += rep.branch_limits.count;

    const auto requested = bus_loads(c, s);
    for (int b : load_only) {
      pd += load_satisfaction(p.dispatch.implied_loads[b].real(), requested[b].real());
      qd += load_satisfaction(p.dispatch.implied_loads[b].imag(), requested[b].imag());
    }
    oracle_time += s.label->solve_time;
    dnn_time += p.dnn_time;
  }
  const double n = static_cast<double>(test.size());
  auto pct = [](std::int64_t ok, std::int64_t total) {
    return total == 0 ? 100.0 : 100.0 * static_cast<double>(ok) / static_cast<double>(total);
  };
  m.eta_opt = 100.0 * gap / n;
  m.eta_v = pct(v_ok, v_n);
  m.eta_pg = pct(pg_ok, pg_n);
  m.eta_qg = pct(qg_ok, qg_n);
  m.eta_sl = pct(sl_ok, sl_n);
  const double pairs = n * static_cast<double>(load_only.size());
  m.eta_pd = load_only.empty() ? 100.0 : 100.0 * pd / pairs;
  m.eta_qd = load_only.empty() ? 100.0 : 100.0 * qd / pairs;
  m.mean_oracle_time = oracle_time / n;
  m.mean_dnn_time = dnn_time / n;
  m.speedup = m.mean_oracle_time > 0.0 && m.mean_dnn_time > 0.0 ? m.mean_oracle_time / m.mean_dnn_time : 0.0;
  return m;
}

MetricsReport compute_metrics(const std::vector<NetworkCase>& cases,
                              const std::vector<std::vector<LoadSample>>& tests,
                              const std::vector<std::vector<PredictionRecord>>& predictions, double tol) {
  if (tests.size() != cases.size() || predictions.size() != cases.size())
    throw Error(ErrorCode::LengthMismatch, "need one test set and one prediction list per network");
  MetricsReport r;
  for (std::size_t k = 0; k < cases.size(); ++k)
    r.networks.push_back(compute_network_metrics(cases[k], tests[k], predictions[k], tol));
  return r;
}

std::string metrics_json(const MetricsReport& r, bool provenance) {
  json j;
  json nets = json::array();
  for (const auto& m : r.networks) {
    json n;
    n["name"] = m.name;
    n["samples"] = m.samples;
    n["tolerance"] = m.tolerance;
    n["eta_opt"] = m.eta_opt;
    n["eta_v"] = m.eta_v;
    n["eta_pg"] = m.eta_pg;
    n["eta_qg"] = m.eta_qg;
    n["eta_sl"] = m.eta_sl;
    n["eta_pd"] = m.eta_pd;
    n["eta_qd"] = m.eta_qd;
    if (provenance) {
      n["mean_oracle_time"] = m.mean_oracle_time;
      n["mean_dnn_time"] = m.mean_dnn_time;
      n["speedup"] = m.speedup;
    }
    nets.push_back(n);
  }
  j["networks"] = nets;
  const auto& s = r.storage;
  j["storage"] = {{"unified_params", s.unified_params}, {"separate_params", s.separate_params},
                  {"bytes_per_value", s.bytes_per_value}, {"unified_bytes", s.unified_bytes},
                  {"separate_bytes", s.separate_bytes},   {"ratio", s.ratio}};
  if (r.unified_file_bytes) j["storage"]["unified_file_bytes"] = *r.unified_file_bytes;
  if (r.separate_file_bytes) j["storage"]["separate_file_bytes"] = *r.separate_file_bytes;
  return j.dump(2) + "\n";
}

std::vector<TrackingPoint> tracking_eval(const ElasticDnn<double>& dnn, const Scaler& scaler, const Dataset& d) {
  if (!d.schedule) throw Error(ErrorCode::MissingLabel, "dataset has no tracking schedule");
  const auto& sched = *d.schedule;
  std::vector<AdmittanceMatrix> ys;
  for (const auto& c : d.cases) ys.push_back(build_admittance(c));
  std::vector<TrackingPoint> out;
  for (int t = 0; t < sched.slots(); ++t) {
    const int k = sched.network[t];
    const int idx = sched.test_index[t];
    if (idx < 0) continue;
    if (idx >= static_cast<int>(d.networks[k].test.size()) || !d.networks[k].test[idx].label)
      throw Error(ErrorCode::MissingLabel, "slot " + std::to_string(t) + " has no oracle label");
    const auto& c = d.cases[k];
    const auto& s = d.networks[k].test[idx];
    const auto v = target_voltages(c, predict_target(dnn, scaler, k, s));
    const auto disp = postprocess_prediction(c, ys[k], v, bus_loads(c, s));
    out.push_back({t, k, sched.scale[t], objective(c, disp.pg), s.label->objective});
  }
  return out;
}

std::string tracking_csv(const std::vector<TrackingPoint>& points, const std::vector<NetworkCase>& cases) {
  auto fmt = [](double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
  };
  std::string out = "t,network_id,network,scale,cost_pred,cost_oracle\n";
  for (const auto& p : points)
    out += std::to_string(p.slot) + "," + std::to_string(p.network_id) + "," + cases[p.network_id].name + "," +
           fmt(p.scale) + "," + fmt(p.cost_pred) + "," + fmt(p.cost_oracle) + "\n";
  return out;
}

}  // namespace uopf
