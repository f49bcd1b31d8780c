#include "uopf/pipeline.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "uopf/error.hpp"
#include "uopf/surrogate.hpp"

namespace uopf {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

void make_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_text(const std::string& path, const std::string& text) {
  make_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::ostream* log_of(const PipelineOptions& opts) { return opts.log; }

template <class U, class T>
Mat<U> cast_mat(const Mat<T>& m) {
  return m.template cast<U>();
}

template <class U, class T>
TrainState<U> cast_state(const TrainState<T>& s) {
  TrainState<U> out;
  out.adam.beta1 = s.adam.beta1;
  out.adam.beta2 = s.adam.beta2;
  out.adam.eps = s.adam.eps;
  out.adam.steps = s.adam.steps;
  for (const auto& b : s.adam.m) out.adam.m.push_back(cast_mat<U>(b));
  for (const auto& b : s.adam.v) out.adam.v.push_back(cast_mat<U>(b));
  out.epochs_done = s.epochs_done;
  out.history = s.history;
  return out;
}

void train_at_precision(ElasticDnn<double>& dnn, const std::vector<TrainSplit<double>>& data, const TrainConfig& cfg,
                        TrainState<double>& state, const std::string& precision) {
  if (precision == "f64") {
    train_incremental(dnn, data, cfg, state);
    return;
  }
  auto d32 = dnn.cast<float>();
  std::vector<TrainSplit<float>> data32;
  for (const auto& s : data)
    data32.push_back({cast_mat<float>(s.train_inputs), cast_mat<float>(s.train_targets),
                      cast_mat<float>(s.test_inputs), cast_mat<float>(s.test_targets)});
  auto state32 = cast_state<float>(state);
  train_incremental(d32, data32, cfg, state32);
  dnn = d32.cast<double>();
  state = cast_state<double>(state32);
}

std::vector<std::string> names_of(const std::vector<NetworkCase>& cases) {
  std::vector<std::string> names;
  for (const auto& c : cases) names.push_back(c.name);
  return names;
}

Scaler single_scaler(const Scaler& s, int k) {
  Scaler out;
  out.inputs = {s.inputs[k]};
  out.outputs = {s.outputs[k]};
  return out;
}

SlotMaps single_slots(const SlotMaps& s, int k) { return SlotMaps{{s.inputs[k]}, {s.outputs[k]}}; }

// Trains one model over `data` and saves it; resumes from `path` if asked.
void train_model(const RunConfig& cfg, const PipelineOptions& opts, const SlotMaps& slots, const Scaler& scaler,
                 const std::vector<std::string>& names, const std::vector<TrainSplit<double>>& data,
                 const std::string& path, const std::string& history_path) {
  Checkpoint ck;
  TrainState<double> state;
  if (opts.resume) {
    ck = load_checkpoint(path);
    if (!(ck.dnn.slots == slots) || ck.dnn.hidden != cfg.model.hidden || ck.networks != names)
      throw Error(ErrorCode::InvalidConfig, path + ": checkpoint does not match the config's networks or layers");
    if (!ck.state) throw Error(ErrorCode::InvalidConfig, path + ": checkpoint has no training state to resume");
    state = std::move(*ck.state);
  } else {
    ck.dnn = init_elastic_dnn<double>(slots, cfg.model.hidden, cfg.model.init_seed);
  }
  ck.scaler = scaler;
  ck.networks = names;
  ck.init_seed = cfg.model.init_seed;
  ck.train = cfg.train;
  ck.precision = cfg.model.precision;

  TrainConfig run = cfg.train;
  run.epochs = std::max(0, cfg.train.epochs - state.epochs_done);
  if (run.epochs > 0) train_at_precision(ck.dnn, data, run, state, cfg.model.precision);
  if (auto* log = log_of(opts); log && !state.history.empty()) {
    const auto& last = state.history.back();
    *log << fs::path(path).filename().string() << ": epoch " << last.epoch + 1;
    for (std::size_t k = 0; k < names.size(); ++k)
      *log << "  " << names[k] << " " << fmt(last.train_loss[k]) << "/" << fmt(last.test_loss[k]);
    *log << "\n";
  }
  const std::string history = history_csv(state.history, names);
  ck.state = std::move(state);
  make_parent(path);
  save_checkpoint(ck, path);
  write_text(history_path, history);
}

Dataset dataset_for(const RunConfig& cfg, const PipelineOptions& opts) {
  return read_dataset(opts.dataset.empty() ? run_paths(cfg, opts).dataset : opts.dataset);
}

std::int64_t file_bytes(const std::string& path) { return static_cast<std::int64_t>(fs::file_size(path)); }

}  // namespace

RunPaths run_paths(const RunConfig& cfg, const PipelineOptions& opts) {
  const fs::path out(cfg.output_dir);
  RunPaths p;
  p.dataset = (out / (opts.tracking ? "tracking" : "dataset")).string();
  p.checkpoint = opts.checkpoint.empty() ? (out / (opts.tracking ? "tracking.ckpt" : "unified.ckpt")).string()
                                         : opts.checkpoint;
  p.history = (out / (opts.tracking ? "tracking_history.csv" : "history.csv")).string();
  p.separate_dir = (out / "separate").string();
  p.metrics = (out / (opts.separate ? "metrics_separate.json" : "metrics.json")).string();
  p.tracking_csv = (out / "tracking.csv").string();
  if (!opts.output.empty()) p.metrics = p.tracking_csv = opts.output;
  return p;
}

std::vector<NetworkCase> load_networks(const RunConfig& cfg) {
  std::vector<NetworkCase> cases;
  if (cfg.expanding) {
    const auto base = load_case_file(cfg.expanding->base);
    for (int t : cfg.expanding->targets) cases.push_back(derive_subnetwork(base, t));
  } else {
    for (const auto& p : cfg.cases) cases.push_back(load_case_file(p));
  }
  return cases;
}

Dataset run_gendata(const RunConfig& cfg, const PipelineOptions& opts) {
  const auto cases = load_networks(cfg);
  GenerateOptions go;
  go.oracle = cfg.solver;
  go.jobs = opts.jobs;
  go.max_failure_fraction = cfg.sampling.max_failure_fraction;
  go.vm_scaling = cfg.sampling.vm_scaling;
  Dataset d;
  if (opts.tracking) {
    if (!cfg.tracking) throw Error(ErrorCode::InvalidConfig, "config has no 'tracking' section");
    const auto profile = daily_profile(cfg.tracking->swing, cfg.tracking->slots);
    d = generate_tracking_dataset(cases, profile, cfg.tracking->per_slot, cfg.tracking->seed, cfg.sampling.range, go);
  } else {
    d = generate_dataset(cases, cfg.sampling.samples_per_network, cfg.sampling.split, cfg.sampling.seed,
                         cfg.sampling.range, go);
  }
  if (opts.provenance) d.provenance.generated_at = utc_timestamp();
  const auto dir = run_paths(cfg, opts).dataset;
  fs::create_directories(dir);
  write_dataset(d, dir, opts.provenance);
  if (auto* log = log_of(opts))
    for (std::size_t k = 0; k < d.cases.size(); ++k)
      *log << d.cases[k].name << ": " << d.networks[k].train.size() << " train, " << d.networks[k].test.size()
           << " test, " << d.networks[k].dropped << " of " << d.networks[k].attempted << " dropped\n";
  return d;
}

void run_train(const RunConfig& cfg, const PipelineOptions& opts) {
  const Dataset d = dataset_for(cfg, opts);
  const auto paths = run_paths(cfg, opts);
  const auto slots = slot_maps_for(d.cases);
  const auto names = names_of(d.cases);
  const int K = static_cast<int>(d.cases.size());
  if (opts.separate) {
    for (int k = 0; k < K; ++k) {
      const auto s = single_slots(slots, k);
      const auto sc = single_scaler(d.scaler, k);
      const std::vector<TrainSplit<double>> data{prepare_split(d, k, sc, s, 0)};
      const auto base = (fs::path(paths.separate_dir) / names[k]).string();
      train_model(cfg, opts, s, sc, {names[k]}, data, base + ".ckpt", base + ".history.csv");
    }
    return;
  }
  std::vector<TrainSplit<double>> data;
  for (int k = 0; k < K; ++k) data.push_back(prepare_split(d, k, d.scaler, slots, k));
  train_model(cfg, opts, slots, d.scaler, names, data, paths.checkpoint, paths.history);
}

MetricsReport run_eval(const RunConfig& cfg, const PipelineOptions& opts) {
  const Dataset d = dataset_for(cfg, opts);
  const auto paths = run_paths(cfg, opts);
  const auto slots = slot_maps_for(d.cases);
  const auto names = names_of(d.cases);
  const int K = static_cast<int>(d.cases.size());

  std::vector<std::vector<LoadSample>> tests;
  std::vector<std::vector<PredictionRecord>> preds;
  for (const auto& nd : d.networks) tests.push_back(nd.test);

  std::vector<int> hidden = cfg.model.hidden;
  if (opts.oracle_predictions) {
    for (int k = 0; k < K; ++k) preds.push_back(oracle_predictions(d.cases[k], tests[k]));
  } else if (opts.separate) {
    for (int k = 0; k < K; ++k) {
      const auto ck = load_checkpoint((fs::path(paths.separate_dir) / (names[k] + ".ckpt")).string());
      if (ck.networks != std::vector<std::string>{names[k]} || !(ck.dnn.slots == single_slots(slots, k)))
        throw Error(ErrorCode::LengthMismatch, names[k] + ": separate checkpoint does not match the dataset");
      preds.push_back(predict_network(ck.dnn, ck.scaler, 0, d.cases[k], tests[k]));
      hidden = ck.dnn.hidden;
    }
  } else {
    const auto ck = load_checkpoint(paths.checkpoint);
    if (ck.networks != names || !(ck.dnn.slots == slots))
      throw Error(ErrorCode::LengthMismatch, paths.checkpoint + ": checkpoint does not match the dataset");
    for (int k = 0; k < K; ++k) preds.push_back(predict_network(ck.dnn, ck.scaler, k, d.cases[k], tests[k]));
    hidden = ck.dnn.hidden;
  }

  auto report = compute_metrics(d.cases, tests, preds);
  report.storage = storage_comparison(slots, hidden);
  if (fs::is_regular_file(paths.checkpoint)) report.unified_file_bytes = file_bytes(paths.checkpoint);
  std::int64_t separate_total = 0;
  bool all_separate = true;
  for (const auto& n : names) {
    const auto p = (fs::path(paths.separate_dir) / (n + ".ckpt")).string();
    if (fs::is_regular_file(p))
      separate_total += file_bytes(p);
    else
      all_separate = false;
  }
  if (all_separate) report.separate_file_bytes = separate_total;

  write_text(paths.metrics, metrics_json(report, opts.provenance));
  if (auto* log = log_of(opts))
    for (const auto& m : report.networks)
      *log << m.name << ": eta_opt " << fmt(m.eta_opt) << "%  eta_V " << fmt(m.eta_v) << "%  eta_Pd "
           << fmt(m.eta_pd) << "%  eta_Qd " << fmt(m.eta_qd) << "%  speedup " << fmt(m.speedup) << "\n";
  return report;
}

std::vector<TrackingPoint> run_track(const RunConfig& cfg, const PipelineOptions& opts) {
  PipelineOptions o = opts;
  o.tracking = true;
  const Dataset d = dataset_for(cfg, o);
  const auto paths = run_paths(cfg, o);
  const auto ck = load_checkpoint(paths.checkpoint);
  if (ck.networks != names_of(d.cases) || !(ck.dnn.slots == slot_maps_for(d.cases)))
    throw Error(ErrorCode::LengthMismatch, paths.checkpoint + ": checkpoint does not match the tracking dataset");
  const auto points = tracking_eval(ck.dnn, ck.scaler, d);
  write_text(paths.tracking_csv, tracking_csv(points, d.cases));
  if (auto* log = log_of(opts)) {
    int within = 0;
    for (const auto& p : points) within += p.gap() < 0.02;
    *log << within << " of " << d.schedule->slots() << " slots within 2% of the oracle cost";
    if (const auto missing = d.schedule->slots() - static_cast<int>(points.size()))
      *log << " (" << missing << " without an oracle solution)";
    *log << "\n";
  }
  return points;
}

std::string history_csv(const std::vector<EpochRecord>& history, const std::vector<std::string>& names) {
  std::string out = "epoch,lr";
  for (const auto& n : names) out += ",train_loss_" + n;
  for (const auto& n : names) out += ",test_loss_" + n;
  out += "\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + fmt(r.lr);
    for (double v : r.train_loss) out += "," + fmt(v);
    for (double v : r.test_loss) out += "," + fmt(v);
    out += "\n";
  }
  return out;
}

}  // namespace uopf
