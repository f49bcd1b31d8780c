#include "uopf/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "uopf/error.hpp"

namespace uopf {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

Eigen::VectorXcd bus_loads(const NetworkCase& c, const LoadSample& s) {
  const auto lb = c.load_buses();
  if (s.loads_p.size() != static_cast<Eigen::Index>(lb.size()) || s.loads_q.size() != s.loads_p.size())
    throw Error(ErrorCode::DimensionMismatch, c.name + ": sample has " + std::to_string(s.loads_p.size()) +
                                                  " loads, case has " + std::to_string(lb.size()));
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(c.num_buses());
  for (std::size_t i = 0; i < lb.size(); ++i) out[lb[i]] = Complex(s.loads_p[i], s.loads_q[i]);
  return out;
}

Eigen::VectorXd sample_input(const LoadSample& s) {
  Eigen::VectorXd x(2 * s.loads_p.size());
  x << s.loads_p, s.loads_q;
  return x;
}

Eigen::VectorXd sample_target(const NetworkCase& c, const OpfSolution& label) {
  const int n = c.num_buses();
  Eigen::VectorXd y(2 * n);
  for (int s = 0; s < n; ++s) {
    y[s] = label.v.vm[c.slot_order[s]];
    y[n + s] = label.v.va[c.slot_order[s]];
  }
  return y;
}

VoltageSolution target_voltages(const NetworkCase& c, const Eigen::VectorXd& target) {
  const int n = c.num_buses();
  if (target.size() != 2 * n)
    throw Error(ErrorCode::DimensionMismatch, c.name + ": target length " + std::to_string(target.size()));
  VoltageSolution v{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int s = 0; s < n; ++s) {
    v.vm[c.slot_order[s]] = target[s];
    v.va[c.slot_order[s]] = target[n + s];
  }
  return v;
}

std::vector<LoadSample> sample_uniform_loads(const NetworkCase& c, LoadRange range, int n,
                                             std::uint64_t seed, int network_id, double scale) {
  if (!(range.lo > 0.0 && range.lo <= range.hi))
    throw Error(ErrorCode::InvalidConfig, "load range must satisfy 0 < lo <= hi");
  const auto lb = c.load_buses();
  const int m = static_cast<int>(lb.size());
  std::mt19937_64 rng(seed);
  std::vector<LoadSample> out(std::max(n, 0));
  for (auto& s : out) {
    s.network_id = network_id;
    s.loads_p.resize(m);
    s.loads_q.resize(m);
    for (int i = 0; i < m; ++i) {
      const double f = scale * (range.lo + (range.hi - range.lo) * unit_draw(rng()));
      s.loads_p[i] = f * c.buses[lb[i]].pd / c.base_mva;
      s.loads_q[i] = f * c.buses[lb[i]].qd / c.base_mva;
    }
  }
  return out;
}

namespace {

void widen(double& lo, double& hi, double min_width) {
  if (hi - lo < min_width) {
    const double mid = 0.5 * (lo + hi);
    lo = mid - 0.5 * min_width;
    hi = mid + 0.5 * min_width;
  }
}

const Scaler::Range& fitted(const Scaler& s, int k, Scaler::Kind kind, Eigen::Index len) {
  const auto& ranges = kind == Scaler::Kind::input ? s.inputs : s.outputs;
  if (k < 0 || k >= static_cast<int>(ranges.size()) || ranges[k].lo.size() == 0)
    throw Error(ErrorCode::UnfittedDimension, "no fitted range for network " + std::to_string(k));
  if (ranges[k].lo.size() != len)
    throw Error(ErrorCode::UnfittedDimension, "network " + std::to_string(k) + " range has length " +
                                                  std::to_string(ranges[k].lo.size()) + ", got " +
                                                  std::to_string(len));
  return ranges[k];
}

}  // namespace

Scaler::Range fit_input_range(const std::vector<LoadSample>& train) {
  if (train.empty()) throw Error(ErrorCode::EmptyTrainSet, "cannot fit a scaler without samples");
  Eigen::VectorXd lo = sample_input(train[0]), hi = lo;
  for (const auto& s : train) {
    const auto x = sample_input(s);
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) widen(lo[i], hi[i], 1e-6);
  return {lo, hi};
}

Scaler::Range fit_output_range(const NetworkCase& c, const std::vector<LoadSample>& train, VmScaling vm) {
  if (train.empty()) throw Error(ErrorCode::EmptyTrainSet, "cannot fit a scaler without samples");
  const int n = c.num_buses();
  Eigen::VectorXd mn = Eigen::VectorXd::Constant(2 * n, std::numeric_limits<double>::infinity());
  Eigen::VectorXd mx = -mn;
  for (const auto& sample : train) {
    if (!sample.label) throw Error(ErrorCode::MissingLabel, c.name + ": unlabeled training sample");
    const auto y = sample_target(c, *sample.label);
    mn = mn.cwiseMin(y);
    mx = mx.cwiseMax(y);
  }
  Eigen::VectorXd lo(2 * n), hi(2 * n);
  for (int i = 0; i < 2 * n; ++i) {
    if (i < n && vm == VmScaling::limits) {
      lo[i] = c.buses[c.slot_order[i]].vmin;
      hi[i] = c.buses[c.slot_order[i]].vmax;
    } else {
      const double margin = 0.1 * (mx[i] - mn[i]);
      lo[i] = mn[i] - margin;
      hi[i] = mx[i] + margin;
    }
    widen(lo[i], hi[i], 1e-3);
  }
  return {lo, hi};
}

Eigen::VectorXd apply_scaler(const Scaler& s, int k, Scaler::Kind kind, const Eigen::VectorXd& x) {
  const auto& r = fitted(s, k, kind, x.size());
  return ((x - r.lo).array() / (r.hi - r.lo).array()).matrix();
}

Eigen::VectorXd invert_scaler(const Scaler& s, int k, Scaler::Kind kind, const Eigen::VectorXd& x) {
  const auto& r = fitted(s, k, kind, x.size());
  return (r.lo.array() + x.array() * (r.hi - r.lo).array()).matrix();
}

int label_samples(const NetworkCase& c, std::vector<LoadSample>& samples, const GenerateOptions& opts) {
  opts.oracle.validate();
  const auto y = build_admittance(c);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      auto& s = samples[i];
      s.label.reset();
      try {
        auto sol = solve_opf(c, y, bus_loads(c, s), opts.oracle);
        if (sol.status == OpfStatus::optimal) {
          sol.lambda.resize(0);
          sol.mu.resize(0);
          s.label = std::move(sol);
        }
      } catch (const Error&) {
        // counted as a failure below
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(samples.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return static_cast<int>(std::count_if(samples.begin(), samples.end(), [](const auto& s) { return !s.label; }));
}

namespace {

void check_failures(const NetworkCase& c, int failed, int attempted, double max_fraction) {
  if (attempted > 0 && failed > max_fraction * attempted)
    throw Error(ErrorCode::TooFewLabeled, c.name + ": oracle failed on " + std::to_string(failed) + " of " +
                                              std::to_string(attempted) + " samples");
}

std::vector<LoadSample> keep_labeled(std::vector<LoadSample>&& samples) {
  std::vector<LoadSample> out;
  out.reserve(samples.size());
  for (auto& s : samples)
    if (s.label) out.push_back(std::move(s));
  return out;
}

void fit_scaler(Dataset& d, VmScaling vm) {
  const int k = static_cast<int>(d.cases.size());
  d.scaler.inputs.assign(k, {});
  d.scaler.outputs.assign(k, {});
  for (int i = 0; i < k; ++i) {
    if (d.networks[i].train.empty()) continue;
    d.scaler.inputs[i] = fit_input_range(d.networks[i].train);
    d.scaler.outputs[i] = fit_output_range(d.cases[i], d.networks[i].train, vm);
  }
}

}  // namespace

Dataset generate_dataset(const std::vector<NetworkCase>& cases, int n_per_network, double split,
                         std::uint64_t seed, LoadRange range, const GenerateOptions& opts) {
  if (!(split > 0.0 && split <= 1.0)) throw Error(ErrorCode::InvalidConfig, "split must be in (0, 1]");
  Dataset d;
  d.cases = cases;
  d.provenance = {seed, range, split, opts.oracle, {}};
  for (int k = 0; k < static_cast<int>(cases.size()); ++k) {
    const auto& c = cases[k];
    validate_case(c);
    auto samples = sample_uniform_loads(c, range, n_per_network, derive_seed(seed, 2 * k), k);
    const int failed = label_samples(c, samples, opts);
    check_failures(c, failed, n_per_network, opts.max_failure_fraction);
    auto kept = keep_labeled(std::move(samples));

    std::mt19937_64 rng(derive_seed(seed, 2 * k + 1));
    for (std::size_t i = kept.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(unit_draw(rng()) * static_cast<double>(i));
      std::swap(kept[i - 1], kept[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::lround(split * static_cast<double>(kept.size())));
    NetworkData nd;
    nd.attempted = n_per_network;
    nd.dropped = failed;
    nd.train.assign(std::make_move_iterator(kept.begin()), std::make_move_iterator(kept.begin() + n_train));
    nd.test.assign(std::make_move_iterator(kept.begin() + n_train), std::make_move_iterator(kept.end()));
    d.networks.push_back(std::move(nd));
  }
  fit_scaler(d, opts.vm_scaling);
  return d;
}

std::vector<double> daily_profile(double swing, int slots) {
  if (!(swing >= 0.0 && swing < 1.0) || slots < 1)
    throw Error(ErrorCode::InvalidConfig, "profile needs 0 <= swing < 1 and slots >= 1");
  constexpr double two_pi = 6.283185307179586;
  std::vector<double> g(slots);
  for (int t = 0; t < slots; ++t) {
    const double tau = static_cast<double>(t) / slots;
    g[t] = -0.6 * std::cos(two_pi * tau) - 0.4 * std::cos(2.0 * two_pi * tau);
  }
  const auto [mn, mx] = std::minmax_element(g.begin(), g.end());
  const double lo = *mn, width = *mx - *mn;
  std::vector<double> s(slots, 1.0);
  if (width > 0.0 && swing > 0.0)
    for (int t = 0; t < slots; ++t) s[t] = 1.0 - 0.5 * swing + swing * (g[t] - lo) / width;
  return s;
}

Dataset generate_tracking_dataset(const std::vector<NetworkCase>& cases, const std::vector<double>& profile,
                                  int per_slot_n, std::uint64_t seed, LoadRange range,
                                  const GenerateOptions& opts) {
  const int k_count = static_cast<int>(cases.size());
  const int slots = static_cast<int>(profile.size());
  if (k_count == 0 || slots < k_count)
    throw Error(ErrorCode::InvalidConfig, "tracking needs at least one slot per network");
  for (int k = 1; k < k_count; ++k)
    if (cases[k].num_buses() <= cases[k - 1].num_buses())
      throw Error(ErrorCode::InvalidConfig, "tracking networks must be ordered by increasing size");

  Dataset d;
  d.cases = cases;
  d.provenance = {seed, range, 1.0, opts.oracle, {}};
  d.networks.resize(k_count);
  TrackingSchedule sched;
  sched.network.resize(slots);
  sched.scale = profile;
  sched.test_index.assign(slots, -1);

  for (int k = 0; k < k_count; ++k) {
    const auto& c = cases[k];
    validate_case(c);
    const int begin = k * slots / k_count, end = (k + 1) * slots / k_count;
    std::vector<LoadSample> train, trajectory;
    for (int t = begin; t < end; ++t) {
      sched.network[t] = k;
      auto batch = sample_uniform_loads(c, range, per_slot_n, derive_seed(seed, 2 * t), k, profile[t]);
      std::move(batch.begin(), batch.end(), std::back_inserter(train));
      trajectory.push_back(sample_uniform_loads(c, {1.0, 1.0}, 1, 0, k, profile[t])[0]);
    }
    const int failed = label_samples(c, train, opts) + label_samples(c, trajectory, opts);
    auto& nd = d.networks[k];
    nd.attempted = static_cast<int>(train.size() + trajectory.size());
    nd.dropped = failed;
    check_failures(c, failed, nd.attempted, opts.max_failure_fraction);
    nd.train = keep_labeled(std::move(train));
    for (int t = begin; t < end; ++t) {
      auto& s = trajectory[t - begin];
      if (!s.label) continue;
      sched.test_index[t] = static_cast<int>(nd.test.size());
      nd.test.push_back(std::move(s));
    }
  }
  d.schedule = std::move(sched);
  fit_scaler(d, opts.vm_scaling);
  return d;
}

// ---------------------------------------------------------------- files

namespace {

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Eigen::VectorXd vector_from(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json options_json(const SolverOptions& o) {
  return {{"tol", o.tol},
          {"max_iter", o.max_iter},
          {"sigma", o.sigma},
          {"initial_mu", o.initial_mu},
          {"step_safety", o.step_safety},
          {"cost_scale", o.cost_scale},
          {"slack_floor", o.slack_floor},
          {"restarts", o.restarts}};
}

SolverOptions options_from(const json& j) {
  SolverOptions o;
  o.tol = j.at("tol").get<double>();
  o.max_iter = j.at("max_iter").get<int>();
  o.sigma = j.at("sigma").get<double>();
  o.initial_mu = j.at("initial_mu").get<double>();
  o.step_safety = j.at("step_safety").get<double>();
  o.cost_scale = j.at("cost_scale").get<double>();
  o.slack_floor = j.at("slack_floor").get<double>();
  o.restarts = j.at("restarts").get<int>();
  return o;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string samples_jsonl(const std::vector<LoadSample>& samples, bool provenance) {
  std::string out;
  for (const auto& s : samples) {
    const auto& l = *s.label;
    json line;
    line["loads_p"] = to_json(s.loads_p);
    line["loads_q"] = to_json(s.loads_q);
    line["vm"] = to_json(l.v.vm);
    line["va"] = to_json(l.v.va);
    line["pg"] = to_json(l.pg);
    line["qg"] = to_json(l.qg);
    line["objective"] = l.objective;
    line["solve_time"] = provenance ? l.solve_time : 0.0;
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<LoadSample> read_jsonl(const fs::path& path, int network_id) {
  std::vector<LoadSample> out;
  std::istringstream in(read_text(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      LoadSample s;
      s.network_id = network_id;
      s.loads_p = vector_from(j.at("loads_p"));
      s.loads_q = vector_from(j.at("loads_q"));
      OpfSolution l;
      l.v.vm = vector_from(j.at("vm"));
      l.v.va = vector_from(j.at("va"));
      l.v.converged = true;
      l.pg = vector_from(j.at("pg"));
      l.qg = vector_from(j.at("qg"));
      l.objective = j.at("objective").get<double>();
      l.solve_time = j.at("solve_time").get<double>();
      l.status = OpfStatus::optimal;
      s.label = std::move(l);
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile, path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_dataset(const Dataset& d, const std::string& dir, bool provenance) {
  std::set<std::string> names;
  for (const auto& c : d.cases)
    if (!names.insert(c.name).second) throw Error(ErrorCode::InvalidConfig, "duplicate network name " + c.name);
  const fs::path root(dir);
  fs::create_directories(root);

  json manifest;
  manifest["format"] = "uopf-dataset";
  manifest["version"] = 1;
  json nets = json::array();
  for (std::size_t k = 0; k < d.cases.size(); ++k) {
    const auto& c = d.cases[k];
    const auto& nd = d.networks[k];
    write_text(root / (c.name + ".m"), write_case(c));
    write_text(root / (c.name + ".train.jsonl"), samples_jsonl(nd.train, provenance));
    write_text(root / (c.name + ".test.jsonl"), samples_jsonl(nd.test, provenance));
    json n;
    n["name"] = c.name;
    n["buses"] = c.num_buses();
    n["load_buses"] = c.load_buses().size();
    n["attempted"] = nd.attempted;
    n["dropped"] = nd.dropped;
    n["train"] = nd.train.size();
    n["test"] = nd.test.size();
    json sc = json::object();
    if (k < d.scaler.inputs.size() && d.scaler.inputs[k].lo.size() > 0) {
      sc["input_lo"] = to_json(d.scaler.inputs[k].lo);
      sc["input_hi"] = to_json(d.scaler.inputs[k].hi);
      sc["output_lo"] = to_json(d.scaler.outputs[k].lo);
      sc["output_hi"] = to_json(d.scaler.outputs[k].hi);
    }
    n["scaler"] = sc;
    nets.push_back(n);
  }
  manifest["networks"] = nets;
  json prov;
  prov["seed"] = d.provenance.seed;
  prov["range"] = {d.provenance.range.lo, d.provenance.range.hi};
  prov["split"] = d.provenance.split;
  prov["oracle"] = options_json(d.provenance.oracle);
  if (provenance) prov["generated_at"] = d.provenance.generated_at.empty() ? utc_timestamp() : d.provenance.generated_at;
  manifest["provenance"] = prov;

  if (d.schedule) {
    std::string csv = "slot,network_id,scale,test_index\n";
    for (int t = 0; t < d.schedule->slots(); ++t)
      csv += std::to_string(t) + "," + std::to_string(d.schedule->network[t]) + "," + fmt(d.schedule->scale[t]) +
             "," + std::to_string(d.schedule->test_index[t]) + "\n";
    write_text(root / "schedule.csv", csv);
    manifest["schedule"] = "schedule.csv";
  }
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const std::string& dir) {
  const fs::path root(dir);
  Dataset d;
  try {
    const auto manifest = json::parse(read_text(root / "manifest.json"));
    if (manifest.at("format") != "uopf-dataset")
      throw Error(ErrorCode::CorruptFile, (root / "manifest.json").string() + ": not a dataset manifest");
    if (manifest.at("version").get<int>() != 1)
      throw Error(ErrorCode::VersionMismatch, "dataset version " + manifest.at("version").dump());
    int k = 0;
    for (const auto& n : manifest.at("networks")) {
      const auto name = n.at("name").get<std::string>();
      d.cases.push_back(load_case_file((root / (name + ".m")).string()));
      NetworkData nd;
      nd.attempted = n.at("attempted").get<int>();
      nd.dropped = n.at("dropped").get<int>();
      nd.train = read_jsonl(root / (name + ".train.jsonl"), k);
      nd.test = read_jsonl(root / (name + ".test.jsonl"), k);
      d.networks.push_back(std::move(nd));
      const auto& sc = n.at("scaler");
      if (sc.contains("input_lo")) {
        d.scaler.inputs.push_back({vector_from(sc.at("input_lo")), vector_from(sc.at("input_hi"))});
        d.scaler.outputs.push_back({vector_from(sc.at("output_lo")), vector_from(sc.at("output_hi"))});
      } else {
        d.scaler.inputs.emplace_back();
        d.scaler.outputs.emplace_back();
      }
      ++k;
    }
    const auto& prov = manifest.at("provenance");
    d.provenance.seed = prov.at("seed").get<std::uint64_t>();
    d.provenance.range = {prov.at("range")[0].get<double>(), prov.at("range")[1].get<double>()};
    d.provenance.split = prov.at("split").get<double>();
    d.provenance.oracle = options_from(prov.at("oracle"));
    if (prov.contains("generated_at")) d.provenance.generated_at = prov.at("generated_at").get<std::string>();

    if (manifest.contains("schedule")) {
      TrackingSchedule sched;
      std::istringstream in(read_text(root / manifest.at("schedule").get<std::string>()));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell[4];
        for (auto& c : cell) std::getline(row, c, ',');
        sched.network.push_back(std::stoi(cell[1]));
        sched.scale.push_back(std::stod(cell[2]));
        sched.test_index.push_back(std::stoi(cell[3]));
      }
      d.schedule = std::move(sched);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, (root / "manifest.json").string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorCode::CorruptFile, (root / "schedule.csv").string() + ": bad number");
  }
  return d;
}

}  // namespace uopf
