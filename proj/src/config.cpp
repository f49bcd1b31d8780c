#include "uopf/config.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "uopf/error.hpp"

namespace uopf {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) fail(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + key + " has the wrong type");
  }
}

std::uint64_t required_seed(const json& obj, const std::string& where) {
  if (!obj.contains("seed")) fail(where + ".seed is required");
  const auto& s = obj.at("seed");
  if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
    fail(where + ".seed must be a non-negative integer");
  return s.get<std::uint64_t>();
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : fs::path(base_dir) / path).lexically_normal().string();
}

std::string existing_file(const std::string& base_dir, const std::string& p) {
  const auto full = resolve(base_dir, p);
  if (!fs::is_regular_file(full)) fail("case file not found: " + full);
  return full;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  allow_keys(j, "config", {"cases", "expanding", "sampling", "tracking", "solver", "train", "output_dir"});
  RunConfig cfg;

  if (j.contains("cases") == j.contains("expanding")) fail("config needs exactly one of 'cases' or 'expanding'");
  if (j.contains("cases")) {
    std::vector<std::string> cases;
    read(j, "cases", "config", cases);
    if (cases.empty()) fail("config.cases is empty");
    for (const auto& c : cases) cfg.cases.push_back(existing_file(base_dir, c));
  } else {
    const auto& e = j.at("expanding");
    allow_keys(e, "expanding", {"base", "targets"});
    ExpandingSpec spec;
    read(e, "base", "expanding", spec.base);
    read(e, "targets", "expanding", spec.targets);
    if (spec.base.empty() || spec.targets.empty()) fail("expanding needs 'base' and 'targets'");
    for (std::size_t i = 1; i < spec.targets.size(); ++i)
      if (spec.targets[i] <= spec.targets[i - 1]) fail("expanding.targets must be strictly increasing");
    spec.base = existing_file(base_dir, spec.base);
    cfg.expanding = spec;
  }

  if (!j.contains("sampling")) fail("config.sampling is required");
  {
    const auto& s = j.at("sampling");
    allow_keys(s, "sampling", {"range", "samples_per_network", "split", "seed", "max_failure_fraction", "vm_scaling"});
    auto& out = cfg.sampling;
    std::vector<double> range{out.range.lo, out.range.hi};
    read(s, "range", "sampling", range);
    if (range.size() != 2 || !(range[0] > 0.0) || !(range[0] <= range[1])) fail("sampling.range must be [lo, hi] with 0 < lo <= hi");
    out.range = {range[0], range[1]};
    read(s, "samples_per_network", "sampling", out.samples_per_network);
    read(s, "split", "sampling", out.split);
    read(s, "max_failure_fraction", "sampling", out.max_failure_fraction);
    out.seed = required_seed(s, "sampling");
    std::string vm = "train_range";
    read(s, "vm_scaling", "sampling", vm);
    if (vm == "train_range")
      out.vm_scaling = VmScaling::train_range;
    else if (vm == "limits")
      out.vm_scaling = VmScaling::limits;
    else
      fail("sampling.vm_scaling must be 'train_range' or 'limits'");
    if (out.samples_per_network < 0) fail("sampling.samples_per_network must be >= 0");
    if (!(out.split > 0.0 && out.split <= 1.0)) fail("sampling.split must be in (0, 1]");
    if (!(out.max_failure_fraction >= 0.0 && out.max_failure_fraction <= 1.0))
      fail("sampling.max_failure_fraction must be in [0, 1]");
  }

  if (j.contains("tracking")) {
    const auto& t = j.at("tracking");
    allow_keys(t, "tracking", {"swing", "slots", "per_slot", "seed"});
    TrackingConfig tc;
    read(t, "swing", "tracking", tc.swing);
    read(t, "slots", "tracking", tc.slots);
    read(t, "per_slot", "tracking", tc.per_slot);
    tc.seed = required_seed(t, "tracking");
    if (!(tc.swing >= 0.0 && tc.swing < 1.0) || tc.slots < 1 || tc.per_slot < 0)
      fail("tracking needs 0 <= swing < 1, slots >= 1, per_slot >= 0");
    cfg.tracking = tc;
  }

  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    allow_keys(s, "solver", {"tol", "max_iter", "sigma", "initial_mu", "step_safety", "cost_scale", "slack_floor",
                              "restarts"});
    auto& o = cfg.solver;
    read(s, "tol", "solver", o.tol);
    read(s, "max_iter", "solver", o.max_iter);
    read(s, "sigma", "solver", o.sigma);
    read(s, "initial_mu", "solver", o.initial_mu);
    read(s, "step_safety", "solver", o.step_safety);
    read(s, "cost_scale", "solver", o.cost_scale);
    read(s, "slack_floor", "solver", o.slack_floor);
    read(s, "restarts", "solver", o.restarts);
    try {
      o.validate();
    } catch (const Error& e) {
      fail(std::string("solver: ") + e.what());
    }
  }

  if (!j.contains("train")) fail("config.train is required");
  {
    const auto& t = j.at("train");
    allow_keys(t, "train", {"alpha", "batch_size", "epochs", "gamma", "lr_halving_period", "seed", "schedule",
                            "hidden", "init_seed", "precision"});
    auto& o = cfg.train;
    read(t, "alpha", "train", o.alpha);
    read(t, "batch_size", "train", o.batch_size);
    read(t, "epochs", "train", o.epochs);
    read(t, "gamma", "train", o.gamma);
    read(t, "lr_halving_period", "train", o.lr_halving_period);
    o.seed = required_seed(t, "train");
    std::string schedule = "round_robin";
    read(t, "schedule", "train", schedule);
    if (schedule == "round_robin")
      o.schedule = Interleave::round_robin;
    else if (schedule == "sequential")
      o.schedule = Interleave::sequential;
    else
      fail("train.schedule must be 'round_robin' or 'sequential'");
    o.validate();

    auto& m = cfg.model;
    read(t, "hidden", "train", m.hidden);
    if (m.hidden.empty()) fail("train.hidden must list at least one layer width");
    for (int h : m.hidden)
      if (h < 1) fail("train.hidden widths must be positive");
    if (!t.contains("init_seed")) fail("train.init_seed is required");
    json seed_holder = {{"seed", t.at("init_seed")}};
    m.init_seed = required_seed(seed_holder, "train.init");
    read(t, "precision", "train", m.precision);
    if (m.precision != "f64" && m.precision != "f32") fail("train.precision must be 'f64' or 'f32'");
  }

  std::string out = "run";
  read(j, "output_dir", "config", out);
  cfg.output_dir = resolve(base_dir, out);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto dir = fs::absolute(fs::path(path)).parent_path().string();
  return parse_run_config(ss.str(), dir);
}

}  // namespace uopf
