#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uopf/dataset.hpp"
#include "uopf/neuralnet.hpp"
#include "uopf/opf.hpp"

namespace uopf {

/// Nested feeders cut from one base case, smallest first.
struct ExpandingSpec {
  std::string base;
  std::vector<int> targets;
};

struct SamplingConfig {
  LoadRange range;
  int samples_per_network = 0;
  double split = 0.8;
  std::uint64_t seed = 0;
  double max_failure_fraction = 0.1;
  VmScaling vm_scaling = VmScaling::train_range;
};

struct TrackingConfig {
  double swing = 0.54;
  int slots = 288;
  int per_slot = 10;
  std::uint64_t seed = 0;
};

struct ModelConfig {
  std::vector<int> hidden = {256, 128, 64};
  std::uint64_t init_seed = 0;
  std::string precision = "f64";  // "f64" or "f32"
};

/// One experiment. Paths are absolute once loaded.
struct RunConfig {
  std::vector<std::string> cases;
  std::optional<ExpandingSpec> expanding;
  SamplingConfig sampling;
  std::optional<TrackingConfig> tracking;
  SolverOptions solver;
  TrainConfig train;
  ModelConfig model;
  std::string output_dir;
};

/// Parses a JSON run config. Relative paths resolve against `base_dir`.
/// Throws InvalidConfig on unknown keys, missing seeds, bad values or
/// missing case files.
RunConfig parse_run_config(const std::string& text, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

}  // namespace uopf
