#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uopf/grid.hpp"
#include "uopf/layout.hpp"
#include "uopf/opf.hpp"
#include "uopf/random.hpp"

namespace uopf {

/// Load vector of one network, indexed by load slot (NetworkCase::load_buses
/// order), p.u. The label holds the oracle solution when it succeeded;
/// multipliers are not kept.
struct LoadSample {
  int network_id = 0;
  Eigen::VectorXd loads_p;
  Eigen::VectorXd loads_q;
  std::optional<OpfSolution> label;
};

/// Expands a sample to per-bus complex loads (zero at non-load buses).
Eigen::VectorXcd bus_loads(const NetworkCase& c, const LoadSample& s);

/// Physical input vector [loads_p; loads_q].
Eigen::VectorXd sample_input(const LoadSample& s);

/// Physical target vector [vm; va] in bus slot order.
Eigen::VectorXd sample_target(const NetworkCase& c, const OpfSolution& label);

/// Splits a physical target back into per-bus (internal order) vm and va.
VoltageSolution target_voltages(const NetworkCase& c, const Eigen::VectorXd& target);

struct LoadRange {
  double lo = 0.9;
  double hi = 1.1;
};

/// Each load bus gets its own factor in [lo, hi], applied to P and Q alike.
/// `scale` multiplies the base load first (used by the tracking profile).
std::vector<LoadSample> sample_uniform_loads(const NetworkCase& c, LoadRange range, int n,
                                             std::uint64_t seed, int network_id = 0,
                                             double scale = 1.0);

/// How vm targets are scaled: by the bus limits [vmin, vmax], or like va by
/// the training range plus margin.
enum class VmScaling { limits, train_range };

/// Per-network min-max parameters. Inputs use training min/max; vm targets
/// follow VmScaling; va targets use training min/max widened by 10% of the
/// range on both sides (width at least 1e-3).
struct Scaler {
  struct Range {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
  };
  std::vector<Range> inputs;
  std::vector<Range> outputs;

  enum class Kind { input, output };

  int size() const { return static_cast<int>(inputs.size()); }
};

/// Fits network k's ranges; `train` must hold labeled samples.
Scaler::Range fit_input_range(const std::vector<LoadSample>& train);
Scaler::Range fit_output_range(const NetworkCase& c, const std::vector<LoadSample>& train,
                               VmScaling vm = VmScaling::train_range);

/// (x - lo) / (hi - lo) and back, no clamping. Throws UnfittedDimension when
/// network k has no fitted range of that length.
Eigen::VectorXd apply_scaler(const Scaler& s, int k, Scaler::Kind kind, const Eigen::VectorXd& x);
Eigen::VectorXd invert_scaler(const Scaler& s, int k, Scaler::Kind kind, const Eigen::VectorXd& x);

struct NetworkData {
  std::vector<LoadSample> train;
  std::vector<LoadSample> test;
  int attempted = 0;
  int dropped = 0;  // oracle status != optimal
};

struct Provenance {
  std::uint64_t seed = 0;
  LoadRange range;
  double split = 0.8;
  SolverOptions oracle;
  std::string generated_at;  // ISO-8601 UTC, empty when suppressed
};

/// Expanding-network day: slot t uses network `network[t]` at base load
/// times `scale[t]`; `test_index[t]` locates its trajectory sample in that
/// network's test list (-1 when the oracle failed on it).
struct TrackingSchedule {
  std::vector<int> network;
  std::vector<double> scale;
  std::vector<int> test_index;

  int slots() const { return static_cast<int>(network.size()); }
};

struct Dataset {
  std::vector<NetworkCase> cases;
  std::vector<NetworkData> networks;
  Scaler scaler;
  Provenance provenance;
  std::optional<TrackingSchedule> schedule;
};

struct GenerateOptions {
  SolverOptions oracle;
  int jobs = 1;
  double max_failure_fraction = 0.1;
  VmScaling vm_scaling = VmScaling::train_range;
};

/// Solves the OPF for every sample in place (fanning out over `jobs` threads,
/// results kept in input order) and returns how many were not optimal.
int label_samples(const NetworkCase& c, std::vector<LoadSample>& samples, const GenerateOptions& opts);

/// Samples, labels, drops oracle failures, shuffles and splits each network,
/// then fits the scaler on the training part. Throws TooFewLabeled when more
/// than 10% of any network's samples fail.
Dataset generate_dataset(const std::vector<NetworkCase>& cases, int n_per_network, double split,
                         std::uint64_t seed, LoadRange range = {}, const GenerateOptions& opts = {});

/// Double-peaked daily scale factors with max - min = swing, centred on 1.
std::vector<double> daily_profile(double swing, int slots);

/// The day is cut into one contiguous segment per network (smallest first).
/// Each slot contributes `per_slot_n` jittered training samples around its
/// scaled base load; the unjittered slot loads form the test trajectory.
Dataset generate_tracking_dataset(const std::vector<NetworkCase>& cases,
                                  const std::vector<double>& profile, int per_slot_n,
                                  std::uint64_t seed, LoadRange range = {},
                                  const GenerateOptions& opts = {});

/// Writes `<name>.m`, `<name>.train.jsonl`, `<name>.test.jsonl` per network,
/// `manifest.json`, and `schedule.csv` for tracking sets. With
/// `provenance = false` timing fields are zeroed and the timestamp omitted.
void write_dataset(const Dataset& d, const std::string& dir, bool provenance = true);
Dataset read_dataset(const std::string& dir);

/// Current UTC time as ISO-8601.
std::string utc_timestamp();

}  // namespace uopf
