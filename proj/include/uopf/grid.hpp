#pragma once

#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace uopf {

using Complex = std::complex<double>;

enum class BusKind { pq, pv, slack };

/// Bus as read from the bus table. Loads and shunts stay in file units
/// (MW / MVAr); per-unit views are provided by NetworkCase.
struct Bus {
  int id = 0;  // external bus number
  BusKind kind = BusKind::pq;
  double pd = 0.0;
  double qd = 0.0;
  double gs = 0.0;
  double bs = 0.0;
  double vm0 = 1.0;  // initial magnitude from the case file (p.u.)
  double va0 = 0.0;  // initial angle from the case file (degrees)
  double base_kv = 0.0;
  double vmax = 1.1;
  double vmin = 0.9;

  bool operator==(const Bus&) const = default;
};

/// Quadratic cost c2*P^2 + c1*P + c0 with P in MW, result in $/h.
struct QuadraticCost {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  bool operator==(const QuadraticCost&) const = default;
};

struct Generator {
  int bus = 0;  // internal bus index
  double pg = 0.0;
  double qg = 0.0;
  double qmax = 0.0;
  double qmin = 0.0;
  double vg = 1.0;
  double pmax = 0.0;
  double pmin = 0.0;
  QuadraticCost cost;

  bool operator==(const Generator&) const = default;
};

struct Branch {
  int from = 0;  // internal bus index
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;
  double smax = 0.0;   // MVA, 0 = unlimited
  double tap = 0.0;    // 0 = nominal
  double shift = 0.0;  // degrees

  double ratio() const { return tap == 0.0 ? 1.0 : tap; }
  bool operator==(const Branch&) const = default;
};

/// One validated network. Bus order is the file order; `slot_order[s]` is the
/// internal index of the bus occupying elastic-layer slot `s`.
struct NetworkCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;
  std::vector<int> slot_order;

  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_generators() const { return static_cast<int>(generators.size()); }
  int num_branches() const { return static_cast<int>(branches.size()); }
  int slack_bus() const;

  /// Internal index for an external bus number, or -1.
  int bus_index(int external_id) const;

  /// Buses with pd != 0 or qd != 0, in slot order.
  std::vector<int> load_buses() const;

  /// Per-bus base loads in p.u.
  Eigen::VectorXd pd_pu() const;
  Eigen::VectorXd qd_pu() const;

  /// For each bus, the generators attached to it.
  std::vector<std::vector<int>> generators_at_bus() const;

  bool operator==(const NetworkCase&) const = default;
};

/// Parses MATPOWER case text (`mpc.baseMVA`, `mpc.bus`, `mpc.gen`,
/// `mpc.branch`, `mpc.gencost`). Out-of-service generators and branches are
/// dropped. Non-fatal oddities (extra columns, dropped rows) are appended to
/// `warnings` when given.
NetworkCase parse_case(std::string_view text, std::string name = "case",
                       std::vector<std::string>* warnings = nullptr);

NetworkCase load_case_file(const std::string& path,
                           std::vector<std::string>* warnings = nullptr);

/// Canonical MATPOWER text; `parse_case(write_case(c), c.name) == c`.
std::string write_case(const NetworkCase& c);

/// Debug JSON dump of the full structure.
std::string dump_case_json(const NetworkCase& c);

/// Structural checks shared by the parser and derive_subnetwork.
void validate_case(const NetworkCase& c);

struct AdmittanceMatrix {
  Eigen::MatrixXcd y;

  int dim() const { return static_cast<int>(y.rows()); }
};

/// Two-port admittances of one branch: [If; It] = [ff ft; tf tt] [Vf; Vt].
struct BranchAdmittance {
  Complex ff, ft, tf, tt;
};

BranchAdmittance branch_admittance(const Branch& br);

AdmittanceMatrix build_admittance(const NetworkCase& c);

/// Removes non-slack, generator-free buses one at a time (highest internal
/// index first, skipping any whose removal disconnects the graph) until
/// `target_buses` remain. The slot order of the result lists never-removable
/// buses in table order followed by removable ones in reverse removal order,
/// so smaller targets always yield slot prefixes of larger ones.
NetworkCase derive_subnetwork(const NetworkCase& c, int target_buses);

}  // namespace uopf
