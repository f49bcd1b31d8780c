#pragma once

#include <vector>

#include <Eigen/Dense>

#include "uopf/grid.hpp"

namespace uopf {

/// Polar bus voltages, magnitudes in p.u. and angles in radians.
struct VoltageSolution {
  Eigen::VectorXd vm;
  Eigen::VectorXd va;
  bool converged = false;
  int iterations = 0;
  double max_mismatch = 0.0;

  Eigen::VectorXcd phasors() const;
};

Eigen::VectorXcd voltage_phasors(const Eigen::VectorXd& vm, const Eigen::VectorXd& va);

/// S_i = V_i * conj(sum_j Y_ij V_j), p.u.
Eigen::VectorXcd complex_injections(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v);
Eigen::VectorXcd complex_injections(const AdmittanceMatrix& y, const VoltageSolution& v);

/// Partial derivatives of the bus injections with respect to angles and
/// magnitudes. Shared by the Newton-Raphson solver and the OPF model.
struct InjectionJacobian {
  Eigen::MatrixXcd ds_dva;
  Eigen::MatrixXcd ds_dvm;
};

InjectionJacobian injection_jacobian(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v);

/// Generator setpoints summed per bus. `vm` is held at pv and slack buses,
/// `pg` is the injection at pv buses, `qg` at pq buses.
struct PowerFlowSetpoints {
  Eigen::VectorXd pg;
  Eigen::VectorXd qg;
  Eigen::VectorXd vm;
};

PowerFlowSetpoints case_setpoints(const NetworkCase& c);

struct PowerFlowOptions {
  double tol = 1e-8;
  int max_iter = 20;
};

/// Newton-Raphson in polar form. `loads` holds per-bus Pd + jQd in p.u.
/// Throws SingularJacobian or MaxIterationsExceeded. Generator Q limits are
/// not enforced.
VoltageSolution solve_powerflow(const NetworkCase& c, const AdmittanceMatrix& y,
                                const Eigen::VectorXcd& loads, const PowerFlowSetpoints& setpoints,
                                const VoltageSolution* warm_start = nullptr,
                                const PowerFlowOptions& opts = {});

struct BranchFlows {
  Eigen::VectorXcd s_from;
  Eigen::VectorXcd s_to;
};

/// Apparent power entering each branch at both terminals, p.u.
BranchFlows branch_flows(const NetworkCase& c, const VoltageSolution& v);

struct ConstraintFamily {
  int count = 0;
  int satisfied = 0;
  double max_violation = 0.0;
  std::vector<double> violation;  // per constraint, 0 when inside limits

  double percent() const { return count == 0 ? 100.0 : 100.0 * satisfied / count; }
};

/// Generator P/Q boxes, bus voltage magnitude boxes and branch apparent-power
/// limits, each counted once per element (branches with smax = 0 skipped).
struct ConstraintReport {
  double tolerance = 1e-4;
  ConstraintFamily pg_limits;
  ConstraintFamily qg_limits;
  ConstraintFamily v_limits;
  ConstraintFamily branch_limits;

  bool all_satisfied() const {
    return pg_limits.satisfied == pg_limits.count && qg_limits.satisfied == qg_limits.count &&
           v_limits.satisfied == v_limits.count && branch_limits.satisfied == branch_limits.count;
  }
};

ConstraintReport evaluate_constraints(const NetworkCase& c, const VoltageSolution& v,
                                      const Eigen::VectorXd& pg, const Eigen::VectorXd& qg,
                                      double tol = 1e-4);

}  // namespace uopf
