#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "uopf/grid.hpp"
#include "uopf/powerflow.hpp"

namespace uopf {

enum class OpfStatus { optimal, infeasible, max_iter, numerical_failure };

std::string_view to_string(OpfStatus s);

struct SolverOptions {
  double tol = 1e-6;
  int max_iter = 150;
  double sigma = 0.1;          // barrier reduction
  double initial_mu = 1.0;     // initial barrier parameter
  double step_safety = 0.9995; // fraction-to-boundary
  double cost_scale = 1e-4;    // objective multiplier inside the iteration
  double slack_floor = 1.0;    // initial slacks are max(-h, slack_floor)
  int restarts = 2;            // retries after a failure, each with slack_floor / 10

  void validate() const;
};

/// Index bookkeeping for x = (va at non-slack buses, vm, pg, qg) and for the
/// constraint rows:
///   equalities   = [P balance (n); Q balance (n); fixed variables]
///   inequalities = [|Sf|^2 - smax^2; |St|^2 - smax^2 (limited branches);
///                   x - ub; lb - x (finite, non-fixed bounds)]
struct OpfLayout {
  struct Bound {
    int var = 0;
    double value = 0.0;
    bool upper = true;
  };

  int n = 0;
  int ng = 0;
  int slack = 0;
  std::vector<int> angle_bus;  // variable j < n-1 -> bus
  std::vector<int> angle_var;  // bus -> variable index, -1 at slack
  std::vector<int> limited_branches;
  std::vector<int> fixed_vars;
  std::vector<double> fixed_values;
  std::vector<Bound> bounds;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int vm_offset() const { return n - 1; }
  int pg_offset() const { return 2 * n - 1; }
  int qg_offset() const { return 2 * n - 1 + ng; }
  int nx() const { return 2 * n - 1 + 2 * ng; }
  int neq() const { return 2 * n + static_cast<int>(fixed_vars.size()); }
  int niq() const {
    return 2 * static_cast<int>(limited_branches.size()) + static_cast<int>(bounds.size());
  }
};

OpfLayout make_opf_layout(const NetworkCase& c);

struct OpfSolution {
  VoltageSolution v;
  Eigen::VectorXd pg;  // p.u.
  Eigen::VectorXd qg;  // p.u.
  double objective = 0.0;  // $/h
  OpfStatus status = OpfStatus::numerical_failure;
  int iterations = 0;
  double solve_time = 0.0;  // wall seconds

  // Multipliers in OpfLayout row order, for the scaled objective.
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
};

/// Total generation cost in $/h for a per-unit dispatch.
double objective(const NetworkCase& c, const Eigen::VectorXd& pg);

/// AC OPF by a primal-dual interior-point method. `loads` are per-bus
/// Pd + jQd in p.u.
OpfSolution solve_opf(const NetworkCase& c, const Eigen::VectorXcd& loads,
                      const SolverOptions& opts = {});
OpfSolution solve_opf(const NetworkCase& c, const AdmittanceMatrix& y, const Eigen::VectorXcd& loads,
                      const SolverOptions& opts = {});

struct KktResiduals {
  double primal = 0.0;           // max(|g|_inf, max(h, 0))
  double dual = 0.0;             // |grad L|_inf / (1 + max(|lambda|_inf, |mu|_inf))
  double complementarity = 0.0;  // max_i |mu_i h_i|
};

/// Recomputes the KKT residuals of a returned solution from the network data
/// alone: constraints via complex_injections/branch_flows and the Lagrangian
/// gradient by fourth-order central differences.
KktResiduals kkt_residuals(const NetworkCase& c, const Eigen::VectorXcd& loads,
                           const OpfSolution& sol, const SolverOptions& opts = {});

/// Per-bus complex base load of a case, p.u.
Eigen::VectorXcd base_loads(const NetworkCase& c);

namespace detail {

/// Gradient and Hessian of the solver's Lagrangian at x (OpfLayout order);
/// exposed for derivative checks.
Eigen::VectorXd lagrangian_gradient(const NetworkCase& c, const Eigen::VectorXcd& loads,
                                    const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                                    const Eigen::VectorXd& mu, double cost_scale);
Eigen::MatrixXd lagrangian_hessian(const NetworkCase& c, const Eigen::VectorXcd& loads,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                                   const Eigen::VectorXd& mu, double cost_scale);

}  // namespace detail

}  // namespace uopf
