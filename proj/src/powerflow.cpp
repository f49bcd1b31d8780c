#include "uopf/powerflow.hpp"

#include <cmath>
#include <string>

#include "uopf/error.hpp"

namespace uopf {

Eigen::VectorXcd voltage_phasors(const Eigen::VectorXd& vm, const Eigen::VectorXd& va) {
  Eigen::VectorXcd v(vm.size());
  for (Eigen::Index i = 0; i < vm.size(); ++i) v[i] = std::polar(vm[i], va[i]);
  return v;
}

Eigen::VectorXcd VoltageSolution::phasors() const { return voltage_phasors(vm, va); }

Eigen::VectorXcd complex_injections(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v) {
  if (y.rows() != v.size() || y.cols() != v.size()) {
    throw Error(ErrorCode::DimensionMismatch, "Y is " + std::to_string(y.rows()) + "x" +
                                                  std::to_string(y.cols()) + ", V has " +
                                                  std::to_string(v.size()));
  }
  const Eigen::VectorXcd current = y * v;
  return v.cwiseProduct(current.conjugate());
}

Eigen::VectorXcd complex_injections(const AdmittanceMatrix& y, const VoltageSolution& v) {
  if (v.vm.size() != v.va.size())
    throw Error(ErrorCode::DimensionMismatch, "vm and va lengths differ");
  return complex_injections(y.y, v.phasors());
}

InjectionJacobian injection_jacobian(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v) {
  const Eigen::VectorXcd current = y * v;
  const Eigen::VectorXcd vnorm = v.array() / v.array().abs();
  InjectionJacobian j;
  // dS/dVm = diag(V) conj(Y diag(Vn)) + conj(diag(I)) diag(Vn)
  j.ds_dvm = v.asDiagonal() * (y * vnorm.asDiagonal()).conjugate();
  j.ds_dvm.diagonal() += current.conjugate().cwiseProduct(vnorm);
  // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
  Eigen::MatrixXcd inner = -(y * v.asDiagonal());
  inner.diagonal() += current;
  j.ds_dva = Complex(0.0, 1.0) * (v.asDiagonal() * inner.conjugate());
  return j;
}

PowerFlowSetpoints case_setpoints(const NetworkCase& c) {
  const int n = c.num_buses();
  PowerFlowSetpoints sp{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)};
  for (int i = 0; i < n; ++i) sp.vm[i] = c.buses[i].vm0;
  for (const auto& g : c.generators) {
    sp.pg[g.bus] += g.pg / c.base_mva;
    sp.qg[g.bus] += g.qg / c.base_mva;
    sp.vm[g.bus] = g.vg;
  }
  return sp;
}

VoltageSolution solve_powerflow(const NetworkCase& c, const AdmittanceMatrix& y,
                                const Eigen::VectorXcd& loads, const PowerFlowSetpoints& sp,
                                const VoltageSolution* warm_start, const PowerFlowOptions& opts) {
  const int n = c.num_buses();
  if (y.dim() != n || loads.size() != n || sp.pg.size() != n || sp.qg.size() != n ||
      sp.vm.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "power flow inputs do not match bus count " + std::to_string(n));
  }
  std::vector<int> pvpq, pq;
  for (int i = 0; i < n; ++i) {
    if (c.buses[i].kind != BusKind::slack) pvpq.push_back(i);
    if (c.buses[i].kind == BusKind::pq) pq.push_back(i);
  }
  const int npvpq = static_cast<int>(pvpq.size());
  const int npq = static_cast<int>(pq.size());

  VoltageSolution sol;
  if (warm_start) {
    sol.vm = warm_start->vm;
    sol.va = warm_start->va;
  } else {
    sol.vm = Eigen::VectorXd::Ones(n);
    sol.va = Eigen::VectorXd::Zero(n);
  }
  for (int i = 0; i < n; ++i)
    if (c.buses[i].kind != BusKind::pq) sol.vm[i] = sp.vm[i];

  Eigen::VectorXcd s_spec(n);
  for (int i = 0; i < n; ++i) s_spec[i] = Complex(sp.pg[i], sp.qg[i]) - loads[i];

  Eigen::VectorXd mismatch(npvpq + npq);
  auto evaluate = [&](const Eigen::VectorXcd& v) {
    const Eigen::VectorXcd s = complex_injections(y.y, v) - s_spec;
    for (int a = 0; a < npvpq; ++a) mismatch[a] = s[pvpq[a]].real();
    for (int a = 0; a < npq; ++a) mismatch[npvpq + a] = s[pq[a]].imag();
    return mismatch.size() == 0 ? 0.0 : mismatch.cwiseAbs().maxCoeff();
  };

  Eigen::VectorXcd v = sol.phasors();
  double norm = evaluate(v);
  for (int it = 0;; ++it) {
    if (!std::isfinite(norm)) {
      throw Error(ErrorCode::MaxIterationsExceeded, c.name + ": power flow diverged after " +
                                                        std::to_string(it) + " iterations");
    }
    if (norm < opts.tol) {
      sol.converged = true;
      sol.iterations = it;
      sol.max_mismatch = norm;
      return sol;
    }
    if (it >= opts.max_iter) {
      throw Error(ErrorCode::MaxIterationsExceeded,
                  c.name + ": no convergence in " + std::to_string(opts.max_iter) +
                      " iterations (mismatch " + std::to_string(norm) + ")");
    }
    const auto d = injection_jacobian(y.y, v);
    Eigen::MatrixXd jac(npvpq + npq, npvpq + npq);
    for (int r = 0; r < npvpq; ++r) {
      for (int col = 0; col < npvpq; ++col) jac(r, col) = d.ds_dva(pvpq[r], pvpq[col]).real();
      for (int col = 0; col < npq; ++col) jac(r, npvpq + col) = d.ds_dvm(pvpq[r], pq[col]).real();
    }
    for (int r = 0; r < npq; ++r) {
      for (int col = 0; col < npvpq; ++col) jac(npvpq + r, col) = d.ds_dva(pq[r], pvpq[col]).imag();
      for (int col = 0; col < npq; ++col) jac(npvpq + r, npvpq + col) = d.ds_dvm(pq[r], pq[col]).imag();
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) {
      throw Error(ErrorCode::SingularJacobian,
                  c.name + ": Jacobian singular at iteration " + std::to_string(it + 1));
    }
    const Eigen::VectorXd dx = lu.solve(-mismatch);
    for (int a = 0; a < npvpq; ++a) sol.va[pvpq[a]] += dx[a];
    for (int a = 0; a < npq; ++a) sol.vm[pq[a]] += dx[npvpq + a];
    v = sol.phasors();
    norm = evaluate(v);
  }
}

BranchFlows branch_flows(const NetworkCase& c, const VoltageSolution& v) {
  if (v.vm.size() != c.num_buses() || v.va.size() != c.num_buses())
    throw Error(ErrorCode::DimensionMismatch, "voltage vector does not match bus count");
  const Eigen::VectorXcd vc = v.phasors();
  BranchFlows f{Eigen::VectorXcd(c.num_branches()), Eigen::VectorXcd(c.num_branches())};
  for (int l = 0; l < c.num_branches(); ++l) {
    const auto& br = c.branches[l];
    const auto a = branch_admittance(br);
    const Complex vf = vc[br.from], vt = vc[br.to];
    f.s_from[l] = vf * std::conj(a.ff * vf + a.ft * vt);
    f.s_to[l] = vt * std::conj(a.tf * vf + a.tt * vt);
  }
  return f;
}

namespace {

void record(ConstraintFamily& fam, double violation, double tol) {
  violation = std::max(violation, 0.0);
  fam.violation.push_back(violation);
  ++fam.count;
  if (violation <= tol) ++fam.satisfied;
  fam.max_violation = std::max(fam.max_violation, violation);
}

}  // namespace

ConstraintReport evaluate_constraints(const NetworkCase& c, const VoltageSolution& v,
                                      const Eigen::VectorXd& pg, const Eigen::VectorXd& qg,
                                      double tol) {
  if (pg.size() != c.num_generators() || qg.size() != c.num_generators())
    throw Error(ErrorCode::DimensionMismatch, "dispatch does not match generator count");
  ConstraintReport rep;
  rep.tolerance = tol;
  const double base = c.base_mva;
  for (int g = 0; g < c.num_generators(); ++g) {
    const auto& gen = c.generators[g];
    record(rep.pg_limits, std::max(gen.pmin / base - pg[g], pg[g] - gen.pmax / base), tol);
    record(rep.qg_limits, std::max(gen.qmin / base - qg[g], qg[g] - gen.qmax / base), tol);
  }
  for (int i = 0; i < c.num_buses(); ++i) {
    const auto& b = c.buses[i];
    record(rep.v_limits, std::max(b.vmin - v.vm[i], v.vm[i] - b.vmax), tol);
  }
  const auto flows = branch_flows(c, v);
  for (int l = 0; l < c.num_branches(); ++l) {
    const double smax = c.branches[l].smax / base;
    if (smax <= 0.0) continue;
    record(rep.branch_limits, std::max(std::abs(flows.s_from[l]), std::abs(flows.s_to[l])) - smax, tol);
  }
  return rep;
}

}  // namespace uopf
