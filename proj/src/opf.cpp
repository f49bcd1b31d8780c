#include "uopf/opf.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "uopf/error.hpp"

namespace uopf {

std::string_view to_string(OpfStatus s) {
  switch (s) {
    case OpfStatus::optimal: return "optimal";
    case OpfStatus::infeasible: return "infeasible";
    case OpfStatus::max_iter: return "max_iter";
    case OpfStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

void SolverOptions::validate() const {
  if (!(sigma > 0.0 && sigma < 1.0)) throw Error(ErrorCode::InvalidConfig, "solver sigma must lie in (0, 1)");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "solver tol must be > 0");
  if (max_iter < 1) throw Error(ErrorCode::InvalidConfig, "solver max_iter must be >= 1");
  if (!(step_safety > 0.0 && step_safety < 1.0))
    throw Error(ErrorCode::InvalidConfig, "solver step_safety must lie in (0, 1)");
  if (!(initial_mu > 0.0) || !(cost_scale > 0.0) || !(slack_floor > 0.0))
    throw Error(ErrorCode::InvalidConfig, "solver initial_mu, cost_scale and slack_floor must be > 0");
  if (restarts < 0) throw Error(ErrorCode::InvalidConfig, "solver restarts must be >= 0");
}

OpfLayout make_opf_layout(const NetworkCase& c) {
  OpfLayout lay;
  lay.n = c.num_buses();
  lay.ng = c.num_generators();
  lay.slack = c.slack_bus();
  lay.angle_var.assign(lay.n, -1);
  for (int i = 0; i < lay.n; ++i) {
    if (i == lay.slack) continue;
    lay.angle_var[i] = static_cast<int>(lay.angle_bus.size());
    lay.angle_bus.push_back(i);
  }
  for (int l = 0; l < c.num_branches(); ++l)
    if (c.branches[l].smax > 0.0) lay.limited_branches.push_back(l);

  const double inf = std::numeric_limits<double>::infinity();
  const int nx = lay.nx();
  lay.lower = Eigen::VectorXd::Constant(nx, -inf);
  lay.upper = Eigen::VectorXd::Constant(nx, inf);
  for (int i = 0; i < lay.n; ++i) {
    lay.lower[lay.vm_offset() + i] = c.buses[i].vmin;
    lay.upper[lay.vm_offset() + i] = c.buses[i].vmax;
  }
  for (int g = 0; g < lay.ng; ++g) {
    const auto& gen = c.generators[g];
    lay.lower[lay.pg_offset() + g] = gen.pmin / c.base_mva;
    lay.upper[lay.pg_offset() + g] = gen.pmax / c.base_mva;
    lay.lower[lay.qg_offset() + g] = gen.qmin / c.base_mva;
    lay.upper[lay.qg_offset() + g] = gen.qmax / c.base_mva;
  }
  for (int j = 0; j < nx; ++j) {
    if (std::isfinite(lay.lower[j]) && std::isfinite(lay.upper[j]) && lay.upper[j] - lay.lower[j] <= 1e-10) {
      lay.fixed_vars.push_back(j);
      lay.fixed_values.push_back(lay.lower[j]);
    }
  }
  std::vector<char> fixed(nx, 0);
  for (int j : lay.fixed_vars) fixed[j] = 1;
  for (int j = 0; j < nx; ++j)
    if (!fixed[j] && std::isfinite(lay.upper[j])) lay.bounds.push_back({j, lay.upper[j], true});
  for (int j = 0; j < nx; ++j)
    if (!fixed[j] && std::isfinite(lay.lower[j])) lay.bounds.push_back({j, lay.lower[j], false});
  return lay;
}

double objective(const NetworkCase& c, const Eigen::VectorXd& pg) {
  if (pg.size() != c.num_generators())
    throw Error(ErrorCode::DimensionMismatch, "dispatch does not match generator count");
  double total = 0.0;
  for (int g = 0; g < c.num_generators(); ++g) {
    const auto& k = c.generators[g].cost;
    const double p = pg[g] * c.base_mva;
    total += k.c2 * p * p + k.c1 * p + k.c0;
  }
  return total;
}

Eigen::VectorXcd base_loads(const NetworkCase& c) {
  Eigen::VectorXcd s(c.num_buses());
  for (int i = 0; i < c.num_buses(); ++i)
    s[i] = Complex(c.buses[i].pd, c.buses[i].qd) / c.base_mva;
  return s;
}

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

const Complex kJ(0.0, 1.0);

struct VoltageHessian {
  MatrixXcd aa, av, va, vv;
};

// Second derivatives of lam^T S_bus(V) in polar coordinates.
VoltageHessian injection_hessian(const MatrixXcd& y, const VectorXcd& v, const VectorXcd& lam) {
  const VectorXcd current = y * v;
  const VectorXcd lam_v = lam.cwiseProduct(v);
  const VectorXd inv_vm = v.array().abs().inverse();
  const MatrixXcd b = y * v.asDiagonal();
  const MatrixXcd c = lam_v.asDiagonal() * b.conjugate();
  const MatrixXcd d = y.adjoint() * v.asDiagonal();
  MatrixXcd e = d * lam.asDiagonal();
  e.diagonal() -= d * lam;
  e = v.conjugate().asDiagonal() * e;
  MatrixXcd f = c;
  f.diagonal() -= lam_v.cwiseProduct(current.conjugate());
  VoltageHessian h;
  h.aa = e + f;
  h.va = kJ * (inv_vm.asDiagonal() * (e - f));
  h.av = h.va.transpose();
  h.vv = inv_vm.asDiagonal() * (c + c.transpose()) * inv_vm.asDiagonal();
  return h;
}

// Second derivatives of lam^T S_br(V) for S_br = (C V) .* conj(Y_br V).
VoltageHessian branch_power_hessian(const MatrixXd& cbr, const MatrixXcd& ybr, const VectorXcd& v,
                                    const VectorXcd& lam) {
  const VectorXd inv_vm = v.array().abs().inverse();
  const MatrixXcd a = ybr.adjoint() * (lam.asDiagonal() * cbr.cast<Complex>());
  const MatrixXcd b = v.conjugate().asDiagonal() * a * v.asDiagonal();
  const VectorXcd dvec = (a * v).cwiseProduct(v.conjugate());
  const VectorXcd evec = (a.transpose() * v.conjugate()).cwiseProduct(v);
  const MatrixXcd f = b + b.transpose();
  VoltageHessian h;
  h.aa = f;
  h.aa.diagonal() -= dvec + evec;
  MatrixXcd t = b - b.transpose();
  t.diagonal() += evec - dvec;
  h.va = kJ * (inv_vm.asDiagonal() * t);
  h.av = h.va.transpose();
  h.vv = inv_vm.asDiagonal() * f * inv_vm.asDiagonal();
  return h;
}

struct BranchSide {
  MatrixXcd ybr;  // limited branches x n
  MatrixXd cbr;
  VectorXcd s;
  MatrixXcd ds_dva;
  MatrixXcd ds_dvm;
};

struct Evaluation {
  double f = 0.0;
  VectorXd df;
  VectorXd g;
  MatrixXd jg;
  VectorXd h;
  MatrixXd jh;
  VectorXcd v;
  BranchSide from, to;
};

class OpfModel {
 public:
  OpfModel(const NetworkCase& c, const MatrixXcd& y, const VectorXcd& loads, double cost_scale)
      : c_(c), y_(y), loads_(loads), cost_scale_(cost_scale), lay_(make_opf_layout(c)) {
    const int nl = static_cast<int>(lay_.limited_branches.size());
    const int n = lay_.n;
    from_.ybr = MatrixXcd::Zero(nl, n);
    to_.ybr = MatrixXcd::Zero(nl, n);
    from_.cbr = MatrixXd::Zero(nl, n);
    to_.cbr = MatrixXd::Zero(nl, n);
    smax2_ = VectorXd(nl);
    for (int r = 0; r < nl; ++r) {
      const auto& br = c.branches[lay_.limited_branches[r]];
      const auto a = branch_admittance(br);
      from_.ybr(r, br.from) = a.ff;
      from_.ybr(r, br.to) = a.ft;
      to_.ybr(r, br.from) = a.tf;
      to_.ybr(r, br.to) = a.tt;
      from_.cbr(r, br.from) = 1.0;
      to_.cbr(r, br.to) = 1.0;
      const double smax = br.smax / c.base_mva;
      smax2_[r] = smax * smax;
    }
    full_to_x_.assign(2 * n, -1);
    for (int i = 0; i < n; ++i) {
      full_to_x_[i] = lay_.angle_var[i];
      full_to_x_[n + i] = lay_.vm_offset() + i;
    }
  }

  const OpfLayout& layout() const { return lay_; }

  VectorXd initial_point() const {
    VectorXd x = VectorXd::Zero(lay_.nx());
    for (int j = lay_.vm_offset(); j < lay_.nx(); ++j) {
      const double lo = lay_.lower[j], hi = lay_.upper[j];
      if (std::isfinite(lo) && std::isfinite(hi)) x[j] = 0.5 * (lo + hi);
      else if (std::isfinite(lo)) x[j] = lo;
      else if (std::isfinite(hi)) x[j] = hi;
    }
    return x;
  }

  VectorXcd voltages(const VectorXd& x) const {
    VectorXcd v(lay_.n);
    for (int i = 0; i < lay_.n; ++i) {
      const int j = lay_.angle_var[i];
      v[i] = std::polar(x[lay_.vm_offset() + i], j < 0 ? 0.0 : x[j]);
    }
    return v;
  }

  Evaluation evaluate(const VectorXd& x) const {
    const int n = lay_.n, ng = lay_.ng, nx = lay_.nx();
    Evaluation e;
    e.v = voltages(x);

    e.f = 0.0;
    e.df = VectorXd::Zero(nx);
    for (int g = 0; g < ng; ++g) {
      const auto& k = c_.generators[g].cost;
      const double base = c_.base_mva;
      const double p = x[lay_.pg_offset() + g];
      e.f += k.c2 * base * base * p * p + k.c1 * base * p + k.c0;
      e.df[lay_.pg_offset() + g] = 2.0 * k.c2 * base * base * p + k.c1 * base;
    }
    e.f *= cost_scale_;
    e.df *= cost_scale_;

    const VectorXcd s = complex_injections(y_, e.v);
    const auto ds = injection_jacobian(y_, e.v);
    e.g = VectorXd::Zero(lay_.neq());
    e.jg = MatrixXd::Zero(lay_.neq(), nx);
    for (int i = 0; i < n; ++i) {
      e.g[i] = s[i].real() + loads_[i].real();
      e.g[n + i] = s[i].imag() + loads_[i].imag();
    }
    for (int g = 0; g < ng; ++g) {
      const int bus = c_.generators[g].bus;
      e.g[bus] -= x[lay_.pg_offset() + g];
      e.g[n + bus] -= x[lay_.qg_offset() + g];
      e.jg(bus, lay_.pg_offset() + g) = -1.0;
      e.jg(n + bus, lay_.qg_offset() + g) = -1.0;
    }
    for (int k = 0; k < 2 * n; ++k) {
      const int j = full_to_x_[k];
      if (j < 0) continue;
      const auto col = k < n ? ds.ds_dva.col(k) : ds.ds_dvm.col(k - n);
      e.jg.block(0, j, n, 1) = col.real();
      e.jg.block(n, j, n, 1) = col.imag();
    }
    for (std::size_t r = 0; r < lay_.fixed_vars.size(); ++r) {
      e.g[2 * n + r] = x[lay_.fixed_vars[r]] - lay_.fixed_values[r];
      e.jg(2 * n + r, lay_.fixed_vars[r]) = 1.0;
    }

    const int nl = static_cast<int>(lay_.limited_branches.size());
    e.h = VectorXd::Zero(lay_.niq());
    e.jh = MatrixXd::Zero(lay_.niq(), nx);
    e.from = branch_side(from_, e.v);
    e.to = branch_side(to_, e.v);
    for (int side = 0; side < 2; ++side) {
      const BranchSide& bs = side == 0 ? e.from : e.to;
      for (int r = 0; r < nl; ++r) {
        const int row = side * nl + r;
        e.h[row] = std::norm(bs.s[r]) - smax2_[r];
        const Complex sc = std::conj(bs.s[r]);
        for (int k = 0; k < 2 * n; ++k) {
          const int j = full_to_x_[k];
          if (j < 0) continue;
          const Complex d = k < n ? bs.ds_dva(r, k) : bs.ds_dvm(r, k - n);
          e.jh(row, j) = 2.0 * (sc * d).real();
        }
      }
    }
    for (std::size_t r = 0; r < lay_.bounds.size(); ++r) {
      const auto& bd = lay_.bounds[r];
      const int row = 2 * nl + static_cast<int>(r);
      e.h[row] = bd.upper ? x[bd.var] - bd.value : bd.value - x[bd.var];
      e.jh(row, bd.var) = bd.upper ? 1.0 : -1.0;
    }
    return e;
  }

  MatrixXd hessian(const Evaluation& e, const VectorXd& lam, const VectorXd& mu) const {
    const int n = lay_.n, nx = lay_.nx();
    const int nl = static_cast<int>(lay_.limited_branches.size());
    MatrixXd hv = MatrixXd::Zero(2 * n, 2 * n);

    const VectorXcd lam_p = lam.head(n).cast<Complex>();
    const VectorXcd lam_q = lam.segment(n, n).cast<Complex>();
    const auto hp = injection_hessian(y_, e.v, lam_p);
    const auto hq = injection_hessian(y_, e.v, lam_q);
    hv.block(0, 0, n, n) += hp.aa.real() + hq.aa.imag();
    hv.block(0, n, n, n) += hp.av.real() + hq.av.imag();
    hv.block(n, 0, n, n) += hp.va.real() + hq.va.imag();
    hv.block(n, n, n, n) += hp.vv.real() + hq.vv.imag();

    if (nl > 0) {
      add_branch_hessian(hv, from_, e.from, e.v, mu.head(nl));
      add_branch_hessian(hv, to_, e.to, e.v, mu.segment(nl, nl));
    }

    MatrixXd hx = MatrixXd::Zero(nx, nx);
    for (int a = 0; a < 2 * n; ++a) {
      const int ja = full_to_x_[a];
      if (ja < 0) continue;
      for (int b = 0; b < 2 * n; ++b) {
        const int jb = full_to_x_[b];
        if (jb < 0) continue;
        hx(ja, jb) = hv(a, b);
      }
    }
    const double base = c_.base_mva;
    for (int g = 0; g < lay_.ng; ++g) {
      const int j = lay_.pg_offset() + g;
      hx(j, j) += cost_scale_ * 2.0 * c_.generators[g].cost.c2 * base * base;
    }
    return hx;
  }

 private:
  BranchSide branch_side(const BranchSide& proto, const VectorXcd& v) const {
    BranchSide bs;
    const VectorXcd i_br = proto.ybr * v;
    const VectorXcd v_br = proto.cbr.cast<Complex>() * v;
    const VectorXcd vnorm = v.array() / v.array().abs();
    bs.s = v_br.cwiseProduct(i_br.conjugate());
    const MatrixXcd cv = proto.cbr.cast<Complex>() * v.asDiagonal();
    bs.ds_dva = kJ * (i_br.conjugate().asDiagonal() * cv -
                      v_br.asDiagonal() * (proto.ybr * v.asDiagonal()).conjugate());
    bs.ds_dvm = v_br.asDiagonal() * (proto.ybr * vnorm.asDiagonal()).conjugate() +
                i_br.conjugate().asDiagonal() * (proto.cbr.cast<Complex>() * vnorm.asDiagonal());
    return bs;
  }

  // Adds the Hessian of mu^T (|S_br|^2 - smax^2).
  static void add_branch_hessian(MatrixXd& hv, const BranchSide& proto, const BranchSide& bs,
                                 const VectorXcd& v, const VectorXd& mu) {
    const int n = static_cast<int>(v.size());
    const VectorXcd weighted = bs.s.conjugate().cwiseProduct(mu.cast<Complex>());
    const auto s2 = branch_power_hessian(proto.cbr, proto.ybr, v, weighted);
    const MatrixXcd mu_conj_dva = mu.asDiagonal() * bs.ds_dva.conjugate();
    const MatrixXcd mu_conj_dvm = mu.asDiagonal() * bs.ds_dvm.conjugate();
    hv.block(0, 0, n, n) += 2.0 * (s2.aa + bs.ds_dva.transpose() * mu_conj_dva).real();
    hv.block(n, 0, n, n) += 2.0 * (s2.va + bs.ds_dvm.transpose() * mu_conj_dva).real();
    hv.block(0, n, n, n) += 2.0 * (s2.av + bs.ds_dva.transpose() * mu_conj_dvm).real();
    hv.block(n, n, n, n) += 2.0 * (s2.vv + bs.ds_dvm.transpose() * mu_conj_dvm).real();
  }

  const NetworkCase& c_;
  const MatrixXcd& y_;
  const VectorXcd& loads_;
  double cost_scale_;
  OpfLayout lay_;
  BranchSide from_, to_;
  VectorXd smax2_;
  std::vector<int> full_to_x_;
};

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double primal_residual(const VectorXd& g, const VectorXd& h) {
  double r = inf_norm(g);
  if (h.size() > 0) r = std::max(r, h.maxCoeff());
  return r;
}

double complementarity(const VectorXd& mu, const VectorXd& h) {
  return mu.size() == 0 ? 0.0 : mu.cwiseProduct(h).cwiseAbs().maxCoeff();
}

double dual_scale(const VectorXd& lam, const VectorXd& mu) {
  return 1.0 + std::max(inf_norm(lam), inf_norm(mu));
}

OpfSolution unpack(const NetworkCase& c, const OpfLayout& lay, const VectorXd& x) {
  OpfSolution sol;
  sol.v.vm = x.segment(lay.vm_offset(), lay.n);
  sol.v.va = VectorXd::Zero(lay.n);
  for (int i = 0; i < lay.n; ++i)
    if (lay.angle_var[i] >= 0) sol.v.va[i] = x[lay.angle_var[i]];
  sol.pg = x.segment(lay.pg_offset(), lay.ng);
  sol.qg = x.segment(lay.qg_offset(), lay.ng);
  sol.objective = objective(c, sol.pg);
  return sol;
}

}  // namespace

namespace detail {

Eigen::VectorXd lagrangian_gradient(const NetworkCase& c, const Eigen::VectorXcd& loads,
                                    const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                                    const Eigen::VectorXd& mu, double cost_scale) {
  const auto y = build_admittance(c);
  const OpfModel model(c, y.y, loads, cost_scale);
  const auto e = model.evaluate(x);
  return e.df + e.jg.transpose() * lambda + e.jh.transpose() * mu;
}

Eigen::MatrixXd lagrangian_hessian(const NetworkCase& c, const Eigen::VectorXcd& loads,
                                   const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                                   const Eigen::VectorXd& mu, double cost_scale) {
  const auto y = build_admittance(c);
  const OpfModel model(c, y.y, loads, cost_scale);
  return model.hessian(model.evaluate(x), lambda, mu);
}

}  // namespace detail

OpfSolution solve_opf(const NetworkCase& c, const Eigen::VectorXcd& loads, const SolverOptions& opts) {
  return solve_opf(c, build_admittance(c), loads, opts);
}

namespace {

OpfSolution solve_once(const NetworkCase& c, const AdmittanceMatrix& ymat, const Eigen::VectorXcd& loads,
                       const SolverOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const OpfModel model(c, ymat.y, loads, opts.cost_scale);
  const OpfLayout& lay = model.layout();
  const int nx = lay.nx(), neq = lay.neq(), niq = lay.niq();

  VectorXd x = model.initial_point();

  double pmax_total = 0.0, pd_total = 0.0;
  for (const auto& g : c.generators) pmax_total += g.pmax / c.base_mva;
  for (Eigen::Index i = 0; i < loads.size(); ++i) pd_total += loads[i].real();
  if (pmax_total < pd_total) {
    OpfSolution sol = unpack(c, lay, x);
    sol.status = OpfStatus::infeasible;
    sol.solve_time = elapsed();
    return sol;
  }

  Evaluation e = model.evaluate(x);
  VectorXd z = (-e.h).cwiseMax(opts.slack_floor);
  double gamma = opts.initial_mu;
  VectorXd mu = (gamma * z.cwiseInverse()).cwiseMax(1.0);
  VectorXd lam = VectorXd::Zero(neq);

  auto lagrangian_grad = [&](const Evaluation& ev) -> VectorXd {
    return ev.df + ev.jg.transpose() * lam + ev.jh.transpose() * mu;
  };

  VectorXd lx = lagrangian_grad(e);
  double f0 = e.f;
  OpfStatus status = OpfStatus::max_iter;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const MatrixXd lxx = model.hessian(e, lam, mu);
    const VectorXd zinv = z.cwiseInverse();
    const MatrixXd jh_t = e.jh.transpose();
    const MatrixXd m = lxx + jh_t * (mu.cwiseProduct(zinv)).asDiagonal() * e.jh;
    const VectorXd nvec = lx + jh_t * (zinv.cwiseProduct(mu.cwiseProduct(e.h) + VectorXd::Constant(niq, gamma)));

    MatrixXd kkt = MatrixXd::Zero(nx + neq, nx + neq);
    kkt.topLeftCorner(nx, nx) = m;
    kkt.topRightCorner(nx, neq) = e.jg.transpose();
    kkt.bottomLeftCorner(neq, nx) = e.jg;
    VectorXd rhs(nx + neq);
    rhs << -nvec, -e.g;
    const VectorXd step = Eigen::PartialPivLU<MatrixXd>(kkt).solve(rhs);
    if (!step.allFinite()) {
      status = OpfStatus::numerical_failure;
      break;
    }
    const VectorXd dx = step.head(nx);
    const VectorXd dlam = step.tail(neq);
    const VectorXd dz = -e.h - z - e.jh * dx;
    const VectorXd dmu = -mu + zinv.cwiseProduct(VectorXd::Constant(niq, gamma) - mu.cwiseProduct(dz));

    double alpha_p = 1.0, alpha_d = 1.0;
    for (int i = 0; i < niq; ++i) {
      if (dz[i] < 0.0) alpha_p = std::min(alpha_p, opts.step_safety * z[i] / -dz[i]);
      if (dmu[i] < 0.0) alpha_d = std::min(alpha_d, opts.step_safety * mu[i] / -dmu[i]);
    }
    x += alpha_p * dx;
    z += alpha_p * dz;
    lam += alpha_d * dlam;
    mu += alpha_d * dmu;
    if (niq > 0) gamma = opts.sigma * z.dot(mu) / niq;

    e = model.evaluate(x);
    lx = lagrangian_grad(e);
    const double feas = primal_residual(e.g, e.h);
    const double grad = inf_norm(lx) / dual_scale(lam, mu);
    const double comp = std::max(complementarity(mu, e.h), niq > 0 ? z.cwiseProduct(mu).maxCoeff() : 0.0);
    const double cost = std::abs(e.f - f0) / (1.0 + std::abs(f0));
    if (feas < opts.tol && grad < opts.tol && comp < opts.tol && cost < opts.tol) {
      status = OpfStatus::optimal;
      ++it;
      break;
    }
    const double eps = std::numeric_limits<double>::epsilon();
    if (!x.allFinite() || alpha_p < 1e-8 || alpha_d < 1e-8 || gamma < eps || gamma > 1.0 / eps) {
      status = feas > 1e-3 ? OpfStatus::infeasible : OpfStatus::numerical_failure;
      ++it;
      break;
    }
    f0 = e.f;
  }

  OpfSolution sol = unpack(c, lay, x);
  sol.status = status;
  sol.iterations = it;
  sol.lambda = lam;
  sol.mu = mu;
  sol.v.converged = status == OpfStatus::optimal;
  sol.v.iterations = it;
  sol.v.max_mismatch = inf_norm(e.g.head(2 * lay.n));
  sol.solve_time = elapsed();
  return sol;
}

}  // namespace

OpfSolution solve_opf(const NetworkCase& c, const AdmittanceMatrix& ymat, const Eigen::VectorXcd& loads,
                      const SolverOptions& opts) {
  opts.validate();
  if (loads.size() != c.num_buses() || ymat.dim() != c.num_buses())
    throw Error(ErrorCode::DimensionMismatch, "OPF loads/admittance do not match bus count");
  SolverOptions o = opts;
  OpfSolution sol = solve_once(c, ymat, loads, o);
  int iterations = sol.iterations;
  double time = sol.solve_time;
  for (int r = 0; r < opts.restarts && sol.status != OpfStatus::optimal; ++r) {
    o.slack_floor /= 10.0;
    sol = solve_once(c, ymat, loads, o);
    iterations += sol.iterations;
    time += sol.solve_time;
  }
  sol.iterations = iterations;
  sol.solve_time = time;
  return sol;
}

namespace {

// Constraint values from the network data alone, independent of the solver's
// derivative code.
struct RecomputedConstraints {
  VectorXd g;
  VectorXd h;
};

RecomputedConstraints recompute_constraints(const NetworkCase& c, const AdmittanceMatrix& y,
                                            const OpfLayout& lay, const Eigen::VectorXcd& loads,
                                            const VectorXd& x) {
  const OpfSolution s = unpack(c, lay, x);
  const VectorXcd inj = complex_injections(y, s.v);
  RecomputedConstraints r{VectorXd::Zero(lay.neq()), VectorXd::Zero(lay.niq())};
  Eigen::VectorXcd net = inj + loads;
  for (int g = 0; g < lay.ng; ++g) net[c.generators[g].bus] -= Complex(s.pg[g], s.qg[g]);
  for (int i = 0; i < lay.n; ++i) {
    r.g[i] = net[i].real();
    r.g[lay.n + i] = net[i].imag();
  }
  for (std::size_t k = 0; k < lay.fixed_vars.size(); ++k)
    r.g[2 * lay.n + k] = x[lay.fixed_vars[k]] - lay.fixed_values[k];
  const auto flows = branch_flows(c, s.v);
  const int nl = static_cast<int>(lay.limited_branches.size());
  for (int k = 0; k < nl; ++k) {
    const int l = lay.limited_branches[k];
    const double smax = c.branches[l].smax / c.base_mva;
    r.h[k] = std::norm(flows.s_from[l]) - smax * smax;
    r.h[nl + k] = std::norm(flows.s_to[l]) - smax * smax;
  }
  for (std::size_t k = 0; k < lay.bounds.size(); ++k) {
    const auto& bd = lay.bounds[k];
    r.h[2 * nl + k] = bd.upper ? x[bd.var] - bd.value : bd.value - x[bd.var];
  }
  return r;
}

}  // namespace

KktResiduals kkt_residuals(const NetworkCase& c, const Eigen::VectorXcd& loads, const OpfSolution& sol,
                           const SolverOptions& opts) {
  const OpfLayout lay = make_opf_layout(c);
  if (sol.lambda.size() != lay.neq() || sol.mu.size() != lay.niq() || sol.pg.size() != lay.ng ||
      sol.v.vm.size() != lay.n) {
    throw Error(ErrorCode::DimensionMismatch, "solution does not carry multipliers for this case");
  }
  const AdmittanceMatrix y = build_admittance(c);
  VectorXd x(lay.nx());
  for (int j = 0; j < lay.n - 1; ++j) x[j] = sol.v.va[lay.angle_bus[j]];
  x.segment(lay.vm_offset(), lay.n) = sol.v.vm;
  x.segment(lay.pg_offset(), lay.ng) = sol.pg;
  x.segment(lay.qg_offset(), lay.ng) = sol.qg;

  auto lagrangian = [&](const VectorXd& xx) {
    const auto r = recompute_constraints(c, y, lay, loads, xx);
    return opts.cost_scale * objective(c, xx.segment(lay.pg_offset(), lay.ng)) + sol.lambda.dot(r.g) +
           sol.mu.dot(r.h);
  };

  const auto at = recompute_constraints(c, y, lay, loads, x);
  KktResiduals res;
  res.primal = primal_residual(at.g, at.h);
  res.complementarity = complementarity(sol.mu, at.h);

  const double step = 1e-5;
  VectorXd grad(lay.nx());
  VectorXd xp = x;
  for (int j = 0; j < lay.nx(); ++j) {
    auto eval_at = [&](double delta) {
      xp[j] = x[j] + delta;
      return lagrangian(xp);
    };
    const double f2p = eval_at(2 * step), f1p = eval_at(step), f1m = eval_at(-step), f2m = eval_at(-2 * step);
    xp[j] = x[j];
    grad[j] = (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * step);
  }
  res.dual = inf_norm(grad) / dual_scale(sol.lambda, sol.mu);
  return res;
}

}  // namespace uopf
