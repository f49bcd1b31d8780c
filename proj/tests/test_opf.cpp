#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "opf_oracle.hpp"
#include "test_util.hpp"
#include "uopf/error.hpp"
#include "uopf/opf.hpp"

using namespace uopf;
using uopf::test::load;
using uopf::test::two_bus_brute_force;
using uopf::test::two_bus_case;

namespace {

NetworkCase lossy_two_bus() { return two_bus_case(0.02, 0.1, 50, 10); }

}  // namespace

TEST(Objective, HandValues) {
  auto c = two_bus_case(0, 0.1, 0, 0);
  c.generators[0].cost = {0.01, 40, 0};
  EXPECT_DOUBLE_EQ(objective(c, Eigen::VectorXd::Constant(1, 1.0)), 4100.0);
  c.generators[0].cost = {0.0, 30, 7};
  EXPECT_DOUBLE_EQ(objective(c, Eigen::VectorXd::Zero(1)), 7.0);
  const double one = objective(c, Eigen::VectorXd::Constant(1, 0.4)) - 7.0;
  const double two = objective(c, Eigen::VectorXd::Constant(1, 0.8)) - 7.0;
  EXPECT_NEAR(two, 2.0 * one, 1e-9);
}

TEST(SolveOpf, SingleBus) {
  NetworkCase c = two_bus_case(0, 0.1, 0, 0);
  c.buses.pop_back();
  c.branches.clear();
  c.slot_order = {0};
  c.buses[0].pd = 80;
  c.buses[0].qd = 20;
  const auto sol = solve_opf(c, base_loads(c));
  ASSERT_EQ(sol.status, OpfStatus::optimal);
  EXPECT_NEAR(sol.pg[0], 0.8, 1e-6);
  EXPECT_NEAR(sol.qg[0], 0.2, 1e-6);
  EXPECT_NEAR(sol.objective, objective(c, Eigen::VectorXd::Constant(1, 0.8)), 1e-3);
}

TEST(SolveOpf, TwoBusMatchesBruteForce) {
  const auto c = lossy_two_bus();
  const auto sol = solve_opf(c, base_loads(c));
  ASSERT_EQ(sol.status, OpfStatus::optimal);
  const double brute = two_bus_brute_force(c);
  EXPECT_LT(std::abs(sol.objective - brute) / brute, 1e-3) << sol.objective << " vs " << brute;
  const auto kkt = kkt_residuals(c, base_loads(c), sol);
  EXPECT_LT(kkt.complementarity, 1e-6);
}

TEST(SolveOpf, InsufficientCapacityIsInfeasible) {
  auto c = lossy_two_bus();
  c.buses[1].pd = 400;
  const auto sol = solve_opf(c, base_loads(c));
  EXPECT_EQ(sol.status, OpfStatus::infeasible);
}

TEST(SolveOpf, IeeeBaseCasesOptimal) {
  // reference objectives from PYPOWER's MIPS on the same data
  const std::vector<std::pair<const char*, double>> cases = {
      {"case9", 5296.686523629813},
      {"case14", 8081.526392989471},
      {"case30", 576.8923361980285},
      {"case57", 41737.78549031871},
  };
  for (const auto& [name, reference] : cases) {
    const auto c = load(name);
    const auto loads = base_loads(c);
    const auto sol = solve_opf(c, loads);
    ASSERT_EQ(sol.status, OpfStatus::optimal) << name;
    EXPECT_LE(sol.iterations, 50) << name;
    EXPECT_NEAR(sol.objective, reference, 1e-4 * reference) << name;
    const auto kkt = kkt_residuals(c, loads, sol);
    EXPECT_LT(kkt.primal, 1e-6) << name;
    EXPECT_LT(kkt.dual, 1e-6) << name;
    EXPECT_LT(kkt.complementarity, 1e-6) << name;
    EXPECT_TRUE(evaluate_constraints(c, sol.v, sol.pg, sol.qg, 1e-6).all_satisfied()) << name;
  }
}

TEST(SolveOpf, PerturbedDispatchBreaksPrimal) {
  const auto c = load("case9");
  const auto loads = base_loads(c);
  auto sol = solve_opf(c, loads);
  sol.pg[1] += 0.1;
  const auto kkt = kkt_residuals(c, loads, sol);
  EXPECT_GE(kkt.primal, 0.1 - 1e-9);
}

TEST(SolveOpf, Deterministic) {
  const auto c = load("case14");
  const auto a = solve_opf(c, base_loads(c));
  const auto b = solve_opf(c, base_loads(c));
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_TRUE(a.v.vm == b.v.vm);
  EXPECT_TRUE(a.v.va == b.v.va);
  EXPECT_TRUE(a.pg == b.pg);
  EXPECT_TRUE(a.qg == b.qg);
  EXPECT_EQ(a.objective, b.objective);
}

TEST(SolveOpf, LighterLoadNeverCostsMore) {
  for (const char* name : {"case9", "case14"}) {
    const auto c = load(name);
    const auto base = solve_opf(c, base_loads(c));
    const auto light = solve_opf(c, Eigen::VectorXcd(0.9 * base_loads(c)));
    ASSERT_EQ(light.status, OpfStatus::optimal);
    EXPECT_LE(light.objective, base.objective) << name;
  }
}

TEST(SolveOpf, InvalidOptions) {
  const auto c = lossy_two_bus();
  SolverOptions opts;
  opts.sigma = 1.5;
  try {
    solve_opf(c, base_loads(c), opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(LagrangianDerivatives, HessianMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  auto c = uopf::test::random_case(rng, 6, true);
  for (auto& br : c.branches) br.smax = 50.0;
  const auto loads = base_loads(c);
  const auto lay = make_opf_layout(c);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd x(lay.nx()), lam(lay.neq()), mu(lay.niq());
  for (int j = 0; j < lay.nx(); ++j) x[j] = 0.1 * u(rng);
  x.segment(lay.vm_offset(), lay.n).array() += 1.0;
  for (int j = 0; j < lay.neq(); ++j) lam[j] = u(rng);
  for (int j = 0; j < lay.niq(); ++j) mu[j] = 1.0 + u(rng);

  const auto hess = detail::lagrangian_hessian(c, loads, x, lam, mu, 1e-3);
  const double h = 1e-6;
  for (int j = 0; j < lay.nx(); ++j) {
    Eigen::VectorXd p = x, m = x;
    p[j] += h;
    m[j] -= h;
    const Eigen::VectorXd fd = (detail::lagrangian_gradient(c, loads, p, lam, mu, 1e-3) -
                                detail::lagrangian_gradient(c, loads, m, lam, mu, 1e-3)) /
                               (2 * h);
    EXPECT_LT((fd - hess.col(j)).cwiseAbs().maxCoeff(), 1e-5 * (1.0 + hess.col(j).cwiseAbs().maxCoeff()))
        << "column " << j;
  }
}
