#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "uopf/grid.hpp"

namespace uopf::test {

// Brute-force optimum of the two-bus OPF (slack gen at bus 1, load at bus 2).
// Scans vm2 at 1e-3, solves the bus-2 balance for (vm1, va2) by a va2 scan
// plus bisection, then refines the best vm2 on a 1e-6 grid.
inline double two_bus_brute_force(const NetworkCase& c) {
  const auto& br = c.branches[0];
  const double den = br.r * br.r + br.x * br.x;
  const double g = br.r / den, b = -br.x / den;  // series admittance g + jb
  const double p2 = -c.buses[1].pd / c.base_mva, q2 = -c.buses[1].qd / c.base_mva;
  const auto& gen = c.generators[0];
  const double lo = c.buses[0].vmin, hi = c.buses[0].vmax;

  // bus-2 P balance is linear in vm1 for fixed (vm2, va2)
  auto vm1_of = [&](double vm2, double th) {
    // P2 = vm2^2 g + vm2 vm1 (-g cos(th) - b sin(th)), th = va2 - va1
    const double k = vm2 * (-g * std::cos(th) - b * std::sin(th));
    return (p2 - vm2 * vm2 * g) / k;
  };
  auto q2_residual = [&](double vm2, double th) {
    const double vm1 = vm1_of(vm2, th);
    // Q2 = -vm2^2 b + vm2 vm1 (-g sin(th) + b cos(th))
    return -vm2 * vm2 * b + vm2 * vm1 * (-g * std::sin(th) + b * std::cos(th)) - q2;
  };
  auto cost_at = [&](double vm2) {
    double best = std::numeric_limits<double>::infinity();
    const double step = 1e-3;
    for (double th = -0.5; th < 0.5; th += step) {
      double a = th, z = th + step;
      double ra = q2_residual(vm2, a), rz = q2_residual(vm2, z);
      if (!(ra * rz <= 0.0)) continue;
      for (int it = 0; it < 80; ++it) {
        const double m = 0.5 * (a + z);
        const double rm = q2_residual(vm2, m);
        if (ra * rm <= 0.0) {
          z = m;
        } else {
          a = m;
          ra = rm;
        }
      }
      const double t2 = 0.5 * (a + z);
      const double vm1 = vm1_of(vm2, t2);
      if (vm1 < lo || vm1 > hi) continue;
      // P1 = vm1^2 g + vm1 vm2 (-g cos(-t2) - b sin(-t2))
      const double p1 = vm1 * vm1 * g + vm1 * vm2 * (-g * std::cos(t2) + b * std::sin(t2));
      const double q1 = -vm1 * vm1 * b + vm1 * vm2 * (g * std::sin(t2) + b * std::cos(t2));
      const double pmw = p1 * c.base_mva;
      if (pmw < gen.pmin || pmw > gen.pmax || q1 * c.base_mva < gen.qmin || q1 * c.base_mva > gen.qmax) continue;
      best = std::min(best, gen.cost.c2 * pmw * pmw + gen.cost.c1 * pmw + gen.cost.c0);
    }
    return best;
  };
  double best = std::numeric_limits<double>::infinity(), best_vm2 = 1.0;
  for (double vm2 = c.buses[1].vmin; vm2 <= c.buses[1].vmax + 1e-12; vm2 += 1e-3) {
    const double cost = cost_at(vm2);
    if (cost < best) {
      best = cost;
      best_vm2 = vm2;
    }
  }
  for (double vm2 = std::max(c.buses[1].vmin, best_vm2 - 1e-3);
       vm2 <= std::min(c.buses[1].vmax, best_vm2 + 1e-3); vm2 += 1e-6)
    best = std::min(best, cost_at(vm2));
  return best;
}

}  // namespace uopf::test
