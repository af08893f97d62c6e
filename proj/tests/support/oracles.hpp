#pragma once

// Reference implementations used only by tests. They share no code with the library:
// grid searches, long-double arithmetic and brute-force enumeration.

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace prefrobust::testing {

/// Best grid point p = k*step of p*l1 + (1-p)*lm1 subject to (p-q)^2 <= rho q (1-q).
/// Coarse scan at 1000*step, then a fine scan at `step` around the coarse winner.
struct GridOptimum {
  double p = 0.0;
  double value = 0.0;
};
GridOptimum grid_worst_case_chi2(double q, double rho, double l1, double lm1, double step = 1e-6);

/// Root of Bernoulli KL(p||q) = rho on the requested side of q, by long-double bisection.
double kl_boundary(double q, double rho, bool toward_one);

/// log(1 + e^x) in long double, evaluated directly.
long double softplus_ld(long double x);

/// Two-state MDP with subsidy on the passive action, solved by long-double value iteration.
/// Returns {Q(s,0), Q(s,1)} for both states.
using Transitions = std::array<std::array<std::array<double, 2>, 2>, 2>;
std::array<std::array<long double, 2>, 2> subsidized_q_ld(const Transitions& t, std::array<double, 2> reward,
                                                          double discount, long double lambda);

/// Smallest lambda on a grid of `step` with Q(s,0) - Q(s,1) >= 0, scanning [lo, hi].
/// Coarse scan at 100*step first, then refinement at `step`.
double whittle_grid(const Transitions& t, std::array<double, 2> reward, double discount, int state, double lo,
                    double hi, double step = 1e-4);

/// Central finite difference of f at x along every coordinate.
std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                      double h);

/// Relative error |a-b| / max(|a|, |b|, floor).
double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8);

}  // namespace prefrobust::testing
