#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace prefrobust::testing {

GridOptimum grid_worst_case_chi2(double q, double rho, double l1, double lm1, double step) {
  const long double radius2 = static_cast<long double>(rho) * q * (1.0L - q);
  auto feasible = [&](long double p) { return (p - q) * (p - q) <= radius2 * (1.0L + 1e-15L) + 1e-300L; };
  auto value = [&](long double p) { return p * l1 + (1.0L - p) * lm1; };

  const long long n_fine = std::llround(1.0 / step);
  const long long coarse = 1000;
  long long best_k = -1;
  long double best_v = 0;
  auto visit = [&](long long k) {
    const long double p = static_cast<long double>(k) / n_fine;
    if (!feasible(p)) return;
    const long double v = value(p);
    if (best_k < 0 || v > best_v) {
      best_k = k;
      best_v = v;
    }
  };
  for (long long k = 0; k <= n_fine; k += coarse) visit(k);
  // The feasible set may be narrower than the coarse spacing: include the grid points
  // nearest to q as seeds.
  const long long kq = std::llround(q * n_fine);
  for (long long k = std::max(0LL, kq - 1); k <= std::min(n_fine, kq + 1); ++k) visit(k);
  const long long centre = best_k;
  for (long long k = std::max(0LL, centre - 2 * coarse); k <= std::min(n_fine, centre + 2 * coarse); ++k) visit(k);
  // Walk outward while the objective improves, in case the optimum lies further out.
  for (int dir : {-1, 1}) {
    long long k = best_k;
    while (k + dir >= 0 && k + dir <= n_fine) {
      const long double p = static_cast<long double>(k + dir) / n_fine;
      if (!feasible(p) || value(p) < best_v) break;
      k += dir;
      best_k = k;
      best_v = value(p);
    }
  }
  return {static_cast<double>(static_cast<long double>(best_k) / n_fine), static_cast<double>(best_v)};
}

double kl_boundary(double q, double rho, bool toward_one) {
  auto kl = [&](long double p) {
    long double v = 0;
    if (p > 0) v += p * std::log(p / q);
    if (p < 1) v += (1 - p) * std::log((1 - p) / (1 - q));
    return v;
  };
  long double inside = q;
  long double outside = toward_one ? 1.0L : 0.0L;
  if (kl(outside) <= rho) return static_cast<double>(outside);
  for (int i = 0; i < 200; ++i) {
    const long double mid = 0.5L * (inside + outside);
    if (kl(mid) <= rho) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  return static_cast<double>(inside);
}

long double softplus_ld(long double x) { return std::log1p(std::exp(x)); }

std::array<std::array<long double, 2>, 2> subsidized_q_ld(const Transitions& t, std::array<double, 2> reward,
                                                          double discount, long double lambda) {
  std::array<long double, 2> v{0, 0};
  std::array<std::array<long double, 2>, 2> q{};
  for (int it = 0; it < 1000000; ++it) {
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) {
        q[s][a] = reward[s] + (a == 0 ? lambda : 0.0L) + discount * (t[s][a][0] * v[0] + t[s][a][1] * v[1]);
      }
    }
    long double change = 0;
    for (int s = 0; s < 2; ++s) {
      const long double nv = std::max(q[s][0], q[s][1]);
      change = std::max(change, std::fabs(nv - v[s]));
      v[s] = nv;
    }
    if (change < 1e-13L) break;
  }
  return q;
}

double whittle_grid(const Transitions& t, std::array<double, 2> reward, double discount, int state, double lo,
                    double hi, double step) {
  auto gap = [&](double lambda) {
    const auto q = subsidized_q_ld(t, reward, discount, lambda);
    return q[state][0] - q[state][1];
  };
  const double coarse = 100 * step;
  double x = lo;
  while (x <= hi && gap(x) < 0) x += coarse;
  double start = std::max(lo, x - coarse);
  const long long n = std::llround((std::min(x, hi) - start) / step);
  for (long long k = 0; k <= n; ++k) {
    const double lambda = start + static_cast<double>(k) * step;
    if (gap(lambda) >= 0) return lambda;
  }
  return x;
}

std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                      double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  double diff = 0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::fabs(a[i] - b[i]));
    scale = std::max({scale, std::fabs(a[i]), std::fabs(b[i])});
  }
  return diff / scale;
}

}  // namespace prefrobust::testing
