#include "prefrobust/dro.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefrobust/error.hpp"

namespace prefrobust::dro {
namespace {

constexpr double kOpenEndpoint = 1e-15;

void check_probability(double q, const char* what) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw InputError(std::string(what) + " must lie in [0, 1], got " + std::to_string(q));
  }
}

void check_radius(double rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw InputError("ambiguity radius rho must be finite and >= 0, got " + std::to_string(rho));
  }
}

void check_losses(double l1, double lm1) {
  if (!std::isfinite(l1) || !std::isfinite(lm1)) {
    throw NumericError("per-sample losses must be finite");
  }
}

double xlogy_ratio(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(x / y); }

}  // namespace

void AmbiguitySet::validate() const { check_radius(rho); }

Direction adversarial_direction(double rho, double l1, double lm1) {
  if (rho == 0.0 || l1 == lm1) return Direction::none;
  return l1 > lm1 ? Direction::toward_one : Direction::toward_zero;
}

WorstCaseResult worst_case_chi2(double q, double rho, double l1, double lm1) {
  check_probability(q, "preference probability q");
  check_radius(rho);
  check_losses(l1, lm1);

  const Direction dir = adversarial_direction(rho, l1, lm1);
  if (dir == Direction::none) return {q, false, dir};

  const double radius = std::sqrt(rho * q * (1.0 - q));
  if (dir == Direction::toward_one) {
    const double p = q + radius;
    return p > 1.0 ? WorstCaseResult{1.0, true, dir} : WorstCaseResult{p, false, dir};
  }
  const double p = q - radius;
  return p < 0.0 ? WorstCaseResult{0.0, true, dir} : WorstCaseResult{p, false, dir};
}

double bernoulli_kl(double p, double q) { return xlogy_ratio(p, q) + xlogy_ratio(1.0 - p, 1.0 - q); }

WorstCaseResult worst_case_kl(double q, double rho, double l1, double lm1, double tol) {
  check_probability(q, "preference probability q");
  check_radius(rho);
  check_losses(l1, lm1);
  if (!(tol > 0.0)) throw InputError("KL bisection tolerance must be > 0");

  const Direction dir = adversarial_direction(rho, l1, lm1);
  if (dir == Direction::none) return {q, false, dir};
  // The ball around a point mass is the point itself.
  if (q == 0.0 || q == 1.0) return {q, false, dir};

  const bool up = dir == Direction::toward_one;
  const double boundary = up ? 1.0 : 0.0;
  if (bernoulli_kl(boundary, q) <= rho) return {boundary, true, dir};

  // KL(p||q) is increasing in |p - q|; keep `inside` feasible and `outside` infeasible.
  double inside = q;
  double outside = up ? 1.0 - kOpenEndpoint : kOpenEndpoint;
  for (int i = 0; i < 200 && std::abs(outside - inside) > tol; ++i) {
    const double mid = 0.5 * (inside + outside);
    if (bernoulli_kl(mid, q) <= rho) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  return {inside, false, dir};
}

WorstCaseResult worst_case(double q, const AmbiguitySet& set, double l1, double lm1) {
  switch (set.divergence) {
    case Divergence::chi_squared:
      return worst_case_chi2(q, set.rho, l1, lm1);
    case Divergence::kl:
      return worst_case_kl(q, set.rho, l1, lm1);
  }
  throw InputError("unknown divergence");
}

double smooth_binary_label(int c, double eps) {
  if (c != 1 && c != -1) throw InputError("binary label must be 1 or -1");
  if (!(eps >= 0.0 && eps < 0.5)) throw InputError("smoothing eps must lie in [0, 0.5)");
  return c == 1 ? 1.0 - eps : eps;
}

double regularizer_coefficient(double q, double rho, Direction direction) {
  check_probability(q, "preference probability q");
  check_radius(rho);
  const double radius = std::sqrt(rho * q * (1.0 - q));
  switch (direction) {
    case Direction::toward_one:
      return std::min(1.0 - q, radius);
    case Direction::toward_zero:
      return std::min(q, radius);
    case Direction::none:
      return 0.0;
  }
  return 0.0;
}

std::string_view to_string(Divergence d) { return d == Divergence::kl ? "kl" : "chi2"; }

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::toward_one:
      return "toward-1";
    case Direction::toward_zero:
      return "toward-0";
    case Direction::none:
      break;
  }
  return "none";
}

Divergence parse_divergence(std::string_view name) {
  if (name == "chi2" || name == "chi-squared") return Divergence::chi_squared;
  if (name == "kl") return Divergence::kl;
  throw InputError("unknown divergence '" + std::string(name) + "' (expected chi2 or kl)");
}

}  // namespace prefrobust::dro
