#pragma once

#include <string_view>

namespace prefrobust::dro {

enum class Divergence { chi_squared, kl };

/// Divergence ball around the observed preference probability q.
struct AmbiguitySet {
  Divergence divergence = Divergence::chi_squared;
  double rho = 0.1;

  void validate() const;
};

/// Which way the adversary moves the preference probability.
enum class Direction { toward_one, toward_zero, none };

struct WorstCaseResult {
  double p_hat = 0.0;
  bool clipped = false;
  Direction direction = Direction::none;
};

inline constexpr double kDefaultKlTolerance = 1e-10;

/// Adversarial side for losses (l1, lm1). Ties and rho == 0 give Direction::none.
Direction adversarial_direction(double rho, double l1, double lm1);

/// Closed-form maximiser of p*l1 + (1-p)*lm1 over (p-q)^2 <= rho*q*(1-q), p in [0,1].
WorstCaseResult worst_case_chi2(double q, double rho, double l1, double lm1);

/// Same problem under a Bernoulli KL ball, solved by bisection on KL(p||q) = rho.
WorstCaseResult worst_case_kl(double q, double rho, double l1, double lm1, double tol = kDefaultKlTolerance);

/// Dispatch on the ambiguity set's divergence.
WorstCaseResult worst_case(double q, const AmbiguitySet& set, double l1, double lm1);

/// Bernoulli KL divergence KL(p || q), with 0 log 0 = 0.
double bernoulli_kl(double p, double q);

/// Label smoothing for a hard label c in {1, -1}: 1 - eps for c = 1, eps for c = -1.
double smooth_binary_label(int c, double eps);

/// Uncertainty-weighted coefficient: min{1-q, sqrt(rho q (1-q))} toward one,
/// min{q, sqrt(rho q (1-q))} toward zero, 0 for Direction::none.
double regularizer_coefficient(double q, double rho, Direction direction);

std::string_view to_string(Divergence d);
std::string_view to_string(Direction d);
Divergence parse_divergence(std::string_view name);

}  // namespace prefrobust::dro
