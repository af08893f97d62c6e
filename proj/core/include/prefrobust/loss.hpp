#pragma once

#include <span>
#include <vector>

#include "prefrobust/dro.hpp"
#include "prefrobust/policy.hpp"

namespace prefrobust::loss {

using policy::Vector;

/// log(1 + e^x) without overflow.
double softplus(double x);
double sigmoid(double x);

/// -log sigma(c * beta * delta), i.e. softplus(-c * beta * delta), for c in {1, -1}.
double per_sample_loss(double delta, double beta, int c);

/// Gradient of per_sample_loss w.r.t. theta: -sigma(-c beta delta) * c * beta * grad_delta.
Vector per_sample_gradient(const policy::MarginRecord& margin, double beta, int c);

/// q * l1 + (1 - q) * lm1.
double dpo_soft_loss(double l1, double lm1, double q);

struct LossBreakdown {
  double l1 = 0.0;
  double lm1 = 0.0;
  double dpo = 0.0;       // soft-label DPO loss at q
  double dro = 0.0;       // worst case over the ambiguity set
  double reg_term = 0.0;  // dro - dpo, from the coefficient form
  double p_hat = 0.0;
  dro::Direction direction = dro::Direction::none;
  bool clipped = false;
};

/// Worst-case expected loss p_hat*l1 + (1-p_hat)*lm1, computed alongside the regularised
/// form dpo + coefficient*|l1 - lm1|. Throws NumericError if the two disagree by more
/// than 1e-12 (relative to max(1, |dro|)).
LossBreakdown dro_loss(double l1, double lm1, double q, const dro::AmbiguitySet& ambiguity);

/// dro_loss at the per-sample losses implied by a margin.
LossBreakdown dro_loss_at(double delta, double beta, double q, const dro::AmbiguitySet& ambiguity);

/// p_hat * grad l1 + (1 - p_hat) * grad lm1 with p_hat held at the inner maximiser.
Vector dro_gradient(const policy::MarginRecord& margin, double q, const dro::AmbiguitySet& ambiguity, double beta);

Vector dro_gradient(const policy::PreferencePolicy& policy, std::string_view prompt, std::string_view response_1,
                    std::string_view response_2, double q, const dro::AmbiguitySet& ambiguity, double beta);

/// Label-flip corrected loss ((1-eps) l_c - eps l_negc) / (1 - 2 eps); eps in [0, 0.5).
double rdpo_loss(double l_c, double l_negc, double eps);
Vector rdpo_gradient(const policy::MarginRecord& margin, double beta, int c, double eps);

/// beta' * log(mean(exp(l_i / beta'))), evaluated with the max subtracted.
double drdpo_objective(std::span<const double> losses, double beta_prime);

/// d objective / d l_i = softmax(l / beta')_i.
std::vector<double> drdpo_weights(std::span<const double> losses, double beta_prime);

/// Pairwise summation in index order; the result is independent of thread count.
double pairwise_sum(std::span<const double> values);

}  // namespace prefrobust::loss
