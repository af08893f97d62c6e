#include "prefrobust/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefrobust/error.hpp"

namespace prefrobust::loss {
namespace {

constexpr double kIdentityTolerance = 1e-12;

void check_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InputError("beta must be finite and > 0");
}

void check_label(int c) {
  if (c != 1 && c != -1) throw InputError("label must be 1 or -1");
}

void axpy(double a, const Vector& x, Vector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double per_sample_loss(double delta, double beta, int c) {
  check_beta(beta);
  check_label(c);
  return softplus(-static_cast<double>(c) * beta * delta);
}

Vector per_sample_gradient(const policy::MarginRecord& margin, double beta, int c) {
  check_beta(beta);
  check_label(c);
  const double cb = static_cast<double>(c) * beta;
  const double scale = -sigmoid(-cb * margin.delta) * cb;
  Vector g(margin.grad_delta.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * margin.grad_delta[i];
  return g;
}

double dpo_soft_loss(double l1, double lm1, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("dpo_soft_loss: q must lie in [0,1]");
  return q * l1 + (1.0 - q) * lm1;
}

LossBreakdown dro_loss(double l1, double lm1, double q, const dro::AmbiguitySet& ambiguity) {
  ambiguity.validate();
  const dro::WorstCaseResult wc = dro::worst_case(q, ambiguity, l1, lm1);

  LossBreakdown out;
  out.l1 = l1;
  out.lm1 = lm1;
  out.p_hat = wc.p_hat;
  out.direction = wc.direction;
  out.clipped = wc.clipped;
  out.dpo = dpo_soft_loss(l1, lm1, q);
  out.dro = wc.p_hat * l1 + (1.0 - wc.p_hat) * lm1;

  // Regularised form: the adversary's shift times the loss gap.
  double coefficient = 0.0;
  if (ambiguity.divergence == dro::Divergence::chi_squared) {
    coefficient = dro::regularizer_coefficient(q, ambiguity.rho, wc.direction);
  } else {
    coefficient = std::abs(wc.p_hat - q);
  }
  out.reg_term = coefficient * std::abs(l1 - lm1);

  const double regularized = out.dpo + out.reg_term;
  if (std::abs(regularized - out.dro) > kIdentityTolerance * std::max(1.0, std::abs(out.dro))) {
    throw NumericError("DRO loss " + std::to_string(out.dro) + " disagrees with regularised DPO " +
                       std::to_string(regularized));
  }
  return out;
}

LossBreakdown dro_loss_at(double delta, double beta, double q, const dro::AmbiguitySet& ambiguity) {
  return dro_loss(per_sample_loss(delta, beta, 1), per_sample_loss(delta, beta, -1), q, ambiguity);
}

Vector dro_gradient(const policy::MarginRecord& margin, double q, const dro::AmbiguitySet& ambiguity, double beta) {
  check_beta(beta);
  const double l1 = per_sample_loss(margin.delta, beta, 1);
  const double lm1 = per_sample_loss(margin.delta, beta, -1);
  const double p_hat = dro::worst_case(q, ambiguity, l1, lm1).p_hat;

  // grad l_c = -sigma(-c beta delta) c beta grad_delta; combine the two scalars first.
  const double s1 = -sigmoid(-beta * margin.delta) * beta;
  const double sm1 = sigmoid(beta * margin.delta) * beta;
  const double scale = p_hat * s1 + (1.0 - p_hat) * sm1;
  Vector g(margin.grad_delta.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * margin.grad_delta[i];
  return g;
}

Vector dro_gradient(const policy::PreferencePolicy& policy, std::string_view prompt, std::string_view response_1,
                    std::string_view response_2, double q, const dro::AmbiguitySet& ambiguity, double beta) {
  return dro_gradient(policy.margin(prompt, response_1, response_2), q, ambiguity, beta);
}

double rdpo_loss(double l_c, double l_negc, double eps) {
  if (!(eps >= 0.0 && eps < 0.5)) throw InputError("rDPO flip rate eps must lie in [0, 0.5)");
  return ((1.0 - eps) * l_c - eps * l_negc) / (1.0 - 2.0 * eps);
}

Vector rdpo_gradient(const policy::MarginRecord& margin, double beta, int c, double eps) {
  if (!(eps >= 0.0 && eps < 0.5)) throw InputError("rDPO flip rate eps must lie in [0, 0.5)");
  Vector g(margin.grad_delta.size(), 0.0);
  const double denom = 1.0 - 2.0 * eps;
  axpy((1.0 - eps) / denom, per_sample_gradient(margin, beta, c), g);
  axpy(-eps / denom, per_sample_gradient(margin, beta, -c), g);
  return g;
}

double drdpo_objective(std::span<const double> losses, double beta_prime) {
  if (losses.empty()) throw InputError("drdpo_objective: empty loss list");
  if (!(beta_prime > 0.0)) throw InputError("drdpo_objective: beta' must be > 0");
  const double m = *std::max_element(losses.begin(), losses.end());
  std::vector<double> terms(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) terms[i] = std::exp((losses[i] - m) / beta_prime);
  const double mean = pairwise_sum(terms) / static_cast<double>(losses.size());
  return m + beta_prime * std::log(mean);
}

std::vector<double> drdpo_weights(std::span<const double> losses, double beta_prime) {
  if (losses.empty()) throw InputError("drdpo_weights: empty loss list");
  if (!(beta_prime > 0.0)) throw InputError("drdpo_weights: beta' must be > 0");
  const double m = *std::max_element(losses.begin(), losses.end());
  std::vector<double> w(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) w[i] = std::exp((losses[i] - m) / beta_prime);
  const double total = pairwise_sum(w);
  for (double& v : w) v /= total;
  return w;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace prefrobust::loss
