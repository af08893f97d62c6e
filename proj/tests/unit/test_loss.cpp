#include <doctest.h>

#include <cmath>
#include <memory>

#include "generators.hpp"
#include "oracles.hpp"
#include "prefrobust/error.hpp"
#include "prefrobust/loss.hpp"
#include "prefrobust/policy.hpp"

using namespace prefrobust;

namespace {

struct PairInstance {
  std::shared_ptr<policy::LookupFeaturizer> featurizer;
  policy::Vector theta;
  policy::Vector theta_ref;
};

PairInstance random_pair(testing::Gen& gen, std::size_t dim) {
  auto f = std::make_shared<policy::LookupFeaturizer>(dim);
  f->add("x", "y1", gen.vector(dim, -1, 1));
  f->add("x", "y2", gen.vector(dim, -1, 1));
  return {f, gen.vector(dim, -2, 2), gen.vector(dim, -2, 2)};
}

}  // namespace

TEST_SUITE("loss") {
  TEST_CASE("per-sample loss examples") {
    CHECK(loss::per_sample_loss(0.0, 0.25, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(loss::per_sample_loss(0.0, 0.25, -1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(loss::per_sample_loss(1.0, 1.0, 1) == doctest::Approx(0.31326168751822286).epsilon(1e-15));
    CHECK(loss::per_sample_loss(1.0, 1.0, -1) == doctest::Approx(1.3132616875182228).epsilon(1e-15));
  }

  TEST_CASE("per-sample loss is stable for large margins") {
    CHECK(loss::per_sample_loss(1e4, 1.0, 1) == 0.0);
    CHECK(loss::per_sample_loss(1e4, 1.0, -1) == doctest::Approx(1e4));
    CHECK(std::isfinite(loss::per_sample_loss(-1e300, 1.0, 1)));
    CHECK(loss::per_sample_loss(-40.0, 1.0, 1) == doctest::Approx(40.0).epsilon(1e-15));
    CHECK_THROWS_AS(loss::per_sample_loss(1.0, 0.0, 1), InputError);
    CHECK_THROWS_AS(loss::per_sample_loss(1.0, 1.0, 0), InputError);
  }

  TEST_CASE("soft DPO loss examples") {
    CHECK(loss::dpo_soft_loss(1.3, 0.2, 1.0) == 1.3);
    CHECK(loss::dpo_soft_loss(1.3132617, 0.3132617, 0.5) == doctest::Approx(0.8132617).epsilon(1e-15));
    for (double q : {0.0, 0.3, 1.0}) CHECK(loss::dpo_soft_loss(0.7, 0.7, q) == doctest::Approx(0.7).epsilon(1e-15));
  }

  TEST_CASE("DRO loss examples") {
    const dro::AmbiguitySet zero{dro::Divergence::chi_squared, 0.0};
    const auto r0 = loss::dro_loss(1.3, 0.4, 0.7, zero);
    CHECK(r0.dro == r0.dpo);

    const dro::AmbiguitySet set{dro::Divergence::chi_squared, 0.1};
    const auto r = loss::dro_loss(1.3132617, 0.3132617, 0.5, set);
    CHECK(r.p_hat == doctest::Approx(0.6581138830084189).epsilon(1e-15));
    CHECK(r.dro == doctest::Approx(0.9713755830084190).epsilon(1e-14));
    CHECK(std::abs(r.dro - (r.dpo + r.reg_term)) <= 1e-12);

    for (double rho : {0.0, 0.5, 3.0}) {
      const auto tie = loss::dro_loss(0.9, 0.9, 0.35, {dro::Divergence::chi_squared, rho});
      CHECK(tie.dro == tie.dpo);
    }
  }

  TEST_CASE("loss breakdown invariants") {
    testing::Gen gen(3);
    for (int i = 0; i < 1000; ++i) {
      const double delta = gen.uniform(-10, 10), beta = gen.uniform(0.01, 2);
      const double l1 = loss::per_sample_loss(delta, beta, 1), lm1 = loss::per_sample_loss(delta, beta, -1);
      CHECK(l1 >= 0.0);
      CHECK(lm1 >= 0.0);
      CHECK(l1 + lm1 >= 2 * std::log(2.0) - 1e-15);
      CHECK(l1 - lm1 == doctest::Approx(-beta * delta).epsilon(1e-12));
      CHECK(l1 == doctest::Approx(static_cast<double>(testing::softplus_ld(-beta * static_cast<long double>(delta))))
                      .epsilon(1e-14));
    }
  }

  TEST_CASE("property: regularised identity on random draws, both branches") {
    testing::Gen gen(99);
    int up = 0, down = 0;
    for (int i = 0; i < 10000; ++i) {
      const double q = gen.soft_score(), rho = gen.uniform(0, 4);
      const double delta = gen.uniform(-8, 8), beta = gen.uniform(0.05, 2);
      const auto r = loss::dro_loss_at(delta, beta, q, {dro::Divergence::chi_squared, rho});
      CHECK(std::abs(r.dro - (r.dpo + r.reg_term)) <= 1e-12);
      CHECK(r.dro >= r.dpo - 1e-15);
      if (r.l1 >= r.lm1)
        ++up;
      else
        ++down;
    }
    CHECK(up > 1000);
    CHECK(down > 1000);
  }

  TEST_CASE("DRO loss equals DPO only when rho = 0, tie or vanishing coefficient") {
    testing::Gen gen(5);
    for (int i = 0; i < 2000; ++i) {
      const double q = gen.uniform(0.01, 0.99), rho = gen.uniform(0.01, 4);
      const double delta = gen.uniform(0.1, 5) * (gen.coin() ? 1 : -1);
      const auto r = loss::dro_loss_at(delta, 0.5, q, {dro::Divergence::chi_squared, rho});
      CHECK(r.dro > r.dpo);
    }
    CHECK(loss::dro_loss_at(1.0, 0.5, 1.0, {dro::Divergence::chi_squared, 2.0}).reg_term == 0.0);
    CHECK(loss::dro_loss_at(1.0, 0.5, 0.0, {dro::Divergence::chi_squared, 2.0}).reg_term == 0.0);
  }

  TEST_CASE("KL ambiguity also satisfies the identity") {
    const auto r = loss::dro_loss_at(0.8, 1.0, 0.4, {dro::Divergence::kl, 0.05});
    CHECK(std::abs(r.dro - (r.dpo + r.reg_term)) <= 1e-12);
    CHECK(r.dro > r.dpo);
  }

  TEST_CASE("DRO gradient equals the DPO gradient at rho = 0, q = 1") {
    testing::Gen gen(1);
    policy::MarginRecord m{0.7, gen.vector(4, -1, 1)};
    const auto g = loss::dro_gradient(m, 1.0, {dro::Divergence::chi_squared, 0.0}, 0.25);
    const auto d = loss::per_sample_gradient(m, 0.25, 1);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(d[i]).epsilon(1e-15));
  }

  TEST_CASE("DRO gradient at delta = 0") {
    policy::MarginRecord m{0.0, {1.0, -2.0}};
    const double q = 0.7, beta = 0.5;
    const auto g = loss::dro_gradient(m, q, {dro::Divergence::chi_squared, 0.1}, beta);
    // Tie: p_hat = q, gradient (p - (1-p)) * (-beta/2) * grad_delta.
    for (std::size_t i = 0; i < 2; ++i) CHECK(g[i] == doctest::Approx((2 * q - 1) * (-beta / 2) * m.grad_delta[i]));
  }

  TEST_CASE("property: DRO gradient matches finite differences") {
    testing::Gen gen(17);
    int checked = 0;
    for (int i = 0; i < 300; ++i) {
      auto inst = random_pair(gen, 5);
      const double q = gen.soft_score(), rho = gen.uniform(0, 4), beta = gen.uniform(0.05, 1.5);
      const dro::AmbiguitySet set{dro::Divergence::chi_squared, rho};
      policy::LogLinearPolicy pol(inst.featurizer, inst.theta, inst.theta_ref);
      const auto m = pol.margin("x", "y1", "y2");
      if (std::abs(m.delta) < 1e-3) continue;
      auto f = [&](const std::vector<double>& th) {
        policy::LogLinearPolicy p(inst.featurizer, th, inst.theta_ref);
        return loss::dro_loss_at(p.margin("x", "y1", "y2").delta, beta, q, set).dro;
      };
      const auto fd = testing::finite_difference(f, inst.theta, 1e-5);
      const auto g = loss::dro_gradient(pol, "x", "y1", "y2", q, set, beta);
      CHECK(testing::relative_error(g, fd) <= 1e-5);
      ++checked;
    }
    CHECK(checked > 250);
  }

  TEST_CASE("gradient step on p_hat > 0.5 decreases l1") {
    policy::MarginRecord m{0.2, {1.0, 0.5}};
    const double beta = 1.0, lr = 0.1;
    const dro::AmbiguitySet set{dro::Divergence::chi_squared, 0.1};
    const auto g = loss::dro_gradient(m, 0.8, set, beta);
    // delta changes by grad_delta . (-lr g)
    const double step = -lr * (g[0] * m.grad_delta[0] + g[1] * m.grad_delta[1]);
    CHECK(loss::per_sample_loss(m.delta + step, beta, 1) < loss::per_sample_loss(m.delta, beta, 1));
  }

  TEST_CASE("rDPO examples") {
    CHECK(loss::rdpo_loss(0.8, 0.3, 0.0) == 0.8);
    CHECK(loss::rdpo_loss(1.0, 0.5, 0.1) == doctest::Approx(1.0625).epsilon(1e-15));
    for (double eps : {0.0, 0.2, 0.45}) CHECK(loss::rdpo_loss(0.6, 0.6, eps) == doctest::Approx(0.6).epsilon(1e-14));
    CHECK_THROWS_AS(loss::rdpo_loss(1, 1, 0.5), InputError);
    CHECK_THROWS_AS(loss::rdpo_loss(1, 1, -0.1), InputError);
  }

  TEST_CASE("property: rDPO is unbiased under label flips") {
    testing::Gen gen(23);
    for (int i = 0; i < 1000; ++i) {
      const double l_c = gen.uniform(0, 5), l_negc = gen.uniform(0, 5), eps = gen.uniform(0, 0.49);
      // Observed label is c with prob 1-eps, -c with prob eps.
      const double expectation =
          (1 - eps) * loss::rdpo_loss(l_c, l_negc, eps) + eps * loss::rdpo_loss(l_negc, l_c, eps);
      CHECK(std::abs(expectation - l_c) <= 1e-12 * std::max(1.0, l_c));
    }
  }

  TEST_CASE("rDPO gradient matches finite differences") {
    testing::Gen gen(29);
    for (int i = 0; i < 100; ++i) {
      auto inst = random_pair(gen, 3);
      const double eps = gen.uniform(0, 0.45), beta = gen.uniform(0.1, 1);
      const int c = gen.label();
      auto f = [&](const std::vector<double>& th) {
        policy::LogLinearPolicy p(inst.featurizer, th, inst.theta_ref);
        const double d = p.margin("x", "y1", "y2").delta;
        return loss::rdpo_loss(loss::per_sample_loss(d, beta, c), loss::per_sample_loss(d, beta, -c), eps);
      };
      policy::LogLinearPolicy pol(inst.featurizer, inst.theta, inst.theta_ref);
      const auto g = loss::rdpo_gradient(pol.margin("x", "y1", "y2"), beta, c, eps);
      CHECK(testing::relative_error(g, testing::finite_difference(f, inst.theta, 1e-5)) <= 1e-6);
    }
  }

  TEST_CASE("DrDPO objective examples") {
    const std::vector<double> same{0.7, 0.7, 0.7};
    CHECK(loss::drdpo_objective(same, 0.3) == doctest::Approx(0.7).epsilon(1e-15));
    const std::vector<double> two{0.0, std::log(2.0)};
    CHECK(loss::drdpo_objective(two, 1.0) == doctest::Approx(0.4054651081081644).epsilon(1e-15));
    CHECK_THROWS_AS(loss::drdpo_objective(std::vector<double>{}, 1.0), InputError);
    CHECK_THROWS_AS(loss::drdpo_objective(two, 0.0), InputError);
  }

  TEST_CASE("property: DrDPO objective bounds and asymptote") {
    testing::Gen gen(31);
    for (int i = 0; i < 500; ++i) {
      const auto losses = gen.vector(1 + gen.index(20), 0, 5);
      double mean = 0;
      for (double l : losses) mean += l;
      mean /= losses.size();
      const double bp = gen.uniform(0.01, 10);
      CHECK(loss::drdpo_objective(losses, bp) >= mean - 1e-12);
      CHECK(std::abs(loss::drdpo_objective(losses, 1e6) - mean) <= 1e-5);
      const auto w = loss::drdpo_weights(losses, bp);
      double total = 0;
      for (double x : w) total += x;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    }
    const std::vector<double> big{1000.0, 1000.5};
    CHECK(std::isfinite(loss::drdpo_objective(big, 0.01)));
  }

  TEST_CASE("DrDPO weights are the objective's gradient") {
    testing::Gen gen(37);
    const auto losses = gen.vector(6, 0, 3);
    const double bp = 0.7;
    const auto w = loss::drdpo_weights(losses, bp);
    const auto fd = testing::finite_difference(
        [&](const std::vector<double>& l) { return loss::drdpo_objective(l, bp); }, losses, 1e-6);
    CHECK(testing::relative_error(w, fd) <= 1e-7);
  }

  TEST_CASE("pairwise sum is exact on integers and order-fixed") {
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    CHECK(loss::pairwise_sum(v) == 499500.0);
    CHECK(loss::pairwise_sum(std::vector<double>{}) == 0.0);
  }
}
