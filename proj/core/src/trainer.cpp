#include "prefrobust/trainer.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "prefrobust/error.hpp"
#include "prefrobust/format.hpp"
#include "prefrobust/loss.hpp"
#include "prefrobust/parallel.hpp"
#include "prefrobust/rng.hpp"

namespace prefrobust::trainer {
namespace {

constexpr std::uint64_t kLabelStream = 0x6C6162656CULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;

const std::set<std::string> kCommonKeys = {"method", "beta", "learning_rate", "epochs", "batch_size", "seed"};

struct SampleEval {
  policy::MarginRecord margin;
  double loss = 0.0;
  policy::Vector grad;  // empty when only the loss was requested
};

// Loss and (optionally) gradient of one sample under the configured method. For drdpo the
// per-sample loss is the hard-label DPO loss; the batch combines them.
SampleEval evaluate_sample(const TrainConfig& cfg, const policy::PreferencePolicy& pol,
                           const prefdata::PreferenceSample& s, int label, bool with_grad) {
  SampleEval out;
  out.margin = pol.margin(s.prompt, s.response_a, s.response_b);
  const double delta = out.margin.delta;
  switch (cfg.method) {
    case Method::dpo:
    case Method::drdpo:
      out.loss = loss::per_sample_loss(delta, cfg.beta, label);
      if (with_grad) out.grad = loss::per_sample_gradient(out.margin, cfg.beta, label);
      break;
    case Method::dpo_pro:
      out.loss = loss::dro_loss_at(delta, cfg.beta, s.q, *cfg.ambiguity).dro;
      if (with_grad) out.grad = loss::dro_gradient(out.margin, s.q, *cfg.ambiguity, cfg.beta);
      break;
    case Method::rdpo:
      out.loss = loss::rdpo_loss(loss::per_sample_loss(delta, cfg.beta, label),
                                 loss::per_sample_loss(delta, cfg.beta, -label), *cfg.eps);
      if (with_grad) out.grad = loss::rdpo_gradient(out.margin, cfg.beta, label, *cfg.eps);
      break;
  }
  return out;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

[[noreturn]] void fail_non_finite(std::string_view what, std::size_t epoch, std::size_t batch,
                                  std::span<const std::size_t> members,
                                  const std::vector<prefdata::PreferenceSample>& data,
                                  const std::vector<SampleEval>& evals) {
  std::ostringstream msg;
  msg << "non-finite " << what << " in epoch " << epoch << ", batch " << batch << ":";
  for (std::size_t j = 0; j < members.size(); ++j) {
    const auto& s = data[members[j]];
    msg << "\n  sample " << members[j] << " task=" << s.task_id << " q=" << format_double(s.q)
        << " delta=" << format_double(evals[j].margin.delta) << " loss=" << format_double(evals[j].loss);
  }
  throw NumericError(msg.str());
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::dpo:
      return "dpo";
    case Method::dpo_pro:
      return "dpo-pro";
    case Method::rdpo:
      return "rdpo";
    case Method::drdpo:
      return "drdpo";
  }
  return "dpo";
}

Method parse_method(std::string_view name) {
  if (name == "dpo") return Method::dpo;
  if (name == "dpo-pro") return Method::dpo_pro;
  if (name == "rdpo") return Method::rdpo;
  if (name == "drdpo") return Method::drdpo;
  throw InputError("unknown method '" + std::string(name) + "' (expected dpo, dpo-pro, rdpo or drdpo)");
}

void TrainConfig::validate() const {
  const auto name = std::string(to_string(method));
  if (ambiguity.has_value() != (method == Method::dpo_pro)) {
    throw InputError(method == Method::dpo_pro ? "dpo-pro requires an ambiguity set (rho)"
                                               : "ambiguity set given for method " + name);
  }
  if (eps.has_value() != (method == Method::rdpo)) {
    throw InputError(method == Method::rdpo ? "rdpo requires eps" : "eps given for method " + name);
  }
  if (beta_prime.has_value() != (method == Method::drdpo)) {
    throw InputError(method == Method::drdpo ? "drdpo requires beta_prime" : "beta_prime given for method " + name);
  }
  if (ambiguity) ambiguity->validate();
  if (eps && !(*eps >= 0.0 && *eps < 0.5)) throw InputError("eps must lie in [0, 0.5)");
  if (beta_prime && !(*beta_prime > 0.0 && std::isfinite(*beta_prime))) throw InputError("beta_prime must be > 0");
  if (!(beta > 0.0 && std::isfinite(beta))) throw InputError("beta must be > 0");
  if (!(learning_rate >= 0.0 && std::isfinite(learning_rate))) throw InputError("learning_rate must be >= 0");
  if (batch_size == 0) throw InputError("batch_size must be >= 1");
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg) {
  const KeyValueConfig t = cfg.section("train.");
  TrainConfig out;
  out.method = parse_method(t.require_string("method"));

  std::set<std::string> allowed = kCommonKeys;
  switch (out.method) {
    case Method::dpo:
      break;
    case Method::dpo_pro:
      allowed.insert({"rho", "divergence"});
      out.ambiguity =
          dro::AmbiguitySet{dro::parse_divergence(t.get_string("divergence", "chi2")), t.require_double("rho")};
      break;
    case Method::rdpo:
      allowed.insert("eps");
      out.eps = t.require_double("eps");
      break;
    case Method::drdpo:
      allowed.insert("beta_prime");
      out.beta_prime = t.require_double("beta_prime");
      break;
  }
  for (const auto& [key, value] : t.entries()) {
    if (!allowed.contains(key)) {
      throw InputError("config key train." + key + " is not valid for method " + std::string(to_string(out.method)));
    }
  }
  out.beta = t.get_double("beta", out.beta);
  out.learning_rate = t.get_double("learning_rate", out.learning_rate);
  out.epochs = t.get_uint("epochs", out.epochs);
  out.batch_size = t.get_uint("batch_size", out.batch_size);
  out.seed = t.get_uint("seed", out.seed);
  out.validate();
  return out;
}

KeyValueConfig TrainConfig::to_config() const {
  KeyValueConfig c;
  c.set("train.method", std::string(to_string(method)));
  c.set("train.beta", format_double(beta));
  c.set("train.learning_rate", format_double(learning_rate));
  c.set("train.epochs", std::to_string(epochs));
  c.set("train.batch_size", std::to_string(batch_size));
  c.set("train.seed", std::to_string(seed));
  if (ambiguity) {
    c.set("train.rho", format_double(ambiguity->rho));
    c.set("train.divergence", std::string(dro::to_string(ambiguity->divergence)));
  }
  if (eps) c.set("train.eps", format_double(*eps));
  if (beta_prime) c.set("train.beta_prime", format_double(*beta_prime));
  return c;
}

std::vector<int> sample_hard_labels(const std::vector<prefdata::PreferenceSample>& data, std::uint64_t seed,
                                    std::uint64_t round) {
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    RandomStream rng(derive_seed(seed, {kLabelStream, round, i}));
    labels[i] = rng.bernoulli(data[i].q) ? 1 : -1;
  }
  return labels;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  RandomStream rng(derive_seed(seed, {kShuffleStream, epoch}));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

TrainResult train(const TrainConfig& config, const std::vector<prefdata::PreferenceSample>& data,
                  policy::PreferencePolicy& pol, unsigned jobs) {
  config.validate();
  if (data.empty()) throw InputError("training data is empty");
  for (const auto& s : data) s.validate();

  const std::size_t n = data.size();
  const std::size_t dim = pol.dimension();
  policy::Vector theta(pol.params().begin(), pol.params().end());

  std::vector<int> labels;
  if (config.method != Method::dpo_pro) labels = sample_hard_labels(data, config.seed, 0);

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.method == Method::drdpo) labels = sample_hard_labels(data, config.seed, epoch);
    const auto perm = epoch_permutation(n, config.seed, epoch);

    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::span<const std::size_t> members(perm.data() + start, end - start);

      std::vector<SampleEval> evals(members.size());
      parallel_for(members.size(), jobs, [&](std::size_t j) {
        const std::size_t i = members[j];
        evals[j] = evaluate_sample(config, pol, data[i], labels.empty() ? 1 : labels[i], true);
      });

      std::vector<double> weights(members.size(), 1.0 / static_cast<double>(members.size()));
      std::vector<double> losses(members.size());
      for (std::size_t j = 0; j < members.size(); ++j) losses[j] = evals[j].loss;
      for (const auto& e : evals) {
        if (!std::isfinite(e.margin.delta)) fail_non_finite("margin", epoch, batch_index, members, data, evals);
      }
      if (!all_finite(losses)) fail_non_finite("loss", epoch, batch_index, members, data, evals);
      if (config.method == Method::drdpo) weights = loss::drdpo_weights(losses, *config.beta_prime);

      policy::Vector grad(dim, 0.0);
      for (std::size_t j = 0; j < members.size(); ++j) {
        const auto& g = evals[j].grad;
        for (std::size_t k = 0; k < dim; ++k) grad[k] += weights[j] * g[k];
      }
      if (!all_finite(grad)) fail_non_finite("gradient", epoch, batch_index, members, data, evals);

      for (std::size_t k = 0; k < dim; ++k) theta[k] -= config.learning_rate * grad[k];
      if (!all_finite(theta)) fail_non_finite("parameters", epoch, batch_index, members, data, evals);
      pol.set_params(theta);
    }

    std::vector<SampleEval> evals(n);
    parallel_for(n, jobs, [&](std::size_t i) {
      evals[i] = evaluate_sample(config, pol, data[i], labels.empty() ? 1 : labels[i], false);
    });
    std::vector<double> losses(n), margins(n);
    for (std::size_t i = 0; i < n; ++i) {
      losses[i] = evals[i].loss;
      margins[i] = std::abs(evals[i].margin.delta);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = config.method == Method::drdpo ? loss::drdpo_objective(losses, *config.beta_prime)
                                            : loss::pairwise_sum(losses) / static_cast<double>(n);
    m.mean_abs_margin = loss::pairwise_sum(margins) / static_cast<double>(n);
    if (!std::isfinite(m.loss) || !std::isfinite(m.mean_abs_margin)) {
      throw NumericError("non-finite epoch metrics after epoch " + std::to_string(epoch));
    }
    result.log.push_back(m);
  }
  result.theta = std::move(theta);
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& log) {
  out << "epoch,loss,mean_abs_margin\n";
  for (const auto& m : log) {
    out << m.epoch << ',' << format_double(m.loss) << ',' << format_double(m.mean_abs_margin) << '\n';
  }
}

}  // namespace prefrobust::trainer
