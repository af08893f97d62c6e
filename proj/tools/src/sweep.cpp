#include "sweep.hpp"

#include <ostream>

#include <spdlog/spdlog.h>

#include "prefrobust/error.hpp"
#include "prefrobust/format.hpp"
#include "prefrobust/parallel.hpp"

namespace prefrobust::cli {
namespace {

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

SweepSpec SweepSpec::from_config(const KeyValueConfig& cfg) {
  std::set<std::string> allowed(prefdata::DatasetManifest::config_keys().begin(),
                                prefdata::DatasetManifest::config_keys().end());
  allowed.insert(environment_keys().begin(), environment_keys().end());
  allowed.insert(eval_keys().begin(), eval_keys().end());
  allowed.insert({"noise.kind", "train.beta", "train.learning_rate", "train.epochs", "train.batch_size", "train.rho",
                  "train.divergence", "train.eps", "train.beta_prime", "sweep.alphas", "sweep.methods", "sweep.seeds"});
  cfg.reject_unknown(allowed);

  SweepSpec s;
  s.manifest = prefdata::DatasetManifest::from_config(cfg);
  s.noise_kind = noise::parse_noise_kind(cfg.get_string("noise.kind", "flip"));
  s.alphas = parse_alpha_list(cfg.get_string("sweep.alphas", "0.3"));
  s.methods = parse_method_list(cfg.get_string("sweep.methods", "dpo,dpo-pro"));
  s.seeds = parse_seed_list(cfg.get_string("sweep.seeds", "0"));
  s.beta = cfg.get_double("train.beta", s.beta);
  s.learning_rate = cfg.get_double("train.learning_rate", s.learning_rate);
  s.epochs = cfg.get_uint("train.epochs", s.epochs);
  s.batch_size = cfg.get_uint("train.batch_size", s.batch_size);
  s.ambiguity.divergence = dro::parse_divergence(cfg.get_string("train.divergence", "chi2"));
  s.ambiguity.rho = cfg.get_double("train.rho", s.ambiguity.rho);
  if (cfg.contains("train.eps")) s.eps = cfg.require_double("train.eps");
  s.beta_prime = cfg.get_double("train.beta_prime", s.beta_prime);
  s.eval = EvalSettings::from_config(cfg);
  return s;
}

trainer::TrainConfig SweepSpec::train_config(trainer::Method method, double alpha, std::uint64_t seed) const {
  trainer::TrainConfig c;
  c.method = method;
  c.beta = beta;
  c.learning_rate = learning_rate;
  c.epochs = epochs;
  c.batch_size = batch_size;
  c.seed = seed;
  switch (method) {
    case trainer::Method::dpo:
      break;
    case trainer::Method::dpo_pro:
      c.ambiguity = ambiguity;
      break;
    case trainer::Method::rdpo:
      c.eps = eps.value_or(std::min(alpha, 0.49));
      break;
    case trainer::Method::drdpo:
      c.beta_prime = beta_prime;
      break;
  }
  c.validate();
  return c;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const rmab::RmabInstance& env, unsigned jobs) {
  if (spec.alphas.empty() || spec.methods.empty() || spec.seeds.empty()) {
    throw InputError("sweep grids must be nonempty");
  }
  // Datasets are shared by every cell of a seed.
  std::vector<std::optional<Dataset>> datasets(spec.seeds.size());
  std::vector<std::string> data_errors(spec.seeds.size());
  parallel_for(spec.seeds.size(), jobs, [&](std::size_t i) {
    prefdata::DatasetManifest m = spec.manifest;
    m.seed = spec.seeds[i];
    try {
      datasets[i] = generate(m, env, 1);
    } catch (const std::exception& e) {
      data_errors[i] = e.what();
    }
  });

  const std::size_t per_seed = spec.alphas.size() * spec.methods.size();
  std::vector<SweepRow> rows(spec.seeds.size() * per_seed);
  parallel_for(rows.size(), jobs, [&](std::size_t cell) {
    const std::size_t si = cell / per_seed;
    const std::size_t ai = (cell % per_seed) / spec.methods.size();
    const std::size_t mi = cell % spec.methods.size();
    SweepRow& row = rows[cell];
    row.method = std::string(trainer::to_string(spec.methods[mi]));
    row.alpha = spec.alphas[ai];
    row.seed = spec.seeds[si];
    try {
      if (!datasets[si]) throw InputError("data generation failed: " + data_errors[si]);
      const noise::NoiseSpec noise{spec.alphas[ai] == 0.0 ? noise::NoiseKind::none : spec.noise_kind, spec.alphas[ai],
                                   derive_seed(row.seed, {3})};
      EvalSettings eval = spec.eval;
      eval.seed = derive_seed(spec.eval.seed, {row.seed});
      const auto result = train_and_evaluate(*datasets[si], env, noise,
                                             spec.train_config(spec.methods[mi], row.alpha, row.seed), eval, 1);
      row.win_rate = result.report.win_rate.value;
      row.eval_reward = result.report.eval_reward.value;
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
      spdlog::warn("sweep cell method={} alpha={} seed={} failed: {}", row.method, row.alpha, row.seed, e.what());
    }
  });
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "method,noise,seed,win_rate,eval_reward,status\n";
  for (const auto& r : rows) {
    out << r.method << ',' << format_double(r.alpha) << ',' << r.seed << ',' << format_double(r.win_rate) << ','
        << format_double(r.eval_reward) << ',' << csv_field(r.status) << '\n';
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text)) {
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = parse_uint(item.substr(0, dash), "seed range");
      const auto hi = parse_uint(item.substr(dash + 1), "seed range");
      if (hi < lo) throw InputError("seed range '" + item + "' is empty");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(parse_uint(item, "seed"));
    }
  }
  return out;
}

std::vector<trainer::Method> parse_method_list(const std::string& text) {
  std::vector<trainer::Method> out;
  for (const auto& item : split_list(text)) out.push_back(trainer::parse_method(item));
  return out;
}

std::vector<double> parse_alpha_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_double(item, "alpha"));
  return out;
}

}  // namespace prefrobust::cli
