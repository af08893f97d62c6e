#include "experiment.hpp"

#include <fstream>

#include "prefrobust/error.hpp"

namespace prefrobust::cli {

const std::set<std::string>& environment_keys() {
  static const std::set<std::string> keys = {"env.n_arms", "env.budget", "env.horizon", "env.discount", "env.seed"};
  return keys;
}

rmab::RmabInstance load_environment(const std::optional<std::filesystem::path>& arms_path, const KeyValueConfig& cfg) {
  rmab::DeskEnvironmentOptions opts;
  opts.n_arms = cfg.get_uint("env.n_arms", opts.n_arms);
  opts.budget = cfg.get_uint("env.budget", opts.budget);
  opts.horizon = cfg.get_uint("env.horizon", opts.horizon);
  opts.discount = cfg.get_double("env.discount", opts.discount);
  opts.seed = cfg.get_uint("env.seed", opts.seed);

  rmab::RmabInstance env;
  if (arms_path) {
    if (cfg.contains("env.n_arms") || cfg.contains("env.seed")) {
      throw InputError("env.n_arms and env.seed apply only to the synthetic environment, not to --env");
    }
    std::ifstream in(*arms_path);
    if (!in) throw InputError("cannot read " + arms_path->string());
    env.arms = rmab::read_arms_jsonl(in);
    env.budget = opts.budget;
    env.horizon = opts.horizon;
    env.discount = opts.discount;
  } else {
    env = rmab::make_desk_environment(opts);
  }
  env.validate();
  return env;
}

const std::set<std::string>& eval_keys() {
  static const std::set<std::string> keys = {"eval.pool_size", "eval.pools", "eval.rollouts", "eval.seed"};
  return keys;
}

EvalSettings EvalSettings::from_config(const KeyValueConfig& cfg) {
  EvalSettings s;
  s.pool_size = cfg.get_uint("eval.pool_size", s.pool_size);
  s.pools = cfg.get_uint("eval.pools", s.pools);
  s.rollouts = cfg.get_uint("eval.rollouts", s.rollouts);
  s.seed = cfg.get_uint("eval.seed", s.seed);
  if (s.pool_size == 0) throw InputError("eval.pool_size must be >= 1");
  if (s.pools == 0) throw InputError("eval.pools must be >= 1");
  if (s.rollouts == 0) throw InputError("eval.rollouts must be >= 1");
  return s;
}

std::vector<std::string> prompts_of(const std::vector<prefdata::PreferenceSample>& data) {
  std::vector<std::string> prompts;
  std::set<std::string> seen;
  for (const auto& s : data) {
    if (seen.insert(s.prompt).second) prompts.push_back(s.prompt);
  }
  return prompts;
}

std::shared_ptr<const policy::RewardExpressionFeaturizer> make_featurizer(
    const rmab::RmabInstance& env, const std::vector<prefdata::PreferenceSample>& data) {
  const auto names = env.feature_names();
  return std::make_shared<policy::RewardExpressionFeaturizer>(std::vector<std::string>(names.begin(), names.end()),
                                                              prompts_of(data));
}

Dataset generate(const prefdata::DatasetManifest& manifest, const rmab::RmabInstance& env, unsigned jobs) {
  const auto& categories = rmab::desk_feature_categories();
  Dataset d;
  d.tasks = prefdata::make_tasks(manifest.n_tasks, manifest.task_seed, categories);
  d.samples = prefdata::generate_dataset(manifest, env, d.tasks, categories, jobs);
  return d;
}

CellResult train_and_evaluate(const Dataset& data, const rmab::RmabInstance& env, const noise::NoiseSpec& noise,
                              const trainer::TrainConfig& train_config, const EvalSettings& eval, unsigned jobs) {
  const auto noisy = noise::apply_noise(data.samples, noise);
  policy::LogLinearPolicy pol(make_featurizer(env, data.samples));

  CellResult out;
  out.training = trainer::train(train_config, noisy, pol, jobs);

  const auto tasks =
      evalmetrics::make_eval_tasks(data.tasks, data.samples, rmab::desk_feature_categories(), eval.pool_size,
                                   eval.pools, derive_seed(eval.seed, {1}), derive_seed(eval.seed, {2}));
  evalmetrics::EvalOptions opts;
  opts.rollouts = eval.rollouts;
  out.report = evalmetrics::rmab_win_rate(pol, tasks, env, opts, jobs);
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ' && c != '\t') {
      cur.push_back(c);
    }
  }
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  for (const auto& item : out) {
    if (item.empty()) throw InputError("empty item in list '" + text + "'");
  }
  return out;
}

}  // namespace prefrobust::cli
