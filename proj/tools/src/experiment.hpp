#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prefrobust/config.hpp"
#include "prefrobust/evalmetrics.hpp"
#include "prefrobust/noise.hpp"
#include "prefrobust/policy.hpp"
#include "prefrobust/prefdata.hpp"
#include "prefrobust/rmab.hpp"
#include "prefrobust/trainer.hpp"

namespace prefrobust::cli {

/// `env.*` keys: n_arms, budget, horizon, discount, seed.
const std::set<std::string>& environment_keys();

/// Arms from `arms_path` when given, otherwise the synthetic desk environment. Budget,
/// horizon and discount come from the `env.*` keys either way.
rmab::RmabInstance load_environment(const std::optional<std::filesystem::path>& arms_path, const KeyValueConfig& cfg);

/// `eval.*` keys: pool_size, pools, rollouts, seed.
const std::set<std::string>& eval_keys();

struct EvalSettings {
  std::size_t pool_size = 20;
  std::size_t pools = 50;
  std::size_t rollouts = 1;
  std::uint64_t seed = 0;

  static EvalSettings from_config(const KeyValueConfig& cfg);
};

/// Distinct prompts in first-seen order.
std::vector<std::string> prompts_of(const std::vector<prefdata::PreferenceSample>& data);

std::shared_ptr<const policy::RewardExpressionFeaturizer> make_featurizer(
    const rmab::RmabInstance& env, const std::vector<prefdata::PreferenceSample>& data);

/// Clean data plus its tasks: the output of one data-generation run.
struct Dataset {
  std::vector<prefdata::TaskSpec> tasks;
  std::vector<prefdata::PreferenceSample> samples;
};

Dataset generate(const prefdata::DatasetManifest& manifest, const rmab::RmabInstance& env, unsigned jobs);

/// Noise, training from theta = theta_ref = 0, and held-out evaluation against the clean
/// data's chosen responses.
struct CellResult {
  trainer::TrainResult training;
  evalmetrics::EvalReport report;
};

CellResult train_and_evaluate(const Dataset& data, const rmab::RmabInstance& env, const noise::NoiseSpec& noise,
                              const trainer::TrainConfig& train_config, const EvalSettings& eval, unsigned jobs);

std::vector<std::string> split_list(const std::string& text);

}  // namespace prefrobust::cli
