#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefrobust/policy.hpp"
#include "prefrobust/prefdata.hpp"
#include "prefrobust/rmab.hpp"

namespace prefrobust::evalmetrics {

/// A mean with its standard error.
struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Index of the candidate maximising the policy's log-ratio; the first wins ties.
std::size_t generate_response_index(const policy::PreferencePolicy& policy, std::string_view prompt,
                                    std::span<const std::string> candidates);
const std::string& generate_response(const policy::PreferencePolicy& policy, std::string_view prompt,
                                     std::span<const std::string> candidates);

/// Fraction of items with generated > chosen (ties lose); SE = sqrt(p(1-p)/n).
Estimate win_rate(std::span<const double> generated, std::span<const double> chosen);

/// Arithmetic mean; SE = sample standard deviation / sqrt(n) (0 for n = 1).
Estimate eval_reward(std::span<const double> scores);

/// One evaluation task: candidate pools to generate from (one response per pool) and the
/// reference reward functions (chosen responses of the training data) to compare against.
struct EvalTask {
  std::string task_id;
  std::string prompt;
  prefdata::OracleJudge judge;
  std::vector<std::vector<std::string>> pools;
  std::vector<std::string> references;
  std::uint64_t simulation_seed = 0;
};

struct EvalOptions {
  /// Rollouts per program; the judge scores the mean category summary.
  std::size_t rollouts = 1;
  rmab::WhittleOptions whittle;
};

struct TaskResult {
  std::string task_id;
  std::vector<std::string> generated;  // one per pool
  double win_rate = 0.0;
  std::size_t n = 0;  // pools x references
};

struct EvalReport {
  Estimate win_rate;
  Estimate eval_reward;
  std::vector<TaskResult> per_task;  // task order as given
  std::size_t n_eval = 0;
  std::size_t parse_failures = 0;
};

/// Responses preferred in the data (q >= 0.5 picks response_a), distinct per task, in
/// first-seen order.
std::map<std::string, std::vector<std::string>> chosen_references(const std::vector<prefdata::PreferenceSample>& data);

/// Eval tasks with `n_pools` fresh pools of `pool_size` candidates per task, each excluding
/// every response in the task's training data. Pool p of task t draws from the sub-stream
/// (pool_seed, t, p).
/// Generated and reference programs of task t share the rollout seed
/// task_simulation_seed(simulation_seed, t).
std::vector<EvalTask> make_eval_tasks(const std::vector<prefdata::TaskSpec>& tasks,
                                      const std::vector<prefdata::PreferenceSample>& data,
                                      const std::vector<rmab::FeatureCategory>& categories, std::size_t pool_size,
                                      std::size_t n_pools, std::uint64_t pool_seed, std::uint64_t simulation_seed);

/// Mean category summary over `rollouts` simulations starting at `seed`.
rmab::CategorySummary rollout_summary(const rmab::RmabInstance& env, const rmab::RewardProgram& program,
                                      std::uint64_t seed, const EvalOptions& options);

/// For each task and pool: generate a response, simulate it and every reference, and count
/// a win when the judge prefers the generated summary with probability > 0.5. An
/// unparsable generated response loses against every reference and is logged. eval_reward
/// averages the judge score of the generated responses.
EvalReport rmab_win_rate(const policy::PreferencePolicy& policy, const std::vector<EvalTask>& tasks,
                         const rmab::RmabInstance& env, const EvalOptions& options = {}, unsigned jobs = 1);

void write_report_json(std::ostream& out, const EvalReport& report);
/// "task_id,win_rate,n" CSV with header.
void write_report_csv(std::ostream& out, const EvalReport& report);

}  // namespace prefrobust::evalmetrics
