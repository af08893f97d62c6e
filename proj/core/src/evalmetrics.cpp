#include "prefrobust/evalmetrics.hpp"

#include <cmath>
#include <optional>
#include <ostream>
#include <set>

#include <spdlog/spdlog.h>
#include <json.hpp>

#include "prefrobust/error.hpp"
#include "prefrobust/format.hpp"
#include "prefrobust/loss.hpp"
#include "prefrobust/parallel.hpp"
#include "prefrobust/rng.hpp"

namespace prefrobust::evalmetrics {
namespace {

constexpr std::uint64_t kRolloutStream = 0x726F6C6CULL;

double sample_std(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mean) * (xs[i] - mean);
  return std::sqrt(loss::pairwise_sum(sq) / static_cast<double>(xs.size() - 1));
}

}  // namespace

std::size_t generate_response_index(const policy::PreferencePolicy& policy, std::string_view prompt,
                                    std::span<const std::string> candidates) {
  if (candidates.empty()) throw InputError("generate_response: empty candidate pool");
  std::size_t best = 0;
  double best_score = policy.log_ratio(prompt, candidates[0], nullptr);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double score = policy.log_ratio(prompt, candidates[i], nullptr);
    if (score > best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

const std::string& generate_response(const policy::PreferencePolicy& policy, std::string_view prompt,
                                     std::span<const std::string> candidates) {
  return candidates[generate_response_index(policy, prompt, candidates)];
}

Estimate win_rate(std::span<const double> generated, std::span<const double> chosen) {
  if (generated.size() != chosen.size()) {
    throw InputError("win_rate: " + std::to_string(generated.size()) + " generated scores vs " +
                     std::to_string(chosen.size()) + " chosen scores");
  }
  if (generated.empty()) throw InputError("win_rate: no items");
  std::size_t wins = 0;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    if (generated[i] > chosen[i]) ++wins;
  }
  const double n = static_cast<double>(generated.size());
  const double p = static_cast<double>(wins) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

Estimate eval_reward(std::span<const double> scores) {
  if (scores.empty()) throw InputError("eval_reward: no scores");
  const double mean = loss::pairwise_sum(scores) / static_cast<double>(scores.size());
  return {mean, sample_std(scores, mean) / std::sqrt(static_cast<double>(scores.size()))};
}

std::map<std::string, std::vector<std::string>> chosen_references(const std::vector<prefdata::PreferenceSample>& data) {
  std::map<std::string, std::vector<std::string>> refs;
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& s : data) {
    const std::string& chosen = s.q >= 0.5 ? s.response_a : s.response_b;
    if (seen[s.task_id].insert(prefdata::normalize_expression(chosen)).second) refs[s.task_id].push_back(chosen);
  }
  return refs;
}

std::vector<EvalTask> make_eval_tasks(const std::vector<prefdata::TaskSpec>& tasks,
                                      const std::vector<prefdata::PreferenceSample>& data,
                                      const std::vector<rmab::FeatureCategory>& categories, std::size_t pool_size,
                                      std::size_t n_pools, std::uint64_t pool_seed, std::uint64_t simulation_seed) {
  if (pool_size == 0) throw InputError("eval pool size must be >= 1");
  if (n_pools == 0) throw InputError("eval pool count must be >= 1");
  const auto refs = chosen_references(data);
  std::map<std::string, std::set<std::string>> train_responses;
  for (const auto& s : data) {
    train_responses[s.task_id].insert(prefdata::normalize_expression(s.response_a));
    train_responses[s.task_id].insert(prefdata::normalize_expression(s.response_b));
  }

  std::vector<EvalTask> out;
  out.reserve(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& spec = tasks[t];
    const auto it = refs.find(spec.task_id);
    if (it == refs.end()) throw InputError("no training data for task " + spec.task_id);

    EvalTask task{spec.task_id, spec.prompt, spec.judge,
                  {},           it->second,  prefdata::task_simulation_seed(simulation_seed, t)};
    const auto& exclude = train_responses[spec.task_id];
    for (std::size_t p = 0; p < n_pools; ++p) {
      std::vector<std::string> pool;
      std::set<std::string> seen;
      RandomStream rng(derive_seed(pool_seed, {t, p}));
      const std::size_t max_attempts = 1000 * pool_size;
      for (std::size_t attempt = 0; pool.size() < pool_size && attempt < max_attempts; ++attempt) {
        std::string c = prefdata::sample_candidate(spec.judge, categories, rng);
        const std::string key = prefdata::normalize_expression(c);
        if (exclude.contains(key) || !seen.insert(key).second) continue;
        pool.push_back(std::move(c));
      }
      if (pool.size() < pool_size) {
        throw InputError(spec.task_id + ": could only draw " + std::to_string(pool.size()) + " held-out candidates");
      }
      task.pools.push_back(std::move(pool));
    }
    out.push_back(std::move(task));
  }
  return out;
}

rmab::CategorySummary rollout_summary(const rmab::RmabInstance& env, const rmab::RewardProgram& program,
                                      std::uint64_t seed, const EvalOptions& options) {
  if (options.rollouts == 0) throw InputError("rollouts must be >= 1");
  rmab::CategorySummary total;
  for (std::size_t r = 0; r < options.rollouts; ++r) {
    const std::uint64_t s = r == 0 ? seed : derive_seed(seed, {kRolloutStream, r});
    const auto summary = rmab::summarize_by_category(rmab::simulate(env, program, s, options.whittle), env.arms);
    for (const auto& [k, v] : summary) total[k] += v;
  }
  for (auto& [k, v] : total) v /= static_cast<double>(options.rollouts);
  return total;
}

EvalReport rmab_win_rate(const policy::PreferencePolicy& policy, const std::vector<EvalTask>& tasks,
                         const rmab::RmabInstance& env, const EvalOptions& options, unsigned jobs) {
  if (tasks.empty()) throw InputError("rmab_win_rate: no eval tasks");
  env.validate();
  const std::set<std::string> known = env.feature_names();

  struct TaskOutcome {
    TaskResult result;
    std::vector<double> generated_pref;  // judge preference of generated over reference, pool-major
    std::vector<double> generated_scores;
    std::size_t parse_failures = 0;
  };
  std::vector<TaskOutcome> outcomes(tasks.size());

  parallel_for(tasks.size(), jobs, [&](std::size_t t) {
    const EvalTask& task = tasks[t];
    if (task.references.empty()) throw InputError(task.task_id + ": no reference responses");
    if (task.pools.empty()) throw InputError(task.task_id + ": no candidate pools");
    task.judge.validate();
    TaskOutcome& o = outcomes[t];
    o.result.task_id = task.task_id;

    std::vector<rmab::CategorySummary> ref_summaries;
    for (const auto& ref : task.references) {
      ref_summaries.push_back(rollout_summary(env, rmab::parse_reward(ref, known), task.simulation_seed, options));
    }

    std::map<std::string, std::optional<rmab::CategorySummary>> cache;
    std::size_t wins = 0;
    for (const auto& pool : task.pools) {
      const std::string& generated = generate_response(policy, task.prompt, pool);
      o.result.generated.push_back(generated);
      auto [it, fresh] = cache.try_emplace(generated);
      if (fresh) {
        try {
          it->second = rollout_summary(env, rmab::parse_reward(generated, known), task.simulation_seed, options);
        } catch (const InputError& e) {
          spdlog::warn("{}: generated response '{}' rejected, counted as a loss: {}", task.task_id, generated,
                       e.what());
        }
      }
      if (!it->second) {
        ++o.parse_failures;
        o.generated_scores.push_back(0.0);
        o.generated_pref.insert(o.generated_pref.end(), task.references.size(), 0.0);
        continue;
      }
      o.generated_scores.push_back(task.judge.score(*it->second));
      for (const auto& ref_summary : ref_summaries) {
        const double pref = prefdata::oracle_preference(task.judge, *it->second, ref_summary);
        o.generated_pref.push_back(pref);
        if (pref > 0.5) ++wins;
      }
    }
    o.result.n = o.generated_pref.size();
    o.result.win_rate = static_cast<double>(wins) / static_cast<double>(o.result.n);
  });

  EvalReport report;
  std::vector<double> generated, chosen, scores;
  for (auto& o : outcomes) {
    generated.insert(generated.end(), o.generated_pref.begin(), o.generated_pref.end());
    scores.insert(scores.end(), o.generated_scores.begin(), o.generated_scores.end());
    report.parse_failures += o.parse_failures;
    report.per_task.push_back(std::move(o.result));
  }
  chosen.assign(generated.size(), 0.5);
  report.n_eval = generated.size();
  report.win_rate = win_rate(generated, chosen);
  report.eval_reward = eval_reward(scores);
  return report;
}

void write_report_json(std::ostream& out, const EvalReport& report) {
  nlohmann::ordered_json j;
  j["win_rate"] = report.win_rate.value;
  j["win_rate_se"] = report.win_rate.standard_error;
  j["eval_reward"] = report.eval_reward.value;
  j["eval_reward_se"] = report.eval_reward.standard_error;
  j["n_eval"] = report.n_eval;
  j["parse_failures"] = report.parse_failures;
  nlohmann::ordered_json per_task = nlohmann::ordered_json::array();
  for (const auto& t : report.per_task) {
    per_task.push_back({{"task_id", t.task_id}, {"win_rate", t.win_rate}, {"n", t.n}, {"generated", t.generated}});
  }
  j["per_task"] = std::move(per_task);
  out << j.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "task_id,win_rate,n\n";
  for (const auto& t : report.per_task) out << t.task_id << ',' << format_double(t.win_rate) << ',' << t.n << '\n';
}

}  // namespace prefrobust::evalmetrics
