#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "prefrobust/config.hpp"
#include "prefrobust/rmab.hpp"
#include "prefrobust/rng.hpp"

namespace prefrobust::prefdata {

/// How a sample's soft score was obtained.
enum class QSource { averaged_queries, direct_score, hard_label_smoothed };

std::string_view to_string(QSource s);
QSource parse_q_source(std::string_view name);

/// One (prompt, response pair, soft score) record. q is P(response_a preferred over response_b).
struct PreferenceSample {
  std::string task_id;
  std::string prompt;
  std::string response_a;
  std::string response_b;
  double q = 0.5;
  QSource q_source = QSource::averaged_queries;

  /// Throws InputError if q is outside [0,1] or the responses coincide after normalisation.
  void validate() const;

  bool operator==(const PreferenceSample&) const = default;
};

/// Expression text with all whitespace removed; used to compare responses.
std::string normalize_expression(std::string_view text);

/// Synthetic stand-in for an annotator: a linear scorer over each feature's share of
/// total engagement, turned into a preference with a Bradley-Terry link.
struct OracleJudge {
  std::map<std::string, double> task_weights;
  double temperature = 1.0;

  void validate() const;

  /// sum_f w_f * engagement_f / total engagement; 0 when nothing is engaged.
  double score(const rmab::CategorySummary& summary) const;
};

/// sigma((score_a - score_b) / temperature). Summaries must cover the same categories.
double oracle_preference(const OracleJudge& judge, const rmab::CategorySummary& summary_a,
                         const rmab::CategorySummary& summary_b);

/// Fraction of `repeats` Bernoulli(q_true) successes drawn from `rng`.
double estimate_q_by_sampling(double q_true, std::size_t repeats, RandomStream& rng);

struct DatasetManifest {
  std::size_t n_tasks = 1;
  std::size_t candidates_per_task = 20;
  std::size_t pairs_per_task = 50;
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
  /// Seed for the task intents (judges). Kept apart from `seed` so data can be resampled
  /// for a fixed set of tasks.
  std::uint64_t task_seed = 1;

  void validate() const;

  /// Reads the manifest keys above; other keys are left for the caller.
  static DatasetManifest from_config(const KeyValueConfig& cfg);
  static const std::vector<std::string>& config_keys();
};

/// A prioritisation task: identifier, command text and the latent judge.
struct TaskSpec {
  std::string task_id;
  std::string prompt;
  OracleJudge judge;
};

/// Deterministic synthetic tasks. Each focuses on one or two feature categories with
/// positive weights on one to three features.
std::vector<TaskSpec> make_tasks(std::size_t n_tasks, std::uint64_t task_seed,
                                 const std::vector<rmab::FeatureCategory>& categories);

/// Command text derived from a judge's weight map.
std::string describe_task(const OracleJudge& judge);

/// Samples one reward expression `s + sum_i c_i * s * (clause_i)` with coefficients in
/// {1,2,3} and clauses of up to three features joined by `and` / `or`. Clauses lean
/// toward the judge's focus features, as a command-conditioned generator would.
std::string sample_candidate(const OracleJudge& judge, const std::vector<rmab::FeatureCategory>& categories,
                             RandomStream& rng);

/// `count` distinct candidates (by normalised text). Throws InputError if the grammar
/// cannot supply that many.
std::vector<std::string> sample_candidate_pool(const OracleJudge& judge,
                                               const std::vector<rmab::FeatureCategory>& categories, std::size_t count,
                                               RandomStream& rng);

/// Simulation seed shared by every candidate of a task (common random numbers).
std::uint64_t task_simulation_seed(std::uint64_t seed, std::size_t task_index);

/// Builds pairs_per_task samples per task: sample candidates, simulate each under the
/// Whittle policy, judge random pairs and average `repeats` Bernoulli queries.
/// Candidates whose simulation fails are skipped with a logged reason.
std::vector<PreferenceSample> generate_dataset(const DatasetManifest& manifest, const rmab::RmabInstance& env,
                                               const std::vector<TaskSpec>& tasks,
                                               const std::vector<rmab::FeatureCategory>& categories, unsigned jobs = 1);

void write_jsonl(std::ostream& out, const std::vector<PreferenceSample>& samples);
std::vector<PreferenceSample> read_jsonl(std::istream& in);

void write_tasks_json(std::ostream& out, const std::vector<TaskSpec>& tasks);
std::vector<TaskSpec> read_tasks_json(std::istream& in);

}  // namespace prefrobust::prefdata
