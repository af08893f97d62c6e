#include "prefrobust/prefdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>
#include <json.hpp>

#include "prefrobust/error.hpp"
#include "prefrobust/parallel.hpp"

namespace prefrobust::prefdata {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::uint64_t kCandidateStream = 1;
constexpr std::uint64_t kSimulationStream = 2;
constexpr std::uint64_t kPairStream = 3;
constexpr std::uint64_t kQueryStream = 4;

// Judge weights are multiples of this; chosen so that oracle preferences between
// candidates of the default desk environment mostly fall within (0.1, 0.9).
constexpr double kJudgeWeightScale = 64.0;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

const rmab::FeatureCategory& category_of(const std::string& feature,
                                         const std::vector<rmab::FeatureCategory>& categories) {
  for (const auto& c : categories) {
    if (std::find(c.features.begin(), c.features.end(), feature) != c.features.end()) return c;
  }
  throw InputError("feature '" + feature + "' belongs to no known category");
}

}  // namespace

std::string_view to_string(QSource s) {
  switch (s) {
    case QSource::averaged_queries:
      return "averaged-queries";
    case QSource::direct_score:
      return "direct-score";
    case QSource::hard_label_smoothed:
      return "hard-label-smoothed";
  }
  return "averaged-queries";
}

QSource parse_q_source(std::string_view name) {
  if (name == "averaged-queries") return QSource::averaged_queries;
  if (name == "direct-score") return QSource::direct_score;
  if (name == "hard-label-smoothed") return QSource::hard_label_smoothed;
  throw InputError("unknown q_source '" + std::string(name) + "'");
}

std::string normalize_expression(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

void PreferenceSample::validate() const {
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("sample " + task_id + ": q must lie in [0,1]");
  if (normalize_expression(response_a) == normalize_expression(response_b)) {
    throw InputError("sample " + task_id + ": response_a and response_b are identical");
  }
}

void OracleJudge::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InputError("judge temperature must be > 0");
  bool any = false;
  for (const auto& [name, w] : task_weights) {
    if (!std::isfinite(w)) throw InputError("judge weight for '" + name + "' is not finite");
    any = any || w != 0.0;
  }
  if (!any) throw InputError("judge needs at least one nonzero weight");
}

double OracleJudge::score(const rmab::CategorySummary& summary) const {
  double total = 0.0;
  for (const auto& [name, v] : summary) total += v;
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (const auto& [name, w] : task_weights) {
    const auto it = summary.find(name);
    if (it == summary.end()) throw InputError("category summary has no entry for judged feature '" + name + "'");
    s += w * it->second / total;
  }
  return s;
}

double oracle_preference(const OracleJudge& judge, const rmab::CategorySummary& summary_a,
                         const rmab::CategorySummary& summary_b) {
  if (summary_a.size() != summary_b.size() ||
      !std::equal(summary_a.begin(), summary_a.end(), summary_b.begin(),
                  [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw InputError("oracle_preference: summaries cover different category sets");
  }
  judge.validate();
  return sigmoid((judge.score(summary_a) - judge.score(summary_b)) / judge.temperature);
}

double estimate_q_by_sampling(double q_true, std::size_t repeats, RandomStream& rng) {
  if (repeats == 0) throw InputError("estimate_q_by_sampling: repeats must be >= 1");
  if (!(q_true >= 0.0 && q_true <= 1.0)) throw InputError("estimate_q_by_sampling: q_true outside [0,1]");
  std::size_t successes = 0;
  for (std::size_t i = 0; i < repeats; ++i) successes += rng.bernoulli(q_true) ? 1 : 0;
  return static_cast<double>(successes) / static_cast<double>(repeats);
}

void DatasetManifest::validate() const {
  if (n_tasks == 0) throw InputError("manifest: n_tasks must be >= 1");
  if (candidates_per_task < 2) throw InputError("manifest: candidates_per_task must be >= 2");
  if (repeats == 0) throw InputError("manifest: repeats must be >= 1");
  const std::size_t max_pairs = candidates_per_task * (candidates_per_task - 1) / 2;
  if (pairs_per_task == 0 || pairs_per_task > max_pairs) {
    throw InputError("manifest: pairs_per_task must lie in [1, " + std::to_string(max_pairs) + "]");
  }
}

const std::vector<std::string>& DatasetManifest::config_keys() {
  static const std::vector<std::string> keys = {"n_tasks",  "candidates_per_task", "pairs_per_task", "repeats", "seed",
                                                "task_seed"};
  return keys;
}

DatasetManifest DatasetManifest::from_config(const KeyValueConfig& cfg) {
  DatasetManifest m;
  m.n_tasks = cfg.require_uint("n_tasks");
  m.candidates_per_task = cfg.get_uint("candidates_per_task", m.candidates_per_task);
  m.pairs_per_task = cfg.get_uint("pairs_per_task", m.pairs_per_task);
  m.repeats = cfg.get_uint("repeats", m.repeats);
  m.seed = cfg.get_uint("seed", m.seed);
  m.task_seed = cfg.get_uint("task_seed", m.task_seed);
  m.validate();
  return m;
}

std::string describe_task(const OracleJudge& judge) {
  std::string text = "Prioritize";
  bool first = true;
  for (const auto& [name, w] : judge.task_weights) {
    text += first ? " " : ", ";
    text += name + " (weight " + format_number(w) + ")";
    first = false;
  }
  return text;
}

std::vector<TaskSpec> make_tasks(std::size_t n_tasks, std::uint64_t task_seed,
                                 const std::vector<rmab::FeatureCategory>& categories) {
  if (categories.empty()) throw InputError("make_tasks: no feature categories");
  std::vector<TaskSpec> tasks;
  tasks.reserve(n_tasks);
  for (std::size_t t = 0; t < n_tasks; ++t) {
    RandomStream rng(derive_seed(task_seed, {t}));
    OracleJudge judge;
    const std::size_t n_cats = std::min<std::size_t>(categories.size(), 1 + rng.below(2));
    std::vector<std::size_t> cat_order(categories.size());
    for (std::size_t i = 0; i < cat_order.size(); ++i) cat_order[i] = i;
    for (std::size_t i = cat_order.size(); i > 1; --i) std::swap(cat_order[i - 1], cat_order[rng.below(i)]);
    for (std::size_t c = 0; c < n_cats; ++c) {
      const auto& features = categories[cat_order[c]].features;
      const std::size_t n_feat = std::min<std::size_t>(features.size(), n_cats == 1 ? 1 + rng.below(2) : 1);
      std::vector<std::size_t> idx(features.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
      for (std::size_t f = 0; f < n_feat; ++f) {
        judge.task_weights[features[idx[f]]] = kJudgeWeightScale * static_cast<double>(1 + rng.below(3));
      }
    }
    char id[32];
    std::snprintf(id, sizeof id, "task-%03zu", t);
    tasks.push_back({id, describe_task(judge), std::move(judge)});
  }
  return tasks;
}

std::string sample_candidate(const OracleJudge& judge, const std::vector<rmab::FeatureCategory>& categories,
                             RandomStream& rng) {
  if (categories.empty()) throw InputError("sample_candidate: no feature categories");
  std::vector<std::string> focus;
  for (const auto& [name, w] : judge.task_weights) {
    if (w != 0.0) focus.push_back(name);
  }

  std::string text = "s";
  const std::size_t n_terms = 1 + rng.below(3);
  for (std::size_t term = 0; term < n_terms; ++term) {
    const int coefficient = 1 + static_cast<int>(rng.below(3));

    std::string anchor;
    if (!focus.empty() && rng.bernoulli(0.7)) {
      anchor = focus[rng.below(focus.size())];
    } else {
      const auto& cat = categories[rng.below(categories.size())];
      anchor = cat.features[rng.below(cat.features.size())];
    }
    const auto& anchor_cat = category_of(anchor, categories);

    const bool use_or = rng.bernoulli(0.5);
    const std::size_t arity = 1 + rng.below(3);
    std::vector<std::string> clause{anchor};
    for (std::size_t k = 1; k < arity; ++k) {
      // `or` widens within the anchor's category; `and` intersects with other categories.
      const rmab::FeatureCategory* cat = &anchor_cat;
      if (!use_or) {
        if (categories.size() < 2) break;
        do {
          cat = &categories[rng.below(categories.size())];
        } while (cat == &anchor_cat);
      }
      const std::string& f = cat->features[rng.below(cat->features.size())];
      if (std::find(clause.begin(), clause.end(), f) == clause.end()) clause.push_back(f);
    }

    text += " + " + std::to_string(coefficient) + " * s * ";
    if (clause.size() == 1) {
      text += clause[0];
    } else {
      text += "(";
      for (std::size_t k = 0; k < clause.size(); ++k) {
        if (k) text += use_or ? " or " : " and ";
        text += clause[k];
      }
      text += ")";
    }
  }
  return text;
}

std::vector<std::string> sample_candidate_pool(const OracleJudge& judge,
                                               const std::vector<rmab::FeatureCategory>& categories, std::size_t count,
                                               RandomStream& rng) {
  std::vector<std::string> pool;
  std::set<std::string> seen;
  const std::size_t max_attempts = 1000 * std::max<std::size_t>(count, 1);
  for (std::size_t attempt = 0; pool.size() < count && attempt < max_attempts; ++attempt) {
    std::string c = sample_candidate(judge, categories, rng);
    if (seen.insert(normalize_expression(c)).second) pool.push_back(std::move(c));
  }
  if (pool.size() < count) {
    throw InputError("candidate grammar produced only " + std::to_string(pool.size()) + " distinct expressions");
  }
  return pool;
}

std::uint64_t task_simulation_seed(std::uint64_t seed, std::size_t task_index) {
  return derive_seed(seed, {task_index, kSimulationStream});
}

std::vector<PreferenceSample> generate_dataset(const DatasetManifest& manifest, const rmab::RmabInstance& env,
                                               const std::vector<TaskSpec>& tasks,
                                               const std::vector<rmab::FeatureCategory>& categories, unsigned jobs) {
  manifest.validate();
  env.validate();
  if (tasks.size() != manifest.n_tasks) {
    throw InputError("generate_dataset: " + std::to_string(tasks.size()) +
                     " tasks for n_tasks=" + std::to_string(manifest.n_tasks));
  }
  const std::set<std::string> known = env.feature_names();

  std::vector<std::vector<PreferenceSample>> per_task(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t t) {
    const TaskSpec& task = tasks[t];
    task.judge.validate();
    RandomStream cand_rng(derive_seed(manifest.seed, {t, kCandidateStream}));
    const std::vector<std::string> pool =
        sample_candidate_pool(task.judge, categories, manifest.candidates_per_task, cand_rng);

    const std::uint64_t sim_seed = task_simulation_seed(manifest.seed, t);
    std::vector<std::string> valid;
    std::vector<rmab::CategorySummary> summaries;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      try {
        const auto program = rmab::parse_reward(pool[c], known);
        const auto sim = rmab::simulate(env, program, sim_seed);
        summaries.push_back(rmab::summarize_by_category(sim, env.arms));
        valid.push_back(pool[c]);
      } catch (const std::exception& e) {
        spdlog::warn("{}: candidate {} skipped ({}): {}", task.task_id, c, pool[c], e.what());
      }
    }

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < valid.size(); ++i) {
      for (std::size_t j = i + 1; j < valid.size(); ++j) pairs.emplace_back(i, j);
    }
    if (pairs.size() < manifest.pairs_per_task) {
      throw InputError(task.task_id + ": only " + std::to_string(pairs.size()) + " valid pairs, need " +
                       std::to_string(manifest.pairs_per_task));
    }
    RandomStream pair_rng(derive_seed(manifest.seed, {t, kPairStream}));
    for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[pair_rng.below(i)]);

    RandomStream query_rng(derive_seed(manifest.seed, {t, kQueryStream}));
    auto& out = per_task[t];
    out.reserve(manifest.pairs_per_task);
    for (std::size_t k = 0; k < manifest.pairs_per_task; ++k) {
      auto [a, b] = pairs[k];
      if (pair_rng.bernoulli(0.5)) std::swap(a, b);
      const double q_true = oracle_preference(task.judge, summaries[a], summaries[b]);
      PreferenceSample sample{task.task_id,
                              task.prompt,
                              valid[a],
                              valid[b],
                              estimate_q_by_sampling(q_true, manifest.repeats, query_rng),
                              QSource::averaged_queries};
      sample.validate();
      out.push_back(std::move(sample));
    }
  });

  std::vector<PreferenceSample> samples;
  samples.reserve(manifest.n_tasks * manifest.pairs_per_task);
  for (auto& block : per_task) {
    for (auto& s : block) samples.push_back(std::move(s));
  }
  return samples;
}

void write_jsonl(std::ostream& out, const std::vector<PreferenceSample>& samples) {
  for (const auto& s : samples) {
    ordered_json j;
    j["task_id"] = s.task_id;
    j["prompt"] = s.prompt;
    j["response_a"] = s.response_a;
    j["response_b"] = s.response_b;
    j["q"] = s.q;
    j["q_source"] = std::string(to_string(s.q_source));
    out << j.dump() << '\n';
  }
}

std::vector<PreferenceSample> read_jsonl(std::istream& in) {
  std::vector<PreferenceSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      PreferenceSample s;
      s.task_id = j.at("task_id").get<std::string>();
      s.prompt = j.at("prompt").get<std::string>();
      s.response_a = j.at("response_a").get<std::string>();
      s.response_b = j.at("response_b").get<std::string>();
      s.q = j.at("q").get<double>();
      s.q_source = parse_q_source(j.at("q_source").get<std::string>());
      s.validate();
      samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw InputError("dataset line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

void write_tasks_json(std::ostream& out, const std::vector<TaskSpec>& tasks) {
  ordered_json arr = ordered_json::array();
  for (const auto& t : tasks) {
    ordered_json j;
    j["task_id"] = t.task_id;
    j["prompt"] = t.prompt;
    j["temperature"] = t.judge.temperature;
    j["weights"] = t.judge.task_weights;
    arr.push_back(std::move(j));
  }
  out << arr.dump(2) << '\n';
}

std::vector<TaskSpec> read_tasks_json(std::istream& in) {
  std::vector<TaskSpec> tasks;
  try {
    const auto arr = json::parse(in);
    for (const auto& j : arr) {
      TaskSpec t;
      t.task_id = j.at("task_id").get<std::string>();
      t.prompt = j.at("prompt").get<std::string>();
      t.judge.temperature = j.at("temperature").get<double>();
      t.judge.task_weights = j.at("weights").get<std::map<std::string, double>>();
      t.judge.validate();
      tasks.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("tasks file: ") + e.what());
  }
  return tasks;
}

}  // namespace prefrobust::prefdata
