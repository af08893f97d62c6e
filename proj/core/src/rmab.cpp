#include "prefrobust/rmab.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "prefrobust/error.hpp"
#include "prefrobust/parallel.hpp"
#include "prefrobust/rng.hpp"

namespace prefrobust::rmab {
namespace {

constexpr double kRowSumTolerance = 1e-12;

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void ArmModel::validate() const {
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a) {
      const auto& row = transitions[s][a];
      for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0)) {
          throw InputError("transition probability outside [0,1] in T[" + std::to_string(s) + "][" + std::to_string(a) +
                           "]");
        }
      }
      if (std::abs(row[0] + row[1] - 1.0) > kRowSumTolerance) {
        throw InputError("transition row T[" + std::to_string(s) + "][" + std::to_string(a) + "] sums to " +
                         fmt_double(row[0] + row[1]) + ", not 1");
      }
    }
  }
  for (const auto& [name, v] : features) {
    if (v != 0 && v != 1) throw InputError("feature '" + name + "' must be 0 or 1");
  }
}

void RmabInstance::validate() const {
  for (const auto& arm : arms) arm.validate();
  if (budget > arms.size()) {
    throw InputError("budget K=" + std::to_string(budget) + " exceeds number of arms " + std::to_string(arms.size()));
  }
  if (!(discount >= 0.0 && discount < 1.0)) throw InputError("discount must lie in [0, 1)");
}

std::set<std::string> RmabInstance::feature_names() const {
  std::set<std::string> names;
  for (const auto& arm : arms) {
    for (const auto& [name, v] : arm.features) names.insert(name);
  }
  return names;
}

double ArmRewards::max_abs() const { return std::max(std::abs(passive_state), std::abs(engaged_state)); }

ArmRewards arm_rewards(const ArmModel& arm, const RewardProgram& program) {
  program.validate_for_arm(arm.features);
  return {program.evaluate(0, arm.features), program.evaluate(1, arm.features)};
}

std::array<SubsidizedQ, 2> subsidized_q(const ArmModel& arm, const ArmRewards& rewards, double discount, double lambda,
                                        const WhittleOptions& options) {
  const auto& T = arm.transitions;
  std::array<double, 2> v{0.0, 0.0};
  std::array<SubsidizedQ, 2> q{};
  auto backup = [&](const std::array<double, 2>& value) {
    std::array<SubsidizedQ, 2> out{};
    for (int s = 0; s < 2; ++s) {
      const double cont_passive = T[s][0][0] * value[0] + T[s][0][1] * value[1];
      const double cont_active = T[s][1][0] * value[0] + T[s][1][1] * value[1];
      out[s].passive = rewards.at(s) + lambda + discount * cont_passive;
      out[s].active = rewards.at(s) + discount * cont_active;
    }
    return out;
  };
  for (int it = 0; it < options.max_vi_iterations; ++it) {
    q = backup(v);
    const std::array<double, 2> next{std::max(q[0].passive, q[0].active), std::max(q[1].passive, q[1].active)};
    const double delta = std::max(std::abs(next[0] - v[0]), std::abs(next[1] - v[1]));
    v = next;
    if (delta < options.vi_tol) return backup(v);
  }
  throw NumericError("value iteration did not converge within " + std::to_string(options.max_vi_iterations) +
                     " sweeps (discount " + fmt_double(discount) + ")");
}

std::array<double, 2> whittle_index(const ArmModel& arm, const ArmRewards& rewards, double discount,
                                    const WhittleOptions& options) {
  if (!(discount >= 0.0 && discount < 1.0)) throw InputError("discount must lie in [0, 1)");
  if (!(options.vi_tol > 0.0) || !(options.bs_tol > 0.0)) throw InputError("Whittle tolerances must be > 0");

  std::array<double, 2> result{};
  for (int s = 0; s < 2; ++s) {
    auto gap = [&](double lambda) { return subsidized_q(arm, rewards, discount, lambda, options)[s].gap(); };

    double bound = std::max(1.0, rewards.max_abs() / (1.0 - discount) + rewards.max_abs());
    double g_lo = gap(-bound);
    double g_hi = gap(bound);
    for (int expand = 0; expand < 60 && !(g_lo <= 0.0 && g_hi >= 0.0); ++expand) {
      bound *= 2.0;
      g_lo = gap(-bound);
      g_hi = gap(bound);
    }
    if (!(g_lo <= 0.0 && g_hi >= 0.0)) {
      throw ModelAssumptionError("no sign change of the Q-gap in [-" + fmt_double(bound) + ", " + fmt_double(bound) +
                                 "] for state " + std::to_string(s) + ": gap(lo)=" + fmt_double(g_lo) +
                                 ", gap(hi)=" + fmt_double(g_hi));
    }

    // Bisection is only meaningful when the gap is monotone in the subsidy.
    constexpr int kProbe = 8;
    double prev = g_lo;
    for (int k = 1; k <= kProbe; ++k) {
      const double g = gap(-bound + 2.0 * bound * k / kProbe);
      if (g < prev - 1e-9 * (1.0 + std::abs(prev))) {
        throw ModelAssumptionError("arm is not indexable: Q-gap decreases in the subsidy for state " +
                                   std::to_string(s));
      }
      prev = g;
    }

    double lo = -bound;
    double hi = bound;
    double index = 0.5 * (lo + hi);
    for (int i = 0; i < options.max_halvings; ++i) {
      const double mid = 0.5 * (lo + hi);
      const double g = gap(mid);
      if (g >= 0.0) {
        hi = mid;
      } else {
        lo = mid;
      }
      index = mid;
      if (hi - lo <= options.bs_tol && std::abs(g) <= options.bs_tol) break;
    }
    result[s] = index;
  }
  return result;
}

std::array<double, 2> whittle_index(const ArmModel& arm, const RewardProgram& program, double discount,
                                    const WhittleOptions& options) {
  return whittle_index(arm, arm_rewards(arm, program), discount, options);
}

WhittleTable whittle_table(const RmabInstance& env, const RewardProgram& program, const WhittleOptions& options,
                           unsigned jobs) {
  WhittleTable table;
  table.index.resize(env.arms.size());
  parallel_for(env.arms.size(), jobs, [&](std::size_t i) {
    try {
      table.index[i] = whittle_index(env.arms[i], program, env.discount, options);
    } catch (const ModelAssumptionError& e) {
      throw ModelAssumptionError("arm " + std::to_string(i) + ": " + e.what());
    }
  });
  return table;
}

std::vector<int> top_k_actions(const WhittleTable& whittle, std::span<const int> states, std::size_t k) {
  const std::size_t n = states.size();
  if (whittle.index.size() != n) throw InputError("state vector and Whittle table disagree on arm count");
  if (k > n) throw InputError("budget exceeds number of arms");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return whittle.at(a, states[a]) > whittle.at(b, states[b]); });
  std::vector<int> actions(n, 0);
  for (std::size_t j = 0; j < k; ++j) actions[order[j]] = 1;
  return actions;
}

SimulationResult simulate(const RmabInstance& env, const RewardProgram& program, std::uint64_t seed,
                          const WhittleOptions& options) {
  env.validate();
  const std::size_t n = env.arms.size();

  SimulationResult result;
  result.n_arms = n;
  result.engagement.assign(n, 0);
  if (env.horizon == 0) return result;

  std::vector<ArmRewards> rewards;
  rewards.reserve(n);
  for (const auto& arm : env.arms) rewards.push_back(arm_rewards(arm, program));
  const WhittleTable table = whittle_table(env, program, options);

  std::vector<RandomStream> streams;
  streams.reserve(n);
  for (std::size_t i = 0; i < n; ++i) streams.emplace_back(derive_seed(seed, {i}));

  std::vector<int> states(n, 0);
  result.steps.reserve(n * env.horizon);
  double weight = 1.0;
  for (std::size_t t = 0; t < env.horizon; ++t) {
    const std::vector<int> actions = top_k_actions(table, states, env.budget);
    double step_reward = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      result.steps.push_back({t, i, states[i], actions[i]});
      step_reward += rewards[i].at(states[i]);
      if (states[i] == 1) ++result.engagement[i];
    }
    result.discounted_reward += weight * step_reward;
    weight *= env.discount;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = streams[i].uniform();
      states[i] = u < env.arms[i].engage_probability(states[i], actions[i]) ? 1 : 0;
    }
  }
  return result;
}

CategorySummary summarize_by_category(const SimulationResult& result, const std::vector<ArmModel>& arms) {
  if (arms.size() != result.n_arms) throw InputError("trajectory and arm list disagree on arm count");
  CategorySummary summary;
  for (const auto& arm : arms) {
    for (const auto& [name, v] : arm.features) summary.emplace(name, 0.0);
  }
  for (std::size_t i = 0; i < arms.size(); ++i) {
    for (const auto& [name, v] : arms[i].features) {
      if (v == 1) summary[name] += static_cast<double>(result.engagement[i]);
    }
  }
  return summary;
}

void write_trajectory_csv(std::ostream& out, const SimulationResult& result) {
  out << "step,arm,state,action\n";
  for (const auto& s : result.steps) out << s.step << ',' << s.arm << ',' << s.state << ',' << s.action << '\n';
}

std::vector<ArmModel> read_arms_jsonl(std::istream& in) {
  std::vector<ArmModel> arms;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ArmModel arm;
      const auto& t = j.at("transitions");
      if (!t.is_array() || t.size() != 2) throw InputError("transitions must be a 2x2x2 array");
      for (int s = 0; s < 2; ++s) {
        if (!t[s].is_array() || t[s].size() != 2) throw InputError("transitions must be a 2x2x2 array");
        for (int a = 0; a < 2; ++a) {
          if (!t[s][a].is_array() || t[s][a].size() != 2) throw InputError("transitions must be a 2x2x2 array");
          for (int s2 = 0; s2 < 2; ++s2) arm.transitions[s][a][s2] = t[s][a][s2].get<double>();
        }
      }
      if (j.contains("features")) {
        for (const auto& [name, v] : j.at("features").items()) arm.features[name] = v.get<int>();
      }
      arm.validate();
      arms.push_back(std::move(arm));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("arm file line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("arm file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return arms;
}

void write_arms_jsonl(std::ostream& out, const std::vector<ArmModel>& arms) {
  for (const auto& arm : arms) {
    nlohmann::ordered_json j;
    j["transitions"] = arm.transitions;
    j["features"] = arm.features;
    out << j.dump() << '\n';
  }
}

const std::vector<FeatureCategory>& desk_feature_categories() {
  static const std::vector<FeatureCategory> categories = {
      {"age", {"age_10_20", "age_21_30", "age_31_40", "age_41_50", "age_51_60"}},
      {"income", {"income_0_5000", "income_5001_10000", "income_10001_15000", "income_15001_plus"}},
      {"education", {"illiterate", "education_1_9", "education_10_12", "education_graduate"}},
      {"call_slot", {"8_30-10_30am", "10_30-12_30pm", "12_30-3pm", "3_30-5_30pm", "5_30-7_30pm"}},
      {"registration", {"NGO_registered", "ARMMAN_registered", "PHC_registered"}},
      {"language", {"speaks_hindi", "speaks_marathi"}},
  };
  return categories;
}

std::set<std::string> desk_feature_names() {
  std::set<std::string> names;
  for (const auto& c : desk_feature_categories()) names.insert(c.features.begin(), c.features.end());
  return names;
}

RmabInstance make_desk_environment(const DeskEnvironmentOptions& options) {
  RmabInstance env;
  env.budget = options.budget;
  env.horizon = options.horizon;
  env.discount = options.discount;
  env.arms.reserve(options.n_arms);

  RandomStream rng(derive_seed(options.seed, {0x656E76}));
  for (std::size_t i = 0; i < options.n_arms; ++i) {
    ArmModel arm;
    for (int s = 0; s < 2; ++s) {
      double a = rng.beta22();
      double b = rng.beta22();
      if (a > b) std::swap(a, b);
      // Passive engages with the smaller probability: calling never hurts.
      arm.transitions[s][0] = {1.0 - a, a};
      arm.transitions[s][1] = {1.0 - b, b};
    }
    for (const auto& category : desk_feature_categories()) {
      const std::size_t pick = rng.below(category.features.size());
      for (std::size_t f = 0; f < category.features.size(); ++f) arm.features[category.features[f]] = f == pick;
    }
    env.arms.push_back(std::move(arm));
  }
  env.validate();
  return env;
}

}  // namespace prefrobust::rmab
