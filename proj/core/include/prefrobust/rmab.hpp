#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "prefrobust/reward_program.hpp"

namespace prefrobust::rmab {

/// Two-state, two-action arm. transitions[s][a][s'] = P(s' | s, a); state 1 is "engaged".
struct ArmModel {
  std::array<std::array<std::array<double, 2>, 2>, 2> transitions{};
  FeatureMap features;

  double engage_probability(int state, int action) const { return transitions[state][action][1]; }

  /// Throws InputError unless every row is a distribution (entries in [0,1], sum 1 within 1e-12).
  void validate() const;
};

struct RmabInstance {
  std::vector<ArmModel> arms;
  std::size_t budget = 0;
  double discount = 0.9;
  std::size_t horizon = 0;

  void validate() const;

  /// Union of feature names over all arms, sorted.
  std::set<std::string> feature_names() const;
};

struct WhittleOptions {
  double vi_tol = 1e-9;
  double bs_tol = 1e-6;
  int max_vi_iterations = 100000;
  int max_halvings = 200;
};

/// R(0), R(1) of one arm under a reward program.
struct ArmRewards {
  double passive_state = 0.0;  // R(0)
  double engaged_state = 0.0;  // R(1)

  double at(int state) const { return state == 0 ? passive_state : engaged_state; }
  double max_abs() const;
};

ArmRewards arm_rewards(const ArmModel& arm, const RewardProgram& program);

/// Q(s, 0, lambda) and Q(s, 1, lambda) for one state of the subsidised MDP.
struct SubsidizedQ {
  double passive = 0.0;
  double active = 0.0;

  double gap() const { return passive - active; }
};

/// Value iteration on the arm's MDP with subsidy `lambda` paid for the passive action.
std::array<SubsidizedQ, 2> subsidized_q(const ArmModel& arm, const ArmRewards& rewards, double discount, double lambda,
                                        const WhittleOptions& options = {});

/// Whittle index per state: the smallest subsidy making both actions equally valuable.
/// Throws ModelAssumptionError for non-indexable arms or if no bracket straddles the root.
std::array<double, 2> whittle_index(const ArmModel& arm, const ArmRewards& rewards, double discount,
                                    const WhittleOptions& options = {});
std::array<double, 2> whittle_index(const ArmModel& arm, const RewardProgram& program, double discount,
                                    const WhittleOptions& options = {});

struct WhittleTable {
  std::vector<std::array<double, 2>> index;  // index[arm][state]

  double at(std::size_t arm, int state) const { return index[arm][state]; }
};

/// Per-arm indices; arms are independent and run on up to `jobs` threads.
WhittleTable whittle_table(const RmabInstance& env, const RewardProgram& program, const WhittleOptions& options = {},
                           unsigned jobs = 1);

/// Activates the K arms with the largest W_i(s_i); ties go to the lower arm index.
std::vector<int> top_k_actions(const WhittleTable& whittle, std::span<const int> states, std::size_t k);

struct TrajectoryStep {
  std::size_t step = 0;
  std::size_t arm = 0;
  int state = 0;
  int action = 0;
};

struct SimulationResult {
  std::size_t n_arms = 0;
  std::vector<TrajectoryStep> steps;  // step-major, arm-minor
  double discounted_reward = 0.0;
  std::vector<std::size_t> engagement;  // per arm: number of steps spent in state 1
};

/// Rolls out the top-K Whittle policy for env.horizon steps from the all-zero state.
/// Arm i's transitions draw from its own stream derived from (seed, i), so two programs
/// simulated with one seed see common random numbers.
SimulationResult simulate(const RmabInstance& env, const RewardProgram& program, std::uint64_t seed,
                          const WhittleOptions& options = {});

/// Feature name -> total engagement of arms carrying that feature.
using CategorySummary = std::map<std::string, double>;

CategorySummary summarize_by_category(const SimulationResult& result, const std::vector<ArmModel>& arms);

/// Writes "step,arm,state,action" CSV with header.
void write_trajectory_csv(std::ostream& out, const SimulationResult& result);

/// Arm models as JSONL: {"transitions": [[[..],[..]],[[..],[..]]], "features": {name: 0|1}}.
std::vector<ArmModel> read_arms_jsonl(std::istream& in);
void write_arms_jsonl(std::ostream& out, const std::vector<ArmModel>& arms);

/// One beneficiary attribute group; each arm carries exactly one feature per category.
struct FeatureCategory {
  std::string name;
  std::vector<std::string> features;
};

const std::vector<FeatureCategory>& desk_feature_categories();
std::set<std::string> desk_feature_names();

struct DeskEnvironmentOptions {
  std::size_t n_arms = 50;
  std::size_t budget = 5;
  std::size_t horizon = 20;
  double discount = 0.9;
  std::uint64_t seed = 7;
};

/// Synthetic arms: Beta(2,2) transition probabilities with the active action never
/// lowering the engagement probability, and one feature drawn per category.
RmabInstance make_desk_environment(const DeskEnvironmentOptions& options = {});

}  // namespace prefrobust::rmab
