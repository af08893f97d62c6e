#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "prefrobust/error.hpp"
#include "prefrobust/evalmetrics.hpp"

using namespace prefrobust;
using namespace prefrobust::evalmetrics;

namespace {

// Two interchangeable arms: active moves to the engaged state, passive to the other.
// With budget 1 the policy pulls whichever arm its program ranks higher.
rmab::RmabInstance two_arm_env() {
  rmab::ArmModel a;
  a.transitions[0][0] = {1.0, 0.0};
  a.transitions[0][1] = {0.0, 1.0};
  a.transitions[1][0] = {1.0, 0.0};
  a.transitions[1][1] = {0.0, 1.0};
  rmab::RmabInstance env;
  env.arms = {a, a};
  env.arms[0].features = {{"x", 0}, {"y", 1}};
  env.arms[1].features = {{"x", 1}, {"y", 0}};
  env.budget = 1;
  env.horizon = 6;
  return env;
}

EvalTask task_with(std::vector<std::vector<std::string>> pools, std::vector<std::string> refs) {
  EvalTask t;
  t.task_id = "t0";
  t.prompt = "favour x";
  t.judge.task_weights = {{"x", 1.0}};
  t.pools = std::move(pools);
  t.references = std::move(refs);
  t.simulation_seed = 3;
  return t;
}

policy::TabularPolicy uniform_policy(const std::vector<EvalTask>& tasks) {
  std::vector<policy::TabularPolicy::Table> tables;
  for (const auto& t : tasks) {
    policy::TabularPolicy::Table table{t.prompt, {}};
    for (const auto& pool : t.pools) {
      for (const auto& c : pool) {
        if (std::find(table.candidates.begin(), table.candidates.end(), c) == table.candidates.end()) {
          table.candidates.push_back(c);
        }
      }
    }
    tables.push_back(table);
  }
  return policy::TabularPolicy(tables);
}

}  // namespace

TEST_SUITE("evalmetrics") {
  TEST_CASE("generation picks the highest log-ratio, first on ties") {
    auto f = std::make_shared<policy::LookupFeaturizer>(1);
    f->add("p", "a", {1.0});
    f->add("p", "b", {3.0});
    f->add("p", "c", {3.0});
    policy::LogLinearPolicy pol(f, {1.0}, {0.0});
    const std::vector<std::string> cands{"a", "b", "c"};
    CHECK(generate_response_index(pol, "p", cands) == 1);
    CHECK(generate_response(pol, "p", cands) == "b");
    pol.set_params(std::vector<double>{-1.0});
    CHECK(generate_response(pol, "p", cands) == "a");
    CHECK_THROWS_AS(generate_response_index(pol, "p", std::span<const std::string>{}), InputError);
  }

  TEST_CASE("win rate and eval reward examples") {
    const std::vector<double> g{2, 1, 3}, c{1, 1, 1};
    const auto w = win_rate(g, c);
    CHECK(w.value == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(w.standard_error == doctest::Approx(std::sqrt(2.0 / 27.0)).epsilon(1e-15));
    CHECK(win_rate(c, c).value == 0.0);
    CHECK_THROWS_AS(win_rate(g, std::vector<double>{1, 1}), InputError);
    CHECK_THROWS_AS(win_rate(std::vector<double>{}, std::vector<double>{}), InputError);

    const auto r = eval_reward(std::vector<double>{1, 2, 3, 4});
    CHECK(r.value == 2.5);
    CHECK(r.standard_error == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-15));
    CHECK(eval_reward(std::vector<double>{7}).standard_error == 0.0);
  }

  TEST_CASE("generating the reference itself never wins") {
    const auto env = two_arm_env();
    const std::vector<EvalTask> tasks{task_with({{"s"}, {"s"}}, {"s", "s + s * y"})};
    const auto pol = uniform_policy(tasks);
    const auto report = rmab_win_rate(pol, tasks, env);
    CHECK(report.n_eval == 4);
    CHECK(report.win_rate.value == 0.0);
    CHECK(report.parse_failures == 0);
  }

  TEST_CASE("a program aligned with the judge beats the misaligned references") {
    const auto env = two_arm_env();
    const std::vector<EvalTask> tasks{task_with({{"s + 2 * s * x"}}, {"s", "s + s * y"})};
    const auto pol = uniform_policy(tasks);
    const auto report = rmab_win_rate(pol, tasks, env);
    CHECK(report.win_rate.value == 1.0);
    CHECK(report.eval_reward.value == 1.0);
    REQUIRE(report.per_task.size() == 1);
    CHECK(report.per_task[0].generated == std::vector<std::string>{"s + 2 * s * x"});
  }

  TEST_CASE("unparsable generations lose and are counted") {
    const auto env = two_arm_env();
    const std::vector<EvalTask> tasks{task_with({{"s + unknown"}, {"s + 2 * s * x"}}, {"s"})};
    const auto pol = uniform_policy(tasks);
    const auto report = rmab_win_rate(pol, tasks, env);
    CHECK(report.parse_failures == 1);
    CHECK(report.n_eval == 2);
    CHECK(report.win_rate.value == 0.5);
  }

  TEST_CASE("the overall win rate weights tasks by their comparison counts") {
    const auto env = two_arm_env();
    auto t0 = task_with({{"s + 2 * s * x"}}, {"s", "s + s * y", "s + 3 * s * y"});
    auto t1 = task_with({{"s"}, {"s + s * x"}}, {"s"});
    t1.task_id = "t1";
    t1.prompt = "other";
    const std::vector<EvalTask> tasks{t0, t1};
    const auto pol = uniform_policy(tasks);
    const auto report = rmab_win_rate(pol, tasks, env, {}, 4);
    double weighted = 0.0;
    std::size_t total = 0;
    for (const auto& r : report.per_task) {
      weighted += r.win_rate * static_cast<double>(r.n);
      total += r.n;
    }
    CHECK(total == report.n_eval);
    CHECK(report.win_rate.value == doctest::Approx(weighted / static_cast<double>(total)).epsilon(1e-15));
    const auto serial = rmab_win_rate(pol, tasks, env, {}, 1);
    std::ostringstream a, b;
    write_report_json(a, report);
    write_report_json(b, serial);
    CHECK(a.str() == b.str());
    std::ostringstream csv;
    write_report_csv(csv, report);
    CHECK(csv.str().rfind("task_id,win_rate,n\nt0,", 0) == 0);
  }

  TEST_CASE("chosen references and eval pools") {
    using prefdata::PreferenceSample;
    const std::vector<PreferenceSample> data{
        {"a", "p", "s + s * x", "s", 0.7, {}},
        {"a", "p", "s", "s + s * y", 0.5, {}},
        {"a", "p", "s + s * y", "s + s * x", 0.2, {}},
    };
    const auto refs = chosen_references(data);
    CHECK(refs.at("a") == std::vector<std::string>{"s + s * x", "s"});

    const auto specs = prefdata::make_tasks(1, 3, rmab::desk_feature_categories());
    std::vector<PreferenceSample> d2;
    for (auto s : data) {
      s.task_id = specs[0].task_id;
      d2.push_back(s);
    }
    const auto tasks = make_eval_tasks(specs, d2, rmab::desk_feature_categories(), 5, 3, 11, 12);
    REQUIRE(tasks.size() == 1);
    CHECK(tasks[0].pools.size() == 3);
    for (const auto& pool : tasks[0].pools) {
      CHECK(pool.size() == 5);
      for (const auto& c : pool) {
        for (const auto& s : d2) {
          CHECK(prefdata::normalize_expression(c) != prefdata::normalize_expression(s.response_a));
          CHECK(prefdata::normalize_expression(c) != prefdata::normalize_expression(s.response_b));
        }
      }
    }
    CHECK(tasks[0].simulation_seed == prefdata::task_simulation_seed(12, 0));
  }
}
