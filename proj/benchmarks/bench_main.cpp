#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "prefrobust/dro.hpp"
#include "prefrobust/loss.hpp"
#include "prefrobust/policy.hpp"
#include "prefrobust/reward_program.hpp"
#include "prefrobust/rmab.hpp"
#include "prefrobust/rng.hpp"

using namespace prefrobust;

static void bm_worst_case_chi2(benchmark::State& state) {
  RandomStream rng(1);
  std::vector<std::array<double, 4>> inputs(1024);
  for (auto& in : inputs) in = {rng.uniform(), rng.uniform(0, 4), rng.uniform(0, 5), rng.uniform(0, 5)};
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& in = inputs[i++ & 1023];
    benchmark::DoNotOptimize(dro::worst_case_chi2(in[0], in[1], in[2], in[3]));
  }
}
BENCHMARK(bm_worst_case_chi2);

static void bm_worst_case_kl(benchmark::State& state) {
  RandomStream rng(2);
  std::vector<std::array<double, 4>> inputs(1024);
  for (auto& in : inputs) in = {rng.uniform(0.01, 0.99), rng.uniform(0, 1), rng.uniform(0, 5), rng.uniform(0, 5)};
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& in = inputs[i++ & 1023];
    benchmark::DoNotOptimize(dro::worst_case_kl(in[0], in[1], in[2], in[3]));
  }
}
BENCHMARK(bm_worst_case_kl);

static void bm_dro_gradient(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  RandomStream rng(3);
  policy::MarginRecord m{0.4, std::vector<double>(dim)};
  for (auto& g : m.grad_delta) g = rng.uniform(-1, 1);
  const dro::AmbiguitySet set{dro::Divergence::chi_squared, 0.1};
  for (auto _ : state) benchmark::DoNotOptimize(loss::dro_gradient(m, 0.7, set, 0.25));
}
BENCHMARK(bm_dro_gradient)->Arg(16)->Arg(256)->Arg(4096);

static void bm_whittle_index(benchmark::State& state) {
  const auto env = rmab::make_desk_environment();
  const auto program = rmab::parse_reward("s + 2 * s * speaks_hindi", rmab::desk_feature_names());
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& arm = env.arms[i++ % env.arms.size()];
    benchmark::DoNotOptimize(rmab::whittle_index(arm, program, env.discount));
  }
}
BENCHMARK(bm_whittle_index);

static void bm_simulate_desk(benchmark::State& state) {
  const auto env = rmab::make_desk_environment();
  const auto program = rmab::parse_reward("s + 2 * s * speaks_hindi", rmab::desk_feature_names());
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(rmab::simulate(env, program, seed++));
}
BENCHMARK(bm_simulate_desk)->Unit(benchmark::kMillisecond);

static void bm_parse_reward(benchmark::State& state) {
  const auto names = rmab::desk_feature_names();
  const std::string text = "s + 2 * s * (speaks_hindi and (age_10_20 or NGO_registered)) + 3 * s * 12_30-3pm";
  for (auto _ : state) benchmark::DoNotOptimize(rmab::parse_reward(text, names));
}
BENCHMARK(bm_parse_reward);
BENCHMARK_MAIN();
