#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "experiment.hpp"

namespace prefrobust::cli {

/// A grid of (seed, alpha, method) cells sharing one environment and task set.
struct SweepSpec {
  prefdata::DatasetManifest manifest;  // seed is replaced per cell
  noise::NoiseKind noise_kind = noise::NoiseKind::flip;
  std::vector<double> alphas;
  std::vector<trainer::Method> methods;
  std::vector<std::uint64_t> seeds;

  double beta = 0.25;
  double learning_rate = 0.1;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  dro::AmbiguitySet ambiguity;
  /// rDPO flip rate; the cell's alpha when unset.
  std::optional<double> eps;
  double beta_prime = 1.0;

  EvalSettings eval;

  /// Manifest keys, `env.*`, `eval.*`, `noise.kind`, `train.{beta, learning_rate, epochs,
  /// batch_size, rho, divergence, eps, beta_prime}` and `sweep.{alphas, methods, seeds}`.
  static SweepSpec from_config(const KeyValueConfig& cfg);

  /// Training configuration of one cell.
  trainer::TrainConfig train_config(trainer::Method method, double alpha, std::uint64_t seed) const;
};

struct SweepRow {
  std::string method;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double win_rate = 0.0;
  double eval_reward = 0.0;
  std::string status = "ok";
};

/// Rows ordered seed-major, then alpha, then method. A failing cell yields a row with the
/// error in `status`; the sweep continues.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, const rmab::RmabInstance& env, unsigned jobs);

/// "method,noise,seed,win_rate,eval_reward,status" CSV with header.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<trainer::Method> parse_method_list(const std::string& text);
std::vector<double> parse_alpha_list(const std::string& text);

}  // namespace prefrobust::cli
