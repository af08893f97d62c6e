#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "prefrobust/config.hpp"
#include "prefrobust/dro.hpp"
#include "prefrobust/policy.hpp"
#include "prefrobust/prefdata.hpp"

namespace prefrobust::trainer {

enum class Method { dpo, dpo_pro, rdpo, drdpo };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

/// Optimiser and loss settings. Method-specific fields are set only for their method:
/// ambiguity for dpo-pro, eps for rdpo, beta_prime for drdpo.
struct TrainConfig {
  Method method = Method::dpo;
  std::optional<dro::AmbiguitySet> ambiguity;
  std::optional<double> eps;
  std::optional<double> beta_prime;
  double beta = 0.25;
  double learning_rate = 0.1;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;

  /// Throws InputError if a method-specific field is missing, present for another
  /// method, or out of range.
  void validate() const;

  /// Reads keys under `train.`: method, beta, learning_rate, epochs, batch_size, seed,
  /// and per method rho and divergence (dpo-pro), eps (rdpo), beta_prime (drdpo).
  /// Keys outside `train.` are ignored; unknown `train.` keys are rejected.
  static TrainConfig from_config(const KeyValueConfig& cfg);

  /// Canonical `train.*` key=value text.
  KeyValueConfig to_config() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // the method's objective over the whole dataset after the epoch
  double mean_abs_margin = 0.0;
};

struct TrainResult {
  policy::Vector theta;
  std::vector<EpochMetrics> log;
};

/// Hard labels c_i in {1,-1}, c_i = 1 with probability q_i, from the sub-stream
/// (seed, round, i). dpo and rdpo use round 0 for the whole run; drdpo uses round = epoch.
std::vector<int> sample_hard_labels(const std::vector<prefdata::PreferenceSample>& data, std::uint64_t seed,
                                    std::uint64_t round);

/// Order of visiting samples in `epoch`; depends only on (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch);

/// Plain minibatch gradient descent theta <- theta - lr * g. The policy ends at the final
/// theta. Per-sample gradients may be computed on `jobs` threads; they are summed in
/// index order. Throws NumericError with a batch snapshot on non-finite values.
TrainResult train(const TrainConfig& config, const std::vector<prefdata::PreferenceSample>& data,
                  policy::PreferencePolicy& policy, unsigned jobs = 1);

/// "epoch,loss,mean_abs_margin" CSV with header.
void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& log);

}  // namespace prefrobust::trainer
