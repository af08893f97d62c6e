#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "prefrobust/config.hpp"
#include "prefrobust/prefdata.hpp"
#include "prefrobust/rng.hpp"

namespace prefrobust::noise {

enum class NoiseKind { none, flip, adversarial };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);

/// Train-time corruption of stored soft scores.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double alpha = 0.0;      // [0,1] for flip, [0,0.5] for adversarial
  std::uint64_t seed = 0;  // adversarial only

  void validate() const;

  /// Keys `noise.kind`, `noise.alpha`, `noise.seed`.
  static NoiseSpec from_config(const KeyValueConfig& cfg);
};

inline constexpr double kLowNoise = 0.1;
inline constexpr double kHighNoise = 0.3;

/// q*(1-alpha) + (1-q*)alpha, evaluated as alpha + q*(1 - 2 alpha) so that
/// alpha = 0.5 returns 0.5 exactly.
double flip_noise(double q_star, double alpha);

/// Moves q* toward 0.5 (or past it) by U ~ Unif(0, alpha): down when q* > 0.5, up
/// otherwise; the result is clamped to [0,1].
double adversarial_noise(double q_star, double alpha, RandomStream& rng);

/// Applies `spec` to every sample's q. Adversarial draws for sample i come from the
/// sub-stream (spec.seed, i), so the result does not depend on processing order.
std::vector<prefdata::PreferenceSample> apply_noise(std::vector<prefdata::PreferenceSample> samples,
                                                    const NoiseSpec& spec);

}  // namespace prefrobust::noise
