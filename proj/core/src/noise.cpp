#include "prefrobust/noise.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefrobust/error.hpp"

namespace prefrobust::noise {
namespace {

void check_probability(double q, const char* what) {
  if (!(q >= 0.0 && q <= 1.0)) throw InputError(std::string(what) + " must lie in [0,1]");
}

}  // namespace

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none:
      return "none";
    case NoiseKind::flip:
      return "flip";
    case NoiseKind::adversarial:
      return "adversarial";
  }
  return "none";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "none") return NoiseKind::none;
  if (name == "flip") return NoiseKind::flip;
  if (name == "adversarial") return NoiseKind::adversarial;
  throw InputError("unknown noise kind '" + std::string(name) + "' (expected none, flip or adversarial)");
}

void NoiseSpec::validate() const {
  switch (kind) {
    case NoiseKind::none:
      return;
    case NoiseKind::flip:
      if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("flip noise alpha must lie in [0,1]");
      return;
    case NoiseKind::adversarial:
      if (!(alpha >= 0.0 && alpha <= 0.5)) throw InputError("adversarial noise alpha must lie in [0,0.5]");
      return;
  }
}

NoiseSpec NoiseSpec::from_config(const KeyValueConfig& cfg) {
  NoiseSpec spec;
  spec.kind = parse_noise_kind(cfg.get_string("noise.kind", "none"));
  spec.alpha = cfg.get_double("noise.alpha", 0.0);
  spec.seed = cfg.get_uint("noise.seed", 0);
  if (spec.kind == NoiseKind::none && spec.alpha != 0.0) {
    throw InputError("noise.alpha given but noise.kind is none");
  }
  spec.validate();
  return spec;
}

double flip_noise(double q_star, double alpha) {
  check_probability(q_star, "q*");
  check_probability(alpha, "flip alpha");
  return alpha + q_star * (1.0 - 2.0 * alpha);
}

double adversarial_noise(double q_star, double alpha, RandomStream& rng) {
  check_probability(q_star, "q*");
  if (!(alpha >= 0.0 && alpha <= 0.5)) throw InputError("adversarial alpha must lie in [0,0.5]");
  const double u = rng.uniform(0.0, alpha);
  const double shifted = q_star > 0.5 ? q_star - u : q_star + u;
  return std::clamp(shifted, 0.0, 1.0);
}

std::vector<prefdata::PreferenceSample> apply_noise(std::vector<prefdata::PreferenceSample> samples,
                                                    const NoiseSpec& spec) {
  spec.validate();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& s = samples[i];
    switch (spec.kind) {
      case NoiseKind::none:
        break;
      case NoiseKind::flip:
        s.q = flip_noise(s.q, spec.alpha);
        break;
      case NoiseKind::adversarial: {
        RandomStream rng(derive_seed(spec.seed, {i}));
        s.q = adversarial_noise(s.q, spec.alpha, rng);
        break;
      }
    }
  }
  return samples;
}

}  // namespace prefrobust::noise
