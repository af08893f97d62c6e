#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace prefrobust::policy {

using Vector = std::vector<double>;

/// Log-ratio margin of a response pair and its parameter gradient.
struct MarginRecord {
  double delta = 0.0;  // log pi(y1|x)/pi_ref(y1|x) - log pi(y2|x)/pi_ref(y2|x)
  Vector grad_delta;   // d delta / d theta
};

/// Deterministic map (prompt, response) -> fixed-length feature vector.
class Featurizer {
 public:
  virtual ~Featurizer() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::string id() const = 0;
  virtual Vector features(std::string_view prompt, std::string_view response) const = 0;
};

/// A parameterised scorer standing in for a language model.
///
/// Implementations expose log pi_theta(y|x) - log pi_ref(y|x) up to a term that does not
/// depend on y; margins subtract two such values, so that term never matters.
class PreferencePolicy {
 public:
  virtual ~PreferencePolicy() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::span<const double> params() const = 0;
  virtual std::span<const double> reference_params() const = 0;
  virtual void set_params(std::span<const double> theta) = 0;

  /// Log-ratio of `response`; writes its gradient w.r.t. theta into `grad` when non-null.
  virtual double log_ratio(std::string_view prompt, std::string_view response, Vector* grad) const = 0;

  MarginRecord margin(std::string_view prompt, std::string_view response_1, std::string_view response_2) const;
};

/// pi_theta(y|x) proportional to exp(theta . phi(x,y)). The margin is
/// (theta - theta_ref) . (phi(x,y1) - phi(x,y2)); partition functions cancel.
class LogLinearPolicy final : public PreferencePolicy {
 public:
  LogLinearPolicy(std::shared_ptr<const Featurizer> featurizer, Vector theta, Vector theta_ref);
  /// theta = theta_ref = 0.
  explicit LogLinearPolicy(std::shared_ptr<const Featurizer> featurizer);

  std::size_t dimension() const override { return theta_.size(); }
  std::span<const double> params() const override { return theta_; }
  std::span<const double> reference_params() const override { return theta_ref_; }
  void set_params(std::span<const double> theta) override;
  double log_ratio(std::string_view prompt, std::string_view response, Vector* grad) const override;

  const Featurizer& featurizer() const { return *featurizer_; }

 private:
  std::shared_ptr<const Featurizer> featurizer_;
  Vector theta_;
  Vector theta_ref_;
};

/// Per prompt, an explicit softmax distribution over an enumerated candidate list.
/// theta holds the logits of every (prompt, candidate) cell, prompts in order.
class TabularPolicy final : public PreferencePolicy {
 public:
  struct Table {
    std::string prompt;
    std::vector<std::string> candidates;
  };

  TabularPolicy(std::vector<Table> tables, Vector theta, Vector theta_ref);
  /// Uniform tables: theta = theta_ref = 0.
  explicit TabularPolicy(std::vector<Table> tables);

  std::size_t dimension() const override { return theta_.size(); }
  std::span<const double> params() const override { return theta_; }
  std::span<const double> reference_params() const override { return theta_ref_; }
  void set_params(std::span<const double> theta) override;

  /// Exact log pi_theta(y|x) - log pi_ref(y|x) with both softmax normalisers.
  double log_ratio(std::string_view prompt, std::string_view response, Vector* grad) const override;

  /// log pi(y|x) under `logits` (theta or theta_ref).
  double log_probability(std::string_view prompt, std::string_view response, std::span<const double> logits) const;

 private:
  std::pair<std::size_t, std::size_t> locate(std::string_view prompt, std::string_view response) const;

  std::vector<Table> tables_;
  std::vector<std::size_t> offsets_;
  Vector theta_;
  Vector theta_ref_;
};

/// Fixed table of feature vectors, keyed by (prompt, response). Unknown pairs throw.
class LookupFeaturizer final : public Featurizer {
 public:
  explicit LookupFeaturizer(std::size_t dimension, std::string id = "lookup");

  void add(std::string prompt, std::string response, Vector phi);

  std::size_t dimension() const override { return dimension_; }
  std::string id() const override { return id_; }
  Vector features(std::string_view prompt, std::string_view response) const override;

 private:
  std::size_t dimension_;
  std::string id_;
  std::map<std::pair<std::string, std::string>, Vector, std::less<>> table_;
};

/// Default featurizer for reward-expression responses.
///
/// Each top-level term `c * ... * (clause)` contributes a count to the
/// (feature, coefficient bucket) cell of every feature in its clause, buckets being
/// c <= 1, c <= 2, c > 2. Clause shapes are counted in five cells: single feature,
/// and-2, and-3+, or-2, or-3+. The response block is placed in the slot of the prompt,
/// so every prompt gets its own weights.
class RewardExpressionFeaturizer final : public Featurizer {
 public:
  static constexpr std::size_t kBuckets = 3;
  static constexpr std::size_t kClauseShapes = 5;

  RewardExpressionFeaturizer(std::vector<std::string> feature_names, std::vector<std::string> prompts);

  std::size_t dimension() const override { return prompts_.size() * block_size(); }
  std::string id() const override;
  Vector features(std::string_view prompt, std::string_view response) const override;

  std::size_t block_size() const { return feature_names_.size() * kBuckets + kClauseShapes; }

  /// Prompt-independent response block.
  Vector response_features(std::string_view response) const;

  const std::vector<std::string>& prompts() const { return prompts_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

 private:
  std::vector<std::string> feature_names_;
  std::set<std::string> known_;
  std::map<std::string, std::size_t, std::less<>> feature_index_;
  std::vector<std::string> prompts_;
  std::map<std::string, std::size_t, std::less<>> prompt_index_;

  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::string, Vector> cache_;
};

inline constexpr std::string_view kRewardExpressionFeaturizerId = "reward-expr-v1";

/// Serialised parameters: {"dimension", "theta", "theta_ref", "featurizer_id"}.
struct Checkpoint {
  std::size_t dimension = 0;
  Vector theta;
  Vector theta_ref;
  std::string featurizer_id;
};

Checkpoint make_checkpoint(const PreferencePolicy& policy, std::string featurizer_id);
void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace prefrobust::policy
