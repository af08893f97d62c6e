#include "prefrobust/policy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "prefrobust/error.hpp"
#include "prefrobust/reward_program.hpp"

namespace prefrobust::policy {
namespace {

using rmab::RewardNode;
using Kind = RewardNode::Kind;

void check_dimension(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw InputError(std::string(what) + ": dimension " + std::to_string(got) + " does not match " +
                     std::to_string(want));
  }
}

double log_sum_exp(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

void flatten_sum(const RewardNode& n, std::vector<const RewardNode*>& terms) {
  if (n.kind == Kind::add || n.kind == Kind::subtract) {
    flatten_sum(n.children[0], terms);
    flatten_sum(n.children[1], terms);
  } else if (n.kind == Kind::negate) {
    flatten_sum(n.children[0], terms);
  } else {
    terms.push_back(&n);
  }
}

void flatten_product(const RewardNode& n, double& coefficient, std::vector<const RewardNode*>& factors) {
  if (n.kind == Kind::multiply) {
    flatten_product(n.children[0], coefficient, factors);
    flatten_product(n.children[1], coefficient, factors);
  } else if (n.kind == Kind::number) {
    coefficient *= n.value;
  } else if (n.kind == Kind::negate) {
    flatten_product(n.children[0], coefficient, factors);
  } else if (n.kind != Kind::state) {
    factors.push_back(&n);
  }
}

void collect(const RewardNode& n, std::vector<std::string>& out) {
  if (n.kind == Kind::feature) out.push_back(n.feature);
  for (const auto& c : n.children) collect(c, out);
}

std::size_t bucket_of(double coefficient) {
  const double c = std::abs(coefficient);
  if (c <= 1.0) return 0;
  if (c <= 2.0) return 1;
  return 2;
}

// 0 single, 1 and-2, 2 and-3+, 3 or-2, 4 or-3+.
std::size_t clause_shape(const RewardNode& clause, std::size_t arity) {
  if (arity <= 1) return 0;
  const bool is_or = clause.kind == Kind::logical_or;
  const std::size_t base = is_or ? 3 : 1;
  return base + (arity >= 3 ? 1 : 0);
}

std::size_t total_cells(const std::vector<TabularPolicy::Table>& tables) {
  std::size_t n = 0;
  for (const auto& t : tables) n += t.candidates.size();
  return n;
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  check_dimension(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

MarginRecord PreferencePolicy::margin(std::string_view prompt, std::string_view response_1,
                                      std::string_view response_2) const {
  MarginRecord rec;
  Vector g2;
  const double r1 = log_ratio(prompt, response_1, &rec.grad_delta);
  const double r2 = log_ratio(prompt, response_2, &g2);
  check_dimension(rec.grad_delta.size(), dimension(), "margin gradient");
  check_dimension(g2.size(), dimension(), "margin gradient");
  rec.delta = r1 - r2;
  for (std::size_t i = 0; i < g2.size(); ++i) rec.grad_delta[i] -= g2[i];
  return rec;
}

LogLinearPolicy::LogLinearPolicy(std::shared_ptr<const Featurizer> featurizer, Vector theta, Vector theta_ref)
    : featurizer_(std::move(featurizer)), theta_(std::move(theta)), theta_ref_(std::move(theta_ref)) {
  if (!featurizer_) throw InputError("LogLinearPolicy needs a featurizer");
  check_dimension(theta_.size(), featurizer_->dimension(), "theta");
  check_dimension(theta_ref_.size(), featurizer_->dimension(), "theta_ref");
}

LogLinearPolicy::LogLinearPolicy(std::shared_ptr<const Featurizer> featurizer)
    : LogLinearPolicy(featurizer, Vector(featurizer ? featurizer->dimension() : 0, 0.0),
                      Vector(featurizer ? featurizer->dimension() : 0, 0.0)) {}

void LogLinearPolicy::set_params(std::span<const double> theta) {
  check_dimension(theta.size(), theta_.size(), "set_params");
  std::copy(theta.begin(), theta.end(), theta_.begin());
}

double LogLinearPolicy::log_ratio(std::string_view prompt, std::string_view response, Vector* grad) const {
  Vector phi = featurizer_->features(prompt, response);
  check_dimension(phi.size(), theta_.size(), "feature vector");
  double s = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) s += (theta_[i] - theta_ref_[i]) * phi[i];
  if (grad) *grad = std::move(phi);
  return s;
}

TabularPolicy::TabularPolicy(std::vector<Table> tables, Vector theta, Vector theta_ref)
    : tables_(std::move(tables)), theta_(std::move(theta)), theta_ref_(std::move(theta_ref)) {
  std::size_t total = 0;
  for (const auto& t : tables_) {
    if (t.candidates.empty()) throw InputError("tabular policy: prompt '" + t.prompt + "' has no candidates");
    offsets_.push_back(total);
    total += t.candidates.size();
  }
  check_dimension(theta_.size(), total, "tabular theta");
  check_dimension(theta_ref_.size(), total, "tabular theta_ref");
}

TabularPolicy::TabularPolicy(std::vector<Table> tables)
    : TabularPolicy(tables, Vector(total_cells(tables), 0.0), Vector(total_cells(tables), 0.0)) {}

void TabularPolicy::set_params(std::span<const double> theta) {
  check_dimension(theta.size(), theta_.size(), "set_params");
  std::copy(theta.begin(), theta.end(), theta_.begin());
}

std::pair<std::size_t, std::size_t> TabularPolicy::locate(std::string_view prompt, std::string_view response) const {
  for (std::size_t t = 0; t < tables_.size(); ++t) {
    if (tables_[t].prompt != prompt) continue;
    const auto& c = tables_[t].candidates;
    const auto it = std::find(c.begin(), c.end(), response);
    if (it == c.end()) throw InputError("tabular policy: unknown response '" + std::string(response) + "'");
    return {t, static_cast<std::size_t>(it - c.begin())};
  }
  throw InputError("tabular policy: unknown prompt '" + std::string(prompt) + "'");
}

double TabularPolicy::log_probability(std::string_view prompt, std::string_view response,
                                      std::span<const double> logits) const {
  const auto [t, k] = locate(prompt, response);
  const auto block = logits.subspan(offsets_[t], tables_[t].candidates.size());
  return block[k] - log_sum_exp(block);
}

double TabularPolicy::log_ratio(std::string_view prompt, std::string_view response, Vector* grad) const {
  const auto [t, k] = locate(prompt, response);
  const std::size_t n = tables_[t].candidates.size();
  const auto block = std::span<const double>(theta_).subspan(offsets_[t], n);
  const auto ref_block = std::span<const double>(theta_ref_).subspan(offsets_[t], n);
  const double lse = log_sum_exp(block);
  const double value = (block[k] - lse) - (ref_block[k] - log_sum_exp(ref_block));
  if (grad) {
    // d/dtheta log softmax(theta)_k = e_k - softmax(theta).
    grad->assign(theta_.size(), 0.0);
    for (std::size_t j = 0; j < n; ++j) (*grad)[offsets_[t] + j] = -std::exp(block[j] - lse);
    (*grad)[offsets_[t] + k] += 1.0;
  }
  return value;
}

LookupFeaturizer::LookupFeaturizer(std::size_t dimension, std::string id) : dimension_(dimension), id_(std::move(id)) {}

void LookupFeaturizer::add(std::string prompt, std::string response, Vector phi) {
  check_dimension(phi.size(), dimension_, "lookup feature vector");
  table_[{std::move(prompt), std::move(response)}] = std::move(phi);
}

Vector LookupFeaturizer::features(std::string_view prompt, std::string_view response) const {
  const auto it = table_.find(std::pair<std::string, std::string>(prompt, response));
  if (it == table_.end()) {
    throw InputError("no features for response '" + std::string(response) + "'");
  }
  return it->second;
}

RewardExpressionFeaturizer::RewardExpressionFeaturizer(std::vector<std::string> feature_names,
                                                       std::vector<std::string> prompts)
    : feature_names_(std::move(feature_names)), prompts_(std::move(prompts)) {
  for (std::size_t i = 0; i < feature_names_.size(); ++i) {
    known_.insert(feature_names_[i]);
    if (!feature_index_.emplace(feature_names_[i], i).second) {
      throw InputError("duplicate feature name '" + feature_names_[i] + "'");
    }
  }
  for (std::size_t i = 0; i < prompts_.size(); ++i) {
    if (!prompt_index_.emplace(prompts_[i], i).second) throw InputError("duplicate prompt in featurizer");
  }
}

std::string RewardExpressionFeaturizer::id() const {
  return std::string(kRewardExpressionFeaturizerId) + "/prompts=" + std::to_string(prompts_.size()) +
         "/features=" + std::to_string(feature_names_.size());
}

Vector RewardExpressionFeaturizer::response_features(std::string_view response) const {
  {
    std::lock_guard lock(cache_mutex_);
    if (const auto it = cache_.find(std::string(response)); it != cache_.end()) return it->second;
  }
  const auto program = rmab::parse_reward(response, known_);
  Vector block(block_size(), 0.0);
  const std::size_t shape_offset = feature_names_.size() * kBuckets;

  std::vector<const RewardNode*> terms;
  flatten_sum(program.ast(), terms);
  for (const RewardNode* term : terms) {
    double coefficient = 1.0;
    std::vector<const RewardNode*> factors;
    flatten_product(*term, coefficient, factors);
    for (const RewardNode* clause : factors) {
      std::vector<std::string> names;
      collect(*clause, names);
      if (names.empty()) continue;
      const std::size_t bucket = bucket_of(coefficient);
      for (const auto& name : names) block[feature_index_.find(name)->second * kBuckets + bucket] += 1.0;
      block[shape_offset + clause_shape(*clause, names.size())] += 1.0;
    }
  }

  std::lock_guard lock(cache_mutex_);
  cache_.emplace(std::string(response), block);
  return block;
}

Vector RewardExpressionFeaturizer::features(std::string_view prompt, std::string_view response) const {
  const auto it = prompt_index_.find(prompt);
  if (it == prompt_index_.end()) throw InputError("featurizer: unknown prompt '" + std::string(prompt) + "'");
  const Vector block = response_features(response);
  Vector phi(dimension(), 0.0);
  std::copy(block.begin(), block.end(), phi.begin() + static_cast<std::ptrdiff_t>(it->second * block_size()));
  return phi;
}

Checkpoint make_checkpoint(const PreferencePolicy& policy, std::string featurizer_id) {
  const auto theta = policy.params();
  const auto ref = policy.reference_params();
  return {policy.dimension(), Vector(theta.begin(), theta.end()), Vector(ref.begin(), ref.end()),
          std::move(featurizer_id)};
}

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  nlohmann::ordered_json j;
  j["dimension"] = checkpoint.dimension;
  j["theta"] = checkpoint.theta;
  j["theta_ref"] = checkpoint.theta_ref;
  j["featurizer_id"] = checkpoint.featurizer_id;
  out << j.dump() << '\n';
}

Checkpoint read_checkpoint(std::istream& in) {
  try {
    const auto j = nlohmann::json::parse(in);
    Checkpoint c;
    c.dimension = j.at("dimension").get<std::size_t>();
    c.theta = j.at("theta").get<Vector>();
    c.theta_ref = j.at("theta_ref").get<Vector>();
    c.featurizer_id = j.at("featurizer_id").get<std::string>();
    check_dimension(c.theta.size(), c.dimension, "checkpoint theta");
    check_dimension(c.theta_ref.size(), c.dimension, "checkpoint theta_ref");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace prefrobust::policy
