#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace prefrobust::rmab {

/// Binary feature assignment of one arm (beneficiary).
using FeatureMap = std::map<std::string, int>;

/// Node of a parsed reward expression. Parentheses are structural and leave no node.
struct RewardNode {
  enum class Kind { number, state, feature, negate, add, subtract, multiply, logical_and, logical_or };

  Kind kind = Kind::number;
  double value = 0.0;
  std::string feature;
  std::vector<RewardNode> children;

  bool operator==(const RewardNode&) const = default;
};

/// A single-line reward expression over the state `s` and named binary features.
///
/// `and` / `or` evaluate as min / max of their operands, which is boolean logic on {0,1}.
/// Binding strength, loosest first: `or`, `and`, `+ -`, `*`, unary minus.
class RewardProgram {
 public:
  RewardProgram(std::string source, RewardNode ast);

  const std::string& source() const noexcept { return source_; }
  const RewardNode& ast() const noexcept { return ast_; }

  /// Value at `state` (0 or 1) for an arm. Throws InputError if a referenced feature is missing.
  double evaluate(int state, const FeatureMap& features) const;

  /// Canonical text; parsing it again yields an identical AST.
  std::string to_string() const;

  std::set<std::string> referenced_features() const;

  /// Throws InputError unless evaluate(1, f) >= evaluate(0, f).
  void validate_for_arm(const FeatureMap& features) const;

 private:
  std::string source_;
  RewardNode ast_;
};

/// Parses `source`. Identifiers other than `s`, `and`, `or` must be in `known_features`.
/// Throws ParseError (with byte position) on unknown features, `state`, `return`,
/// bitwise operators, function calls and any other syntax outside the grammar.
RewardProgram parse_reward(std::string_view source, const std::set<std::string>& known_features);

/// Prints an AST in canonical form with the minimum parentheses needed to re-parse it.
std::string print_reward(const RewardNode& node);

}  // namespace prefrobust::rmab
