#include "prefrobust/reward_program.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <utility>

#include "prefrobust/error.hpp"

namespace prefrobust::rmab {
namespace {

using Kind = RewardNode::Kind;

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

RewardNode leaf_number(double v) {
  RewardNode n;
  n.kind = Kind::number;
  n.value = v;
  return n;
}

RewardNode binary(Kind kind, RewardNode lhs, RewardNode rhs) {
  RewardNode n;
  n.kind = kind;
  n.children.reserve(2);
  n.children.push_back(std::move(lhs));
  n.children.push_back(std::move(rhs));
  return n;
}

class Parser {
 public:
  Parser(std::string_view src, const std::set<std::string>& known) : src_(src), known_(known) {}

  RewardNode parse() {
    skip_space();
    if (pos_ >= src_.size()) throw ParseError("empty reward expression", pos_);
    RewardNode root = parse_or();
    skip_space();
    if (pos_ < src_.size()) fail_unexpected();
    return root;
  }

 private:
  std::string_view src_;
  const std::set<std::string>& known_;
  std::size_t pos_ = 0;

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  // Longest known feature name starting at pos_ that ends on a token boundary.
  std::size_t match_feature() const {
    std::size_t best = 0;
    for (const auto& name : known_) {
      if (name.size() <= best || src_.compare(pos_, name.size(), name) != 0) continue;
      const std::size_t end = pos_ + name.size();
      if (end < src_.size() && is_ident_char(src_[end]) && is_ident_char(name.back())) continue;
      best = name.size();
    }
    return best;
  }

  std::string_view peek_word() const {
    if (pos_ >= src_.size() || !is_ident_start(src_[pos_])) return {};
    std::size_t end = pos_;
    while (end < src_.size() && is_ident_char(src_[end])) ++end;
    return src_.substr(pos_, end - pos_);
  }

  bool accept_keyword(std::string_view kw) {
    skip_space();
    if (match_feature() != 0) return false;
    if (peek_word() != kw) return false;
    pos_ += kw.size();
    return true;
  }

  bool accept_char(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c && match_feature() == 0) {
      ++pos_;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail_unexpected() {
    const char c = src_[pos_];
    switch (c) {
      case '&':
      case '|':
      case '^':
      case '~':
        throw ParseError(std::string("bitwise operator '") + c + "' is not allowed; use 'and' / 'or'", pos_);
      case '<':
      case '>':
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == c) {
          throw ParseError("bitwise shift operator is not allowed", pos_);
        }
        throw ParseError("comparison operators are not supported", pos_);
      case '/':
      case '%':
        throw ParseError(std::string("operator '") + c + "' is not supported", pos_);
      default:
        break;
    }
    if (c == '*' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
      throw ParseError("power operator '**' is not supported", pos_);
    }
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  RewardNode parse_or() {
    RewardNode lhs = parse_and();
    while (accept_keyword("or")) lhs = binary(Kind::logical_or, std::move(lhs), parse_and());
    return lhs;
  }

  RewardNode parse_and() {
    RewardNode lhs = parse_additive();
    while (accept_keyword("and")) lhs = binary(Kind::logical_and, std::move(lhs), parse_additive());
    return lhs;
  }

  RewardNode parse_additive() {
    RewardNode lhs = parse_multiplicative();
    for (;;) {
      if (accept_char('+')) {
        lhs = binary(Kind::add, std::move(lhs), parse_multiplicative());
      } else if (accept_char('-')) {
        lhs = binary(Kind::subtract, std::move(lhs), parse_multiplicative());
      } else {
        return lhs;
      }
    }
  }

  RewardNode parse_multiplicative() {
    RewardNode lhs = parse_unary();
    for (;;) {
      skip_space();
      if (pos_ + 1 < src_.size() && src_[pos_] == '*' && src_[pos_ + 1] == '*') fail_unexpected();
      if (!accept_char('*')) return lhs;
      lhs = binary(Kind::multiply, std::move(lhs), parse_unary());
    }
  }

  RewardNode parse_unary() {
    if (accept_char('-')) {
      RewardNode n;
      n.kind = Kind::negate;
      n.children.push_back(parse_unary());
      return n;
    }
    return parse_primary();
  }

  RewardNode parse_primary() {
    skip_space();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
    const std::size_t start = pos_;

    if (const std::size_t len = match_feature(); len != 0) {
      RewardNode n;
      n.kind = Kind::feature;
      n.feature = std::string(src_.substr(pos_, len));
      pos_ += len;
      reject_call(start, n.feature);
      return n;
    }

    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      RewardNode inner = parse_or();
      if (!accept_char(')')) {
        skip_space();
        if (pos_ >= src_.size()) throw ParseError("missing ')'", pos_);
        fail_unexpected();
      }
      return inner;
    }

    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();

    if (is_ident_start(c)) {
      const std::string word(peek_word());
      pos_ += word.size();
      if (word == "s") {
        reject_call(start, word);
        RewardNode n;
        n.kind = Kind::state;
        return n;
      }
      if (word == "state") throw ParseError("'state' is not accepted; the state variable is 's'", start);
      if (word == "return") throw ParseError("'return' is not allowed in a reward expression", start);
      reject_call(start, word);
      if (word == "and" || word == "or") throw ParseError("operator '" + word + "' is missing an operand", start);
      throw ParseError("unknown feature '" + word + "'", start);
    }

    fail_unexpected();
  }

  void reject_call(std::size_t start, const std::string& name) {
    std::size_t look = pos_;
    while (look < src_.size() && std::isspace(static_cast<unsigned char>(src_[look]))) ++look;
    if (look < src_.size() && src_[look] == '(') {
      throw ParseError("function call '" + name + "(...)' is not allowed", start);
    }
  }

  RewardNode parse_number() {
    const std::size_t start = pos_;
    std::size_t end = pos_;
    while (end < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[end])) || src_[end] == '.')) ++end;
    if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
      std::size_t exp = end + 1;
      if (exp < src_.size() && (src_[exp] == '+' || src_[exp] == '-')) ++exp;
      if (exp < src_.size() && std::isdigit(static_cast<unsigned char>(src_[exp]))) {
        end = exp;
        while (end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[end]))) ++end;
      }
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + end, v);
    if (ec != std::errc() || ptr != src_.data() + end || !std::isfinite(v)) {
      throw ParseError("malformed number", start);
    }
    if (end < src_.size() && is_ident_start(src_[end])) {
      throw ParseError("unknown feature '" + std::string(src_.substr(start, end - start + 1)) + "...'", start);
    }
    pos_ = end;
    return leaf_number(v);
  }
};

int precedence(Kind k) {
  switch (k) {
    case Kind::logical_or:
      return 1;
    case Kind::logical_and:
      return 2;
    case Kind::add:
    case Kind::subtract:
      return 3;
    case Kind::multiply:
      return 4;
    case Kind::negate:
      return 5;
    default:
      return 6;
  }
}

void print_into(const RewardNode& n, std::string& out);

void print_child(const RewardNode& child, int parent_prec, bool right, std::string& out) {
  const int p = precedence(child.kind);
  const bool parens = p < parent_prec || (right && p == parent_prec);
  if (parens) out += '(';
  print_into(child, out);
  if (parens) out += ')';
}

void print_into(const RewardNode& n, std::string& out) {
  switch (n.kind) {
    case Kind::number: {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, n.value);
      out.append(buf, res.ptr);
      return;
    }
    case Kind::state:
      out += 's';
      return;
    case Kind::feature:
      out += n.feature;
      return;
    case Kind::negate:
      out += '-';
      print_child(n.children[0], precedence(Kind::negate), false, out);
      return;
    default:
      break;
  }
  const char* op = n.kind == Kind::add           ? " + "
                   : n.kind == Kind::subtract    ? " - "
                   : n.kind == Kind::multiply    ? " * "
                   : n.kind == Kind::logical_and ? " and "
                                                 : " or ";
  const int p = precedence(n.kind);
  print_child(n.children[0], p, false, out);
  out += op;
  print_child(n.children[1], p, true, out);
}

double eval_node(const RewardNode& n, double state, const FeatureMap& features) {
  switch (n.kind) {
    case Kind::number:
      return n.value;
    case Kind::state:
      return state;
    case Kind::feature: {
      const auto it = features.find(n.feature);
      if (it == features.end()) throw InputError("arm has no value for feature '" + n.feature + "'");
      return static_cast<double>(it->second);
    }
    case Kind::negate:
      return -eval_node(n.children[0], state, features);
    case Kind::add:
      return eval_node(n.children[0], state, features) + eval_node(n.children[1], state, features);
    case Kind::subtract:
      return eval_node(n.children[0], state, features) - eval_node(n.children[1], state, features);
    case Kind::multiply:
      return eval_node(n.children[0], state, features) * eval_node(n.children[1], state, features);
    case Kind::logical_and:
      return std::min(eval_node(n.children[0], state, features), eval_node(n.children[1], state, features));
    case Kind::logical_or:
      return std::max(eval_node(n.children[0], state, features), eval_node(n.children[1], state, features));
  }
  return 0.0;
}

void collect_features(const RewardNode& n, std::set<std::string>& out) {
  if (n.kind == Kind::feature) out.insert(n.feature);
  for (const auto& c : n.children) collect_features(c, out);
}

}  // namespace

RewardProgram::RewardProgram(std::string source, RewardNode ast) : source_(std::move(source)), ast_(std::move(ast)) {}

double RewardProgram::evaluate(int state, const FeatureMap& features) const {
  return eval_node(ast_, static_cast<double>(state), features);
}

std::string RewardProgram::to_string() const { return print_reward(ast_); }

std::set<std::string> RewardProgram::referenced_features() const {
  std::set<std::string> out;
  collect_features(ast_, out);
  return out;
}

void RewardProgram::validate_for_arm(const FeatureMap& features) const {
  const double r0 = evaluate(0, features);
  const double r1 = evaluate(1, features);
  if (!std::isfinite(r0) || !std::isfinite(r1)) throw InputError("reward '" + source_ + "' is not finite");
  if (r1 < r0) {
    throw InputError("reward '" + source_ + "' decreases with state (R(0)=" + std::to_string(r0) +
                     ", R(1)=" + std::to_string(r1) + ")");
  }
}

RewardProgram parse_reward(std::string_view source, const std::set<std::string>& known_features) {
  Parser parser(source, known_features);
  RewardNode ast = parser.parse();
  return RewardProgram(std::string(source), std::move(ast));
}

std::string print_reward(const RewardNode& node) {
  std::string out;
  print_into(node, out);
  return out;
}

}  // namespace prefrobust::rmab
