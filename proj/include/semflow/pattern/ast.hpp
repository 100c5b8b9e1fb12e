#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semflow/document.hpp"

namespace semflow::pattern {

enum class GuardOp { Eq, Ne, Contains };

struct GuardClause {
  std::string key;
  GuardOp op = GuardOp::Eq;
  std::string literal;
  bool operator==(const GuardClause&) const = default;
};

/// Conjunction of attribute predicates. An absent key never matches,
/// including under `!=`.
struct GuardPredicate {
  std::vector<GuardClause> clauses;

  bool matches(const Attrs& attrs) const {
    for (const auto& c : clauses) {
      auto it = attrs.find(c.key);
      if (it == attrs.end()) return false;
      switch (c.op) {
        case GuardOp::Eq:
          if (it->second != c.literal) return false;
          break;
        case GuardOp::Ne:
          if (it->second == c.literal) return false;
          break;
        case GuardOp::Contains:
          if (it->second.find(c.literal) == std::string::npos) return false;
          break;
      }
    }
    return true;
  }

  bool operator==(const GuardPredicate&) const = default;
};

enum class Kind { Atom, Seq, And, Or, Not, Times, OneOrMore, Optional, Within };

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Atom: return "Atom";
    case Kind::Seq: return "Seq";
    case Kind::And: return "And";
    case Kind::Or: return "Or";
    case Kind::Not: return "Not";
    case Kind::Times: return "Times";
    case Kind::OneOrMore: return "OneOrMore";
    case Kind::Optional: return "Optional";
    case Kind::Within: return "Within";
  }
  return "?";
}

/// Pattern expression tree. Atom uses `event_type`/`guard`; Seq has any
/// number of children; And/Or exactly two; the unary forms exactly one.
struct PatternExpr {
  Kind kind = Kind::Atom;
  std::string event_type;
  std::optional<GuardPredicate> guard;
  std::vector<PatternExpr> children;
  int count = 0;                  // Times
  std::int64_t delta_t = 0;       // Within, seconds

  const PatternExpr& child() const { return children.front(); }

  friend bool operator==(const PatternExpr& a, const PatternExpr& b) {
    return a.kind == b.kind && a.event_type == b.event_type && a.guard == b.guard &&
           a.count == b.count && a.delta_t == b.delta_t && a.children == b.children;
  }

  /// Operator nesting depth; an atom has depth 0.
  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& c : children) d = std::max(d, c.depth() + 1);
    return d;
  }
};

inline PatternExpr atom(std::string type, std::optional<GuardPredicate> guard = std::nullopt) {
  PatternExpr e;
  e.kind = Kind::Atom;
  e.event_type = std::move(type);
  e.guard = std::move(guard);
  return e;
}

inline PatternExpr seq(std::vector<PatternExpr> elems) {
  PatternExpr e;
  e.kind = Kind::Seq;
  e.children = std::move(elems);
  return e;
}

inline PatternExpr binary(Kind k, PatternExpr l, PatternExpr r) {
  PatternExpr e;
  e.kind = k;
  e.children.push_back(std::move(l));
  e.children.push_back(std::move(r));
  return e;
}

inline PatternExpr and_(PatternExpr l, PatternExpr r) { return binary(Kind::And, std::move(l), std::move(r)); }
inline PatternExpr or_(PatternExpr l, PatternExpr r) { return binary(Kind::Or, std::move(l), std::move(r)); }

inline PatternExpr unary(Kind k, PatternExpr c) {
  PatternExpr e;
  e.kind = k;
  e.children.push_back(std::move(c));
  return e;
}

inline PatternExpr not_(PatternExpr c) { return unary(Kind::Not, std::move(c)); }
inline PatternExpr one_or_more(PatternExpr c) { return unary(Kind::OneOrMore, std::move(c)); }
inline PatternExpr optional(PatternExpr c) { return unary(Kind::Optional, std::move(c)); }

inline PatternExpr times(PatternExpr c, int n) {
  auto e = unary(Kind::Times, std::move(c));
  e.count = n;
  return e;
}

inline PatternExpr within(PatternExpr c, std::int64_t seconds) {
  auto e = unary(Kind::Within, std::move(c));
  e.delta_t = seconds;
  return e;
}

/// Not(...) or Within(Not(...)): the two forms that occupy a sequence slot
/// without consuming events.
inline bool is_negation_element(const PatternExpr& e) {
  if (e.kind == Kind::Not) return true;
  return e.kind == Kind::Within && !e.children.empty() && e.child().kind == Kind::Not;
}

/// True when the expression can be satisfied by zero events.
inline bool nullable(const PatternExpr& e) {
  switch (e.kind) {
    case Kind::Atom: return false;
    case Kind::Seq:
      for (const auto& c : e.children)
        if (!nullable(c)) return false;
      return true;
    case Kind::And: return nullable(e.children[0]) && nullable(e.children[1]);
    case Kind::Or: return nullable(e.children[0]) || nullable(e.children[1]);
    case Kind::Not: return true;
    case Kind::Optional: return true;
    case Kind::Times:
    case Kind::OneOrMore:
    case Kind::Within: return nullable(e.child());
  }
  return false;
}

}  // namespace semflow::pattern
