#pragma once

#include <string>
#include <vector>

#include "semflow/pattern/ast.hpp"
#include "semflow/pattern/format.hpp"

namespace semflow::pattern {

struct Violation {
  std::string code;
  std::string message;
  /// Child-index path from the root, e.g. "0.1".
  std::string path;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }

  bool has(std::string_view code) const {
    for (const auto& v : violations)
      if (v.code == code) return true;
    return false;
  }

  std::string summary() const {
    std::string s;
    for (const auto& v : violations) {
      if (!s.empty()) s += "; ";
      s += v.code + " at [" + v.path + "]: " + v.message;
    }
    return s;
  }
};

namespace detail {

struct ValidateCtx {
  std::vector<const PatternExpr*> ancestors;
  int within_depth = 0;
  int one_or_more_depth = 0;
};

inline void validate_into(const PatternExpr& e, ValidateCtx& ctx, const std::string& path,
                          ValidationResult& out) {
  auto report = [&](const char* code, std::string msg) {
    out.violations.push_back({code, std::move(msg), path});
  };
  const PatternExpr* parent = ctx.ancestors.empty() ? nullptr : ctx.ancestors.back();

  auto arity_ok = [&](std::size_t n) {
    if (e.children.size() != n) {
      report("MalformedNode", std::string(kind_name(e.kind)) + " expects " + std::to_string(n) +
                                  " operand(s)");
      return false;
    }
    return true;
  };

  switch (e.kind) {
    case Kind::Atom:
      if (e.event_type.empty()) report("EmptyEventType", "event type must be non-empty");
      if (e.guard)
        for (const auto& c : e.guard->clauses)
          if (c.key.empty()) report("EmptyGuardKey", "guard keys must be non-empty");
      return;
    case Kind::Seq:
      if (e.children.empty()) {
        report("EmptySeq", "SEQ needs at least one element");
        return;
      }
      break;
    case Kind::And:
    case Kind::Or:
      if (!arity_ok(2)) return;
      break;
    case Kind::Times:
      if (!arity_ok(1)) return;
      if (e.count < 1) report("InvalidCount", "TIMES count must be >= 1");
      break;
    case Kind::Within:
      if (!arity_ok(1)) return;
      if (e.delta_t <= 0) report("InvalidDuration", "WITHIN duration must be > 0");
      break;
    case Kind::Not: {
      if (!arity_ok(1)) return;
      if (ctx.within_depth == 0)
        report("UnboundedNegation", "negation " + format_pattern(e) + " has no enclosing WITHIN");
      bool placed = false;
      if (parent && parent->kind == Kind::Seq) placed = true;
      if (parent && parent->kind == Kind::Within && ctx.ancestors.size() >= 2 &&
          ctx.ancestors[ctx.ancestors.size() - 2]->kind == Kind::Seq)
        placed = true;
      if (!placed)
        report("MisplacedNegation",
               "NOT must be a SEQ element or the operand of a WITHIN that is a SEQ element");
      if (e.child().kind != Kind::Atom)
        report("MisplacedNegation", "NOT applies to a single event type");
      break;
    }
    case Kind::OneOrMore:
      if (!arity_ok(1)) return;
      if (ctx.one_or_more_depth > 0)
        report("NestedUnboundedQuantifier", "ONE_OR_MORE nested inside ONE_OR_MORE");
      if (nullable(e.child()))
        report("NullableRepetition", "ONE_OR_MORE operand can match zero events");
      break;
    case Kind::Optional:
      if (!arity_ok(1)) return;
      break;
  }

  if (e.kind == Kind::Seq) {
    bool seen_positive = false;
    for (std::size_t i = 0; i < e.children.size(); ++i) {
      const auto& c = e.children[i];
      if (is_negation_element(c)) {
        if (!seen_positive)
          out.violations.push_back({"MisplacedNegation",
                                    "negation must follow an element that always consumes an event",
                                    path.empty() ? std::to_string(i) : path + "." + std::to_string(i)});
      } else if (!nullable(c)) {
        seen_positive = true;
      }
    }
  }
  if (e.kind == Kind::Within && e.child().kind == Kind::Not &&
      !(parent && parent->kind == Kind::Seq))
    report("MisplacedNegation", "a negation window must be an element of a SEQ");

  ctx.ancestors.push_back(&e);
  if (e.kind == Kind::Within) ++ctx.within_depth;
  if (e.kind == Kind::OneOrMore) ++ctx.one_or_more_depth;
  for (std::size_t i = 0; i < e.children.size(); ++i)
    validate_into(e.children[i], ctx, path.empty() ? std::to_string(i) : path + "." + std::to_string(i),
                  out);
  if (e.kind == Kind::Within) --ctx.within_depth;
  if (e.kind == Kind::OneOrMore) --ctx.one_or_more_depth;
  ctx.ancestors.pop_back();
}

}  // namespace detail

/// Structural checks that make an expression compilable: every negation is
/// bounded by a WITHIN, sits in a sequence slot after a consuming element,
/// and repetition is finite per iteration.
inline ValidationResult validate_pattern(const PatternExpr& e) {
  ValidationResult out;
  detail::ValidateCtx ctx;
  detail::validate_into(e, ctx, "", out);
  return out;
}

}  // namespace semflow::pattern
