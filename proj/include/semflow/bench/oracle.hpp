#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "semflow/common/errors.hpp"
#include "semflow/event.hpp"
#include "semflow/pattern/ast.hpp"
#include "semflow/pattern/validate.hpp"

namespace semflow::bench {

using MatchKey = std::vector<std::string>;
using MatchSet = std::set<MatchKey>;

inline constexpr std::size_t kOracleMaxEvents = 8;
inline constexpr std::size_t kOracleMaxDepth = 4;

namespace oracle_detail {

// Declarative matcher: a candidate is a subset of the stream; a pattern
// matches a contiguous block of the candidate if some derivation splits the
// block over the pattern structure. Absence requirements are collected as
// constraints and checked against the whole stream at the end.

enum class CKind { Between, Until, Unresolved };

struct Constraint {
  CKind kind = CKind::Between;
  std::string forbidden_type;
  std::optional<pattern::GuardPredicate> forbidden_guard;
  int after = 0;            // stream index of the event preceding the interval
  int before = 0;           // Between: stream index closing the interval
  Timestamp deadline = 0;   // Until: last forbidden timestamp, inclusive
};

using Outcome = std::vector<Constraint>;

class Derivation {
 public:
  Derivation(const std::vector<SemanticEvent>& stream, const std::vector<int>& chosen)
      : stream_(stream), chosen_(chosen) {}

  std::vector<Outcome> derive(const pattern::PatternExpr& p, int lo, int hi) {
    using pattern::Kind;
    switch (p.kind) {
      case Kind::Atom:
        if (hi - lo == 1 && atom_matches(p, chosen_[lo])) return {Outcome{}};
        return {};
      case Kind::Seq: return derive_seq(p.children, lo, hi);
      case Kind::And: {
        auto a = derive_seq({p.children[0], p.children[1]}, lo, hi);
        auto b = derive_seq({p.children[1], p.children[0]}, lo, hi);
        a.insert(a.end(), b.begin(), b.end());
        return a;
      }
      case Kind::Or: {
        auto a = derive(p.children[0], lo, hi);
        auto b = derive(p.children[1], lo, hi);
        a.insert(a.end(), b.begin(), b.end());
        return a;
      }
      case Kind::Optional: {
        auto a = derive(p.child(), lo, hi);
        if (lo == hi) a.push_back(Outcome{});
        return a;
      }
      case Kind::Times: return repeat(p.child(), lo, hi, p.count, /*nonempty=*/false);
      case Kind::OneOrMore: {
        std::vector<Outcome> all;
        for (int k = 1; k <= hi - lo; ++k) {
          auto r = repeat(p.child(), lo, hi, k, /*nonempty=*/true);
          all.insert(all.end(), r.begin(), r.end());
        }
        return all;
      }
      case Kind::Within: {
        if (hi > lo && ts(chosen_[hi - 1]) - ts(chosen_[lo]) > p.delta_t) return {};
        auto outs = derive(p.child(), lo, hi);
        for (auto& o : outs)
          for (auto& c : o)
            if (c.kind == CKind::Unresolved) {
              c.kind = CKind::Until;
              c.deadline = ts(chosen_[lo]) + p.delta_t;
            }
        return outs;
      }
      case Kind::Not:
        throw CompileError("oracle: negation outside a sequence");
    }
    return {};
  }

 private:
  const std::vector<SemanticEvent>& stream_;
  const std::vector<int>& chosen_;

  Timestamp ts(int stream_index) const { return stream_[stream_index].timestamp; }

  bool atom_matches(const pattern::PatternExpr& a, int stream_index) const {
    const auto& ev = stream_[stream_index];
    return ev.event_type == a.event_type && (!a.guard || a.guard->matches(ev.attrs));
  }

  static std::vector<Outcome> product(const std::vector<Outcome>& a, const std::vector<Outcome>& b) {
    std::vector<Outcome> out;
    for (const auto& x : a)
      for (const auto& y : b) {
        Outcome o = x;
        o.insert(o.end(), y.begin(), y.end());
        out.push_back(std::move(o));
      }
    return out;
  }

  std::vector<Outcome> repeat(const pattern::PatternExpr& body, int lo, int hi, int n, bool nonempty) {
    if (n == 0) return lo == hi ? std::vector<Outcome>{Outcome{}} : std::vector<Outcome>{};
    std::vector<Outcome> all;
    for (int mid = lo + (nonempty ? 1 : 0); mid <= hi; ++mid) {
      auto first = derive(body, lo, mid);
      if (first.empty()) continue;
      auto rest = repeat(body, mid, hi, n - 1, nonempty);
      auto prod = product(first, rest);
      all.insert(all.end(), prod.begin(), prod.end());
    }
    return all;
  }

  std::vector<Outcome> derive_seq(const std::vector<pattern::PatternExpr>& elems, int lo, int hi) {
    std::vector<int> bounds(elems.size() + 1, lo);
    std::vector<Outcome> all;
    split(elems, 0, lo, hi, bounds, all);
    return all;
  }

  void split(const std::vector<pattern::PatternExpr>& elems, std::size_t i, int p, int hi,
             std::vector<int>& bounds, std::vector<Outcome>& all) {
    bounds[i] = p;
    if (i == elems.size()) {
      if (p == hi) finish_split(elems, bounds, all);
      return;
    }
    if (pattern::is_negation_element(elems[i])) {
      split(elems, i + 1, p, hi, bounds, all);
      return;
    }
    for (int q = p; q <= hi; ++q) split(elems, i + 1, q, hi, bounds, all);
  }

  void finish_split(const std::vector<pattern::PatternExpr>& elems, const std::vector<int>& bounds,
                    std::vector<Outcome>& all) {
    const int lo = bounds.front();
    const int hi = bounds.back();
    std::vector<Outcome> acc{Outcome{}};
    for (std::size_t i = 0; i < elems.size() && !acc.empty(); ++i) {
      const auto& e = elems[i];
      if (!pattern::is_negation_element(e)) {
        acc = product(acc, derive(e, bounds[i], bounds[i + 1]));
        continue;
      }
      const int at = bounds[i];
      if (at == lo) {  // nothing consumed before the negation in this sequence
        acc.clear();
        break;
      }
      Constraint c;
      c.after = chosen_[at - 1];
      if (e.kind == pattern::Kind::Not) {
        c.forbidden_type = e.child().event_type;
        c.forbidden_guard = e.child().guard;
        if (at < hi) {
          c.kind = CKind::Between;
          c.before = chosen_[at];
        } else {
          c.kind = CKind::Unresolved;
        }
      } else {
        c.forbidden_type = e.child().child().event_type;
        c.forbidden_guard = e.child().child().guard;
        c.kind = CKind::Until;
        c.deadline = ts(c.after) + e.delta_t;
      }
      for (auto& o : acc) o.push_back(c);
    }
    all.insert(all.end(), acc.begin(), acc.end());
  }
};

inline bool satisfied(const Outcome& o, const std::vector<SemanticEvent>& stream) {
  for (const auto& c : o) {
    if (c.kind == CKind::Unresolved) throw CompileError("oracle: negation without a bounding window");
    for (int j = c.after + 1; j < static_cast<int>(stream.size()); ++j) {
      if (c.kind == CKind::Between && j >= c.before) break;
      if (c.kind == CKind::Until && stream[j].timestamp > c.deadline) break;
      const auto& ev = stream[j];
      if (ev.event_type == c.forbidden_type && (!c.forbidden_guard || c.forbidden_guard->matches(ev.attrs)))
        return false;
    }
  }
  return true;
}

}  // namespace oracle_detail

/// Exhaustive reference matcher for one entity's events (already in arrival
/// order, timestamps non-decreasing) with the watermark at +inf. Every
/// non-empty subset of the stream is tested against every derivation of the
/// pattern. Limited to kOracleMaxEvents events and kOracleMaxDepth operator
/// nesting.
inline MatchSet oracle_match(const pattern::PatternExpr& expr, const std::vector<SemanticEvent>& events) {
  if (events.size() > kOracleMaxEvents)
    throw ConfigError("oracle limited to " + std::to_string(kOracleMaxEvents) + " events (got " +
                      std::to_string(events.size()) + ")");
  if (expr.depth() > kOracleMaxDepth)
    throw ConfigError("oracle limited to pattern depth " + std::to_string(kOracleMaxDepth));
  const auto v = pattern::validate_pattern(expr);
  if (!v.ok()) throw CompileError("oracle: invalid pattern: " + v.summary());
  for (std::size_t i = 1; i < events.size(); ++i)
    if (events[i].timestamp < events[i - 1].timestamp)
      throw OutOfOrderError("oracle: events must be sorted by timestamp");

  MatchSet out;
  const int n = static_cast<int>(events.size());
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> chosen;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) chosen.push_back(i);
    oracle_detail::Derivation d(events, chosen);
    for (const auto& o : d.derive(expr, 0, static_cast<int>(chosen.size()))) {
      if (oracle_detail::satisfied(o, events)) {
        MatchKey key;
        for (const int i : chosen) key.push_back(events[i].event_id);
        out.insert(std::move(key));
        break;
      }
    }
  }
  return out;
}

}  // namespace semflow::bench
