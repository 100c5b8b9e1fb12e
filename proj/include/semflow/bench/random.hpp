#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "semflow/event.hpp"
#include "semflow/pattern/ast.hpp"
#include "semflow/pattern/validate.hpp"

namespace semflow::bench {

/// Seeded generator with platform-independent helpers (the standard
/// distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform integer in [lo, hi].
  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(eng_() % span);
  }

  bool chance(double p) { return static_cast<double>(eng_() >> 11) * 0x1.0p-53 < p; }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(v.size()) - 1))];
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(i) - 1))]);
  }

 private:
  std::mt19937_64 eng_;
};

struct PatternGenConfig {
  std::vector<std::string> alphabet{"A", "B", "C"};
  int max_depth = 4;
  std::int64_t min_window = 1;
  std::int64_t max_window = 6;
};

namespace gen_detail {

struct Ctx {
  bool in_within = false;
  bool in_one_or_more = false;
};

inline pattern::PatternExpr random_atom(Rng& rng, const PatternGenConfig& cfg) {
  return pattern::atom(rng.pick(cfg.alphabet));
}

inline pattern::PatternExpr random_expr(Rng& rng, const PatternGenConfig& cfg, int depth, Ctx ctx) {
  using namespace pattern;
  if (depth <= 0 || (depth < cfg.max_depth && rng.chance(0.25))) return random_atom(rng, cfg);
  const auto w = [&] { return rng.uniform(cfg.min_window, cfg.max_window); };
  switch (rng.uniform(0, 7)) {
    case 0:
    case 1: {
      std::vector<PatternExpr> elems;
      elems.push_back(random_expr(rng, cfg, depth - 1, ctx));
      const auto n = rng.uniform(1, 2);
      for (int i = 0; i < n; ++i) {
        const auto r = rng.uniform(0, 5);
        if (r <= 1 && ctx.in_within)
          elems.push_back(not_(random_atom(rng, cfg)));
        else if (r == 2 && depth >= 2)
          elems.push_back(within(not_(random_atom(rng, cfg)), w()));
        else
          elems.push_back(random_expr(rng, cfg, depth - 1, ctx));
      }
      return seq(std::move(elems));
    }
    case 2: return and_(random_expr(rng, cfg, depth - 1, ctx), random_expr(rng, cfg, depth - 1, ctx));
    case 3: return or_(random_expr(rng, cfg, depth - 1, ctx), random_expr(rng, cfg, depth - 1, ctx));
    case 4: return times(random_expr(rng, cfg, depth - 1, ctx), static_cast<int>(rng.uniform(2, 3)));
    case 5:
      if (!ctx.in_one_or_more) {
        Ctx inner = ctx;
        inner.in_one_or_more = true;
        return one_or_more(random_expr(rng, cfg, depth - 1, inner));
      }
      return optional(random_expr(rng, cfg, depth - 1, ctx));
    case 6: return optional(random_expr(rng, cfg, depth - 1, ctx));
    default: {
      Ctx inner = ctx;
      inner.in_within = true;
      return within(random_expr(rng, cfg, depth - 1, inner), w());
    }
  }
}

}  // namespace gen_detail

/// Random pattern accepted by validate_pattern with depth <= cfg.max_depth.
inline pattern::PatternExpr random_valid_pattern(Rng& rng, const PatternGenConfig& cfg = {}) {
  for (;;) {
    auto e = gen_detail::random_expr(rng, cfg, cfg.max_depth, {});
    if (e.depth() <= static_cast<std::size_t>(cfg.max_depth) && pattern::validate_pattern(e).ok()) return e;
  }
}

/// Random pattern over the full grammar, valid or not (no validity filter).
inline pattern::PatternExpr random_any_pattern(Rng& rng, int depth, const PatternGenConfig& cfg = {}) {
  using namespace pattern;
  if (depth <= 0 || rng.chance(0.2)) {
    auto a = gen_detail::random_atom(rng, cfg);
    if (rng.chance(0.2)) {
      GuardPredicate g;
      const char* keys[] = {"dest", "unit", "note"};
      const GuardOp ops[] = {GuardOp::Eq, GuardOp::Ne, GuardOp::Contains};
      const char* lits[] = {"home", "icu", "x y", "a\"b", "-3.5"};
      const auto n = rng.uniform(1, 2);
      for (int i = 0; i < n; ++i)
        g.clauses.push_back({keys[rng.uniform(0, 2)], ops[rng.uniform(0, 2)], lits[rng.uniform(0, 4)]});
      a.guard = std::move(g);
    }
    return a;
  }
  switch (rng.uniform(0, 8)) {
    case 0: {
      std::vector<PatternExpr> elems;
      const auto n = rng.uniform(1, 3);
      for (int i = 0; i < n; ++i) elems.push_back(random_any_pattern(rng, depth - 1, cfg));
      return seq(std::move(elems));
    }
    case 1: return and_(random_any_pattern(rng, depth - 1, cfg), random_any_pattern(rng, depth - 1, cfg));
    case 2: return or_(random_any_pattern(rng, depth - 1, cfg), random_any_pattern(rng, depth - 1, cfg));
    case 3: return not_(random_any_pattern(rng, depth - 1, cfg));
    case 4: return times(random_any_pattern(rng, depth - 1, cfg), static_cast<int>(rng.uniform(1, 4)));
    case 5: return one_or_more(random_any_pattern(rng, depth - 1, cfg));
    case 6: return optional(random_any_pattern(rng, depth - 1, cfg));
    default: {
      static const std::int64_t units[] = {1, 60, 3600, 86400};
      return within(random_any_pattern(rng, depth - 1, cfg), rng.uniform(1, 90) * units[rng.uniform(0, 3)]);
    }
  }
}

/// Random single-entity event stream, timestamps non-decreasing in
/// [1, max_ts].
inline std::vector<SemanticEvent> random_stream(Rng& rng, std::size_t max_len,
                                                const std::vector<std::string>& alphabet = {"A", "B", "C"},
                                                Timestamp max_ts = 8, const std::string& entity = "x") {
  const auto n = static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(max_len)));
  std::vector<Timestamp> ts(n);
  for (auto& t : ts) t = rng.uniform(1, max_ts);
  std::sort(ts.begin(), ts.end());
  std::vector<SemanticEvent> out;
  for (std::size_t i = 0; i < n; ++i) {
    SemanticEvent e;
    e.event_id = "e" + std::to_string(i);
    e.entity_id = entity;
    e.event_type = rng.pick(alphabet);
    e.timestamp = ts[i];
    e.source_doc = "d" + std::to_string(i);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace semflow::bench
