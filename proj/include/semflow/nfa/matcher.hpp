#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semflow/common/errors.hpp"
#include "semflow/event.hpp"
#include "semflow/nfa/automaton.hpp"

namespace semflow::nfa {

inline constexpr std::size_t kDefaultInstanceCap = 10000;

/// Read-only view of matcher state for inspection endpoints.
struct InstanceTrace {
  std::uint64_t instance_id = 0;
  NodeId node = 0;
  std::string status;  // "active" or "pending_accept"
  std::vector<std::string> matched;
};

struct EntityTrace {
  std::string entity_id;
  Timestamp watermark = 0;
  std::vector<InstanceTrace> instances;
  std::vector<PatternMatch> matches;
};

struct MatcherTrace {
  std::vector<EntityTrace> entities;

  std::size_t active_instances() const {
    std::size_t n = 0;
    for (const auto& e : entities) n += e.instances.size();
    return n;
  }
  std::size_t match_count() const {
    std::size_t n = 0;
    for (const auto& e : entities) n += e.matches.size();
    return n;
  }
};

/// Per-entity runtime over a shared compiled automaton. Instances branch on
/// every consuming transition and keep the non-consuming continuation
/// (skip-till-any-match); absence guards kill the continuations that would
/// let a forbidden event fall inside their interval.
class Matcher {
 public:
  explicit Matcher(std::shared_ptr<const Nfa> nfa, std::string pattern_id = "pattern",
                   std::size_t instance_cap = kDefaultInstanceCap)
      : nfa_(std::move(nfa)), pattern_id_(std::move(pattern_id)), cap_(instance_cap) {
    init_start();
  }

  const Nfa& nfa() const noexcept { return *nfa_; }
  const std::string& pattern_id() const noexcept { return pattern_id_; }
  std::size_t instance_cap() const noexcept { return cap_; }

  /// Feeds one event. Timestamps must be non-decreasing per entity.
  std::vector<PatternMatch> advance(const SemanticEvent& ev) {
    auto& st = entities_[ev.entity_id];
    if (st.has_watermark && ev.timestamp < st.watermark)
      throw OutOfOrderError("event '" + ev.event_id + "' at t=" + std::to_string(ev.timestamp) +
                            " precedes watermark " + std::to_string(st.watermark) + " of entity '" +
                            ev.entity_id + "'");
    std::vector<PatternMatch> out;
    expire(ev.entity_id, st, ev.timestamp, out);
    st.watermark = ev.timestamp;
    st.has_watermark = true;

    const int idx = static_cast<int>(st.events.size());
    st.events.push_back(Stored{ev, Pos{ev.timestamp, next_seq_++}});
    const auto& stored = st.events.back();

    std::vector<Instance> next;
    std::vector<Env> accepted;
    std::set<std::string> seen;

    for (auto& inst : st.instances) {
      const auto kills = guard_hits(inst.env, stored);
      for (const int ei : nfa_->out_edges[inst.node]) {
        const auto& edge = nfa_->edges[ei];
        if (edge.kind != TransitionKind::Take || kills.take || !edge.condition.matches(ev)) continue;
        if (auto env = take(inst.env, edge, idx, stored)) closure(edge.to, std::move(*env), st, next, accepted, seen);
      }
      if (!kills.ignore) keep(std::move(inst), next, seen);
    }

    std::vector<Pending> still_pending;
    for (auto& p : st.pending) {
      if (!guard_hits(p.env, stored).take) still_pending.push_back(std::move(p));
    }
    st.pending = std::move(still_pending);

    for (const auto& [node, eidx] : start_takes_) {
      const auto& edge = nfa_->edges[eidx];
      if (!edge.condition.matches(ev)) continue;
      Env fresh;
      fresh.win_start.resize(nfa_->windows.size());
      if (auto env = take(fresh, edge, idx, stored))
        closure(edge.to, std::move(*env), st, next, accepted, seen);
    }
    st.instances = std::move(next);

    for (auto& env : accepted) accept(ev.entity_id, st, std::move(env), ev.timestamp, out);

    if (st.instances.size() + st.pending.size() > cap_)
      throw InstanceCapExceeded("entity '" + ev.entity_id + "' holds " +
                                std::to_string(st.instances.size() + st.pending.size()) +
                                " active instances (cap " + std::to_string(cap_) + ")");
    return out;
  }

  /// Advances an entity's watermark: emits matches whose absence guards have
  /// all expired and drops instances whose windows can no longer be met.
  std::vector<PatternMatch> on_watermark(const std::string& entity_id, Timestamp watermark) {
    auto& st = entities_[entity_id];
    if (st.has_watermark && watermark < st.watermark)
      throw OutOfOrderError("watermark " + std::to_string(watermark) + " regresses for entity '" +
                            entity_id + "'");
    std::vector<PatternMatch> out;
    expire(entity_id, st, watermark, out);
    st.watermark = watermark;
    st.has_watermark = true;
    return out;
  }

  /// Watermark +inf for every entity. Idempotent.
  std::vector<PatternMatch> flush() {
    std::vector<PatternMatch> out;
    for (auto& [entity, st] : entities_) {
      expire(entity, st, kInfinity, out);
      st.instances.clear();
      st.watermark = kInfinity;
      st.has_watermark = true;
    }
    return out;
  }

  std::size_t active_instances(const std::string& entity_id) const {
    auto it = entities_.find(entity_id);
    return it == entities_.end() ? 0 : it->second.instances.size() + it->second.pending.size();
  }

  MatcherTrace snapshot() const {
    MatcherTrace t;
    for (const auto& [entity, st] : entities_) {
      EntityTrace et;
      et.entity_id = entity;
      et.watermark = st.watermark;
      for (const auto& inst : st.instances)
        et.instances.push_back({inst.id, inst.node, "active", ids(st, inst.env)});
      for (const auto& p : st.pending)
        et.instances.push_back({p.id, nfa_->accept, "pending_accept", ids(st, p.env)});
      et.matches = st.emitted;
      t.entities.push_back(std::move(et));
    }
    return t;
  }

 private:
  struct Pos {
    Timestamp ts = 0;
    std::uint64_t seq = 0;
  };

  struct Stored {
    SemanticEvent ev;
    Pos pos;
  };

  struct GuardInst {
    int guard = 0;
    bool open = false;  // closes on the next take
    Pos start;
    Timestamp deadline = 0;
  };

  struct Env {
    std::vector<std::optional<Timestamp>> win_start;
    std::vector<int> events;
    std::vector<GuardInst> guards;
    Timestamp max_deadline = std::numeric_limits<Timestamp>::min();
  };

  struct Instance {
    std::uint64_t id = 0;
    NodeId node = 0;
    Env env;
  };

  struct Pending {
    std::uint64_t id = 0;
    Env env;
  };

  struct EntityState {
    std::vector<Stored> events;
    std::vector<Instance> instances;
    std::vector<Pending> pending;
    std::set<std::vector<std::string>> emitted_keys;
    std::vector<PatternMatch> emitted;
    Timestamp watermark = 0;
    bool has_watermark = false;
  };

  struct Hits {
    bool ignore = false;  // the non-consuming continuation dies
    bool take = false;    // every continuation dies
  };

  std::shared_ptr<const Nfa> nfa_;
  std::string pattern_id_;
  std::size_t cap_;
  std::map<std::string, EntityState> entities_;
  std::vector<std::pair<NodeId, int>> start_takes_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_instance_ = 1;

  void init_start() {
    // The start closure carries no actions: guards need a preceding event
    // and window resets sit on loop back-edges only.
    std::vector<NodeId> stack{nfa_->start};
    std::vector<bool> seen(nfa_->nodes.size(), false);
    while (!stack.empty()) {
      const auto n = stack.back();
      stack.pop_back();
      if (seen[n]) continue;
      seen[n] = true;
      for (const int ei : nfa_->out_edges[n]) {
        const auto& e = nfa_->edges[ei];
        if (e.kind == TransitionKind::Take) start_takes_.emplace_back(n, ei);
        if (e.kind == TransitionKind::Proceed) stack.push_back(e.to);
      }
    }
  }

  static std::vector<std::string> ids(const EntityState& st, const Env& env) {
    std::vector<std::string> out;
    for (const int i : env.events) out.push_back(st.events[i].ev.event_id);
    return out;
  }

  Hits guard_hits(const Env& env, const Stored& s) const {
    Hits h;
    for (const auto& g : env.guards) {
      if (!nfa_->neg_guards[g.guard].forbidden.matches(s.ev)) continue;
      if (g.open) {
        h.ignore = true;
      } else if (s.pos.ts <= g.deadline) {
        h.ignore = true;
        h.take = true;
      }
    }
    return h;
  }

  std::optional<Env> take(const Env& from, const Edge& edge, int idx, const Stored& s) const {
    Env env = from;
    for (const int w : edge.windows) {
      auto& start = env.win_start[w];
      if (!start) start = s.pos.ts;
      if (s.pos.ts - *start > nfa_->windows[w].delta_t) return std::nullopt;
    }
    std::erase_if(env.guards, [](const GuardInst& g) { return g.open; });
    env.events.push_back(idx);
    return env;
  }

  void apply(const Action& a, Env& env, const EntityState& st) const {
    const auto& prev = st.events[env.events.back()].pos;
    switch (a.kind) {
      case ActionKind::OpenGuard:
        env.guards.push_back(GuardInst{a.guard, true, prev, 0});
        break;
      case ActionKind::OpenTimed: {
        const auto& g = nfa_->neg_guards[a.guard];
        env.guards.push_back(GuardInst{a.guard, false, prev, prev.ts + g.bound});
        env.max_deadline = std::max(env.max_deadline, prev.ts + g.bound);
        break;
      }
      case ActionKind::TrailGuard: {
        const auto& g = nfa_->neg_guards[a.guard];
        for (auto& gi : env.guards) {
          if (gi.guard != a.guard || !gi.open) continue;
          gi.open = false;
          const Timestamp anchor =
              g.bound_anchor == Anchor::PrevElement ? gi.start.ts : env.win_start[g.window].value();
          gi.deadline = anchor + g.bound;
          env.max_deadline = std::max(env.max_deadline, gi.deadline);
        }
        break;
      }
      case ActionKind::ResetWindows:
        for (const int w : a.windows) env.win_start[w].reset();
        break;
    }
  }

  static std::string key(NodeId node, const Env& env) {
    std::string k = std::to_string(node) + "|";
    for (const int e : env.events) k += std::to_string(e) + ",";
    k += "|";
    for (const auto& w : env.win_start) k += w ? std::to_string(*w) + "," : "-,";
    k += "|";
    for (const auto& g : env.guards)
      k += std::to_string(g.guard) + (g.open ? "o" : "t") + std::to_string(g.start.seq) + ":" +
           std::to_string(g.deadline) + ",";
    return k;
  }

  void keep(Instance inst, std::vector<Instance>& next, std::set<std::string>& seen) {
    if (seen.insert(key(inst.node, inst.env)).second) next.push_back(std::move(inst));
  }

  void closure(NodeId node, Env env, const EntityState& st, std::vector<Instance>& next,
               std::vector<Env>& accepted, std::set<std::string>& seen) {
    for (const auto& a : nfa_->nodes[node].on_enter) apply(a, env, st);
    if (node == nfa_->accept) accepted.push_back(env);
    bool waits = false;
    for (const int ei : nfa_->out_edges[node]) {
      const auto& e = nfa_->edges[ei];
      if (e.kind == TransitionKind::Take) waits = true;
    }
    if (waits) keep(Instance{next_instance_++, node, env}, next, seen);
    for (const int ei : nfa_->out_edges[node]) {
      const auto& e = nfa_->edges[ei];
      if (e.kind != TransitionKind::Proceed) continue;
      Env branch = env;
      for (const auto& a : e.actions) apply(a, branch, st);
      closure(e.to, std::move(branch), st, next, accepted, seen);
    }
  }

  static void drop_resolved(Env& env, Timestamp watermark) {
    std::erase_if(env.guards, [&](const GuardInst& g) { return !g.open && g.deadline < watermark; });
  }

  PatternMatch make_match(const std::string& entity, const EntityState& st, const Env& env,
                          Timestamp emitted_at) const {
    PatternMatch m;
    m.pattern_id = pattern_id_;
    m.entity_id = entity;
    for (const int i : env.events) m.events.push_back(st.events[i].ev);
    m.first_ts = m.events.front().timestamp;
    m.last_effective_ts = std::max(m.events.back().timestamp, env.max_deadline);
    m.emitted_at = emitted_at;
    return m;
  }

  void emit(const std::string& entity, EntityState& st, const Env& env, Timestamp at,
            std::vector<PatternMatch>& out) {
    auto k = ids(st, env);
    if (!st.emitted_keys.insert(k).second) return;
    auto m = make_match(entity, st, env, at);
    st.emitted.push_back(m);
    out.push_back(std::move(m));
  }

  void accept(const std::string& entity, EntityState& st, Env env, Timestamp watermark,
              std::vector<PatternMatch>& out) {
    drop_resolved(env, watermark);
    if (env.guards.empty())
      emit(entity, st, env, watermark, out);
    else
      st.pending.push_back(Pending{next_instance_++, std::move(env)});
  }

  bool feasible(const Instance& inst, Timestamp watermark) const {
    for (const int ei : nfa_->out_edges[inst.node]) {
      const auto& e = nfa_->edges[ei];
      if (e.kind != TransitionKind::Take) continue;
      bool ok = true;
      for (const int w : e.windows) {
        const auto& s = inst.env.win_start[w];
        if (s && *s + nfa_->windows[w].delta_t < watermark) ok = false;
      }
      if (ok) return true;
    }
    return false;
  }

  void expire(const std::string& entity, EntityState& st, Timestamp watermark,
              std::vector<PatternMatch>& out) {
    std::vector<Pending> keep_pending;
    for (auto& p : st.pending) {
      drop_resolved(p.env, watermark);
      if (p.env.guards.empty())
        emit(entity, st, p.env, watermark, out);
      else
        keep_pending.push_back(std::move(p));
    }
    st.pending = std::move(keep_pending);
    std::vector<Instance> alive;
    for (auto& inst : st.instances) {
      drop_resolved(inst.env, watermark);
      if (watermark != kInfinity && feasible(inst, watermark)) alive.push_back(std::move(inst));
    }
    st.instances = std::move(alive);
  }
};

inline void to_json(nlohmann::json& j, const MatcherTrace& t) {
  j = nlohmann::json::array();
  for (const auto& e : t.entities) {
    nlohmann::json inst = nlohmann::json::array();
    for (const auto& i : e.instances)
      inst.push_back({{"instance_id", i.instance_id}, {"node", i.node}, {"status", i.status}, {"matched", i.matched}});
    j.push_back({{"entity_id", e.entity_id},
                 {"watermark", timestamp_json(e.watermark)},
                 {"active_instances", e.instances.size()},
                 {"instances", inst},
                 {"matches", e.matches}});
  }
}

}  // namespace semflow::nfa
