#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semflow/common/errors.hpp"
#include "semflow/event.hpp"
#include "semflow/pattern/ast.hpp"
#include "semflow/pattern/format.hpp"
#include "semflow/pattern/validate.hpp"

namespace semflow::nfa {

using NodeId = int;

enum class NodeKind { Start, Intermediate, Accept };
enum class TransitionKind { Take, Ignore, Proceed };

inline const char* transition_name(TransitionKind k) {
  switch (k) {
    case TransitionKind::Take: return "Take";
    case TransitionKind::Ignore: return "Ignore";
    case TransitionKind::Proceed: return "Proceed";
  }
  return "?";
}

struct EventCondition {
  std::string event_type;
  std::optional<pattern::GuardPredicate> guard;

  bool matches(const SemanticEvent& ev) const {
    return ev.event_type == event_type && (!guard || guard->matches(ev.attrs));
  }

  std::string label() const {
    auto a = pattern::atom(event_type, guard);
    return pattern::format_pattern(a);
  }
};

enum class Anchor { PrevElement, WindowStart };

/// Absence constraint compiled from a NOT. A guard opened by a bare NOT is
/// closed by the next consuming transition; if its sequence ends first it
/// turns into a timed guard ending at `bound` after its anchor. A guard from
/// WITHIN(NOT(x), d) is timed from the start.
struct NegGuard {
  int id = 0;
  std::pair<NodeId, NodeId> active_between{0, 0};
  EventCondition forbidden;
  std::int64_t bound = 0;
  Anchor bound_anchor = Anchor::WindowStart;
  /// Window supplying the anchor when bound_anchor == WindowStart.
  int window = -1;
  /// False for WITHIN(NOT(x), d) elements, which are timed immediately.
  bool closes_on_take = true;
};

struct Window {
  int id = 0;
  std::int64_t delta_t = 0;
};

enum class ActionKind {
  OpenGuard,     // bare NOT: guard open until the next take
  OpenTimed,     // WITHIN(NOT): guard timed from the previous event
  TrailGuard,    // sequence ended: open instances of the guard become timed
  ResetWindows,  // loop re-entry
};

struct Action {
  ActionKind kind = ActionKind::OpenGuard;
  int guard = -1;
  std::vector<int> windows;
};

struct Node {
  NodeId id = 0;
  NodeKind kind = NodeKind::Intermediate;
  /// Executed whenever an instance arrives at this node.
  std::vector<Action> on_enter;
};

struct Edge {
  NodeId from = 0;
  NodeId to = 0;
  TransitionKind kind = TransitionKind::Take;
  /// Meaningful for Take and Ignore edges.
  EventCondition condition;
  /// Take edges: windows enclosing the consumed atom.
  std::vector<int> windows;
  /// Proceed edges: actions run when the edge is followed.
  std::vector<Action> actions;
};

/// Compiled automaton. Immutable after compile(); share it across matchers.
struct Nfa {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<NegGuard> neg_guards;
  std::vector<Window> windows;
  /// Set when the whole pattern is a WITHIN.
  std::optional<std::int64_t> window;
  NodeId start = 0;
  NodeId accept = 0;
  std::vector<std::vector<int>> out_edges;
  std::string source_text;

  std::vector<NodeId> accept_nodes() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes)
      if (n.kind == NodeKind::Accept) out.push_back(n.id);
    return out;
  }

  std::size_t count_edges(TransitionKind k) const {
    std::size_t n = 0;
    for (const auto& e : edges)
      if (e.kind == k) ++n;
    return n;
  }
};

namespace detail {

struct BuildCtx {
  std::vector<int> windows;  // enclosing windows, innermost last
};

class Compiler {
 public:
  Nfa run(const pattern::PatternExpr& root) {
    nfa_.start = new_node();
    const auto exit = build(root, nfa_.start, BuildCtx{});
    if (exit == nfa_.start) throw CompileError("pattern compiles to an empty automaton");
    nfa_.accept = exit;
    nfa_.nodes[nfa_.start].kind = NodeKind::Start;
    nfa_.nodes[exit].kind = NodeKind::Accept;
    if (root.kind == pattern::Kind::Within) nfa_.window = root.delta_t;
    add_ignore_loops();
    index_edges();
    nfa_.source_text = pattern::format_pattern(root);
    return std::move(nfa_);
  }

 private:
  Nfa nfa_;

  NodeId new_node() {
    const auto id = static_cast<NodeId>(nfa_.nodes.size());
    nfa_.nodes.push_back(Node{id, NodeKind::Intermediate, {}});
    return id;
  }

  void proceed(NodeId from, NodeId to, std::vector<Action> actions = {}) {
    Edge e;
    e.from = from;
    e.to = to;
    e.kind = TransitionKind::Proceed;
    e.actions = std::move(actions);
    nfa_.edges.push_back(std::move(e));
  }

  static EventCondition condition_of(const pattern::PatternExpr& a) {
    if (a.kind != pattern::Kind::Atom || a.event_type.empty())
      throw CompileError("negation and atoms require an event type");
    return EventCondition{a.event_type, a.guard};
  }

  int new_guard(const pattern::PatternExpr& atom_expr, std::int64_t bound, Anchor anchor,
                int window, bool closes_on_take, NodeId at) {
    NegGuard g;
    g.id = static_cast<int>(nfa_.neg_guards.size());
    g.forbidden = condition_of(atom_expr);
    g.bound = bound;
    g.bound_anchor = anchor;
    g.window = window;
    g.closes_on_take = closes_on_take;
    g.active_between = {at, at};
    nfa_.neg_guards.push_back(std::move(g));
    return nfa_.neg_guards.back().id;
  }

  std::vector<int> windows_created_since(std::size_t mark) const {
    std::vector<int> out;
    for (auto i = mark; i < nfa_.windows.size(); ++i) out.push_back(nfa_.windows[i].id);
    return out;
  }

  /// Builds `e` starting at `entry`; returns the node reached after it.
  NodeId build(const pattern::PatternExpr& e, NodeId entry, const BuildCtx& ctx,
               const pattern::PatternExpr* window_owner = nullptr) {
    using pattern::Kind;
    switch (e.kind) {
      case Kind::Atom: {
        const auto exit = new_node();
        Edge t;
        t.from = entry;
        t.to = exit;
        t.kind = TransitionKind::Take;
        t.condition = condition_of(e);
        t.windows = ctx.windows;
        nfa_.edges.push_back(std::move(t));
        return exit;
      }
      case Kind::Seq: return build_seq(e, entry, ctx, window_owner);
      case Kind::Or: {
        const auto b1 = new_node();
        const auto b2 = new_node();
        proceed(entry, b1);
        proceed(entry, b2);
        const auto x1 = build(e.children[0], b1, ctx);
        const auto x2 = build(e.children[1], b2, ctx);
        const auto out = new_node();
        proceed(x1, out);
        proceed(x2, out);
        return out;
      }
      case Kind::And: {
        // either order, each order a sequence
        auto first = pattern::seq({e.children[0], e.children[1]});
        auto second = pattern::seq({e.children[1], e.children[0]});
        return build(pattern::or_(std::move(first), std::move(second)), entry, ctx);
      }
      case Kind::Times: {
        auto cur = entry;
        for (int i = 0; i < e.count; ++i) cur = build(e.child(), cur, ctx);
        return cur;
      }
      case Kind::OneOrMore: {
        const auto head = new_node();
        proceed(entry, head);
        const auto mark = nfa_.windows.size();
        const auto body_exit = build(e.child(), head, ctx);
        auto reset = windows_created_since(mark);
        std::vector<Action> back;
        if (!reset.empty()) back.push_back(Action{ActionKind::ResetWindows, -1, std::move(reset)});
        proceed(body_exit, head, std::move(back));
        const auto out = new_node();
        proceed(body_exit, out);
        return out;
      }
      case Kind::Optional: {
        const auto s = new_node();
        proceed(entry, s);
        const auto x = build(e.child(), s, ctx);
        const auto out = new_node();
        proceed(x, out);
        proceed(entry, out);
        return out;
      }
      case Kind::Within: {
        if (e.child().kind == Kind::Not)
          throw CompileError("negation window outside a sequence: " + pattern::format_pattern(e));
        const int w = static_cast<int>(nfa_.windows.size());
        nfa_.windows.push_back(Window{w, e.delta_t});
        BuildCtx inner = ctx;
        inner.windows.push_back(w);
        return build(e.child(), entry, inner, &e);
      }
      case Kind::Not:
        throw CompileError("negation outside a sequence: " + pattern::format_pattern(e));
    }
    throw CompileError("unknown pattern node");
  }

  NodeId build_seq(const pattern::PatternExpr& e, NodeId entry, const BuildCtx& ctx,
                   const pattern::PatternExpr* window_owner) {
    using pattern::Kind;
    auto cur = entry;
    bool consumed = false;
    std::vector<int> bare;
    for (std::size_t i = 0; i < e.children.size(); ++i) {
      const auto& c = e.children[i];
      if (c.kind == Kind::Not) {
        if (!consumed || ctx.windows.empty())
          throw CompileError("negation without a preceding element or window");
        // Anchoring at the window start equals anchoring at the previous
        // element when that element is the window's first atom.
        const bool first_atom = window_owner != nullptr && i == 1 && e.children[0].kind == Kind::Atom;
        const int w = ctx.windows.back();
        const auto g = new_guard(c.child(), nfa_.windows[w].delta_t,
                                 first_atom ? Anchor::PrevElement : Anchor::WindowStart, w, true, cur);
        nfa_.nodes[cur].on_enter.push_back(Action{ActionKind::OpenGuard, g, {}});
        bare.push_back(g);
      } else if (pattern::is_negation_element(c)) {
        if (!consumed) throw CompileError("negation window without a preceding element");
        const auto g = new_guard(c.child().child(), c.delta_t, Anchor::PrevElement, -1, false, cur);
        nfa_.nodes[cur].on_enter.push_back(Action{ActionKind::OpenTimed, g, {}});
      } else {
        cur = build(c, cur, ctx);
        if (!pattern::nullable(c)) consumed = true;
      }
    }
    for (const auto g : bare) {
      nfa_.nodes[cur].on_enter.push_back(Action{ActionKind::TrailGuard, g, {}});
      nfa_.neg_guards[g].active_between.second = cur;
    }
    return cur;
  }

  void add_ignore_loops() {
    const auto n = nfa_.edges.size();
    std::vector<bool> has_take(nfa_.nodes.size(), false);
    for (std::size_t i = 0; i < n; ++i)
      if (nfa_.edges[i].kind == TransitionKind::Take) has_take[nfa_.edges[i].from] = true;
    for (const auto& node : nfa_.nodes) {
      if (node.id == nfa_.start || !has_take[node.id]) continue;
      Edge loop;
      loop.from = node.id;
      loop.to = node.id;
      loop.kind = TransitionKind::Ignore;
      loop.condition = EventCondition{"*", std::nullopt};
      nfa_.edges.push_back(std::move(loop));
    }
  }

  void index_edges() {
    nfa_.out_edges.assign(nfa_.nodes.size(), {});
    for (std::size_t i = 0; i < nfa_.edges.size(); ++i)
      nfa_.out_edges[nfa_.edges[i].from].push_back(static_cast<int>(i));
  }
};

}  // namespace detail

/// Compiles a validated expression. Throws CompileError when validation
/// fails.
inline Nfa compile(const pattern::PatternExpr& expr) {
  const auto v = pattern::validate_pattern(expr);
  if (!v.ok()) throw CompileError("pattern is not valid: " + v.summary());
  return detail::Compiler{}.run(expr);
}

/// Graphviz rendering; node labels carry the node kind, edge labels the
/// transition kind and condition.
inline std::string emit_dot(const Nfa& nfa) {
  auto escape = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '"' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    return out;
  };
  std::ostringstream os;
  os << "digraph nfa {\n  rankdir=LR;\n";
  for (const auto& n : nfa.nodes) {
    const char* kind = n.kind == NodeKind::Start ? "start" : n.kind == NodeKind::Accept ? "accept" : "intermediate";
    os << "  n" << n.id << " [label=\"" << n.id << ":" << kind << "\"";
    if (n.kind == NodeKind::Accept) os << ", shape=doublecircle";
    os << "];\n";
  }
  for (const auto& e : nfa.edges) {
    os << "  n" << e.from << " -> n" << e.to << " [label=\"" << transition_name(e.kind);
    if (e.kind == TransitionKind::Take) os << ":" << escape(e.condition.label());
    os << "\"];\n";
  }
  for (const auto& g : nfa.neg_guards) {
    os << "  // neg_guard " << g.id << ": forbid " << escape(g.forbidden.label()) << " bound="
       << g.bound << "s anchor=" << (g.bound_anchor == Anchor::PrevElement ? "prev_element" : "window_start")
       << " between n" << g.active_between.first << ",n" << g.active_between.second << "\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace semflow::nfa
