#include <gtest/gtest.h>

#include "semflow/bench/oracle.hpp"
#include "semflow/bench/random.hpp"
#include "semflow/nfa/matcher.hpp"
#include "semflow/pattern/format.hpp"
#include "semflow/pattern/parser.hpp"

using namespace semflow;
using namespace semflow::nfa;
using pattern::parse_pattern;

namespace {

SemanticEvent ev(const std::string& id, const std::string& type, Timestamp ts, const std::string& entity = "x") {
  SemanticEvent e;
  e.event_id = id;
  e.entity_id = entity;
  e.event_type = type;
  e.timestamp = ts;
  e.evidence_span = EvidenceSpan{0, 1};
  return e;
}

std::shared_ptr<const Nfa> nfa_of(const std::string& text) {
  return std::make_shared<const Nfa>(compile(parse_pattern(text)));
}

using Keys = std::set<std::vector<std::string>>;

Keys run(const std::string& text, const std::vector<SemanticEvent>& stream) {
  Matcher m(nfa_of(text));
  Keys out;
  for (const auto& e : stream)
    for (const auto& x : m.advance(e)) out.insert(x.event_ids());
  for (const auto& x : m.flush()) out.insert(x.event_ids());
  return out;
}

std::size_t count(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = haystack.find(needle); p != std::string::npos; p = haystack.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Compile, AtomIsTwoNodesOneTake) {
  const auto n = compile(pattern::atom("A"));
  EXPECT_EQ(n.nodes.size(), 2u);
  ASSERT_EQ(n.edges.size(), 1u);
  EXPECT_EQ(n.edges[0].kind, TransitionKind::Take);
  EXPECT_EQ(n.edges[0].condition.event_type, "A");
}

TEST(Compile, SeqHasIgnoreLoopOnMiddleNode) {
  const auto n = compile(parse_pattern("SEQ(A, B)"));
  EXPECT_EQ(n.nodes.size(), 3u);
  EXPECT_EQ(n.count_edges(TransitionKind::Take), 2u);
  bool loop = false;
  for (const auto& e : n.edges)
    if (e.kind == TransitionKind::Ignore && e.from == e.to && e.from != n.start && e.from != n.accept) loop = true;
  EXPECT_TRUE(loop);
}

TEST(Compile, TrailingAbsenceBecomesGuard) {
  const auto n = compile(parse_pattern("WITHIN(SEQ(A, NOT(B)), 10 s)"));
  EXPECT_EQ(n.nodes.size(), 2u);
  EXPECT_EQ(n.count_edges(TransitionKind::Take), 1u);
  ASSERT_EQ(n.neg_guards.size(), 1u);
  EXPECT_EQ(n.neg_guards[0].forbidden.event_type, "B");
  EXPECT_EQ(n.neg_guards[0].bound, 10);
}

TEST(Compile, GuardsAreFinite) {
  bench::Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto n = compile(bench::random_valid_pattern(rng));
    for (const auto& g : n.neg_guards) EXPECT_GT(g.bound, 0);
  }
}

TEST(Compile, RejectsInvalid) { EXPECT_THROW(compile(parse_pattern("NOT(A)")), CompileError); }

TEST(Dot, Rendering) {
  const auto a = emit_dot(compile(pattern::atom("A")));
  EXPECT_EQ(count(a, "[label=\""), 3u);  // two nodes, one edge
  EXPECT_NE(a.find("Take:A"), std::string::npos);
  EXPECT_NE(emit_dot(compile(parse_pattern("SEQ(A, B)"))).find("Ignore"), std::string::npos);
  const auto n = compile(parse_pattern("OR(A, B)"));
  std::size_t proceed_from_start = 0;
  for (const auto& e : n.edges)
    if (e.kind == TransitionKind::Proceed && e.from == n.start) ++proceed_from_start;
  EXPECT_EQ(proceed_from_start, 2u);
  EXPECT_EQ(count(emit_dot(n), "Proceed"), n.count_edges(TransitionKind::Proceed));
}

TEST(Advance, SkipsIrrelevantEvents) {
  EXPECT_EQ(run("SEQ(A, B)", {ev("a", "A", 1), ev("c", "C", 2), ev("b", "B", 3)}), (Keys{{"a", "b"}}));
}

TEST(Advance, ForbiddenEventKills) {
  Matcher m(nfa_of("WITHIN(SEQ(A, NOT(B)), 10 s)"));
  EXPECT_TRUE(m.advance(ev("a", "A", 0)).empty());
  EXPECT_TRUE(m.advance(ev("b", "B", 5)).empty());
  EXPECT_TRUE(m.flush().empty());
}

TEST(Advance, SkipTillAnyMatch) {
  EXPECT_EQ(run("SEQ(A, B)", {ev("a1", "A", 1), ev("a2", "A", 2), ev("b", "B", 3)}),
            (Keys{{"a1", "b"}, {"a2", "b"}}));
}

TEST(Advance, EntitiesAreIsolated) {
  EXPECT_TRUE(run("SEQ(A, B)", {ev("a", "A", 1, "p"), ev("b", "B", 2, "q")}).empty());
}

TEST(Advance, OutOfOrderRejected) {
  Matcher m(nfa_of("SEQ(A, B)"));
  m.advance(ev("a", "A", 5));
  EXPECT_THROW(m.advance(ev("b", "B", 4)), OutOfOrderError);
}

TEST(Advance, InstanceCap) {
  Matcher m(nfa_of("SEQ(A, B)"), "p", 3);
  m.advance(ev("a1", "A", 1));
  m.advance(ev("a2", "A", 2));
  EXPECT_THROW({
    for (int i = 3; i < 10; ++i) m.advance(ev("a" + std::to_string(i), "A", i));
  }, InstanceCapExceeded);
}

TEST(Watermark, DeferredAbsenceEmitsAfterDeadline) {
  Matcher m(nfa_of("WITHIN(SEQ(A, NOT(B)), 10 s)"));
  m.advance(ev("a", "A", 0));
  EXPECT_TRUE(m.on_watermark("x", 9).empty());
  const auto out = m.on_watermark("x", 11);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].event_ids(), std::vector<std::string>{"a"});
  EXPECT_EQ(out[0].emitted_at, 11);
}

TEST(Watermark, ExpiredWindowKills) {
  Matcher m(nfa_of("WITHIN(SEQ(A, B), 10 s)"));
  m.advance(ev("a", "A", 0));
  EXPECT_EQ(m.active_instances("x"), 1u);
  EXPECT_TRUE(m.on_watermark("x", 20).empty());
  EXPECT_EQ(m.active_instances("x"), 0u);
  EXPECT_TRUE(m.flush().empty());
}

TEST(Watermark, FlushIsIdempotent) {
  Matcher m(nfa_of("WITHIN(SEQ(A, NOT(B)), 10 s)"));
  m.advance(ev("a", "A", 0));
  EXPECT_EQ(m.flush().size(), 1u);
  EXPECT_TRUE(m.flush().empty());
}

TEST(Snapshot, Lifecycle) {
  Matcher m(nfa_of("SEQ(A, B)"));
  EXPECT_EQ(m.snapshot().active_instances(), 0u);
  EXPECT_EQ(m.snapshot().match_count(), 0u);
  m.advance(ev("a", "A", 1));
  auto t = m.snapshot();
  ASSERT_EQ(t.entities.size(), 1u);
  ASSERT_EQ(t.entities[0].instances.size(), 1u);
  EXPECT_EQ(t.entities[0].instances[0].node, 1);
  EXPECT_EQ(t.entities[0].instances[0].matched, std::vector<std::string>{"a"});
  m.advance(ev("b", "B", 2));
  t = m.snapshot();
  ASSERT_EQ(t.match_count(), 1u);
  for (const auto& e : t.entities[0].matches[0].events) EXPECT_TRUE(e.evidence_span.has_value());
}

TEST(Oracle, Examples) {
  using bench::oracle_match;
  EXPECT_EQ(oracle_match(parse_pattern("SEQ(A, B)"), {ev("a", "A", 1), ev("b", "B", 2)}), (Keys{{"a", "b"}}));
  EXPECT_TRUE(oracle_match(parse_pattern("SEQ(A, B)"), {ev("b", "B", 1), ev("a", "A", 2)}).empty());
  EXPECT_EQ(oracle_match(parse_pattern("WITHIN(AND(A, B), 10 s)"), {ev("b", "B", 1), ev("a", "A", 5)}),
            (Keys{{"b", "a"}}));
}

TEST(Oracle, ClosedForms) {
  // SEQ over k distinct forced events: exactly one match.
  EXPECT_EQ(bench::oracle_match(parse_pattern("SEQ(A, B, C)"), {ev("a", "A", 1), ev("b", "B", 2), ev("c", "C", 3)})
                .size(),
            1u);
  // OPTIONAL doubles the count when the optional event is present.
  const std::vector<SemanticEvent> s{ev("a", "A", 1), ev("b", "B", 2), ev("c", "C", 3)};
  EXPECT_EQ(bench::oracle_match(parse_pattern("SEQ(A, OPTIONAL(B), C)"), s).size(), 2u);
  EXPECT_THROW(bench::oracle_match(parse_pattern("A"), std::vector<SemanticEvent>(9, ev("a", "A", 1))),
               ConfigError);
}

TEST(Property, MatchesOracle) {
  bench::Rng rng(2026);
  for (int i = 0; i < 1500; ++i) {
    const auto p = bench::random_valid_pattern(rng);
    const auto s = bench::random_stream(rng, 8);
    EXPECT_EQ(run(pattern::format_pattern(p), s), bench::oracle_match(p, s)) << pattern::format_pattern(p);
  }
}

TEST(Property, AndIsSymmetric) {
  bench::Rng rng(17);
  bench::PatternGenConfig cfg;
  cfg.max_depth = 2;
  for (int i = 0; i < 400; ++i) {
    const auto p = bench::random_valid_pattern(rng, cfg);
    const auto q = bench::random_valid_pattern(rng, cfg);
    const auto w = rng.uniform(2, 6);
    const auto s = bench::random_stream(rng, 8);
    const auto pq = pattern::within(pattern::and_(p, q), w);
    const auto qp = pattern::within(pattern::and_(q, p), w);
    Keys a, b;
    for (const auto& [expr, out] : {std::pair{&pq, &a}, std::pair{&qp, &b}}) {
      Matcher m(std::make_shared<const Nfa>(compile(*expr)));
      for (const auto& e : s)
        for (const auto& x : m.advance(e)) {
          auto ids = x.event_ids();
          std::sort(ids.begin(), ids.end());
          out->insert(ids);
        }
      for (const auto& x : m.flush()) {
        auto ids = x.event_ids();
        std::sort(ids.begin(), ids.end());
        out->insert(ids);
      }
    }
    EXPECT_EQ(a, b) << pattern::format_pattern(pq);
  }
}

TEST(Property, NoDuplicatesAndMonotoneEmission) {
  bench::Rng rng(23);
  for (int i = 0; i < 800; ++i) {
    const auto p = bench::random_valid_pattern(rng);
    const auto s = bench::random_stream(rng, 8);
    Matcher m(std::make_shared<const Nfa>(compile(p)));
    std::vector<PatternMatch> all;
    for (const auto& e : s)
      for (auto& x : m.advance(e)) all.push_back(std::move(x));
    for (auto& x : m.flush()) all.push_back(std::move(x));
    Keys seen;
    for (const auto& x : all) {
      EXPECT_TRUE(seen.insert(x.event_ids()).second) << pattern::format_pattern(p);
      for (const auto& e : x.events) EXPECT_GE(x.emitted_at, e.timestamp);
    }
    EXPECT_EQ(m.active_instances("x"), 0u);
  }
}
