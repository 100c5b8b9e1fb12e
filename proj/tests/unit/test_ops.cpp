#include <gtest/gtest.h>

#include <algorithm>

#include "semflow/backend/mock.hpp"
#include "semflow/backend/prompt.hpp"
#include "semflow/backend/retrieval.hpp"
#include "semflow/backend/transcript.hpp"
#include "semflow/bench/random.hpp"
#include "semflow/extraction/extraction.hpp"
#include "semflow/ops/groupby.hpp"
#include "semflow/ops/semantic.hpp"
#include "semflow/ops/window.hpp"

using namespace semflow;
using namespace semflow::ops;

namespace {

Document doc(const std::string& id, const std::string& text, Timestamp ts = 0, const std::string& entity = "e1") {
  return Document{id, entity, ts, text, {}};
}

EventSchema care_schema() {
  EventSchema s;
  s.types.push_back({"Discharge", "patient discharged", {}, {"discharged"}});
  s.types.push_back({"FollowUp", "follow-up visit", {}, {"follow-up"}});
  return s;
}

std::string filler(std::size_t words) {
  static const char* pool[] = {"weather", "lunch", "parking", "meeting", "traffic", "coffee", "printer", "garden"};
  std::string s;
  for (std::size_t i = 0; i < words; ++i) s += std::string(pool[i % 8]) + (i % 7 == 6 ? ". " : " ");
  return s;
}

}  // namespace

TEST(Mock, EchoReturnsPrompt) {
  MockConfig cfg;
  cfg.mode = MockConfig::Mode::Echo;
  MockBackend b(cfg);
  EXPECT_EQ(b.complete("hello there").text, "hello there");
}

TEST(Mock, RulesMatchPayloadOnly) {
  MockConfig cfg;
  cfg.mode = MockConfig::Mode::Rules;
  cfg.rules.push_back({"urgent", "YES", ""});
  MockBackend b(cfg);
  EXPECT_EQ(b.complete(prompt::make("filter", "criterion: urgent", "routine check")).text, "NO");
  EXPECT_EQ(b.complete(prompt::make("filter", "criterion: x", "URGENT call")).text, "YES");
}

TEST(Mock, ScriptComesFirst) {
  MockConfig cfg;
  cfg.script = {"one", "two"};
  MockBackend b(cfg);
  EXPECT_EQ(b.complete("a").text, "one");
  EXPECT_EQ(b.complete("b").text, "two");
  EXPECT_EQ(b.complete("c").text, "NO");
}

TEST(Mock, TokenAccountingIsWhitespaceCount) {
  MockBackend b;
  const auto c = b.complete("a b  c\nd");
  EXPECT_EQ(c.usage.prompt_tokens, 4);
  EXPECT_EQ(c.usage.completion_tokens, static_cast<std::int64_t>(text::count_tokens(c.text)));
  EXPECT_EQ(b.embed("x y z").usage.prompt_tokens, 3);
}

TEST(Mock, EmbeddingsAreDeterministicAndUnit) {
  MockBackend a, b;
  const auto x = a.embed("chest pain at night").vector;
  EXPECT_EQ(x, b.embed("chest pain at night").vector);
  EXPECT_EQ(x.size(), kMockDimension);
  EXPECT_NEAR(norm(x), 1.0, 1e-12);
  EXPECT_TRUE(a.embed("   ").zero);
}

TEST(Mock, InjectedFailures) {
  MockConfig cfg;
  cfg.fail_every = 2;
  MockBackend b(cfg);
  EXPECT_NO_THROW(b.complete("a"));
  EXPECT_THROW(b.complete("b"), BackendError);
}

TEST(Cosine, Basics) {
  EXPECT_DOUBLE_EQ(cosine({1, 0}, {1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine({1, 0}, {0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine({0, 0}, {1, 0}), 0.0);
}

TEST(Metered, RecordsEveryCall) {
  auto t = std::make_shared<Transcript>();
  MeteredBackend m(std::make_shared<MockBackend>(), "op", t);
  m.complete("a b");
  m.embed("c");
  const auto r = t->records();
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].kind, "complete");
  EXPECT_EQ(r[1].kind, "embed");
  EXPECT_EQ(r[0].operator_id, "op");
  EXPECT_NE(r[0].call_id, r[1].call_id);
}

TEST(Chunking, SpansOfThousandChars) {
  const auto s = chunk_spans(1000);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0].offset, 0u);
  EXPECT_EQ(s[1].offset, 320u);
  EXPECT_EQ(s[2].offset, 640u);
  EXPECT_EQ(s[3].offset, 960u);
  EXPECT_EQ(s[3].length, 40u);
  EXPECT_TRUE(chunk_spans(0).empty());
  EXPECT_THROW(chunk_spans(10, {80, 80}), ConfigError);
  EXPECT_EQ(chunk_id("d7", 3), "d7#0003");
}

TEST(Retrieval, IndexAndDuplicates) {
  RetrievalIndex idx(std::make_shared<MockBackend>());
  EXPECT_EQ(idx.add(doc("d1", std::string(1000, 'a'))), 4u);
  EXPECT_EQ(idx.add(doc("empty", "")), 0u);
  EXPECT_TRUE(idx.has_doc("empty"));
  EXPECT_THROW(idx.add(doc("d1", "x")), DuplicateDocError);
  EXPECT_EQ(idx.size(), 4u);
  EXPECT_THROW(idx.top_k("a", 0), PreconditionError);
}

TEST(Retrieval, TopKAgreesWithExhaustiveRanking) {
  auto backend = std::make_shared<MockBackend>();
  RetrievalIndex idx(backend, {60, 10});
  bench::Rng rng(9);
  static const char* vocab[] = {"heart", "lung", "kidney", "tax", "budget", "river", "storm", "engine"};
  for (int d = 0; d < 20; ++d) {
    std::string t;
    for (int w = 0; w < 30; ++w) t += std::string(vocab[rng.uniform(0, 7)]) + " ";
    idx.add(doc("d" + std::to_string(d), t));
  }
  for (const auto* q : {"heart lung", "tax storm engine", "river"}) {
    const auto qv = backend->embed(q).vector;
    auto all = idx.entries();
    std::stable_sort(all.begin(), all.end(), [&](const Chunk& a, const Chunk& b) {
      const double sa = cosine(qv, a.embedding), sb = cosine(qv, b.embedding);
      return sa != sb ? sa > sb : a.chunk_id < b.chunk_id;
    });
    std::vector<double> scores;
    const auto got = idx.top_k(q, 5, &scores);
    ASSERT_EQ(got.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(got[i].chunk_id, all[i].chunk_id);
    EXPECT_TRUE(std::is_sorted(scores.rbegin(), scores.rend()));
  }
}

TEST(Extract, SingleKeyword) {
  MockBackend b;
  const auto ev = extract_events(doc("n1", "Patient was discharged home today.", 100), care_schema(), b);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].event_type, "Discharge");
  EXPECT_EQ(ev[0].timestamp, 100);
  EXPECT_EQ(ev[0].source_doc, "n1");
  EXPECT_EQ(ev[0].event_id, "n1:0");
  ASSERT_TRUE(ev[0].evidence_span.has_value());
  EXPECT_EQ(std::string("Patient was discharged home today.").substr(ev[0].evidence_span->start, 10), "discharged");
}

TEST(Extract, NoEventsAndEmptyText) {
  MockBackend b;
  EXPECT_TRUE(extract_events(doc("n1", "Routine vitals recorded."), care_schema(), b).empty());
  EXPECT_TRUE(extract_events(doc("n2", "   "), care_schema(), b).empty());
}

TEST(Extract, TwoEventsInTextOrder) {
  MockBackend b;
  const auto ev =
      extract_events(doc("n1", "Follow-up booked. Patient discharged after review."), care_schema(), b);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].event_type, "FollowUp");
  EXPECT_EQ(ev[1].event_type, "Discharge");
}

TEST(Extract, RejectsBadInputs) {
  MockBackend b;
  EXPECT_THROW(extract_events(doc("", "x"), care_schema(), b), InvalidDocument);
  EXPECT_THROW(extract_events(doc("n", "x"), EventSchema{}, b), SpecError);
  MockConfig cfg;
  cfg.default_reply = "not json";
  cfg.mode = MockConfig::Mode::Rules;
  MockBackend bad(cfg);
  EXPECT_THROW(extract_events(doc("n", "discharged"), care_schema(), bad), ExtractionParseError);
}

TEST(ExtractRag, LargeKEqualsFullText) {
  MockBackend b;
  const auto d = doc("n1", filler(120) + "The patient was discharged. " + filler(60) + "A follow-up was held. " +
                               filler(40));
  RetrievalIndex idx(std::make_shared<MockBackend>());
  const auto full = extract_events(d, care_schema(), b);
  const auto rag = extract_events_rag(d, care_schema(), idx, b, 100);
  ASSERT_EQ(full.size(), 2u);
  ASSERT_EQ(rag.size(), full.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    EXPECT_EQ(rag[i].event_type, full[i].event_type);
    EXPECT_EQ(rag[i].timestamp, full[i].timestamp);
  }
}

TEST(ExtractRag, UsesFewerTokens) {
  const auto d = doc("n1", filler(300) + "The patient was discharged. " + filler(300));
  auto t_full = std::make_shared<Transcript>(), t_rag = std::make_shared<Transcript>();
  MeteredBackend full_b(std::make_shared<MockBackend>(), "x", t_full);
  MeteredBackend rag_b(std::make_shared<MockBackend>(), "x", t_rag);
  RetrievalIndex idx(std::make_shared<MockBackend>());
  extract_events(d, care_schema(), full_b);
  const auto ev = extract_events_rag(d, care_schema(), idx, rag_b, 1);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].event_type, "Discharge");
  EXPECT_LT(t_rag->records().at(0).usage.prompt_tokens, t_full->records().at(0).usage.prompt_tokens);
}

TEST(SemFilter, LlmAndEmbedding) {
  MockBackend b;
  EXPECT_TRUE(sem_filter(doc("a", "Severe chest pain"), "mentions \"chest pain\"", b));
  EXPECT_FALSE(sem_filter(doc("a", "Knee sprain"), "mentions \"chest pain\"", b));
  EXPECT_FALSE(sem_filter(doc("a", "  "), "anything", b));
  EXPECT_TRUE(sem_filter(doc("a", "storm river flood"), "storm river flood", b, Strategy::Embedding, 0.9));
  EXPECT_FALSE(sem_filter(doc("a", "tax budget"), "storm river flood", b, Strategy::Embedding, 0.9));
}

TEST(SemMap, SummarizeTakesFirstSentence) {
  MockBackend b;
  const auto out = sem_map(doc("a", "First one. Second one."), "summarize briefly", b);
  EXPECT_EQ(out.text, "First one.");
  EXPECT_EQ(out.doc_id, "a");
  EXPECT_TRUE(out.attrs.count("sem_map.applied"));
  EXPECT_EQ(sem_map(doc("a", "Keep me."), "uppercase", b).text, "Keep me.");
}

TEST(SemAggregate, JoinsWindow) {
  MockBackend b;
  const auto out = sem_aggregate({doc("a", "x one", 1), doc("b", "y two", 5)}, "combine", b);
  EXPECT_EQ(out.text, "x one\ny two");
  EXPECT_EQ(out.timestamp, 5);
  EXPECT_EQ(out.doc_id, "agg:a..b");
  EXPECT_THROW(sem_aggregate({}, "combine", b), PreconditionError);
}

TEST(SemJoin, EmbeddingAndLlm) {
  MockBackend b;
  const std::vector<Document> right{doc("r1", "storm river flood"), doc("r2", "tax budget vote")};
  const auto e = sem_join(doc("l", "storm river flood"), right, "same topic", b, 0.9);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].second.doc_id, "r1");
  const auto l = sem_join(doc("l", "storm river flood"), right, "same topic", b, 0.9, Strategy::Llm);
  ASSERT_EQ(l.size(), 1u);
  EXPECT_EQ(l[0].second.doc_id, "r1");
  EXPECT_TRUE(sem_join(doc("l", "x"), {}, "same", b).empty());
}

TEST(GroupBy, EmbeddingAssignsByTopic) {
  MockBackend b;
  GroupBy g({}, b);
  EXPECT_EQ(g.assign(doc("d1", "heart attack chest pain")), "g1");
  EXPECT_EQ(g.assign(doc("d2", "heart attack chest pain")), "g1");
  EXPECT_EQ(g.assign(doc("d3", "quarterly tax budget revenue")), "g2");
  EXPECT_TRUE(is_partition(g.state(), {"d1", "d2", "d3"}));
  EXPECT_THROW(g.assign(doc("d1", "again")), DuplicateDocError);
}

TEST(GroupBy, PlansMergeSplitAndReject) {
  MockBackend b;
  GroupBy g({}, b);
  g.assign(doc("d1", "heart attack chest pain"));
  g.assign(doc("d2", "quarterly tax budget revenue"));
  g.assign(doc("d3", "river storm flood warning"));
  g.apply_plan("");
  EXPECT_EQ(g.state().groups.size(), 3u);
  g.apply_plan("merge g1,g2");
  EXPECT_EQ(g.state().groups.size(), 2u);
  EXPECT_EQ(g.group_of("d2"), "g1");
  g.apply_plan("split g1 d2");
  EXPECT_EQ(g.state().groups.size(), 3u);
  EXPECT_EQ(g.group_of("d2"), "g4");
  const auto before = g.assignment();
  EXPECT_THROW(g.apply_plan("merge g1,g9"), PlanParseError);
  EXPECT_THROW(g.apply_plan("merge g1,g3\nsplit g3 d3"), PlanParseError);
  EXPECT_THROW(g.apply_plan("shuffle g1"), PlanParseError);
  EXPECT_EQ(g.assignment(), before);
  EXPECT_TRUE(is_partition(g.state(), {"d1", "d2", "d3"}));
}

TEST(GroupBy, LlmRefinementMergesSameLabel) {
  MockConfig cfg;
  cfg.script = {"NEW: cardiac", "NEW: cardiac"};
  MockBackend b(cfg);
  GroupByConfig gc;
  gc.strategy = GroupStrategy::M2;
  gc.refine_every = 2;
  GroupBy g(gc, b);
  g.assign(doc("d1", "heart"));
  g.assign(doc("d2", "heart"));
  EXPECT_EQ(g.refinements(), 1u);
  EXPECT_EQ(g.state().groups.size(), 1u);
  EXPECT_EQ(g.group_of("d1"), g.group_of("d2"));
}

TEST(GroupBy, PartitionProperty) {
  bench::Rng rng(4);
  static const char* vocab[] = {"heart", "lung", "tax", "budget", "river", "storm"};
  for (int trial = 0; trial < 30; ++trial) {
    MockBackend b;
    GroupBy g({}, b);
    std::vector<std::string> ids;
    for (int i = 0; i < 25; ++i) {
      std::string t;
      for (int w = 0; w < 3; ++w) t += std::string(vocab[rng.uniform(0, 5)]) + " ";
      ids.push_back("d" + std::to_string(i));
      g.assign(doc(ids.back(), t));
      ASSERT_TRUE(is_partition(g.state(), ids));
    }
  }
}

TEST(Window, PairwiseClosesOnTopicShift) {
  MockBackend b;
  SemWindow w(WindowStrategy::Pairwise, b, 0.9);
  EXPECT_FALSE(w.push(doc("a", "storm river flood", 1)));
  EXPECT_FALSE(w.push(doc("b", "storm river flood", 2)));
  const auto closed = w.push(doc("c", "tax budget vote", 3));
  ASSERT_TRUE(closed);
  ASSERT_EQ(closed->size(), 2u);
  const auto rest = w.flush();
  ASSERT_TRUE(rest);
  EXPECT_EQ(rest->front().doc_id, "c");
  EXPECT_FALSE(w.flush());
  EXPECT_THROW({
    w.push(doc("d", "x", 9));
    w.push(doc("e", "x", 8));
  }, OutOfOrderError);
}

TEST(Window, RollingSummaryUsesContinuationCheck) {
  MockBackend b;
  SemWindow w(WindowStrategy::RollingSummary, b);
  EXPECT_FALSE(w.push(doc("a", "Storm warning issued for river towns.", 1)));
  EXPECT_FALSE(w.push(doc("b", "River levels keep rising.", 2)));
  EXPECT_TRUE(w.push(doc("c", "Budget vote scheduled.", 3)));
}

TEST(Window, CoversEveryDocumentOnce) {
  bench::Rng rng(8);
  static const char* topics[] = {"storm river flood", "tax budget vote", "heart lung clinic"};
  for (const auto strategy : {WindowStrategy::Pairwise, WindowStrategy::EmbedCluster, WindowStrategy::RollingSummary}) {
    MockBackend b;
    SemWindow w(strategy, b);
    std::vector<std::string> seen, fed;
    for (int i = 0; i < 40; ++i) {
      fed.push_back("d" + std::to_string(i));
      if (auto c = w.push(doc(fed.back(), topics[rng.uniform(0, 2)], i)))
        for (const auto& d : *c) seen.push_back(d.doc_id);
    }
    if (auto c = w.flush())
      for (const auto& d : *c) seen.push_back(d.doc_id);
    EXPECT_EQ(seen, fed);
  }
}

TEST(ContRag, AnswersFromRetrievedChunks) {
  MockBackend b;
  RetrievalIndex idx(std::make_shared<MockBackend>());
  idx.add(doc("k1", "Flood barriers open at noon. Other text."));
  idx.add(doc("k2", "Budget vote is on Friday."));
  const auto out = cont_rag(doc("q", "when is the budget vote"), idx, b, 1);
  EXPECT_EQ(out.text, "Budget vote is on Friday.");
  EXPECT_EQ(out.attrs.at("cont_rag.retrieved"), "k2");
  EXPECT_EQ(out.doc_id, "q:answer");
  RetrievalIndex empty(std::make_shared<MockBackend>());
  EXPECT_EQ(cont_rag(doc("q", "anything"), empty, b, 3).text, "NO CONTEXT");
  EXPECT_THROW(cont_rag(doc("q", "x"), idx, b, 0), PreconditionError);
}
