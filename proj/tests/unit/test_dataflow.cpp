#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "semflow/backend/mock.hpp"
#include "semflow/dataflow/pipeline.hpp"
#include "semflow/nl/synthesize.hpp"
#include "semflow/pattern/parser.hpp"

using namespace semflow;
using nlohmann::json;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(SEMFLOW_SAMPLES_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineSpec sample_spec() { return parse_pipeline_spec(json::parse(slurp("missed_followup.json"))); }

PipelineSpec chain(std::vector<OperatorSpec> ops, std::vector<std::string> sinks) {
  PipelineSpec s;
  s.pipeline_id = "t";
  s.operators = std::move(ops);
  s.sinks = std::move(sinks);
  return s;
}

Pipeline make(const PipelineSpec& s) { return Pipeline(s, std::make_shared<MockBackend>()); }

Document doc(const std::string& id, const std::string& text, Timestamp ts, const std::string& entity = "p1") {
  return Document{id, entity, ts, text, {}};
}

const json& op_report(const json& report, const std::string& id) {
  for (const auto& o : report.at("operators"))
    if (o.at("operator_id") == id) return o;
  throw std::runtime_error("missing operator " + id);
}

}  // namespace

TEST(Graph, TopologicalOrder) {
  const auto s = chain({{"c", "filter", {"b"}, json::object()},
                        {"a", "filter", {"source"}, json::object()},
                        {"b", "filter", {"a"}, json::object()}},
                       {"c"});
  EXPECT_EQ(plan_graph(s).order, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(make(s).topo_order(), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Graph, StructuralErrors) {
  EXPECT_THROW(plan_graph(chain({{"a", "filter", {"b"}, json::object()}, {"b", "filter", {"a"}, json::object()}},
                                {"a"})),
               CycleError);
  EXPECT_THROW(plan_graph(chain({{"a", "teleport", {"source"}, json::object()}}, {"a"})), UnknownOperatorKind);
  EXPECT_THROW(plan_graph(chain({{"a", "filter", {"ghost"}, json::object()}}, {"a"})), DanglingInput);
  EXPECT_THROW(plan_graph(parse_pipeline_spec(json::parse(slurp("cyclic.json")))), CycleError);
}

TEST(Graph, SpecRoundTrip) {
  const auto s = sample_spec();
  EXPECT_EQ(parse_pipeline_spec(json(s)), s);
  EXPECT_THROW(parse_pipeline_spec(json::array()), SpecError);
}

TEST(Run, SourceSinkPassesThrough) {
  auto s = chain({}, {"source"});
  auto p = make(s);
  const auto out = p.push(doc("d1", "hello", 1));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(std::get<Document>(out[0].record).doc_id, "d1");
}

TEST(Run, FilterDropsAndCounts) {
  auto p = make(chain({{"f", "filter", {"source"}, {{"contains", "keep"}}}}, {"f"}));
  std::size_t emitted = 0;
  for (int i = 0; i < 10; ++i)
    emitted += p.push(doc("d" + std::to_string(i), i % 2 ? "keep this" : "drop this", i)).size();
  EXPECT_EQ(emitted, 5u);
  const auto r = p.report();
  EXPECT_EQ(op_report(r, "f").at("rows_in"), 10);
  EXPECT_EQ(op_report(r, "f").at("rows_out"), 5);
  EXPECT_EQ(op_report(r, "source").at("rows_out"), 10);
}

TEST(Run, RejectsRegressionAndDuplicates) {
  auto p = make(chain({}, {"source"}));
  p.push(doc("d1", "x", 5));
  EXPECT_THROW(p.push(doc("d2", "x", 4)), OutOfOrderError);
  EXPECT_NO_THROW(p.push(doc("d3", "x", 1, "other")));
  EXPECT_THROW(p.push(doc("d1", "x", 6)), DuplicateDocError);
  EXPECT_THROW(p.push(doc("d4", "x", -1, "third")), InvalidDocument);
}

TEST(Run, FlushReleasesPendingAbsence) {
  auto p = make(sample_spec());
  EXPECT_TRUE(p.push(doc("d1", "Patient was discharged home.", 0)).empty());
  const auto out = p.flush();
  ASSERT_EQ(out.size(), 1u);
  const auto& m = std::get<PatternMatch>(out[0].record);
  EXPECT_EQ(m.pattern_id, "missed_followup");
  EXPECT_EQ(m.events.at(0).source_doc, "d1");
  EXPECT_TRUE(p.flush().empty());
  EXPECT_THROW(p.push(doc("d2", "x", 1)), PreconditionError);
}

TEST(Run, WatermarkReleasesAfterDeadline) {
  auto p = make(sample_spec());
  p.push(doc("d1", "Patient was discharged home.", 0));
  EXPECT_TRUE(p.push(doc("d2", "Routine call.", 29 * 86400)).empty());
  EXPECT_EQ(p.push(doc("d3", "Routine call.", 31 * 86400)).size(), 1u);
}

TEST(Run, FollowUpCancelsMatch) {
  auto p = make(sample_spec());
  p.push(doc("d1", "Patient was discharged home.", 0));
  p.push(doc("d2", "Attended a follow-up visit.", 10 * 86400));
  EXPECT_TRUE(p.flush().empty());
  const auto t = p.trace("extract");
  EXPECT_EQ(t.at("rows").size(), 2u);
  EXPECT_THROW(p.trace("ghost"), UnknownOperator);
}

TEST(Metrics, RecordAndReject) {
  RunMetrics m("r", "p");
  m.add_operator("a", "filter", false);
  MetricDelta d;
  d.rows_in = 3;
  m.record("a", d);
  m.record("a", d);
  EXPECT_EQ(m.snapshot().at(0).totals.rows_in, 6);
  d.rows_out = -1;
  EXPECT_THROW(m.record("a", d), PreconditionError);
  EXPECT_EQ(m.snapshot().at(0).totals.rows_out, 0);
  EXPECT_THROW(m.record("b", MetricDelta{}), UnknownOperator);
}

TEST(Metrics, TotalsEqualTranscript) {
  auto p = make(sample_spec());
  p.push(doc("d1", "Patient was admitted.", 0));
  p.push(doc("d2", "Patient was discharged.", 10));
  p.flush();
  std::int64_t tokens = 0, calls = 0;
  for (const auto& r : p.transcript()->records())
    if (r.kind == "complete") {
      tokens += r.usage.prompt_tokens + r.usage.completion_tokens;
      ++calls;
    }
  const auto rep = p.report();
  EXPECT_GT(tokens, 0);
  EXPECT_EQ(rep.at("totals").at("model").at("total_tokens"), tokens);
  EXPECT_EQ(rep.at("totals").at("model").at("calls"), calls);
  EXPECT_EQ(op_report(rep, "extract").at("model").at("calls"), 2);
  EXPECT_TRUE(op_report(rep, "pattern").at("model").is_null());
}

TEST(Nl, TemplateDraft) {
  MockBackend b;
  const auto r = nl::synthesize(slurp("task_missed_followup.txt"), b);
  ASSERT_TRUE(r.spec.has_value());
  EXPECT_EQ(r.rounds_used, 1);
  EXPECT_TRUE(nl::critique_spec(*r.spec).empty());
  EXPECT_EQ(r.spec->find("pattern")->params.at("pattern"), "SEQ(Discharge, WITHIN(NOT(FollowUp), 30 days))");
}

TEST(Nl, RepairsCyclicDraft) {
  MockConfig cfg;
  cfg.script = {slurp("cyclic.json")};
  MockBackend b(cfg);
  const auto r = nl::synthesize(slurp("task_missed_followup.txt"), b);
  ASSERT_TRUE(r.spec.has_value());
  EXPECT_EQ(r.rounds_used, 2);
  ASSERT_EQ(r.critiques.size(), 1u);
  EXPECT_EQ(r.critiques[0].at(0).code, "CycleError");
}

TEST(Nl, GivesUpAfterMaxRounds) {
  MockConfig cfg;
  cfg.script = {"not json", "{]", "[]"};
  MockBackend b(cfg);
  try {
    nl::synthesize("Alert me when a patient is discharged and has no follow-up visit within 30 days.", b, 3);
    FAIL() << "expected SynthesisFailed";
  } catch (const nl::SynthesisFailed& e) {
    EXPECT_EQ(e.critiques().size(), 3u);
    EXPECT_EQ(e.code(), "SynthesisFailed");
  }
}

TEST(Nl, AsksForClarification) {
  MockBackend b;
  const auto r = nl::synthesize(slurp("task_ambiguous.txt"), b);
  EXPECT_FALSE(r.spec.has_value());
  ASSERT_TRUE(r.clarification.has_value());
  EXPECT_FALSE(r.clarification->empty());
  EXPECT_THROW(nl::synthesize("  ", b), PreconditionError);
}

TEST(Recompile, EditsWindow) {
  const auto s = sample_spec();
  const auto out = nl::recompile(s, {{"pattern", "pattern", "SEQ(Discharge, WITHIN(NOT(FollowUp), 60 days))"}});
  const auto e = pattern::parse_pattern(out.find("pattern")->params.at("pattern").get<std::string>());
  EXPECT_EQ(e.children.at(1).delta_t, 5'184'000);
  EXPECT_EQ(nl::recompile(s, {}), s);
}

TEST(Recompile, RejectsUnboundedNegation) {
  try {
    nl::recompile(sample_spec(), {{"pattern", "pattern", "SEQ(Discharge, NOT(FollowUp))"}});
    FAIL() << "expected RecompileRejected";
  } catch (const nl::RecompileRejected& e) {
    EXPECT_EQ(e.code(), "UnboundedNegation");
    EXPECT_EQ(e.critique().operator_id, "pattern");
  }
  EXPECT_THROW(nl::recompile(sample_spec(), {{"ghost", "pattern", "A"}}), SpecError);
}
