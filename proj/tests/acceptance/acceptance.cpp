// Acceptance suite. Prints one PASS/FAIL line per primary criterion and
// exits non-zero when any criterion fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/bench/configs.hpp"
#include "semflow/bench/eval.hpp"
#include "semflow/bench/gen.hpp"
#include "semflow/bench/oracle.hpp"
#include "semflow/bench/random.hpp"
#include "semflow/nfa/matcher.hpp"
#include "semflow/ops/groupby.hpp"
#include "semflow/pattern/format.hpp"
#include "semflow/pattern/parser.hpp"
#include "semflow/pattern/validate.hpp"
#include "semflow/service/cli.hpp"

using namespace semflow;
namespace fs = std::filesystem;
using pattern::Kind;
using pattern::PatternExpr;

namespace {

// Tolerances and sizes pinned from the acceptance criteria.
constexpr std::size_t kOracleCases = 500;
constexpr double kOracleBudgetSeconds = 60.0;
constexpr std::size_t kAdversarialCases = 200;
constexpr std::size_t kRoundTripCases = 1000;
constexpr std::int64_t kThirtyDays = 2'592'000;
constexpr std::size_t kFixtureEntities = 20;
constexpr std::size_t kFixturePlanted = 5;
constexpr double kClusteringTolerance = 1e-9;
constexpr std::size_t kRandomPartitions = 100;
constexpr std::size_t kGroupByDocs = 200;
constexpr std::size_t kRefineEvery = 10;
constexpr std::uint64_t kSeed = 42;

int passed = 0;
int failed = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << std::endl;
  (ok ? passed : failed)++;
}

template <typename F>
void criterion(const std::string& name, F f) {
  try {
    std::string detail;
    const bool ok = f(detail);
    report(ok, name, detail);
  } catch (const std::exception& e) {
    report(false, name, std::string("exception: ") + e.what());
  }
}

fs::path scratch_dir(const std::string& leaf) {
  auto p = fs::temp_directory_path() / ("semflow-acceptance-" + std::to_string(::getpid())) / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void collect_kinds(const PatternExpr& e, std::set<Kind>& out, bool in_within) {
  out.insert(e.kind);
  for (const auto& c : e.children) collect_kinds(c, out, in_within || e.kind == Kind::Within);
}

/// True when some NOT has no WITHIN ancestor. Written independently of
/// validate_pattern.
bool has_unbounded_not(const PatternExpr& e, bool in_within = false) {
  if (e.kind == Kind::Not && !in_within) return true;
  for (const auto& c : e.children)
    if (has_unbounded_not(c, in_within || e.kind == Kind::Within)) return true;
  return false;
}

SemanticEvent ev(const std::string& id, const std::string& type, Timestamp ts) {
  SemanticEvent e;
  e.event_id = id;
  e.entity_id = "x";
  e.event_type = type;
  e.timestamp = ts;
  return e;
}

std::size_t count_matches(const std::string& expr, const std::vector<SemanticEvent>& stream, bool flush) {
  nfa::Matcher m(std::make_shared<const nfa::Nfa>(nfa::compile(pattern::parse_pattern(expr))));
  std::size_t n = 0;
  for (const auto& e : stream) n += m.advance(e).size();
  if (flush) n += m.flush().size();
  return n;
}

PipelineSpec fixture_pipeline() {
  PipelineSpec s;
  s.pipeline_id = "missed_followup";
  s.operators.push_back({"extract", "sem_extract", {s.source_id}, {{"schema", bench::fixture_schema()}}});
  s.operators.push_back({"pattern",
                         "pattern_match",
                         {"extract"},
                         {{"pattern", bench::kFixturePattern}, {"pattern_id", bench::kFixturePatternId}}});
  s.sinks = {"pattern"};
  return s;
}

struct FixtureRun {
  int exit_code = -1;
  fs::path dir;
  bench::GenOutput gen;
};

FixtureRun run_fixture(const std::string& leaf) {
  FixtureRun r;
  r.dir = scratch_dir(leaf);
  bench::GenConfig cfg;
  cfg.entities = kFixtureEntities;
  cfg.planted = kFixturePlanted;
  r.gen = bench::gen_stream(kSeed, cfg);
  service::write_file(r.dir / "stream.jsonl", r.gen.jsonl());
  service::write_file(r.dir / "pipeline.json", nlohmann::json(fixture_pipeline()).dump(2));
  service::RunOptions o;
  o.pipeline_file = r.dir / "pipeline.json";
  o.input_file = r.dir / "stream.jsonl";
  o.report_file = r.dir / "out" / "report.json";
  std::ostringstream out, err;
  r.exit_code = service::cli_run(o, out, err);
  return r;
}

/// Delegates to the mock backend, but answers refinement prompts with random
/// merge/split plans built from the live group state, and snapshots the
/// member union seen at plan time.
class PlanningBackend : public ModelBackend {
 public:
  explicit PlanningBackend(std::uint64_t seed) : rng_(seed) {}

  void attach(const ops::GroupBy* g) { g_ = g; }

  std::string provider() const override { return "planning"; }
  bool can_complete() const override { return true; }
  bool can_embed() const override { return true; }
  std::size_t dimension() const override { return inner_.dimension(); }
  Embedding embed(const std::string& s) override { return inner_.embed(s); }

  Completion complete(const std::string& p) override {
    if (prompt::parse(p).tag != "groupby_refine") return inner_.complete(p);
    ++plans_;
    union_at_plan.clear();
    const auto& groups = g_->state().groups;
    for (const auto& g : groups) union_at_plan.insert(g.members.begin(), g.members.end());
    std::string plan;
    if (groups.size() >= 2 && rng_.chance(0.5)) {
      plan = "merge " + groups[0].group_id + "," + groups[static_cast<std::size_t>(
                                                       rng_.uniform(1, static_cast<std::int64_t>(groups.size()) - 1))]
                                                       .group_id;
    } else {
      for (const auto& g : groups)
        if (g.members.size() >= 2) {
          plan = "split " + g.group_id + " " + g.members.front();
          break;
        }
    }
    if (!plan.empty()) ++nonempty_;
    Completion c;
    c.text = plan;
    return c;
  }

  std::set<std::string> union_at_plan;
  std::size_t plans() const { return plans_; }
  std::size_t nonempty_plans() const { return nonempty_; }

 private:
  MockBackend inner_;
  bench::Rng rng_;
  const ops::GroupBy* g_ = nullptr;
  std::size_t plans_ = 0;
  std::size_t nonempty_ = 0;
};

std::set<std::string> member_union(const ops::GroupState& s) {
  std::set<std::string> u;
  for (const auto& g : s.groups) u.insert(g.members.begin(), g.members.end());
  return u;
}

}  // namespace

int main() {
  std::cout << std::boolalpha;

  criterion("C1 oracle equivalence", [](std::string& d) {
    bench::Rng rng(kSeed);
    std::set<Kind> kinds;
    std::size_t mismatches = 0;
    std::size_t with_matches = 0;
    std::size_t max_depth = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t c = 0; c < kOracleCases; ++c) {
      const auto p = bench::random_valid_pattern(rng);
      const auto s = bench::random_stream(rng, bench::kOracleMaxEvents);
      collect_kinds(p, kinds, false);
      max_depth = std::max(max_depth, p.depth());
      nfa::Matcher m(std::make_shared<const nfa::Nfa>(nfa::compile(p)));
      bench::MatchSet got;
      for (const auto& e : s)
        for (const auto& x : m.advance(e)) got.insert(x.event_ids());
      for (const auto& x : m.flush()) got.insert(x.event_ids());
      const auto want = bench::oracle_match(p, s);
      if (!want.empty()) ++with_matches;
      if (got != want) ++mismatches;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool all_kinds = kinds.size() == 9;
    d = std::to_string(kOracleCases) + " cases, " + std::to_string(mismatches) + " mismatches, " +
        std::to_string(with_matches) + " with matches, max depth " + std::to_string(max_depth) + ", " +
        std::to_string(kinds.size()) + "/9 constructs, " + std::to_string(secs) + " s";
    return mismatches == 0 && secs < kOracleBudgetSeconds && all_kinds && max_depth <= bench::kOracleMaxDepth;
  });

  criterion("C2 negation semantics", [](std::string& d) {
    const std::string p = "WITHIN(SEQ(A, NOT(B)), 10 s)";
    const auto a = count_matches(p, {ev("a", "A", 0)}, true);
    const auto b = count_matches(p, {ev("a", "A", 0), ev("b", "B", 5)}, true);
    const auto c = count_matches(p, {ev("a", "A", 0), ev("b", "B", 15)}, true);
    d = "[A@0]+flush=" + std::to_string(a) + " [A@0,B@5]=" + std::to_string(b) +
        " [A@0,B@15]+flush=" + std::to_string(c) + " (want 1,0,1)";
    return a == 1 && b == 0 && c == 1;
  });

  criterion("C3 compile-time negation bound", [](std::string& d) {
    bench::Rng rng(kSeed + 3);
    std::size_t cases = 0;
    std::size_t rejected = 0;
    std::size_t coded = 0;
    const std::vector<std::string> alpha{"A", "B", "C"};
    auto inject = [&](PatternExpr host) {
      auto neg = pattern::not_(pattern::atom(rng.pick(alpha)));
      switch (rng.uniform(0, 5)) {
        case 0: return pattern::seq({std::move(host), std::move(neg)});
        case 1: return pattern::seq({std::move(neg), std::move(host)});
        case 2: return pattern::or_(std::move(host), pattern::seq({pattern::atom(rng.pick(alpha)), std::move(neg)}));
        case 3: return pattern::and_(pattern::within(std::move(host), rng.uniform(1, 100)), std::move(neg));
        case 4: return pattern::optional(pattern::seq({std::move(host), std::move(neg)}));
        default: return pattern::times(pattern::seq({pattern::atom(rng.pick(alpha)), std::move(neg)}), 2);
      }
    };
    while (cases < kAdversarialCases) {
      PatternExpr e = cases % 2 == 0 ? inject(bench::random_valid_pattern(rng))
                                     : bench::random_any_pattern(rng, static_cast<int>(rng.uniform(1, 4)));
      if (!has_unbounded_not(e)) continue;
      ++cases;
      const auto v = pattern::validate_pattern(e);
      if (!v.ok()) ++rejected;
      for (const auto& x : v.violations)
        if (x.code == "UnboundedNegation") {
          ++coded;
          break;
        }
    }
    d = std::to_string(rejected) + "/" + std::to_string(cases) + " rejected, " + std::to_string(coded) +
        " with UnboundedNegation";
    return rejected == cases && coded == cases;
  });

  criterion("C4 parser round trip", [](std::string& d) {
    bench::Rng rng(kSeed + 4);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < kRoundTripCases; ++i) {
      const auto e = bench::random_any_pattern(rng, static_cast<int>(rng.uniform(0, 5)));
      if (pattern::parse_pattern(pattern::format_pattern(e)) == e) ++ok;
    }
    const auto lit = pattern::parse_pattern("SEQ(Discharge, WITHIN(NOT(FollowUp), 30 days))");
    const bool shape = lit.kind == Kind::Seq && lit.children.size() == 2 && lit.children[1].kind == Kind::Within;
    const std::int64_t dt = shape ? lit.children[1].delta_t : -1;
    d = std::to_string(ok) + "/" + std::to_string(kRoundTripCases) + " round trips, literal delta_t=" +
        std::to_string(dt);
    return ok == kRoundTripCases && dt == kThirtyDays;
  });

  criterion("C5 end-to-end planted run", [](std::string& d) {
    const auto r = run_fixture("e2e");
    if (r.exit_code != 0) {
      d = "cli_run exit " + std::to_string(r.exit_code);
      return false;
    }
    const auto out = r.dir / "out";
    const auto pred = service::match_keys(service::read_file(out / "matches.jsonl"));
    const auto s = bench::eval_pattern(pred, r.gen.truth.matches);
    const auto report = nlohmann::json::parse(service::read_file(out / "report.json"));
    std::int64_t source_rows = -1;
    for (const auto& op : report["operators"])
      if (op["operator_id"] == "source") source_rows = op["rows_in"].get<std::int64_t>();
    std::istringstream tin(service::read_file(out / "transcript.jsonl"));
    std::int64_t t_llm = 0, t_embed = 0;
    std::map<std::string, std::int64_t> per_op;
    for (const auto& c : Transcript::parse_jsonl(tin)) {
      if (c.kind == "embed") {
        t_embed += c.usage.prompt_tokens;
      } else {
        t_llm += c.usage.prompt_tokens + c.usage.completion_tokens;
        per_op[c.operator_id] += c.usage.prompt_tokens + c.usage.completion_tokens;
      }
    }
    bool per_op_ok = true;
    for (const auto& op : report["operators"])
      if (!op["model"].is_null())
        per_op_ok = per_op_ok && op["model"]["total_tokens"].get<std::int64_t>() == per_op[op["operator_id"]];
    const auto r_llm = report["totals"]["model"]["total_tokens"].get<std::int64_t>();
    const auto r_embed = report["totals"]["model"]["embedding_tokens"].get<std::int64_t>();
    d = "f1=" + std::to_string(s.f1) + " (" + std::to_string(pred.size()) + " predicted, " +
        std::to_string(r.gen.truth.matches.size()) + " planted), source rows_in=" + std::to_string(source_rows) +
        "/" + std::to_string(r.gen.documents.size()) + ", tokens report=" + std::to_string(r_llm) +
        " transcript=" + std::to_string(t_llm);
    return s.f1 == 1.0 && r.gen.truth.matches.size() == kFixturePlanted &&
           source_rows == static_cast<std::int64_t>(r.gen.documents.size()) && r_llm == t_llm &&
           r_embed == t_embed && per_op_ok;
  });

  criterion("C6 token ordering", [](std::string& d) {
    const auto g = bench::gen_stream(kSeed);
    std::map<std::string, std::int64_t> t;
    for (const auto& name : bench::config_names()) t[name] = bench::run_config(name, g.documents).llm_tokens;
    d = "full=" + std::to_string(t["baseline_full_context"]) + " rag=" + std::to_string(t["baseline_rag"]) +
        " sem_pattern=" + std::to_string(t["sem_pattern"]) + " sem_pattern_rag=" + std::to_string(t["sem_pattern_rag"]);
    return t["baseline_full_context"] > t["baseline_rag"] && t["sem_pattern"] > t["sem_pattern_rag"] &&
           t["sem_pattern"] < t["baseline_full_context"] && t["sem_pattern_rag"] < t["baseline_full_context"];
  });

  criterion("C7 clustering metrics", [](std::string& d) {
    struct Fixed {
      bench::Partition pred, truth;
      double p, r, f1, ari, purity;
    };
    // Pair counts enumerated directly; ARI from sklearn.metrics.adjusted_rand_score.
    const std::vector<Fixed> fixed{
        {{{"a", "b"}, {"c"}}, {{"a", "b", "c"}}, 1.0, 1.0 / 3, 0.5, 0.0, 1.0},
        {{{"a"}, {"b"}, {"c"}, {"d"}}, {{"a", "b", "c", "d"}}, 0.0, 0.0, 0.0, 0.0, 1.0},
        {{{"a", "b", "c"}, {"d", "e", "f"}}, {{"a", "b"}, {"c", "d"}, {"e", "f"}}, 1.0 / 3, 2.0 / 3,
         0.4444444444444444, 0.24242424242424243, 0.6666666666666666},
        {{{"a", "b"}, {"c", "d"}, {"e", "f", "g", "h"}}, {{"a", "c"}, {"b", "d"}, {"e", "f"}, {"g", "h"}}, 0.25, 0.5,
         0.3333333333333333, 0.17647058823529413, 0.5},
        {{{"i0", "i1", "i2"}, {"i3", "i4", "i5"}, {"i6", "i7", "i8", "i9"}},
         {{"i0", "i1", "i8", "i9"}, {"i2", "i3", "i4"}, {"i5", "i6", "i7"}}, 1.0 / 3, 1.0 / 3, 1.0 / 3,
         0.09090909090909091, 0.6},
    };
    std::size_t fixed_ok = 0;
    double worst = 0;
    for (const auto& f : fixed) {
      const auto s = bench::eval_clustering(f.pred, f.truth);
      const double err = std::max({std::abs(s.pairwise_precision - f.p), std::abs(s.pairwise_recall - f.r),
                                   std::abs(s.pairwise_f1 - f.f1), std::abs(s.ari - f.ari),
                                   std::abs(s.purity - f.purity)});
      worst = std::max(worst, err);
      if (err <= kClusteringTolerance) ++fixed_ok;
    }
    bench::Rng rng(kSeed + 7);
    std::size_t ident_ok = 0;
    for (std::size_t i = 0; i < kRandomPartitions; ++i) {
      const auto n = rng.uniform(1, 40);
      const auto k = rng.uniform(1, n);
      std::map<std::string, std::string> labels;
      for (std::int64_t j = 0; j < n; ++j) labels["item" + std::to_string(j)] = "c" + std::to_string(rng.uniform(1, k));
      const auto t = bench::partition_from_labels(labels);
      const auto s = bench::eval_clustering(t, t);
      if (std::abs(s.ari - 1.0) <= kClusteringTolerance && std::abs(s.purity - 1.0) <= kClusteringTolerance)
        ++ident_ok;
    }
    std::ostringstream os;
    os << fixed_ok << "/" << fixed.size() << " fixed pairs within 1e-9 (worst " << worst << "), " << ident_ok << "/"
       << kRandomPartitions << " identity partitions";
    d = os.str();
    return fixed_ok == fixed.size() && ident_ok == kRandomPartitions;
  });

  criterion("C8 group-by invariants", [](std::string& d) {
    const auto [docs, _] = bench::gen_topic_stream(kSeed, kGroupByDocs);
    MockBackend mock;
    ops::GroupByConfig m3cfg;
    m3cfg.strategy = ops::GroupStrategy::M3;
    ops::GroupBy m3(m3cfg, mock);
    std::vector<std::string> processed;
    std::size_t m3_ok = 0;
    for (const auto& doc : docs) {
      m3.assign(doc);
      processed.push_back(doc.doc_id);
      if (ops::is_partition(m3.state(), processed)) ++m3_ok;
    }

    PlanningBackend planner(kSeed + 8);
    ops::GroupByConfig m2cfg;
    m2cfg.strategy = ops::GroupStrategy::M2;
    m2cfg.refine_every = kRefineEvery;
    ops::GroupBy m2(m2cfg, planner);
    planner.attach(&m2);
    processed.clear();
    std::size_t cadence_ok = 0, union_ok = 0, partition_ok = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const auto plans_before = planner.plans();
      m2.assign(docs[i]);
      processed.push_back(docs[i].doc_id);
      const std::size_t t = i + 1;
      const bool refined = planner.plans() != plans_before;
      if (m2.refinements() == t / kRefineEvery && refined == (t % kRefineEvery == 0)) ++cadence_ok;
      if (refined && member_union(m2.state()) == planner.union_at_plan) ++union_ok;
      if (ops::is_partition(m2.state(), processed)) ++partition_ok;
    }
    const auto expected_refines = docs.size() / kRefineEvery;
    d = "M3 partition " + std::to_string(m3_ok) + "/" + std::to_string(docs.size()) + ", M2 cadence " +
        std::to_string(cadence_ok) + "/" + std::to_string(docs.size()) + ", refinements " +
        std::to_string(m2.refinements()) + "/" + std::to_string(expected_refines) + ", unions preserved " +
        std::to_string(union_ok) + "/" + std::to_string(planner.plans()) + " (" +
        std::to_string(planner.nonempty_plans()) + " non-empty plans), M2 partition " +
        std::to_string(partition_ok) + "/" + std::to_string(docs.size()) + ", rejected plans " +
        std::to_string(m2.rejected_plans());
    return docs.size() == kGroupByDocs && m3_ok == docs.size() && cadence_ok == docs.size() &&
           m2.refinements() == expected_refines && planner.plans() == expected_refines &&
           union_ok == expected_refines && planner.nonempty_plans() > 0 && partition_ok == docs.size() && m2.rejected_plans() == 0;
  });

  criterion("C9 determinism", [](std::string& d) {
    const auto a = run_fixture("det-a");
    const auto b = run_fixture("det-b");
    if (a.exit_code != 0 || b.exit_code != 0) {
      d = "cli_run exit " + std::to_string(a.exit_code) + "/" + std::to_string(b.exit_code);
      return false;
    }
    const auto ma = service::read_file(a.dir / "out" / "matches.jsonl");
    const auto mb = service::read_file(b.dir / "out" / "matches.jsonl");
    const auto ra = strip_timing(nlohmann::json::parse(service::read_file(a.dir / "out" / "report.json")));
    const auto rb = strip_timing(nlohmann::json::parse(service::read_file(b.dir / "out" / "report.json")));
    d = "matches.jsonl " + std::string(ma == mb ? "identical" : "differ") + " (" + std::to_string(ma.size()) +
        " bytes), report minus timing " + (ra == rb ? "identical" : "differs");
    return !ma.empty() && ma == mb && ra == rb;
  });

  std::error_code ec;
  fs::remove_all(fs::temp_directory_path() / ("semflow-acceptance-" + std::to_string(::getpid())), ec);
  std::cout << passed << " passed, " << failed << " failed" << std::endl;
  return failed == 0 ? 0 : 1;
}
