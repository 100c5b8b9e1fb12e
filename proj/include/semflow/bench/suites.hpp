#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "semflow/backend/mock.hpp"
#include "semflow/backend/transcript.hpp"
#include "semflow/bench/configs.hpp"
#include "semflow/bench/eval.hpp"
#include "semflow/bench/gen.hpp"
#include "semflow/bench/oracle.hpp"
#include "semflow/bench/random.hpp"
#include "semflow/nfa/matcher.hpp"
#include "semflow/ops/groupby.hpp"
#include "semflow/pattern/format.hpp"

namespace semflow::bench {

using ops::GroupBy;
using ops::GroupByConfig;
using ops::GroupStrategy;

struct SuiteOptions {
  std::uint64_t seed = 42;
  /// Oracle cases, or topic-stream length for the clustering suite.
  std::size_t cases = 500;
  nlohmann::json backend = nlohmann::json{{"provider", "mock"}};
};

namespace suite_detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline nlohmann::json keys_json(const MatchSet& s) {
  auto a = nlohmann::json::array();
  for (const auto& k : s) a.push_back(k);
  return a;
}

}  // namespace suite_detail

/// NFA matcher against the exhaustive oracle on random (pattern, stream)
/// cases.
inline nlohmann::json run_oracle_suite(const SuiteOptions& o) {
  Rng rng(o.seed);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t mismatches = 0;
  std::size_t nonempty = 0;
  auto examples = nlohmann::json::array();
  for (std::size_t c = 0; c < o.cases; ++c) {
    const auto p = random_valid_pattern(rng);
    const auto s = random_stream(rng, kOracleMaxEvents);
    nfa::Matcher m(std::make_shared<const nfa::Nfa>(nfa::compile(p)));
    MatchSet got;
    for (const auto& e : s)
      for (const auto& x : m.advance(e)) got.insert(x.event_ids());
    for (const auto& x : m.flush()) got.insert(x.event_ids());
    const auto want = oracle_match(p, s);
    if (!want.empty()) ++nonempty;
    if (got == want) continue;
    if (++mismatches <= 5) {
      std::string stream;
      for (const auto& e : s) stream += e.event_type + "@" + std::to_string(e.timestamp) + " ";
      examples.push_back({{"pattern", pattern::format_pattern(p)},
                          {"stream", stream},
                          {"nfa", suite_detail::keys_json(got)},
                          {"oracle", suite_detail::keys_json(want)}});
    }
  }
  return {{"suite", "oracle"},
          {"seed", o.seed},
          {"cases", o.cases},
          {"cases_with_matches", nonempty},
          {"mismatches", mismatches},
          {"passed", mismatches == 0},
          {"elapsed_s", suite_detail::seconds_since(t0)},
          {"mismatch_examples", examples}};
}

/// Group-by strategies M1/M2/M3 on a labelled topic stream: F1, ARI,
/// purity and throughput.
inline nlohmann::json run_clustering_suite(const SuiteOptions& o) {
  const auto [docs, truth_labels] = gen_topic_stream(o.seed, o.cases);
  const auto truth = partition_from_labels(truth_labels);
  auto rows = nlohmann::json::array();
  for (const auto strategy : {GroupStrategy::M1, GroupStrategy::M2, GroupStrategy::M3}) {
    auto transcript = std::make_shared<Transcript>();
    MeteredBackend backend(make_backend(o.backend), "groupby", transcript);
    GroupByConfig cfg;
    cfg.strategy = strategy;
    GroupBy g(cfg, backend);
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& d : docs) g.assign(d);
    const double secs = suite_detail::seconds_since(t0);
    std::int64_t tokens = 0;
    std::int64_t embedding_tokens = 0;
    for (const auto& r : transcript->records()) {
      if (r.kind == "embed") embedding_tokens += r.usage.prompt_tokens;
      else tokens += r.usage.prompt_tokens + r.usage.completion_tokens;
    }
    const auto scores = eval_clustering(partition_from_labels(g.assignment()), truth);
    const char* name = strategy == GroupStrategy::M1 ? "M1" : strategy == GroupStrategy::M2 ? "M2" : "M3";
    rows.push_back({{"strategy", name},
                    {"groups", g.state().groups.size()},
                    {"scores", scores},
                    {"refinements", g.refinements()},
                    {"rejected_plans", g.rejected_plans()},
                    {"calls", transcript->records().size()},
                    {"llm_tokens", tokens},
                    {"embedding_tokens", embedding_tokens},
                    {"elapsed_s", secs},
                    {"throughput_tuples_per_s", secs > 0 ? nlohmann::json(static_cast<double>(docs.size()) / secs)
                                                         : nlohmann::json(nullptr)}});
  }
  return {{"suite", "clustering"}, {"seed", o.seed}, {"documents", docs.size()}, {"truth_groups", truth.size()},
          {"strategies", rows}};
}

/// The four pattern-detection configurations on the planted fixture.
inline nlohmann::json run_configs_suite(const SuiteOptions& o) {
  const auto g = gen_stream(o.seed);
  ConfigOptions co;
  co.backend = o.backend;
  auto rows = nlohmann::json::array();
  std::map<std::string, std::int64_t> tokens;
  for (const auto& name : config_names()) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_config(name, g.documents, co);
    const auto s = eval_pattern(r.matches, g.truth.matches);
    tokens[name] = r.llm_tokens;
    rows.push_back({{"config", name},
                    {"scores", s},
                    {"matches", r.matches.size()},
                    {"llm_tokens", r.llm_tokens},
                    {"embedding_tokens", r.embedding_tokens},
                    {"calls", r.calls},
                    {"elapsed_s", suite_detail::seconds_since(t0)}});
  }
  const bool order = tokens["baseline_full_context"] > tokens["baseline_rag"] &&
                     tokens["sem_pattern"] > tokens["sem_pattern_rag"] &&
                     tokens["sem_pattern"] < tokens["baseline_full_context"] &&
                     tokens["sem_pattern_rag"] < tokens["baseline_full_context"];
  return {{"suite", "configs"},
          {"seed", o.seed},
          {"documents", g.documents.size()},
          {"truth_matches", g.truth.matches.size()},
          {"configs", rows},
          {"token_ordering_holds", order},
          {"notes",
           {"llm_tokens = prompt + completion tokens of completion calls; embedding tokens listed separately",
            "f1 is computed on exact (entity, pattern, event timestamps) keys; empty prediction and empty truth "
            "count as f1 = 1"}}};
}

inline nlohmann::json run_suite(const std::string& name, const SuiteOptions& o = {}) {
  if (name == "oracle") return run_oracle_suite(o);
  if (name == "clustering") return run_clustering_suite(o);
  if (name == "configs") return run_configs_suite(o);
  throw ConfigError("unknown suite '" + name + "' (expected oracle, clustering or configs)");
}

}  // namespace semflow::bench
