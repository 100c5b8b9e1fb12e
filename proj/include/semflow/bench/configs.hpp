#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/bench/eval.hpp"
#include "semflow/bench/gen.hpp"
#include "semflow/dataflow/pipeline.hpp"

namespace semflow::bench {

inline const std::vector<std::string>& config_names() {
  static const std::vector<std::string> n{"baseline_full_context", "baseline_rag", "sem_pattern", "sem_pattern_rag"};
  return n;
}

struct ConfigOptions {
  nlohmann::json backend = nlohmann::json{{"provider", "mock"}};
  std::size_t k = 1;
  std::string pattern = kFixturePattern;
  std::string pattern_id = kFixturePatternId;
  EventSchema schema = fixture_schema();
};

/// Single-operator pipeline spec for one of the four configurations.
inline PipelineSpec config_spec(const std::string& config, const ConfigOptions& o = {}) {
  nlohmann::json params{{"schema", o.schema}, {"pattern", o.pattern}, {"pattern_id", o.pattern_id}};
  std::string kind;
  if (config == "baseline_full_context" || config == "baseline_rag") kind = "llm_pattern_judge";
  else if (config == "sem_pattern" || config == "sem_pattern_rag") kind = "sem_pattern";
  else throw ConfigError("unknown configuration '" + config + "'");
  const bool rag = config == "baseline_rag" || config == "sem_pattern_rag";
  params["mode"] = rag ? "rag" : "full";
  if (rag) params["k"] = o.k;
  PipelineSpec s;
  s.pipeline_id = config;
  s.backend = o.backend;
  s.operators.push_back({config, kind, {s.source_id}, params});
  s.sinks = {config};
  return s;
}

struct ConfigRun {
  std::string config;
  std::set<PatternKey> matches;
  nlohmann::json report;
  std::int64_t llm_tokens = 0;
  std::int64_t embedding_tokens = 0;
  std::int64_t calls = 0;
};

inline ConfigRun run_config(const std::string& config, const std::vector<Document>& stream,
                            const ConfigOptions& o = {}) {
  auto p = build_pipeline(config_spec(config, o), config);
  ConfigRun r;
  r.config = config;
  auto collect = [&](const std::vector<SinkEmission>& es) {
    for (const auto& e : es)
      if (const auto* m = std::get_if<PatternMatch>(&e.record)) r.matches.insert(key_of(*m));
  };
  for (const auto& d : stream) collect(p->push(d));
  collect(p->flush());
  r.report = p->report();
  const auto& m = r.report["totals"]["model"];
  r.llm_tokens = m["total_tokens"].get<std::int64_t>();
  r.embedding_tokens = m["embedding_tokens"].get<std::int64_t>();
  r.calls = m["calls"].get<std::int64_t>() + m["embed_calls"].get<std::int64_t>();
  return r;
}

}  // namespace semflow::bench
