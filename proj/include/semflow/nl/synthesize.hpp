#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/backend/mock.hpp"
#include "semflow/backend/prompt.hpp"
#include "semflow/dataflow/pipeline.hpp"
#include "semflow/pattern/parser.hpp"
#include "semflow/pattern/validate.hpp"

namespace semflow::nl {

/// Structured finding about a drafted spec; codes reuse validation error
/// codes.
struct Critique {
  std::string code;
  std::string operator_id;
  std::string message;

  bool operator==(const Critique&) const = default;
};

inline void to_json(nlohmann::json& j, const Critique& c) {
  j = nlohmann::json{{"code", c.code}, {"operator_id", c.operator_id}, {"message", c.message}};
}

class SynthesisFailed : public ValidationError {
 public:
  SynthesisFailed(const std::string& message, std::vector<std::vector<Critique>> critiques)
      : ValidationError("SynthesisFailed", message), critiques_(std::move(critiques)) {}

  const std::vector<std::vector<Critique>>& critiques() const noexcept { return critiques_; }

 private:
  std::vector<std::vector<Critique>> critiques_;
};

/// A recompile rejected by its first critique.
class RecompileRejected : public ValidationError {
 public:
  explicit RecompileRejected(Critique c)
      : ValidationError(c.code, c.operator_id.empty() ? c.message : "operator '" + c.operator_id + "': " + c.message),
        critique_(std::move(c)) {}

  const Critique& critique() const noexcept { return critique_; }

 private:
  Critique critique_;
};

struct SynthesisResult {
  std::optional<PipelineSpec> spec;
  std::optional<std::string> clarification;
  int rounds_used = 0;
  /// One critique list per rejected draft.
  std::vector<std::vector<Critique>> critiques;
};

inline void to_json(nlohmann::json& j, const SynthesisResult& r) {
  j = nlohmann::json{{"rounds_used", r.rounds_used}, {"critiques", r.critiques}};
  j["spec"] = r.spec ? nlohmann::json(*r.spec) : nlohmann::json(nullptr);
  j["clarification"] = r.clarification ? nlohmann::json(*r.clarification) : nlohmann::json(nullptr);
}

/// Graph checks, pattern validation for every "pattern" param, and a dry-run
/// instantiation of each operator (no model calls).
inline std::vector<Critique> critique_spec(const PipelineSpec& spec) {
  std::vector<Critique> out;
  try {
    plan_graph(spec);
  } catch (const Error& e) {
    out.push_back({e.code(), "", e.what()});
    return out;
  }
  for (const auto& op : spec.operators) {
    if (!op.params.contains("pattern")) continue;
    if (!op.params["pattern"].is_string()) {
      out.push_back({"SpecError", op.id, "pattern must be a string"});
      continue;
    }
    try {
      const auto v = pattern::validate_pattern(pattern::parse_pattern(op.params["pattern"].get<std::string>()));
      for (const auto& x : v.violations) out.push_back({x.code, op.id, x.message});
    } catch (const Error& e) {
      out.push_back({e.code(), op.id, e.what()});
    }
  }
  if (!out.empty()) return out;
  try {
    Pipeline dry(spec, std::make_shared<MockBackend>(), "dry-run");
  } catch (const Error& e) {
    out.push_back({e.code(), "", e.what()});
  }
  return out;
}

inline std::string critique_text(const std::vector<Critique>& cs) {
  std::string s;
  for (const auto& c : cs)
    s += "- [" + c.code + "]" + (c.operator_id.empty() ? "" : " operator " + c.operator_id) + ": " +
         ops::one_line(c.message) + "\n";
  return s;
}

inline constexpr const char* kDraftHeader =
    "Compile the task into a pipeline spec JSON object with fields pipeline_id, source, operators "
    "[{id, kind, inputs, params}] and sinks. Operator kinds: filter, sem_filter, sem_map, sem_aggregate, "
    "sem_join, sem_groupby, sem_window, cont_rag, sem_extract (params.schema), pattern_match "
    "(params.pattern), sem_pattern, llm_pattern_judge. When the task is ambiguous reply "
    "{\"clarification\": \"<one question>\"} instead.";

/// Draft, critique, repair. Returns a spec that passes critique_spec, or
/// a clarification question; throws SynthesisFailed after max_rounds
/// rejected drafts.
inline SynthesisResult synthesize(const std::string& task, ModelBackend& backend, int max_rounds = 3) {
  if (text::trim(task).empty()) throw PreconditionError("task description is empty");
  if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
  SynthesisResult res;
  std::string previous;
  for (int round = 1; round <= max_rounds; ++round) {
    res.rounds_used = round;
    std::string reply;
    if (round == 1) {
      reply = backend.complete(prompt::make("nl_draft", kDraftHeader, task)).text;
    } else {
      const auto header = std::string(kDraftHeader) + "\nYour previous draft was rejected:\n" +
                          critique_text(res.critiques.back()) + "previous draft: " + ops::one_line(previous);
      reply = backend.complete(prompt::make("nl_repair", header, task)).text;
    }
    previous = reply;
    std::vector<Critique> cs;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::exception& e) {
      cs.push_back({"InvalidJson", "", e.what()});
    }
    if (cs.empty() && j.is_object() && j.contains("clarification") && j["clarification"].is_string()) {
      res.clarification = j["clarification"].get<std::string>();
      return res;
    }
    std::optional<PipelineSpec> spec;
    if (cs.empty()) {
      try {
        spec = parse_pipeline_spec(j);
        cs = critique_spec(*spec);
      } catch (const Error& e) {
        cs.push_back({e.code(), "", e.what()});
      }
    }
    if (cs.empty()) {
      res.spec = std::move(spec);
      return res;
    }
    res.critiques.push_back(std::move(cs));
  }
  throw SynthesisFailed("no valid spec after " + std::to_string(max_rounds) + " round(s):\n" +
                            critique_text(res.critiques.back()),
                        res.critiques);
}

struct Edit {
  std::string operator_id;
  std::string param_key;
  nlohmann::json value;
};

inline void from_json(const nlohmann::json& j, Edit& e) {
  e.operator_id = j.at("operator_id").get<std::string>();
  e.param_key = j.at("param_key").get<std::string>();
  e.value = j.at("value");
}

/// Applies parameter edits and revalidates the whole spec. The first
/// finding is thrown as RecompileRejected carrying its code.
inline PipelineSpec recompile(const PipelineSpec& spec, const std::vector<Edit>& edits) {
  PipelineSpec out = spec;
  for (const auto& e : edits) {
    auto* op = out.find(e.operator_id);
    if (!op) throw SpecError("edit targets unknown operator '" + e.operator_id + "'");
    if (e.param_key.empty()) throw SpecError("edit needs a param key");
    op->params[e.param_key] = e.value;
  }
  const auto cs = critique_spec(out);
  if (!cs.empty()) throw RecompileRejected(cs.front());
  return out;
}

}  // namespace semflow::nl
