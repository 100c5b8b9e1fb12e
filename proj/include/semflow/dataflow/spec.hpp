#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/common/errors.hpp"

namespace semflow {

struct OperatorSpec {
  std::string id;
  std::string kind;
  std::vector<std::string> inputs;
  nlohmann::json params = nlohmann::json::object();

  bool operator==(const OperatorSpec&) const = default;
};

/// Declarative operator graph. The single source is referenced by
/// `source_id`; `backend` configures the model backend shared by the run.
struct PipelineSpec {
  std::string pipeline_id;
  std::string source_id = "source";
  nlohmann::json backend = nlohmann::json{{"provider", "mock"}};
  std::vector<OperatorSpec> operators;
  std::vector<std::string> sinks;

  bool operator==(const PipelineSpec&) const = default;

  const OperatorSpec* find(const std::string& id) const {
    for (const auto& o : operators)
      if (o.id == id) return &o;
    return nullptr;
  }
  OperatorSpec* find(const std::string& id) {
    for (auto& o : operators)
      if (o.id == id) return &o;
    return nullptr;
  }
};

inline void to_json(nlohmann::json& j, const OperatorSpec& o) {
  j = nlohmann::json{{"id", o.id}, {"kind", o.kind}, {"inputs", o.inputs}, {"params", o.params}};
}

inline void to_json(nlohmann::json& j, const PipelineSpec& s) {
  j = nlohmann::json{{"pipeline_id", s.pipeline_id},
                     {"source", {{"id", s.source_id}}},
                     {"backend", s.backend},
                     {"operators", s.operators},
                     {"sinks", s.sinks}};
}

inline PipelineSpec parse_pipeline_spec(const nlohmann::json& j) {
  if (!j.is_object()) throw SpecError("pipeline spec must be a JSON object");
  PipelineSpec s;
  try {
    s.pipeline_id = j.value("pipeline_id", std::string("pipeline"));
    if (j.contains("source")) {
      const auto& src = j.at("source");
      if (src.is_string()) s.source_id = src.get<std::string>();
      else s.source_id = src.value("id", std::string("source"));
    }
    if (j.contains("backend")) s.backend = j.at("backend");
    if (!s.backend.is_object()) throw SpecError("backend must be an object");
    for (const auto& o : j.value("operators", nlohmann::json::array())) {
      OperatorSpec op;
      op.id = o.at("id").get<std::string>();
      op.kind = o.at("kind").get<std::string>();
      op.inputs = o.value("inputs", std::vector<std::string>{});
      op.params = o.value("params", nlohmann::json::object());
      if (!op.params.is_object()) throw SpecError("params of '" + op.id + "' must be an object");
      s.operators.push_back(std::move(op));
    }
    s.sinks = j.value("sinks", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed pipeline spec: ") + e.what());
  }
  if (s.source_id.empty()) throw SpecError("source id must be non-empty");
  return s;
}

inline void from_json(const nlohmann::json& j, PipelineSpec& s) { s = parse_pipeline_spec(j); }

}  // namespace semflow
