#pragma once

#include <string>
#include <variant>

#include <json.hpp>

#include "semflow/document.hpp"
#include "semflow/event.hpp"

namespace semflow {

/// Unit flowing along a pipeline edge.
using Record = std::variant<Document, SemanticEvent, PatternMatch>;

enum class RecordType { Any, Document, Event, Match };

inline const char* record_type_name(RecordType t) {
  switch (t) {
    case RecordType::Any: return "any";
    case RecordType::Document: return "document";
    case RecordType::Event: return "event";
    case RecordType::Match: return "match";
  }
  return "?";
}

inline RecordType type_of(const Record& r) {
  switch (r.index()) {
    case 0: return RecordType::Document;
    case 1: return RecordType::Event;
    default: return RecordType::Match;
  }
}

inline const std::string& entity_of(const Record& r) {
  return std::visit([](const auto& x) -> const std::string& { return x.entity_id; }, r);
}

/// JSON object of the record with a "type" discriminator.
inline nlohmann::json record_json(const Record& r) {
  nlohmann::json j = std::visit([](const auto& x) { return nlohmann::json(x); }, r);
  j["type"] = record_type_name(type_of(r));
  return j;
}

struct SinkEmission {
  std::string sink_id;
  Record record;
};

}  // namespace semflow
