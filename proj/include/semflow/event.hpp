#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semflow/document.hpp"

namespace semflow {

/// Character offsets [start, end) into the source document text.
struct EvidenceSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const EvidenceSpan&) const = default;
};

/// A typed, timestamped, entity-keyed fact; the atomic unit of matching.
struct SemanticEvent {
  std::string event_id;
  std::string entity_id;
  std::string event_type;
  Timestamp timestamp = 0;
  std::string description;
  Attrs attrs;
  std::string source_doc;
  std::optional<EvidenceSpan> evidence_span;

  bool operator==(const SemanticEvent&) const = default;
};

inline constexpr Timestamp kInfinity = std::numeric_limits<Timestamp>::max();

struct PatternMatch {
  std::string pattern_id;
  std::string entity_id;
  std::vector<SemanticEvent> events;
  Timestamp first_ts = 0;
  /// Last matched timestamp, or the latest negation deadline the match had
  /// to survive, whichever is later.
  Timestamp last_effective_ts = 0;
  /// Watermark at emission; kInfinity when emitted by flush.
  Timestamp emitted_at = 0;

  std::vector<std::string> event_ids() const {
    std::vector<std::string> ids;
    ids.reserve(events.size());
    for (const auto& e : events) ids.push_back(e.event_id);
    return ids;
  }
};

inline void to_json(nlohmann::json& j, const EvidenceSpan& s) {
  j = nlohmann::json::array({s.start, s.end});
}

inline void to_json(nlohmann::json& j, const SemanticEvent& e) {
  j = nlohmann::json{{"event_id", e.event_id},       {"entity_id", e.entity_id},
                     {"event_type", e.event_type},   {"timestamp", e.timestamp},
                     {"description", e.description}, {"attrs", e.attrs},
                     {"source_doc", e.source_doc}};
  if (e.evidence_span)
    j["evidence_span"] = *e.evidence_span;
  else
    j["evidence_span"] = nullptr;
}

inline void from_json(const nlohmann::json& j, SemanticEvent& e) {
  e.event_id = j.at("event_id").get<std::string>();
  e.entity_id = j.at("entity_id").get<std::string>();
  e.event_type = j.at("event_type").get<std::string>();
  e.timestamp = j.at("timestamp").get<Timestamp>();
  e.description = j.value("description", "");
  e.attrs = j.value("attrs", Attrs{});
  e.source_doc = j.value("source_doc", "");
  if (j.contains("evidence_span") && j["evidence_span"].is_array())
    e.evidence_span = EvidenceSpan{j["evidence_span"][0].get<std::size_t>(),
                                   j["evidence_span"][1].get<std::size_t>()};
}

inline nlohmann::json timestamp_json(Timestamp t) {
  return t == kInfinity ? nlohmann::json(nullptr) : nlohmann::json(t);
}

inline void to_json(nlohmann::json& j, const PatternMatch& m) {
  j = nlohmann::json{{"pattern_id", m.pattern_id},
                     {"entity_id", m.entity_id},
                     {"events", m.events},
                     {"window", {m.first_ts, m.last_effective_ts}},
                     {"emitted_at", timestamp_json(m.emitted_at)}};
}

inline void from_json(const nlohmann::json& j, PatternMatch& m) {
  m.pattern_id = j.at("pattern_id").get<std::string>();
  m.entity_id = j.at("entity_id").get<std::string>();
  m.events = j.at("events").get<std::vector<SemanticEvent>>();
  m.first_ts = j.at("window")[0].get<Timestamp>();
  m.last_effective_ts = j.at("window")[1].get<Timestamp>();
  m.emitted_at = j.at("emitted_at").is_null() ? kInfinity : j.at("emitted_at").get<Timestamp>();
}

}  // namespace semflow
