#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "semflow/common/errors.hpp"

namespace semflow {

using Timestamp = std::int64_t;
using Attrs = std::map<std::string, std::string>;

/// Raw stream record.
struct Document {
  std::string doc_id;
  std::string entity_id;
  Timestamp timestamp = 0;
  std::string text;
  Attrs attrs;

  bool operator==(const Document&) const = default;
};

inline void validate_document(const Document& d) {
  if (d.doc_id.empty()) throw InvalidDocument("doc_id must be non-empty");
  if (d.entity_id.empty()) throw InvalidDocument("document '" + d.doc_id + "' has an empty entity_id");
  if (d.timestamp < 0) throw InvalidDocument("document '" + d.doc_id + "' has a negative timestamp");
}

inline void to_json(nlohmann::json& j, const Document& d) {
  j = nlohmann::json{{"doc_id", d.doc_id},
                     {"entity_id", d.entity_id},
                     {"timestamp", d.timestamp},
                     {"text", d.text},
                     {"attrs", d.attrs}};
}

/// Input lines carry exactly {doc_id, entity_id, timestamp, text, attrs};
/// unknown fields are rejected.
inline void from_json(const nlohmann::json& j, Document& d) {
  if (!j.is_object()) throw InvalidDocument("document must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "doc_id" && key != "entity_id" && key != "timestamp" && key != "text" &&
        key != "attrs")
      throw InvalidDocument("unexpected document field '" + key + "'");
  }
  try {
    d.doc_id = j.at("doc_id").get<std::string>();
    d.entity_id = j.at("entity_id").get<std::string>();
    d.timestamp = j.at("timestamp").get<Timestamp>();
    d.text = j.at("text").get<std::string>();
    d.attrs = j.contains("attrs") ? j.at("attrs").get<Attrs>() : Attrs{};
  } catch (const nlohmann::json::exception& e) {
    throw InvalidDocument(std::string("malformed document: ") + e.what());
  }
}

}  // namespace semflow
