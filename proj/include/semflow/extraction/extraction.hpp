#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/backend/backend.hpp"
#include "semflow/backend/prompt.hpp"
#include "semflow/backend/retrieval.hpp"
#include "semflow/document.hpp"
#include "semflow/event.hpp"

namespace semflow {

struct EventTypeDef {
  std::string event_type;
  std::string extraction_prompt;
  std::vector<std::string> attrs_schema;
  /// Keyword cues; the mock extractor matches these case-insensitively and
  /// the retrieval variant uses them as the query when present.
  std::vector<std::string> cues;

  bool operator==(const EventTypeDef&) const = default;
};

struct EventSchema {
  std::vector<EventTypeDef> types;

  bool operator==(const EventSchema&) const = default;

  const EventTypeDef* find(const std::string& type) const {
    for (const auto& t : types)
      if (t.event_type == type) return &t;
    return nullptr;
  }
};

inline void validate_schema(const EventSchema& s) {
  if (s.types.empty()) throw SpecError("event schema must define at least one event type");
  std::set<std::string> seen;
  for (const auto& t : s.types) {
    if (t.event_type.empty()) throw SpecError("event type names must be non-empty");
    if (!seen.insert(t.event_type).second) throw SpecError("duplicate event type '" + t.event_type + "'");
    if (text::trim(t.extraction_prompt).empty())
      throw SpecError("event type '" + t.event_type + "' has an empty extraction prompt");
  }
}

inline void to_json(nlohmann::json& j, const EventTypeDef& t) {
  j = nlohmann::json{{"event_type", t.event_type},
                     {"prompt", t.extraction_prompt},
                     {"attrs", t.attrs_schema},
                     {"cues", t.cues}};
}

inline void from_json(const nlohmann::json& j, EventTypeDef& t) {
  t.event_type = j.at("event_type").get<std::string>();
  t.extraction_prompt = j.at("prompt").get<std::string>();
  t.attrs_schema = j.value("attrs", std::vector<std::string>{});
  t.cues = j.value("cues", std::vector<std::string>{});
}

inline void to_json(nlohmann::json& j, const EventSchema& s) { j = s.types; }

inline void from_json(const nlohmann::json& j, EventSchema& s) {
  if (!j.is_array()) throw SpecError("event schema must be a JSON array");
  s.types = j.get<std::vector<EventTypeDef>>();
}

namespace extraction_detail {

inline std::string clean(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '|') c = ' ';
  return s;
}

inline std::string header(const EventSchema& schema) {
  std::string h =
      "Extract every event of the types below that the document describes. Reply with a JSON array "
      "of objects {\"event_type\", \"attrs\", \"evidence_quote\"}; evidence_quote is copied verbatim "
      "from the document. Reply [] when nothing applies.\n";
  for (const auto& t : schema.types) {
    h += "EVENT " + t.event_type + ": " + clean(t.extraction_prompt);
    std::string attrs, cues;
    for (const auto& a : t.attrs_schema) attrs += (attrs.empty() ? "" : ", ") + clean(a);
    for (const auto& c : t.cues) cues += (cues.empty() ? "" : ", ") + clean(c);
    h += " | attrs: " + attrs + " | cues: " + cues + "\n";
  }
  if (!h.empty() && h.back() == '\n') h.pop_back();
  return h;
}

inline std::optional<EvidenceSpan> locate(const std::string& text, const std::string& quote) {
  if (quote.empty()) return std::nullopt;
  auto pos = text.find(quote);
  if (pos == std::string::npos) pos = text::ifind(text, quote);
  if (pos == std::string::npos) return std::nullopt;
  return EvidenceSpan{pos, pos + quote.size()};
}

struct Raw {
  std::string type;
  Attrs attrs;
  std::string quote;
};

inline std::vector<Raw> parse_output(const std::string& out, const EventSchema& schema) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(out);
  } catch (const nlohmann::json::exception& e) {
    throw ExtractionParseError(std::string("output is not JSON: ") + e.what());
  }
  if (!j.is_array()) throw ExtractionParseError("output must be a JSON array");
  std::vector<Raw> raws;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("event_type") || !item["event_type"].is_string())
      throw ExtractionParseError("each element needs a string event_type");
    Raw r;
    r.type = item["event_type"].get<std::string>();
    if (!schema.find(r.type)) throw ExtractionParseError("unknown event type '" + r.type + "'");
    if (item.contains("attrs")) {
      if (!item["attrs"].is_object()) throw ExtractionParseError("attrs must be an object");
      for (const auto& [k, v] : item["attrs"].items())
        r.attrs[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    if (item.contains("evidence_quote") && item["evidence_quote"].is_string())
      r.quote = item["evidence_quote"].get<std::string>();
    raws.push_back(std::move(r));
  }
  return raws;
}

inline std::vector<SemanticEvent> run(const Document& doc, const EventSchema& schema, ModelBackend& backend,
                                      const std::string& payload) {
  const auto h = header(schema);
  auto out = backend.complete(prompt::make("extract_events", h, payload)).text;
  std::vector<Raw> raws;
  try {
    raws = parse_output(out, schema);
  } catch (const ExtractionParseError& first) {
    const auto repair = h + "\nYour previous reply could not be used (" + clean(first.what()) +
                        "). Reply with the JSON array only.";
    raws = parse_output(backend.complete(prompt::make("extract_events", repair, payload)).text, schema);
  }

  std::vector<std::pair<std::size_t, SemanticEvent>> keyed;
  for (std::size_t i = 0; i < raws.size(); ++i) {
    auto& r = raws[i];
    SemanticEvent e;
    e.entity_id = doc.entity_id;
    e.event_type = r.type;
    e.timestamp = doc.timestamp;
    if (auto it = r.attrs.find("timestamp"); it != r.attrs.end()) {
      try {
        std::size_t used = 0;
        const auto t = std::stoll(it->second, &used);
        if (used == it->second.size() && t >= 0) e.timestamp = t;
      } catch (const std::exception&) {
      }
    }
    e.attrs = std::move(r.attrs);
    e.source_doc = doc.doc_id;
    e.evidence_span = locate(doc.text, r.quote);
    e.description = r.quote.empty() ? r.type : r.quote;
    const auto pos = e.evidence_span ? e.evidence_span->start : doc.text.size() + i;
    keyed.emplace_back(pos, std::move(e));
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.second.timestamp != b.second.timestamp) return a.second.timestamp < b.second.timestamp;
    return a.first < b.first;
  });
  std::vector<SemanticEvent> events;
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    keyed[i].second.event_id = doc.doc_id + ":" + std::to_string(i);
    events.push_back(std::move(keyed[i].second));
  }
  return events;
}

inline bool word_char(char c) { return !text::is_space(c); }

}  // namespace extraction_detail

/// Full-text extraction: one backend call per document (plus at most one
/// repair call). Throws ExtractionParseError when the repaired output is
/// still unusable.
inline std::vector<SemanticEvent> extract_events(const Document& doc, const EventSchema& schema,
                                                 ModelBackend& backend) {
  validate_document(doc);
  validate_schema(schema);
  if (text::trim(doc.text).empty()) return {};
  return extraction_detail::run(doc, schema, backend, doc.text);
}

/// Retrieval query for one event type: its cues when present, else its
/// prompt.
inline std::string retrieval_query(const EventTypeDef& t) {
  if (t.cues.empty()) return t.event_type + " " + t.extraction_prompt;
  std::string q;
  for (const auto& c : t.cues) q += (q.empty() ? "" : " ") + c;
  return q;
}

/// Union of the top-k chunks of `doc` per event type, widened to word
/// boundaries, merged, and joined with blank lines.
inline std::string retrieved_passages(const Document& doc, const EventSchema& schema,
                                      const RetrievalIndex& index, std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const auto& t : schema.types)
    for (const auto& c : index.top_k(retrieval_query(t), k, nullptr, &doc.doc_id))
      spans.emplace_back(c.offset, c.offset + c.text.size());
  const auto& s = doc.text;
  for (auto& [a, b] : spans) {
    while (a > 0 && a < s.size() && extraction_detail::word_char(s[a - 1]) && extraction_detail::word_char(s[a])) --a;
    while (b < s.size() && b > 0 && extraction_detail::word_char(s[b - 1]) && extraction_detail::word_char(s[b])) ++b;
  }
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<std::size_t, std::size_t>> merged;
  for (const auto& sp : spans) {
    if (!merged.empty()) {
      auto gap_blank = true;
      for (auto i = merged.back().second; i < sp.first && gap_blank; ++i) gap_blank = text::is_space(s[i]);
      if (sp.first <= merged.back().second || gap_blank) {
        merged.back().second = std::max(merged.back().second, sp.second);
        continue;
      }
    }
    merged.push_back(sp);
  }
  std::string out;
  for (const auto& [a, b] : merged) {
    if (!out.empty()) out += "\n\n";
    out += s.substr(a, b - a);
  }
  return out;
}

/// Retrieval-focused extraction: the prompt carries only the top-k chunks
/// per event type. Indexes `doc` first when the index does not hold it.
inline std::vector<SemanticEvent> extract_events_rag(const Document& doc, const EventSchema& schema,
                                                     RetrievalIndex& index, ModelBackend& backend,
                                                     std::size_t k) {
  validate_document(doc);
  validate_schema(schema);
  if (k < 1) throw PreconditionError("k must be >= 1");
  if (text::trim(doc.text).empty()) return {};
  if (!index.has_doc(doc.doc_id)) index.add(doc);
  return extraction_detail::run(doc, schema, backend, retrieved_passages(doc, schema, index, k));
}

}  // namespace semflow
