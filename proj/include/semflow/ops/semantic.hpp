#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "semflow/backend/backend.hpp"
#include "semflow/backend/prompt.hpp"
#include "semflow/backend/retrieval.hpp"
#include "semflow/document.hpp"

namespace semflow::ops {

inline constexpr double kDefaultThreshold = 0.6;

enum class Strategy { Llm, Embedding };

inline Strategy parse_strategy(const std::string& s) {
  if (s == "llm") return Strategy::Llm;
  if (s == "embedding") return Strategy::Embedding;
  throw ConfigError("unknown strategy '" + s + "' (expected llm or embedding)");
}

inline bool affirmative(std::string_view reply) {
  const auto t = text::to_lower(text::trim(reply));
  return t.rfind("yes", 0) == 0 || t.rfind("true", 0) == 0;
}

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

/// Keep/drop decision. Empty text is always dropped without a call.
inline bool sem_filter(const Document& doc, const std::string& criterion, ModelBackend& backend,
                       Strategy strategy = Strategy::Llm, double threshold = kDefaultThreshold) {
  if (text::trim(doc.text).empty()) return false;
  if (strategy == Strategy::Embedding)
    return cosine(backend.embed(doc.text).vector, backend.embed(criterion).vector) >= threshold;
  return affirmative(
      backend.complete(prompt::make("filter", "Answer YES or NO.\ncriterion: " + one_line(criterion), doc.text))
          .text);
}

inline Document sem_map(const Document& doc, const std::string& transform, ModelBackend& backend) {
  Document out = doc;
  out.text = backend.complete(prompt::make("map", "instruction: " + one_line(transform), doc.text)).text;
  out.attrs["sem_map.applied"] = text::hex64(text::fnv1a(transform));
  return out;
}

/// One synthetic document for a non-empty window; doc texts are passed one
/// per line in window order.
inline Document sem_aggregate(const std::vector<Document>& window, const std::string& instruction,
                              ModelBackend& backend) {
  if (window.empty()) throw PreconditionError("sem_aggregate needs a non-empty window");
  std::string payload;
  Document out;
  out.entity_id = window.front().entity_id;
  for (const auto& d : window) {
    if (!payload.empty()) payload += '\n';
    payload += one_line(d.text);
    if (d.entity_id != out.entity_id) out.entity_id = "mixed";
    out.timestamp = std::max(out.timestamp, d.timestamp);
  }
  out.doc_id = "agg:" + window.front().doc_id + ".." + window.back().doc_id;
  out.text = backend.complete(prompt::make("aggregate", "instruction: " + one_line(instruction), payload)).text;
  out.attrs["sem_aggregate.size"] = std::to_string(window.size());
  return out;
}

inline std::vector<std::pair<Document, Document>> sem_join(const Document& left,
                                                           const std::vector<Document>& right_buffer,
                                                           const std::string& instruction, ModelBackend& backend,
                                                           double threshold = kDefaultThreshold,
                                                           Strategy strategy = Strategy::Embedding) {
  std::vector<std::pair<Document, Document>> out;
  if (right_buffer.empty()) return out;
  Vector lv;
  if (strategy == Strategy::Embedding) lv = backend.embed(left.text).vector;
  for (const auto& r : right_buffer) {
    bool keep = false;
    if (strategy == Strategy::Embedding) {
      keep = cosine(lv, backend.embed(r.text).vector) >= threshold;
    } else {
      const auto payload = "LEFT: " + one_line(left.text) + "\nRIGHT: " + one_line(r.text);
      keep = affirmative(
          backend.complete(prompt::make("join", "Answer YES or NO.\ninstruction: " + one_line(instruction), payload))
              .text);
    }
    if (keep) out.emplace_back(left, r);
  }
  return out;
}

/// Unified retrieval-augmented answer over the chunks currently in `index`.
inline Document cont_rag(const Document& query, const RetrievalIndex& index, ModelBackend& backend,
                         std::size_t k) {
  if (k < 1) throw PreconditionError("k must be >= 1");
  std::vector<Chunk> ctx;
  if (index.size() > 0) ctx = index.top_k(query.text, k);
  std::string payload;
  std::vector<std::string> docs;
  for (const auto& c : ctx) {
    payload += "[" + c.chunk_id + "] " + one_line(c.text) + "\n";
    if (std::find(docs.begin(), docs.end(), c.doc_id) == docs.end()) docs.push_back(c.doc_id);
  }
  Document out = query;
  out.doc_id = query.doc_id + ":answer";
  out.text = backend.complete(prompt::make("rag_answer", "query: " + one_line(query.text), payload)).text;
  std::string ids;
  for (const auto& d : docs) ids += (ids.empty() ? "" : ",") + d;
  out.attrs["cont_rag.retrieved"] = ids;
  return out;
}

}  // namespace semflow::ops
