#pragma once

#include <algorithm>
#include <cstdio>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "semflow/backend/backend.hpp"
#include "semflow/document.hpp"

namespace semflow {

struct Chunking {
  std::size_t size = 400;
  std::size_t overlap = 80;
};

struct ChunkSpan {
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Fixed-size character windows starting at 0, step size - overlap, for as
/// long as the start lies inside the text.
inline std::vector<ChunkSpan> chunk_spans(std::size_t text_len, Chunking c = {}) {
  if (c.size == 0 || c.overlap >= c.size) throw ConfigError("chunking needs size > overlap >= 0");
  std::vector<ChunkSpan> out;
  for (std::size_t start = 0; start < text_len; start += c.size - c.overlap)
    out.push_back({start, std::min(c.size, text_len - start)});
  return out;
}

inline std::string chunk_id(const std::string& doc_id, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "#%04zu", index);
  return doc_id + buf;
}

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::size_t offset = 0;
  std::string text;
  Vector embedding;
};

struct ScoredChunk {
  const Chunk* chunk = nullptr;
  double score = 0;
};

/// Exhaustive-scan cosine index over document chunks. One writer or many
/// readers at a time.
class RetrievalIndex {
 public:
  explicit RetrievalIndex(std::shared_ptr<ModelBackend> embedder, Chunking chunking = {})
      : embedder_(std::move(embedder)), chunking_(chunking) {
    if (!embedder_) throw ConfigError("retrieval index needs an embedding backend");
    dim_ = embedder_->dimension();
    chunk_spans(0, chunking_);  // validates the chunking
  }

  std::size_t dimension() const noexcept { return dim_; }
  const Chunking& chunking() const noexcept { return chunking_; }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }

  bool has_doc(const std::string& doc_id) const {
    std::shared_lock lock(mu_);
    return docs_.count(doc_id) > 0;
  }

  std::vector<Chunk> entries() const {
    std::shared_lock lock(mu_);
    return entries_;
  }

  /// Chunks and embeds `doc`; returns the number of chunks added.
  std::size_t add(const Document& doc) {
    {
      std::shared_lock lock(mu_);
      if (docs_.count(doc.doc_id)) throw DuplicateDocError("document '" + doc.doc_id + "' already indexed");
    }
    std::vector<Chunk> fresh;
    const auto spans = chunk_spans(doc.text.size(), chunking_);
    for (std::size_t i = 0; i < spans.size(); ++i) {
      Chunk c;
      c.chunk_id = chunk_id(doc.doc_id, i);
      c.doc_id = doc.doc_id;
      c.offset = spans[i].offset;
      c.text = doc.text.substr(spans[i].offset, spans[i].length);
      c.embedding = embedder_->embed(c.text).vector;
      if (c.embedding.size() != dim_) throw BackendError("embedding dimension changed");
      fresh.push_back(std::move(c));
    }
    std::unique_lock lock(mu_);
    if (!docs_.insert(doc.doc_id).second)
      throw DuplicateDocError("document '" + doc.doc_id + "' already indexed");
    for (auto& c : fresh) entries_.push_back(std::move(c));
    return spans.size();
  }

  /// k highest-cosine chunks, score-descending, ties by chunk_id ascending.
  /// With `doc_id` set, only that document's chunks are ranked.
  std::vector<Chunk> top_k(const Vector& query, std::size_t k, std::vector<double>* scores = nullptr,
                           const std::string* doc_id = nullptr) const {
    if (k < 1) throw PreconditionError("top_k needs k >= 1");
    std::shared_lock lock(mu_);
    std::vector<std::pair<double, const Chunk*>> ranked;
    ranked.reserve(entries_.size());
    for (const auto& c : entries_)
      if (!doc_id || c.doc_id == *doc_id) ranked.emplace_back(cosine(query, c.embedding), &c);
    const auto n = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second->chunk_id < b.second->chunk_id;
                      });
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(*ranked[i].second);
      if (scores) scores->push_back(ranked[i].first);
    }
    return out;
  }

  std::vector<Chunk> top_k(const std::string& query, std::size_t k, std::vector<double>* scores = nullptr,
                           const std::string* doc_id = nullptr) const {
    return top_k(embedder_->embed(query).vector, k, scores, doc_id);
  }

 private:
  std::shared_ptr<ModelBackend> embedder_;
  Chunking chunking_;
  std::size_t dim_ = 0;
  mutable std::shared_mutex mu_;
  std::vector<Chunk> entries_;
  std::set<std::string> docs_;
};

}  // namespace semflow
