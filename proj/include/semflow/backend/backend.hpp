#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/common/errors.hpp"

namespace semflow {

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t latency_ms = 0;
  std::string call_id;
};

struct Completion {
  std::string text;
  TokenUsage usage;
};

using Vector = std::vector<double>;

struct Embedding {
  Vector vector;
  TokenUsage usage;
  /// Set when the input had no tokens and the vector is all zeros.
  bool zero = false;
};

/// Completion and embedding provider. Implementations must be safe for
/// concurrent calls.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual std::string provider() const = 0;
  virtual bool can_complete() const { return true; }
  virtual bool can_embed() const { return true; }
  virtual std::size_t dimension() const = 0;

  virtual Completion complete(const std::string& prompt) = 0;
  virtual Embedding embed(const std::string& text) = 0;
};

inline double dot(const Vector& a, const Vector& b) {
  double s = 0;
  const auto n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

/// Cosine similarity; 0 when either side is the zero vector.
inline double cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw PreconditionError("cosine: dimension mismatch");
  const double na = norm(a), nb = norm(b);
  if (na == 0 || nb == 0) return 0.0;
  return dot(a, b) / (na * nb);
}

inline void to_json(nlohmann::json& j, const TokenUsage& u) {
  j = nlohmann::json{{"call_id", u.call_id},
                     {"prompt_tokens", u.prompt_tokens},
                     {"completion_tokens", u.completion_tokens},
                     {"latency_ms", u.latency_ms}};
}

}  // namespace semflow
