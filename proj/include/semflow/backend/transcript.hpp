#pragma once

#include <chrono>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semflow/backend/backend.hpp"
#include "semflow/common/text.hpp"

namespace semflow {

struct CallRecord {
  std::string call_id;
  std::string kind;  // "complete" | "embed"
  std::string operator_id;
  std::string input_hash;
  nlohmann::json output;
  TokenUsage usage;
};

inline void to_json(nlohmann::json& j, const CallRecord& r) {
  j = nlohmann::json{{"call_id", r.call_id},
                     {"kind", r.kind},
                     {"operator", r.operator_id},
                     {"input_hash", r.input_hash},
                     {"output", r.output},
                     {"prompt_tokens", r.usage.prompt_tokens},
                     {"completion_tokens", r.usage.completion_tokens},
                     {"latency_ms", r.usage.latency_ms}};
}

inline void from_json(const nlohmann::json& j, CallRecord& r) {
  r.call_id = j.at("call_id").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.operator_id = j.value("operator", std::string());
  r.input_hash = j.at("input_hash").get<std::string>();
  r.output = j.at("output");
  r.usage.call_id = r.call_id;
  r.usage.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
  r.usage.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  r.usage.latency_ms = j.value("latency_ms", std::int64_t{0});
}

inline std::string input_hash(std::string_view s) { return text::hex64(text::fnv1a(s)); }

/// Append-only log of every backend call in a run.
class Transcript {
 public:
  void append(CallRecord r) {
    std::lock_guard<std::mutex> lock(mu_);
    records_.push_back(std::move(r));
  }

  std::vector<CallRecord> records() const {
    std::lock_guard<std::mutex> lock(mu_);
    return records_;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return records_.size();
  }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records()) {
      out += nlohmann::json(r).dump();
      out += '\n';
    }
    return out;
  }

  static std::vector<CallRecord> parse_jsonl(std::istream& in) {
    std::vector<CallRecord> out;
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      out.push_back(nlohmann::json::parse(line).get<CallRecord>());
    }
    return out;
  }

 private:
  mutable std::mutex mu_;
  std::vector<CallRecord> records_;
};

/// Per-operator view of a shared backend: assigns call ids, measures
/// latency, appends to the transcript and notifies an observer.
class MeteredBackend : public ModelBackend {
 public:
  using Observer = std::function<void(const CallRecord&)>;

  MeteredBackend(std::shared_ptr<ModelBackend> inner, std::string operator_id,
                 std::shared_ptr<Transcript> transcript, Observer observer = {})
      : inner_(std::move(inner)),
        op_(std::move(operator_id)),
        transcript_(std::move(transcript)),
        observer_(std::move(observer)) {}

  std::string provider() const override { return inner_->provider(); }
  bool can_complete() const override { return inner_->can_complete(); }
  bool can_embed() const override { return inner_->can_embed(); }
  std::size_t dimension() const override { return inner_->dimension(); }

  Completion complete(const std::string& prompt) override {
    const auto t0 = std::chrono::steady_clock::now();
    auto c = inner_->complete(prompt);
    c.usage.latency_ms = std::max(c.usage.latency_ms, elapsed_ms(t0));
    c.usage.call_id = next_id();
    log({c.usage.call_id, "complete", op_, input_hash(prompt), c.text, c.usage});
    return c;
  }

  Embedding embed(const std::string& s) override {
    const auto t0 = std::chrono::steady_clock::now();
    auto e = inner_->embed(s);
    e.usage.latency_ms = std::max(e.usage.latency_ms, elapsed_ms(t0));
    e.usage.call_id = next_id();
    log({e.usage.call_id, "embed", op_, input_hash(s), e.vector, e.usage});
    return e;
  }

 private:
  std::shared_ptr<ModelBackend> inner_;
  std::string op_;
  std::shared_ptr<Transcript> transcript_;
  Observer observer_;
  std::mutex mu_;
  std::size_t seq_ = 0;

  static std::int64_t elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
        .count();
  }

  std::string next_id() {
    std::lock_guard<std::mutex> lock(mu_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", seq_++);
    return op_ + "#" + buf;
  }

  void log(CallRecord r) {
    if (observer_) observer_(r);
    if (transcript_) transcript_->append(std::move(r));
  }
};

/// Serves recorded outputs keyed by (kind, input hash), in recording order
/// for repeated inputs. Unrecorded inputs raise BackendError.
class ReplayBackend : public ModelBackend {
 public:
  ReplayBackend(const std::vector<CallRecord>& records, std::size_t dimension)
      : dim_(dimension) {
    for (const auto& r : records) queue_[{r.kind, r.input_hash}].push_back(r);
  }

  std::string provider() const override { return "replay"; }
  std::size_t dimension() const override { return dim_; }

  Completion complete(const std::string& prompt) override {
    auto r = take("complete", prompt);
    return {r.output.get<std::string>(), r.usage};
  }

  Embedding embed(const std::string& s) override {
    auto r = take("embed", s);
    Embedding e{r.output.get<Vector>(), r.usage, false};
    e.zero = norm(e.vector) == 0;
    return e;
  }

 private:
  std::size_t dim_;
  std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::deque<CallRecord>> queue_;

  CallRecord take(const std::string& kind, const std::string& input) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = queue_.find({kind, input_hash(input)});
    if (it == queue_.end() || it->second.empty())
      throw BackendError("replay: no recorded " + kind + " for input " + input_hash(input));
    auto r = std::move(it->second.front());
    it->second.pop_front();
    return r;
  }
};

}  // namespace semflow
