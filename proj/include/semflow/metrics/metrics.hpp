#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/backend/transcript.hpp"
#include "semflow/common/errors.hpp"

namespace semflow {

/// Increment applied to one operator's counters. All fields must be >= 0.
struct MetricDelta {
  std::int64_t rows_in = 0;
  std::int64_t rows_out = 0;
  std::int64_t wall_time_ns = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t embedding_tokens = 0;
  std::int64_t calls = 0;
  std::int64_t embed_calls = 0;
  std::int64_t latency_ms = 0;
  std::int64_t skipped = 0;
};

struct OperatorMetrics {
  std::string operator_id;
  std::string kind;
  bool model_operator = false;
  MetricDelta totals;
};

struct Accuracy {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Counters for one run, one entry per operator (including the source).
class RunMetrics {
 public:
  RunMetrics(std::string run_id, std::string pipeline_id) : run_id_(std::move(run_id)), pipeline_id_(std::move(pipeline_id)) {}

  const std::string& run_id() const noexcept { return run_id_; }
  const std::string& pipeline_id() const noexcept { return pipeline_id_; }

  void add_operator(const std::string& id, const std::string& kind, bool model_operator) {
    std::lock_guard<std::mutex> lock(mu_);
    if (index_.count(id)) return;
    index_[id] = ops_.size();
    ops_.push_back({id, kind, model_operator, {}});
  }

  void record(const std::string& op_id, const MetricDelta& d) {
    for (auto v : {d.rows_in, d.rows_out, d.wall_time_ns, d.prompt_tokens, d.completion_tokens, d.embedding_tokens,
                   d.calls, d.embed_calls, d.latency_ms, d.skipped})
      if (v < 0) throw PreconditionError("metric deltas must be non-negative (operator '" + op_id + "')");
    std::lock_guard<std::mutex> lock(mu_);
    auto it = index_.find(op_id);
    if (it == index_.end()) throw UnknownOperator("no operator '" + op_id + "' in run '" + run_id_ + "'");
    auto& t = ops_[it->second].totals;
    t.rows_in += d.rows_in;
    t.rows_out += d.rows_out;
    t.wall_time_ns += d.wall_time_ns;
    t.prompt_tokens += d.prompt_tokens;
    t.completion_tokens += d.completion_tokens;
    t.embedding_tokens += d.embedding_tokens;
    t.calls += d.calls;
    t.embed_calls += d.embed_calls;
    t.latency_ms += d.latency_ms;
    t.skipped += d.skipped;
  }

  /// Converts a backend call record into a delta for its operator.
  void record_call(const CallRecord& r) {
    MetricDelta d;
    if (r.kind == "embed") {
      d.embedding_tokens = r.usage.prompt_tokens;
      d.embed_calls = 1;
    } else {
      d.prompt_tokens = r.usage.prompt_tokens;
      d.completion_tokens = r.usage.completion_tokens;
      d.calls = 1;
    }
    d.latency_ms = r.usage.latency_ms;
    record(r.operator_id, d);
  }

  std::vector<OperatorMetrics> snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return ops_;
  }

  void set_accuracy(Accuracy a) {
    std::lock_guard<std::mutex> lock(mu_);
    accuracy_ = a;
  }

  std::optional<Accuracy> accuracy() const {
    std::lock_guard<std::mutex> lock(mu_);
    return accuracy_;
  }

 private:
  std::string run_id_;
  std::string pipeline_id_;
  mutable std::mutex mu_;
  std::vector<OperatorMetrics> ops_;
  std::map<std::string, std::size_t> index_;
  std::optional<Accuracy> accuracy_;
};

namespace metrics_detail {

inline nlohmann::json counters(const MetricDelta& t, bool model) {
  const double wall_ms = static_cast<double>(t.wall_time_ns) / 1e6;
  nlohmann::json j{{"rows_in", t.rows_in},
                   {"rows_out", t.rows_out},
                   {"wall_time_ms", wall_ms},
                   {"throughput_rows_per_s",
                    wall_ms > 0 ? nlohmann::json(static_cast<double>(t.rows_in) / (wall_ms / 1000.0)) : nlohmann::json(nullptr)},
                   {"skipped", t.skipped}};
  if (model) {
    const auto calls = t.calls + t.embed_calls;
    j["model"] = {{"prompt_tokens", t.prompt_tokens},
                  {"completion_tokens", t.completion_tokens},
                  {"total_tokens", t.prompt_tokens + t.completion_tokens},
                  {"embedding_tokens", t.embedding_tokens},
                  {"calls", t.calls},
                  {"embed_calls", t.embed_calls},
                  {"mean_latency_ms",
                   calls > 0 ? nlohmann::json(static_cast<double>(t.latency_ms) / static_cast<double>(calls))
                             : nlohmann::json(nullptr)}};
  } else {
    j["model"] = nullptr;
  }
  return j;
}

}  // namespace metrics_detail

/// Report JSON. `total_tokens` counts completion-call tokens (prompt +
/// completion); embedding tokens are reported separately.
inline nlohmann::json make_report(const RunMetrics& m) {
  nlohmann::json ops = nlohmann::json::array();
  MetricDelta sum;
  for (const auto& o : m.snapshot()) {
    auto j = metrics_detail::counters(o.totals, o.model_operator);
    j["operator_id"] = o.operator_id;
    j["kind"] = o.kind;
    ops.push_back(std::move(j));
    const auto& t = o.totals;
    sum.rows_in += t.rows_in;
    sum.rows_out += t.rows_out;
    sum.wall_time_ns += t.wall_time_ns;
    sum.prompt_tokens += t.prompt_tokens;
    sum.completion_tokens += t.completion_tokens;
    sum.embedding_tokens += t.embedding_tokens;
    sum.calls += t.calls;
    sum.embed_calls += t.embed_calls;
    sum.latency_ms += t.latency_ms;
    sum.skipped += t.skipped;
  }
  auto totals = metrics_detail::counters(sum, true);
  nlohmann::json report{{"run_id", m.run_id()},
                        {"pipeline_id", m.pipeline_id()},
                        {"operators", ops},
                        {"totals", totals},
                        {"notes",
                         {"total_tokens = prompt_tokens + completion_tokens of completion calls; embedding "
                          "tokens are listed separately",
                          "timing fields (wall_time_ms, throughput_rows_per_s, mean_latency_ms) vary between runs"}}};
  if (const auto a = m.accuracy())
    report["accuracy"] = {{"precision", a->precision}, {"recall", a->recall}, {"f1", a->f1},
                          {"note", "empty prediction and empty truth count as f1 = 1"}};
  return report;
}

/// Copy of a report with every timing field removed.
inline nlohmann::json strip_timing(nlohmann::json j) {
  if (j.is_object()) {
    for (const char* k : {"wall_time_ms", "throughput_rows_per_s", "mean_latency_ms", "latency_ms"}) j.erase(k);
    for (auto& [_, v] : j.items()) v = strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timing(v);
  }
  return j;
}

/// Registry of runs, shared by the service.
class MetricsStore {
 public:
  std::shared_ptr<RunMetrics> open(const std::string& run_id, const std::string& pipeline_id) {
    std::lock_guard<std::mutex> lock(mu_);
    auto m = std::make_shared<RunMetrics>(run_id, pipeline_id);
    runs_[run_id] = m;
    return m;
  }

  std::shared_ptr<RunMetrics> get(const std::string& run_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = runs_.find(run_id);
    if (it == runs_.end()) throw RunNotFound("no run '" + run_id + "'");
    return it->second;
  }

  nlohmann::json report(const std::string& run_id) const { return make_report(*get(run_id)); }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<RunMetrics>> runs_;
};

}  // namespace semflow
