#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/backend/factory.hpp"
#include "semflow/backend/transcript.hpp"
#include "semflow/dataflow/operators.hpp"
#include "semflow/dataflow/record.hpp"
#include "semflow/dataflow/spec.hpp"
#include "semflow/metrics/metrics.hpp"

namespace semflow {

/// Result of structural checks on a spec: operators in topological order
/// (ties in spec order) and the resolved output type of each.
struct GraphPlan {
  std::vector<std::string> order;
  std::map<std::string, RecordType> output_type;
};

/// Checks ids, kinds, inputs, acyclicity, input types and sink
/// reachability without instantiating operators.
inline GraphPlan plan_graph(const PipelineSpec& spec, const OperatorRegistry& reg = builtin_operators()) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < spec.operators.size(); ++i) {
    const auto& op = spec.operators[i];
    if (op.id.empty()) throw SpecError("operator ids must be non-empty");
    if (op.id == spec.source_id) throw SpecError("operator id '" + op.id + "' collides with the source id");
    if (!pos.emplace(op.id, i).second) throw SpecError("duplicate operator id '" + op.id + "'");
  }
  for (const auto& op : spec.operators) {
    const auto it = reg.find(op.kind);
    if (it == reg.end()) throw UnknownOperatorKind("operator '" + op.id + "' has unknown kind '" + op.kind + "'");
    const auto& k = it->second;
    if (op.inputs.size() < k.min_inputs || op.inputs.size() > k.max_inputs)
      throw SpecError("operator '" + op.id + "' (" + op.kind + ") takes " + std::to_string(k.min_inputs) +
                      (k.min_inputs == k.max_inputs ? "" : ".." + std::to_string(k.max_inputs)) + " input(s), got " +
                      std::to_string(op.inputs.size()));
    for (const auto& in : op.inputs)
      if (in != spec.source_id && !pos.count(in))
        throw DanglingInput("operator '" + op.id + "' reads undefined input '" + in + "'");
  }

  // Kahn's algorithm, always releasing the earliest ready operator in spec order.
  std::vector<std::size_t> pending(spec.operators.size());
  std::vector<std::vector<std::size_t>> consumers(spec.operators.size());
  for (std::size_t i = 0; i < spec.operators.size(); ++i)
    for (const auto& in : spec.operators[i].inputs)
      if (in != spec.source_id) {
        ++pending[i];
        consumers[pos.at(in)].push_back(i);
      }
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < pending.size(); ++i)
    if (pending[i] == 0) ready.insert(i);
  GraphPlan plan;
  plan.output_type[spec.source_id] = RecordType::Document;
  while (!ready.empty()) {
    const auto i = *ready.begin();
    ready.erase(ready.begin());
    const auto& op = spec.operators[i];
    const auto& k = reg.at(op.kind);
    const auto first = plan.output_type.at(op.inputs.front());
    for (const auto& in : op.inputs) {
      const auto t = plan.output_type.at(in);
      if (k.input != RecordType::Any && t != RecordType::Any && t != k.input)
        throw SpecError("operator '" + op.id + "' (" + op.kind + ") expects " + record_type_name(k.input) +
                        " input but '" + in + "' produces " + record_type_name(t));
    }
    plan.output_type[op.id] = k.output == RecordType::Any ? first : k.output;
    plan.order.push_back(op.id);
    for (const auto c : consumers[i])
      if (--pending[c] == 0) ready.insert(c);
  }
  if (plan.order.size() != spec.operators.size()) {
    std::string cyc;
    for (std::size_t i = 0; i < pending.size(); ++i)
      if (pending[i] > 0) cyc += (cyc.empty() ? "" : ", ") + spec.operators[i].id;
    throw CycleError("operator references form a cycle through: " + cyc);
  }

  if (spec.sinks.empty()) throw SpecError("pipeline needs at least one sink");
  std::set<std::string> reachable{spec.source_id};
  for (const auto& id : plan.order)
    for (const auto& in : spec.find(id)->inputs)
      if (reachable.count(in)) {
        reachable.insert(id);
        break;
      }
  for (const auto& s : spec.sinks) {
    if (s != spec.source_id && !pos.count(s)) throw DanglingInput("sink '" + s + "' is not a defined operator");
    if (!reachable.count(s)) throw SpecError("sink '" + s + "' is not reachable from the source");
  }
  return plan;
}

/// An executable operator graph for one run: built, fed, flushed, then
/// discarded. Driven by one caller at a time.
class Pipeline {
 public:
  Pipeline(PipelineSpec spec, std::shared_ptr<ModelBackend> backend, std::string run_id = "run",
           const OperatorRegistry& reg = builtin_operators())
      : spec_(std::move(spec)),
        transcript_(std::make_shared<Transcript>()),
        metrics_(std::make_shared<RunMetrics>(std::move(run_id), spec_.pipeline_id)) {
    const auto plan = plan_graph(spec_, reg);
    metrics_->add_operator(spec_.source_id, "source", false);
    std::map<std::string, std::size_t> slot;
    for (const auto& id : plan.order) {
      const auto& os = *spec_.find(id);
      const auto& k = reg.at(os.kind);
      metrics_->add_operator(id, os.kind, k.model_operator);
      OperatorContext ctx{id, os.kind, os.params, nullptr};
      if (k.model_operator) {
        if (!backend) throw ConfigError("operator '" + id + "' needs a model backend");
        auto m = metrics_;
        ctx.backend = std::make_shared<MeteredBackend>(backend, id, transcript_,
                                                       [m](const CallRecord& r) { m->record_call(r); });
      }
      Node n;
      n.id = id;
      n.kind = os.kind;
      n.op = k.make(ctx);
      slot[id] = nodes_.size();
      nodes_.push_back(std::move(n));
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& inputs = spec_.find(nodes_[i].id)->inputs;
      for (std::size_t port = 0; port < inputs.size(); ++port) {
        if (inputs[port] == spec_.source_id) source_edges_.push_back({i, port});
        else nodes_[slot.at(inputs[port])].edges.push_back({i, port});
      }
    }
    for (const auto& s : spec_.sinks) {
      if (s == spec_.source_id) source_is_sink_ = true;
      else nodes_[slot.at(s)].sink = true;
    }
  }

  const PipelineSpec& spec() const noexcept { return spec_; }
  std::vector<std::string> topo_order() const {
    std::vector<std::string> out;
    for (const auto& n : nodes_) out.push_back(n.id);
    return out;
  }
  std::shared_ptr<RunMetrics> metrics() const noexcept { return metrics_; }
  std::shared_ptr<Transcript> transcript() const noexcept { return transcript_; }
  bool flushed() const noexcept { return flushed_; }

  /// Feeds one document through the graph and returns the sink emissions
  /// it caused, including matches released by the entity's new watermark.
  std::vector<SinkEmission> push(const Document& doc) {
    if (flushed_) throw PreconditionError("pipeline already flushed");
    validate_document(doc);
    auto wm = watermarks_.find(doc.entity_id);
    if (wm != watermarks_.end() && doc.timestamp < wm->second)
      throw OutOfOrderError("document '" + doc.doc_id + "' at t=" + std::to_string(doc.timestamp) +
                            " precedes t=" + std::to_string(wm->second) + " already seen for entity '" +
                            doc.entity_id + "'");
    if (!doc_ids_.insert(doc.doc_id).second)
      throw DuplicateDocError("document id '" + doc.doc_id + "' already ingested");
    watermarks_[doc.entity_id] = doc.timestamp;

    std::vector<SinkEmission> out;
    MetricDelta src;
    src.rows_in = src.rows_out = 1;
    metrics_->record(spec_.source_id, src);
    if (source_is_sink_) out.push_back({spec_.source_id, doc});

    std::vector<std::vector<Inbox>> queues(nodes_.size());
    for (const auto& e : source_edges_) queues[e.node].push_back({e.port, doc});
    run_queues(queues, out);
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      step(i, queues, out, [&](Operator& op) { return op.watermark(doc.entity_id, doc.timestamp); });
    return out;
  }

  /// Watermark +inf: every operator releases pending results. Idempotent.
  std::vector<SinkEmission> flush() {
    std::vector<SinkEmission> out;
    if (flushed_) return out;
    flushed_ = true;
    std::vector<std::vector<Inbox>> queues(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      drain(i, queues, out);
      step(i, queues, out, [](Operator& op) { return op.flush(); });
    }
    return out;
  }

  /// Trace rows (every record the operator emitted) and operator state.
  nlohmann::json trace(const std::string& op_id) const {
    if (op_id == spec_.source_id)
      return {{"operator_id", op_id}, {"kind", "source"}, {"rows", nlohmann::json::array()}, {"state", nullptr}};
    for (const auto& n : nodes_)
      if (n.id == op_id) return {{"operator_id", n.id}, {"kind", n.kind}, {"rows", n.rows}, {"state", n.op->state()}};
    throw UnknownOperator("no operator '" + op_id + "' in pipeline '" + spec_.pipeline_id + "'");
  }

  /// Every event extracted in this run, in extraction order per operator.
  std::vector<SemanticEvent> events() const {
    std::vector<SemanticEvent> out;
    for (const auto& n : nodes_) {
      auto e = n.op->events();
      out.insert(out.end(), e.begin(), e.end());
    }
    return out;
  }

  nlohmann::json report() const { return make_report(*metrics_); }

 private:
  struct Edge {
    std::size_t node;
    std::size_t port;
  };
  struct Inbox {
    std::size_t port;
    Record record;
  };
  struct Node {
    std::string id;
    std::string kind;
    std::unique_ptr<Operator> op;
    std::vector<Edge> edges;
    bool sink = false;
    nlohmann::json rows = nlohmann::json::array();
  };

  PipelineSpec spec_;
  std::shared_ptr<Transcript> transcript_;
  std::shared_ptr<RunMetrics> metrics_;
  std::vector<Node> nodes_;
  std::vector<Edge> source_edges_;
  bool source_is_sink_ = false;
  bool flushed_ = false;
  std::map<std::string, Timestamp> watermarks_;
  std::set<std::string> doc_ids_;

  template <typename F>
  void step(std::size_t i, std::vector<std::vector<Inbox>>& queues, std::vector<SinkEmission>& out, F&& f) {
    auto& n = nodes_[i];
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Record> emitted;
    try {
      emitted = f(*n.op);
    } catch (const OperatorFailure&) {
      throw;
    } catch (const BackendError& e) {
      throw OperatorFailure(n.id, e);
    } catch (const TimeoutError& e) {
      throw OperatorFailure(n.id, e);
    }
    MetricDelta d;
    d.wall_time_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
    d.rows_out = static_cast<std::int64_t>(emitted.size());
    d.skipped = n.op->take_skipped();
    metrics_->record(n.id, d);
    route(i, std::move(emitted), queues, out);
    for (std::size_t j = i + 1; j < nodes_.size(); ++j) drain(j, queues, out);
  }

  void route(std::size_t i, std::vector<Record> emitted, std::vector<std::vector<Inbox>>& queues,
             std::vector<SinkEmission>& out) {
    auto& n = nodes_[i];
    for (auto& r : emitted) {
      n.rows.push_back(record_json(r));
      if (n.sink) out.push_back({n.id, r});
      for (const auto& e : n.edges) queues[e.node].push_back({e.port, r});
    }
  }

  /// Processes everything queued for node i (inputs only come from earlier
  /// nodes, so one pass in topological order empties all queues).
  void drain(std::size_t i, std::vector<std::vector<Inbox>>& queues, std::vector<SinkEmission>& out) {
    auto inbox = std::move(queues[i]);
    queues[i].clear();
    if (inbox.empty()) return;
    auto& n = nodes_[i];
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Record> emitted;
    for (auto& in : inbox) {
      std::vector<Record> r;
      try {
        r = n.op->process(in.record, in.port);
      } catch (const OperatorFailure&) {
        throw;
      } catch (const BackendError& e) {
        throw OperatorFailure(n.id, e);
      } catch (const TimeoutError& e) {
        throw OperatorFailure(n.id, e);
      }
      emitted.insert(emitted.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
    }
    MetricDelta d;
    d.wall_time_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
    d.rows_in = static_cast<std::int64_t>(inbox.size());
    d.rows_out = static_cast<std::int64_t>(emitted.size());
    d.skipped = n.op->take_skipped();
    metrics_->record(n.id, d);
    route(i, std::move(emitted), queues, out);
  }

  void run_queues(std::vector<std::vector<Inbox>>& queues, std::vector<SinkEmission>& out) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) drain(i, queues, out);
  }
};

/// Builds a pipeline with the backend described by the spec.
inline std::unique_ptr<Pipeline> build_pipeline(const PipelineSpec& spec, const std::string& run_id = "run",
                                                std::shared_ptr<ModelBackend> backend = nullptr) {
  if (!backend) backend = make_backend(spec.backend);
  return std::make_unique<Pipeline>(spec, std::move(backend), run_id);
}

}  // namespace semflow
