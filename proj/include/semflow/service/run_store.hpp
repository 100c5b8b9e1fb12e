#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/dataflow/pipeline.hpp"
#include "semflow/service/persist.hpp"

namespace semflow::service {

struct IngestResult {
  std::size_t ingested = 0;
  std::vector<SinkEmission> emissions;
};

/// Pipelines and runs behind the HTTP service. Pipelines live in
/// data_dir/pipelines/<id>.json, runs in data_dir/runs/<id>/. A flushed run
/// is served from disk only.
class RunStore {
 public:
  explicit RunStore(fs::path data_dir) : root_(std::move(data_dir)) {
    std::error_code ec;
    fs::create_directories(root_ / "runs", ec);
    fs::create_directories(root_ / "pipelines", ec);
    if (ec || !fs::is_directory(root_ / "runs")) throw DataDirError("cannot create '" + root_.string() + "'");
    const auto probe = root_ / ".probe";
    try {
      write_file(probe, "");
    } catch (const IoError&) {
      throw DataDirError("data dir '" + root_.string() + "' is not writable");
    }
    fs::remove(probe, ec);
    run_seq_ = static_cast<std::size_t>(std::distance(fs::directory_iterator(root_ / "runs"), fs::directory_iterator{}));
    pipeline_seq_ =
        static_cast<std::size_t>(std::distance(fs::directory_iterator(root_ / "pipelines"), fs::directory_iterator{}));
  }

  const fs::path& root() const noexcept { return root_; }

  /// Validates and stores a spec. An empty or taken pipeline_id gets a fresh one.
  std::string create_pipeline(PipelineSpec spec) {
    plan_graph(spec);
    std::lock_guard<std::mutex> lock(mu_);
    if (spec.pipeline_id.empty() || fs::exists(pipeline_path(spec.pipeline_id)))
      spec.pipeline_id = next_id("p", pipeline_seq_, [&](const std::string& id) { return fs::exists(pipeline_path(id)); });
    write_file(pipeline_path(spec.pipeline_id), nlohmann::json(spec).dump(2) + "\n");
    return spec.pipeline_id;
  }

  bool has_pipeline(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    return valid_id(id) && fs::exists(pipeline_path(id));
  }

  PipelineSpec pipeline(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    if (!valid_id(id) || !fs::exists(pipeline_path(id))) throw PipelineNotFound("no pipeline '" + id + "'");
    return parse_pipeline_spec(parse_json_text(read_file(pipeline_path(id)), "pipeline '" + id + "'"));
  }

  /// Replaces a pipeline's spec (after NL synthesis or recompile).
  void put_pipeline(const std::string& id, PipelineSpec spec) {
    if (!valid_id(id)) throw SpecError("invalid pipeline id '" + id + "'");
    spec.pipeline_id = id;
    std::lock_guard<std::mutex> lock(mu_);
    write_file(pipeline_path(id), nlohmann::json(spec).dump(2) + "\n");
  }

  std::string start_run(const std::string& pipeline_id, std::shared_ptr<ModelBackend> backend = nullptr) {
    auto spec = pipeline(pipeline_id);
    std::lock_guard<std::mutex> lock(mu_);
    const auto id = next_id("run-", run_seq_, [&](const std::string& r) { return fs::exists(run_dir(r)); });
    auto run = std::make_shared<Run>();
    run->pipeline = build_pipeline(spec, id, std::move(backend));
    fs::create_directories(run_dir(id));
    write_file(run_dir(id) / "spec.json", nlohmann::json(spec).dump(2) + "\n");
    runs_[id] = run;
    return id;
  }

  /// Feeds a JSON-lines body to a live run. Documents before a failing line
  /// stay ingested.
  IngestResult ingest(const std::string& run_id, const std::string& jsonl) {
    auto run = live(run_id);
    std::lock_guard<std::mutex> lock(run->mu);
    if (run->pipeline->flushed()) throw PreconditionError("run '" + run_id + "' is already flushed");
    IngestResult r;
    for (const auto& d : parse_documents(jsonl)) {
      auto out = run->pipeline->push(d);
      ++r.ingested;
      for (auto& e : out) {
        run->matches += emission_line(e);
        r.emissions.push_back(std::move(e));
      }
    }
    return r;
  }

  /// Flushes and persists the run. Flushing a flushed run is a no-op.
  std::vector<SinkEmission> flush(const std::string& run_id) {
    if (is_persisted(run_id) && !has_live(run_id)) return {};
    auto run = live(run_id);
    std::lock_guard<std::mutex> lock(run->mu);
    if (run->pipeline->flushed()) return {};
    auto out = run->pipeline->flush();
    for (const auto& e : out) run->matches += emission_line(e);
    persist_run(run_dir(run_id), *run->pipeline, run->matches, run->pipeline->report());
    write_file(run_dir(run_id) / "flushed", "");
    {
      std::lock_guard<std::mutex> g(mu_);
      runs_.erase(run_id);
    }
    return out;
  }

  nlohmann::json report(const std::string& run_id) const {
    if (auto run = find_live(run_id)) {
      std::lock_guard<std::mutex> lock(run->mu);
      return run->pipeline->report();
    }
    return parse_json_text(read_file(persisted(run_id) / "report.json"), "report");
  }

  nlohmann::json trace(const std::string& run_id, const std::string& op_id) const {
    if (auto run = find_live(run_id)) {
      std::lock_guard<std::mutex> lock(run->mu);
      return run->pipeline->trace(op_id);
    }
    const auto p = persisted(run_id) / "traces" / (op_id + ".json");
    if (!valid_id(op_id) || !fs::exists(p)) throw UnknownOperator("no operator '" + op_id + "' in run '" + run_id + "'");
    return parse_json_text(read_file(p), "trace");
  }

  std::string matches(const std::string& run_id) const {
    if (auto run = find_live(run_id)) {
      std::lock_guard<std::mutex> lock(run->mu);
      return run->matches;
    }
    return read_file(persisted(run_id) / "matches.jsonl");
  }

  bool flushed(const std::string& run_id) const {
    if (find_live(run_id)) return false;
    persisted(run_id);
    return true;
  }

 private:
  struct Run {
    mutable std::mutex mu;
    std::unique_ptr<Pipeline> pipeline;
    std::string matches;
  };

  fs::path root_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
  std::size_t run_seq_ = 0;
  std::size_t pipeline_seq_ = 0;

  static bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
    for (const char c : id)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
    return true;
  }

  template <typename Taken>
  static std::string next_id(const char* prefix, std::size_t& seq, Taken taken) {
    for (;;) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%04zu", prefix, ++seq);
      if (!taken(buf)) return buf;
    }
  }

  fs::path pipeline_path(const std::string& id) const { return root_ / "pipelines" / (id + ".json"); }
  fs::path run_dir(const std::string& id) const { return root_ / "runs" / id; }

  std::shared_ptr<Run> find_live(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = runs_.find(id);
    return it == runs_.end() ? nullptr : it->second;
  }

  bool has_live(const std::string& id) const { return find_live(id) != nullptr; }

  std::shared_ptr<Run> live(const std::string& id) const {
    if (auto r = find_live(id)) return r;
    if (is_persisted(id)) throw PreconditionError("run '" + id + "' is already flushed");
    throw RunNotFound("no run '" + id + "'");
  }

  bool is_persisted(const std::string& id) const {
    return valid_id(id) && fs::exists(run_dir(id) / "flushed");
  }

  fs::path persisted(const std::string& id) const {
    if (!is_persisted(id)) throw RunNotFound("no run '" + id + "'");
    return run_dir(id);
  }
};

}  // namespace semflow::service
