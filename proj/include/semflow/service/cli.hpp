#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "semflow/bench/eval.hpp"
#include "semflow/bench/gen.hpp"
#include "semflow/dataflow/pipeline.hpp"
#include "semflow/nl/synthesize.hpp"
#include "semflow/service/persist.hpp"

namespace semflow::service {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitClarification = 4;
inline constexpr int kExitUsage = 64;

inline int exit_code_for(const Error& e) { return e.is_validation() ? kExitValidation : kExitRuntime; }

inline void print_error(std::ostream& err, const Error& e) { err << "error: " << e.code() << ": " << e.what() << "\n"; }

struct RunOptions {
  fs::path pipeline_file;
  fs::path input_file;
  fs::path report_file;
  /// Ground-truth JSON (as written by `gen`); fills the report's accuracy block.
  std::optional<fs::path> truth_file;
  std::string run_id = "cli";
};

/// Builds the pipeline, streams every document, flushes, and writes the run
/// files next to the report (matches.jsonl, events.jsonl, transcript.jsonl,
/// spec.json, traces/). Returns the process exit code.
inline int cli_run(const RunOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    const auto spec = parse_pipeline_spec(parse_json_text(read_file(o.pipeline_file), "pipeline file"));
    auto pipeline = build_pipeline(spec, o.run_id);
    const auto docs = parse_documents(read_file(o.input_file));
    std::string matches;
    for (const auto& d : docs)
      for (const auto& e : pipeline->push(d)) matches += emission_line(e);
    for (const auto& e : pipeline->flush()) matches += emission_line(e);

    if (o.truth_file) {
      const auto truth =
          parse_json_text(read_file(*o.truth_file), "truth file").get<bench::GroundTruth>();
      const auto s = bench::eval_pattern(match_keys(matches), truth.matches);
      pipeline->metrics()->set_accuracy({s.precision, s.recall, s.f1});
    }
    auto dir = o.report_file.parent_path();
    if (dir.empty()) dir = ".";
    const auto report = pipeline->report();
    persist_run(dir, *pipeline, matches, report);
    if (o.report_file.filename() != "report.json") write_file(o.report_file, report.dump(2) + "\n");
    const auto& t = report["totals"];
    out << "docs=" << docs.size() << " sink_rows=" << std::count(matches.begin(), matches.end(), '\n')
        << " tokens=" << t["model"]["total_tokens"] << " report=" << o.report_file.string() << "\n";
    return kExitOk;
  } catch (const Error& e) {
    print_error(err, e);
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    err << "error: SpecError: " << e.what() << "\n";
    return kExitValidation;
  }
}

/// Compiles a task description; prints the spec (exit 0) or a
/// clarification object (exit 4).
inline int cli_compile_nl(const std::string& task, const nlohmann::json& backend_config, int max_rounds = 3,
                          std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (text::trim(task).empty()) {
    err << "usage: compile-nl --task <file>: the task description is empty\n";
    return kExitUsage;
  }
  try {
    auto backend = make_backend(backend_config);
    const auto r = nl::synthesize(task, *backend, max_rounds);
    if (r.clarification) {
      out << nlohmann::json{{"clarification", *r.clarification}}.dump(2) << "\n";
      return kExitClarification;
    }
    out << nlohmann::json(*r.spec).dump(2) << "\n";
    return kExitOk;
  } catch (const nl::SynthesisFailed& e) {
    print_error(err, e);
    for (const auto& round : e.critiques()) err << nl::critique_text(round);
    return kExitValidation;
  } catch (const Error& e) {
    print_error(err, e);
    return exit_code_for(e);
  }
}

}  // namespace semflow::service
