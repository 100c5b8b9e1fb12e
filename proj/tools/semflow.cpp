// semflow: serve the REST API, run pipelines from files, compile task
// descriptions, generate fixtures and run benchmark suites.

#include <csignal>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "semflow/bench/gen.hpp"
#include "semflow/bench/suites.hpp"
#include "semflow/service/cli.hpp"
#include "semflow/service/server.hpp"

using namespace semflow;
namespace fs = std::filesystem;

namespace {

service::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

nlohmann::json backend_config(const std::string& path) {
  if (path.empty()) return {{"provider", "mock"}};
  return service::parse_json_text(service::read_file(path), "backend config");
}

int serve(const std::string& host, int port, const std::string& data_dir, const std::string& backend) {
  try {
    service::RunStore store(data_dir);
    service::Server server(store, backend_config(backend));
    const int bound = server.bind(host, port);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on http://" << host << ":" << bound << " (data dir " << data_dir << ")\n";
    server.run();
    g_server = nullptr;
    return 0;
  } catch (const Error& e) {
    service::print_error(std::cerr, e);
    return service::exit_code_for(e);
  }
}

int gen(std::uint64_t seed, const std::string& out_dir, const bench::GenConfig& cfg) {
  try {
    const auto g = bench::gen_stream(seed, cfg);
    service::write_file(fs::path(out_dir) / "stream.jsonl", g.jsonl());
    service::write_file(fs::path(out_dir) / "truth.json", nlohmann::json(g.truth).dump(2) + "\n");
    std::cout << "docs=" << g.documents.size() << " matches=" << g.truth.matches.size() << " dir=" << out_dir
              << "\n";
    return 0;
  } catch (const Error& e) {
    service::print_error(std::cerr, e);
    return service::exit_code_for(e);
  }
}

int bench_suite(const std::string& suite, const bench::SuiteOptions& o, const std::string& out) {
  try {
    const auto report = bench::run_suite(suite, o);
    service::write_file(out, report.dump(2) + "\n");
    std::cout << report.dump(2) << "\n";
    if (suite == "oracle" && !report["passed"].get<bool>()) return 1;
    if (suite == "configs" && !report["token_ordering_holds"].get<bool>()) return 1;
    return 0;
  } catch (const Error& e) {
    service::print_error(std::cerr, e);
    return service::exit_code_for(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic stream processing: pipelines, patterns and reports"};
  app.require_subcommand(1);

  auto* serve_cmd = app.add_subcommand("serve", "Run the REST service");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir = "data";
  std::string serve_backend;
  serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)")->capture_default_str();
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--data-dir", data_dir, "Directory for pipelines and runs")->capture_default_str();
  serve_cmd->add_option("--backend", serve_backend, "Backend config JSON used for NL compilation");

  auto* run_cmd = app.add_subcommand("run", "Run a pipeline over a JSON-lines document file");
  service::RunOptions run_opts;
  std::string truth;
  run_cmd->add_option("--pipeline", run_opts.pipeline_file, "Pipeline spec JSON")->required();
  run_cmd->add_option("--input", run_opts.input_file, "Documents, one JSON object per line")->required();
  run_cmd->add_option("--report", run_opts.report_file, "Report path; run files go to its directory")->required();
  run_cmd->add_option("--truth", truth, "Ground truth JSON; adds an accuracy block to the report");
  run_cmd->add_option("--run-id", run_opts.run_id, "Run id recorded in the report")->capture_default_str();

  auto* nl_cmd = app.add_subcommand("compile-nl", "Compile a task description file into a pipeline spec");
  std::string task_file;
  std::string nl_backend;
  int max_rounds = 3;
  nl_cmd->add_option("--task", task_file, "Task description file")->required();
  nl_cmd->add_option("--backend", nl_backend, "Backend config JSON");
  nl_cmd->add_option("--max-rounds", max_rounds, "Draft/repair rounds")->capture_default_str();

  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark suite and write suite_report.json");
  std::string suite;
  bench::SuiteOptions bench_opts;
  std::string bench_out = "suite_report.json";
  std::string bench_backend;
  bench_cmd->add_option("--suite", suite, "oracle, clustering or configs")
      ->required()
      ->check(CLI::IsMember({"oracle", "clustering", "configs"}));
  bench_cmd->add_option("--seed", bench_opts.seed, "Generator seed")->capture_default_str();
  bench_cmd->add_option("--cases", bench_opts.cases, "Oracle cases or clustering stream length")
      ->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "Output file")->capture_default_str();
  bench_cmd->add_option("--backend", bench_backend, "Backend config JSON");

  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic stream (stream.jsonl) and its truth.json");
  std::uint64_t seed = 42;
  std::string out_dir = ".";
  bench::GenConfig gen_cfg;
  gen_cmd->add_option("--seed", seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  gen_cmd->add_option("--entities", gen_cfg.entities, "Entities")->capture_default_str();
  gen_cmd->add_option("--docs-per-entity", gen_cfg.docs_per_entity, "Documents per entity")->capture_default_str();
  gen_cmd->add_option("--planted", gen_cfg.planted, "Entities with a planted match")->capture_default_str();
  gen_cmd->add_option("--decoys", gen_cfg.decoys, "Entities with a timely follow-up")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (*serve_cmd) return serve(host, port, data_dir, serve_backend);
  if (*run_cmd) {
    if (!truth.empty()) run_opts.truth_file = truth;
    return service::cli_run(run_opts);
  }
  if (*nl_cmd) {
    std::string task;
    try {
      task = service::read_file(task_file);
      return service::cli_compile_nl(task, backend_config(nl_backend), max_rounds);
    } catch (const Error& e) {
      service::print_error(std::cerr, e);
      return service::exit_code_for(e);
    }
  }
  if (*bench_cmd) {
    if (!bench_backend.empty()) {
      try {
        bench_opts.backend = backend_config(bench_backend);
      } catch (const Error& e) {
        service::print_error(std::cerr, e);
        return service::exit_code_for(e);
      }
    }
    return bench_suite(suite, bench_opts, bench_out);
  }
  if (*gen_cmd) return gen(seed, out_dir, gen_cfg);
  return 0;
}
