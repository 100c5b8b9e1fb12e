#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/bench/eval.hpp"
#include "semflow/dataflow/pipeline.hpp"

namespace semflow::service {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << content;
  if (!out) throw IoError("short write to '" + p.string() + "'");
}

inline nlohmann::json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError(what + " is not valid JSON: " + e.what());
  }
}

/// Parses JSON-lines documents; blank lines are ignored.
inline std::vector<Document> parse_documents(const std::string& jsonl) {
  std::vector<Document> docs;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidDocument("line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      docs.push_back(j.get<Document>());
    } catch (const InvalidDocument& e) {
      throw InvalidDocument("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

/// One matches.jsonl line: the emitted record plus the sink it left through.
inline std::string emission_line(const SinkEmission& e) {
  auto j = record_json(e.record);
  j["sink"] = e.sink_id;
  return j.dump() + "\n";
}

/// Match keys of every match line in a matches.jsonl body.
inline std::set<bench::PatternKey> match_keys(const std::string& jsonl) {
  std::set<bench::PatternKey> keys;
  std::istringstream in(jsonl);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.value("type", "") != "match") continue;
    bench::PatternKey k{j.at("entity_id").get<std::string>(), j.at("pattern_id").get<std::string>(), {}};
    for (const auto& e : j.at("events")) k.timestamps.push_back(e.at("timestamp").get<Timestamp>());
    keys.insert(std::move(k));
  }
  return keys;
}

/// Writes the flat run layout: spec.json, events.jsonl, matches.jsonl,
/// report.json, transcript.jsonl and traces/<op>.json.
inline void persist_run(const fs::path& dir, const Pipeline& p, const std::string& matches_jsonl,
                        const nlohmann::json& report) {
  write_file(dir / "spec.json", nlohmann::json(p.spec()).dump(2) + "\n");
  std::string events;
  for (const auto& e : p.events()) events += nlohmann::json(e).dump() + "\n";
  write_file(dir / "events.jsonl", events);
  write_file(dir / "matches.jsonl", matches_jsonl);
  write_file(dir / "report.json", report.dump(2) + "\n");
  write_file(dir / "transcript.jsonl", p.transcript()->to_jsonl());
  write_file(dir / "traces" / (p.spec().source_id + ".json"), p.trace(p.spec().source_id).dump() + "\n");
  for (const auto& id : p.topo_order()) write_file(dir / "traces" / (id + ".json"), p.trace(id).dump() + "\n");
}

}  // namespace semflow::service
