#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/backend/backend.hpp"
#include "semflow/dataflow/record.hpp"

namespace semflow {

struct OperatorContext {
  std::string id;
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
  /// Metered view of the run's backend, tagged with this operator's id.
  std::shared_ptr<ModelBackend> backend;
};

/// A stateful pipeline stage. One caller at a time.
class Operator {
 public:
  virtual ~Operator() = default;

  /// Handles one record arriving on input `input_index`.
  virtual std::vector<Record> process(const Record& r, std::size_t input_index) = 0;

  /// Entity watermark moved to `wm` (max timestamp seen at the source).
  virtual std::vector<Record> watermark(const std::string& /*entity*/, Timestamp /*wm*/) { return {}; }

  /// End of stream. Called once.
  virtual std::vector<Record> flush() { return {}; }

  /// Operator-specific state for the trace endpoint.
  virtual nlohmann::json state() const { return nullptr; }

  /// Events extracted so far, for operators that extract.
  virtual std::vector<SemanticEvent> events() const { return {}; }

  /// Records dropped since the last call (e.g. unparseable extractions).
  std::int64_t take_skipped() {
    const auto s = skipped_;
    skipped_ = 0;
    return s;
  }

 protected:
  void skip() { ++skipped_; }

 private:
  std::int64_t skipped_ = 0;
};

struct OperatorKind {
  RecordType input = RecordType::Document;
  /// Any: same type as the first input.
  RecordType output = RecordType::Document;
  bool model_operator = false;
  std::size_t min_inputs = 1;
  std::size_t max_inputs = 1;
  std::function<std::unique_ptr<Operator>(const OperatorContext&)> make;
};

using OperatorRegistry = std::map<std::string, OperatorKind>;

namespace params {

inline std::string str(const nlohmann::json& p, const char* key, const std::string& def) {
  if (!p.contains(key)) return def;
  if (!p.at(key).is_string()) throw SpecError(std::string("param '") + key + "' must be a string");
  return p.at(key).get<std::string>();
}

inline std::string required_str(const nlohmann::json& p, const char* key, const std::string& op) {
  if (!p.contains(key) || !p.at(key).is_string() || p.at(key).get<std::string>().empty())
    throw SpecError("operator '" + op + "' needs a non-empty string param '" + key + "'");
  return p.at(key).get<std::string>();
}

inline double num(const nlohmann::json& p, const char* key, double def) {
  if (!p.contains(key)) return def;
  if (!p.at(key).is_number()) throw SpecError(std::string("param '") + key + "' must be a number");
  return p.at(key).get<double>();
}

inline std::int64_t integer(const nlohmann::json& p, const char* key, std::int64_t def, std::int64_t min) {
  if (!p.contains(key)) return def;
  if (!p.at(key).is_number_integer()) throw SpecError(std::string("param '") + key + "' must be an integer");
  const auto v = p.at(key).get<std::int64_t>();
  if (v < min) throw SpecError(std::string("param '") + key + "' must be >= " + std::to_string(min));
  return v;
}

}  // namespace params

}  // namespace semflow
