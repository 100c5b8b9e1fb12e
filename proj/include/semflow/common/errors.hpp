#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace semflow {

/// Base of every error thrown by the library. `code()` is a stable
/// machine-readable identifier used in critiques, service responses and CLI
/// exit-code mapping.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

  /// Validation errors map to CLI exit code 2, everything else to 3.
  virtual bool is_validation() const noexcept { return false; }

 private:
  std::string code_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
  bool is_validation() const noexcept override { return true; }
};

class RuntimeError : public Error {
 public:
  using Error::Error;
};

#define SEMFLOW_DEFINE_ERROR(Name, Base)                                  \
  class Name : public Base {                                              \
   public:                                                                \
    explicit Name(const std::string& message) : Base(#Name, message) {}   \
  };

// pipeline construction
SEMFLOW_DEFINE_ERROR(CycleError, ValidationError)
SEMFLOW_DEFINE_ERROR(UnknownOperatorKind, ValidationError)
SEMFLOW_DEFINE_ERROR(DanglingInput, ValidationError)
SEMFLOW_DEFINE_ERROR(SpecError, ValidationError)
SEMFLOW_DEFINE_ERROR(DurationError, ValidationError)
SEMFLOW_DEFINE_ERROR(CompileError, ValidationError)
SEMFLOW_DEFINE_ERROR(ConfigError, ValidationError)

// runtime
SEMFLOW_DEFINE_ERROR(OutOfOrderError, RuntimeError)
SEMFLOW_DEFINE_ERROR(InvalidDocument, RuntimeError)
SEMFLOW_DEFINE_ERROR(InstanceCapExceeded, RuntimeError)
SEMFLOW_DEFINE_ERROR(BackendError, RuntimeError)
SEMFLOW_DEFINE_ERROR(TimeoutError, RuntimeError)
SEMFLOW_DEFINE_ERROR(ExtractionParseError, RuntimeError)
SEMFLOW_DEFINE_ERROR(PlanParseError, RuntimeError)
SEMFLOW_DEFINE_ERROR(DuplicateDocError, RuntimeError)
SEMFLOW_DEFINE_ERROR(PreconditionError, RuntimeError)
SEMFLOW_DEFINE_ERROR(UnknownOperator, RuntimeError)
SEMFLOW_DEFINE_ERROR(RunNotFound, RuntimeError)
SEMFLOW_DEFINE_ERROR(UniverseMismatch, RuntimeError)
SEMFLOW_DEFINE_ERROR(PipelineNotFound, RuntimeError)
SEMFLOW_DEFINE_ERROR(DataDirError, RuntimeError)
SEMFLOW_DEFINE_ERROR(PortInUse, RuntimeError)
SEMFLOW_DEFINE_ERROR(IoError, RuntimeError)

#undef SEMFLOW_DEFINE_ERROR

/// Parse failure in the pattern language; `offset()` is a byte offset into
/// the input text.
class SyntaxError : public ValidationError {
 public:
  SyntaxError(const std::string& message, std::size_t offset)
      : ValidationError("SyntaxError",
                        message + " at offset " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A backend failure surfaced by the dataflow engine, tagged with the
/// operator that issued the call.
class OperatorFailure : public RuntimeError {
 public:
  OperatorFailure(std::string operator_id, const Error& cause)
      : RuntimeError("OperatorFailure",
                     "operator '" + operator_id + "': " + cause.code() + ": " + cause.what()),
        operator_id_(std::move(operator_id)),
        cause_code_(cause.code()) {}

  const std::string& operator_id() const noexcept { return operator_id_; }
  const std::string& cause_code() const noexcept { return cause_code_; }

 private:
  std::string operator_id_;
  std::string cause_code_;
};

}  // namespace semflow
