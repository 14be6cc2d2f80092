#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace proofsketch {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptySymbol : public Error {
 public:
  explicit EmptySymbol(const std::string& raw)
      : Error("empty symbol after canonicalization: '" + raw + "'") {}
};

/// Raised when a symbol contains characters outside [a-z0-9-] after canonicalization.
class InvalidSymbol : public Error {
 public:
  explicit InvalidSymbol(const std::string& raw)
      : Error("symbol contains unsupported characters: '" + raw + "'") {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t sentence_index, std::string reason)
      : Error("sentence " + std::to_string(sentence_index) + ": " + reason),
        sentence_index_(sentence_index),
        reason_(std::move(reason)) {}

  std::size_t sentence_index() const noexcept { return sentence_index_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t sentence_index_;
  std::string reason_;
};

class InconsistentFacts : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  SchemaError(std::string field, const std::string& what)
      : Error("schema error at '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Generator failure. Carries the accounting of the pipeline run it interrupted,
/// filled in by run_pipeline before rethrowing.
class GeneratorError : public Error {
 public:
  explicit GeneratorError(const std::string& what, int http_status = 0)
      : Error(what), http_status_(http_status) {}

  int http_status() const noexcept { return http_status_; }
  int calls_made() const noexcept { return calls_made_; }
  long long tokens_generated() const noexcept { return tokens_generated_; }

  void set_partial_accounting(int calls, long long tokens) noexcept {
    calls_made_ = calls;
    tokens_generated_ = tokens;
  }

 private:
  int http_status_ = 0;
  int calls_made_ = 0;
  long long tokens_generated_ = 0;
};

class TimeoutError : public GeneratorError {
 public:
  using GeneratorError::GeneratorError;
};

class ScriptExhausted : public GeneratorError {
 public:
  explicit ScriptExhausted(std::size_t script_size)
      : GeneratorError("script exhausted after " + std::to_string(script_size) + " responses") {}
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class DivisionByZero : public Error {
 public:
  using Error::Error;
};

}  // namespace proofsketch
