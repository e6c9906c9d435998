#pragma once

#include <stdexcept>
#include <string>

namespace hctc {

// Base class for all typed errors. `kind()` is the stable machine-parsable
// category used by the CLI ("error: <kind>: <message>").
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  virtual const char* kind() const noexcept { return "error"; }
};

// A caller broke a documented precondition (shape mismatch, bad range, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "contract"; }
};

// Invalid configuration (topology, flags, config file values).
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

// Problems with input data files or their content.
class DataError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "data"; }
};

// Malformed binary/text file; carries the byte offset where parsing failed.
class ParseError : public DataError {
 public:
  ParseError(const std::string& msg, std::size_t byte_offset)
      : DataError(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return offset_; }
  const char* kind() const noexcept override { return "parse"; }

 private:
  std::size_t offset_;
};

// Target sequence cannot be aligned to the given number of frames.
class InfeasibleTargetError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "infeasible-target"; }
};

// A brute-force oracle was asked to enumerate more states than its cap.
class OracleSizeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "oracle-size"; }
};

// An oracle's own validity check failed (e.g. non-deterministic function
// under grad_check).
class OracleInvalidError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "oracle-invalid"; }
};

// A symbol that is not present in the unit inventory.
class UnknownSymbolError : public DataError {
 public:
  explicit UnknownSymbolError(const std::string& symbol)
      : DataError("unknown symbol '" + symbol + "'"), symbol_(symbol) {}
  const std::string& symbol() const noexcept { return symbol_; }
  const char* kind() const noexcept override { return "unknown-symbol"; }

 private:
  std::string symbol_;
};

// Every utterance in a training batch was infeasible.
class EmptyBatchError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "empty-batch"; }
};

}  // namespace hctc
