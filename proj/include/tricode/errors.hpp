#pragma once

#include <stdexcept>
#include <string>

namespace tricode {

// Error hierarchy. Everything derives from std::runtime_error so the CLI
// boundary can catch one base type; the subtypes exist so tests and callers
// can tell contract violations from bad data.

// Shape/conformance failures (both shapes are named in the message).
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Value outside the mathematical domain of an operation (log of <= 0,
// probability outside (0,1), ...).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A precondition of an API was violated by the caller.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mini-language syntax error with source location.
struct ParseError : std::runtime_error {
  int line;
  int column;
  ParseError(int line_, int column_, const std::string& what_)
      : std::runtime_error("syntax error at " + std::to_string(line_) + ":" +
                           std::to_string(column_) + ": " + what_),
        line(line_),
        column(column_) {}
};

// Malformed external file (AST JSON, vocab file, checkpoint, corpus record).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration value; message names the field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tricode
