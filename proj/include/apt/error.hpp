#pragma once

#include <stdexcept>
#include <string>

namespace apt {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller handed us something malformed (shape mismatch, out-of-range id,
// bad flag combination). Recoverable by fixing the input.
struct RejectedInput : Error {
  explicit RejectedInput(const std::string& msg) : Error(msg) {}
};

// An internal precondition was violated (non-scalar loss, task/head
// mismatch). Indicates a programming error in the caller.
struct ContractViolation : Error {
  explicit ContractViolation(const std::string& msg) : Error(msg) {}
};

// Malformed text input; carries the 1-based line number.
struct ParseError : Error {
  ParseError(const std::string& msg, int line_no)
      : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
  int line;
};

// Filesystem / serialization failure.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace apt
