// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace musebar {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed SMF input. `offset` is the byte position where decoding failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

// Bad caller input: unknown names, out-of-range arguments.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Raised on NaN/Inf losses; `term` names the offending loss component.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& term, double value)
      : Error("non-finite value in " + term + ": " + std::to_string(value)),
        term_(term) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

// Non-fatal diagnostics collected by lenient operations.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
  if (sink != nullptr) sink->push_back(std::move(message));
}

}  // namespace musebar
