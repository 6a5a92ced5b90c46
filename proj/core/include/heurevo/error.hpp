#pragma once

#include <stdexcept>
#include <string>

namespace heurevo {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (shape mismatch and the like).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input data was well-formed but semantically invalid (NaN, K == 0, unknown name).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class RenderError : public Error {
 public:
  using Error::Error;
};

/// No fenced code block in an LLM reply.
class ExtractionError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, bool retryable = false)
      : Error(what), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

}  // namespace heurevo
