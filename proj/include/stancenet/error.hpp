#pragma once

#include <stdexcept>
#include <string>

namespace stancenet {

/// Base for every error the library raises. The CLI maps subclasses onto
/// exit codes (config 1, data 2, backend 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration: overlapping hashtag lists, malformed templates, bad flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be used (missing ids, invalid records, bad schemas).
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A StanceLabel or request failed a validation rule; `rule()` names it.
class ValidationError : public DataError {
 public:
  ValidationError(const std::string& rule, const std::string& what)
      : DataError(what), rule_(rule) {}

  const std::string& rule() const noexcept { return rule_; }

 private:
  std::string rule_;
};

class NotFoundError : public DataError {
 public:
  using DataError::DataError;
};

/// LLM backend unreachable or returned a malformed wire response.
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace stancenet
