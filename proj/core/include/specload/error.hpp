#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace specload {

// Base of every error the library throws. Callers that only need a
// diagnostic can catch this; the subclasses exist so tests and the CLI can
// distinguish failure classes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedUrl : public Error {
 public:
  explicit MalformedUrl(const std::string& url)
      : Error("malformed URL: '" + url + "'"), url_(url) {}
  const std::string& url() const noexcept { return url_; }

 private:
  std::string url_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  // 1-based line of the offending record; 0 when not line-oriented.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InvalidParams : public Error {
 public:
  using Error::Error;
};

class EmptyTrace : public Error {
 public:
  EmptyTrace() : Error("trace contains no visits") {}
};

class EmptyWindow : public Error {
 public:
  EmptyWindow() : Error("no visits inside the training window") {}
};

class InsufficientTrace : public Error {
 public:
  using Error::Error;
};

class CorruptRepository : public Error {
 public:
  using Error::Error;
};

class MainResourceFailed : public Error {
 public:
  using Error::Error;
};

class BadSpec : public Error {
 public:
  using Error::Error;
};

class PortInUse : public Error {
 public:
  using Error::Error;
};

}  // namespace specload
