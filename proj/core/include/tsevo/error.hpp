#pragma once

#include <stdexcept>
#include <string>

namespace tsevo {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, int line, int column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingMetric : public Error {
 public:
  using Error::Error;
};

class EpisodeFailure : public Error {
 public:
  using Error::Error;
};

class GeneratorUnavailable : public Error {
 public:
  using Error::Error;
};

class NotAnImprovement : public Error {
 public:
  using Error::Error;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

class UnknownId : public Error {
 public:
  using Error::Error;
};

class UnknownRun : public Error {
 public:
  using Error::Error;
};

}  // namespace tsevo
