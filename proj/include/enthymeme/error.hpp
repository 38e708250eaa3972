#pragma once

#include <stdexcept>
#include <string>

namespace enthymeme {

// Exit codes shared by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kData = 3,
  kBackend = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kData; }
};

// Violated precondition or malformed value.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Backend failures are retryable unless stated otherwise.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what, bool retryable = true)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }
  ExitCode exit_code() const noexcept override { return ExitCode::kBackend; }

 private:
  bool retryable_;
};

class LifecycleError : public BackendError {
 public:
  explicit LifecycleError(const std::string& what) : BackendError(what, false) {}
};

class TruncationError : public BackendError {
 public:
  TruncationError(const std::string& what, std::size_t length)
      : BackendError(what, false), length_(length) {}
  std::size_t length() const noexcept { return length_; }

 private:
  std::size_t length_;
};

class MissingInferenceError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Statistic is not defined for the input (e.g. all paired differences zero).
class UndefinedStatisticError : public Error {
 public:
  using Error::Error;
};

}  // namespace enthymeme
