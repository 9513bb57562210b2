// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace abo {

enum class ErrorCode {
  EmptyCandidate,
  EmptyHistory,
  UnknownTask,
  MissingPlaceholder,
  NoCandidatesFound,
  NoPlanFound,
  BackendUnavailable,
  BadResponse,
  MalformedScript,
  OracleFailure,
  Timeout,
  InsufficientInit,
  BudgetExhaustedDuringInit,
  InvalidConfig,
  CorruptCheckpoint,
  Interrupted,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a typed error code. The message is human readable and
/// is prefixed with the code name by what().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// Non-throwing error value, used by the reply parsers.
struct Failure {
  ErrorCode code;
  std::string message;
};

/// Minimal value-or-error holder (std::expected is C++23).
template <typename T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  Result(Failure f) : v_(std::move(f)) {}     // NOLINT(google-explicit-constructor)

  bool ok() const noexcept { return std::holds_alternative<T>(v_); }
  explicit operator bool() const noexcept { return ok(); }

  const T& value() const& {
    if (!ok()) throw Error(error().code, error().message);
    return std::get<T>(v_);
  }
  T&& value() && {
    if (!ok()) throw Error(error().code, error().message);
    return std::get<T>(std::move(v_));
  }
  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

  const Failure& error() const { return std::get<Failure>(v_); }

 private:
  std::variant<T, Failure> v_;
};

}  // namespace abo
