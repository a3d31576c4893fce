#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlqx {

/// Base of every error raised by the library (SyntaxError aside, which
/// lives with the parser).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration; raised before any question is processed.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A dataset, template-base, fixture or report file is malformed.
class FormatError : public Error {
 public:
  FormatError(std::string path, std::size_t index, std::string reason)
      : Error(path + " [record " + std::to_string(index) + "]: " + reason),
        path_(std::move(path)),
        index_(index),
        reason_(std::move(reason)) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t index() const noexcept { return index_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string path_;
  std::size_t index_;
  std::string reason_;
};

class ArityMismatch : public Error {
 public:
  ArityMismatch(std::size_t expected, std::size_t given)
      : Error("template needs " + std::to_string(expected) + " terms, got " +
              std::to_string(given)),
        expected_(expected),
        given_(given) {}
  std::size_t expected() const noexcept { return expected_; }
  std::size_t given() const noexcept { return given_; }

 private:
  std::size_t expected_;
  std::size_t given_;
};

class EmptyBase : public Error {
 public:
  EmptyBase() : Error("template base is empty") {}
};

/// Every (template, entity combination) pair was skipped.
class NoViableCandidate : public Error {
 public:
  using Error::Error;
};

class LinkError : public Error {
 public:
  enum class Kind { Network, NoCandidates, FixtureMissing, MalformedResponse };
  LinkError(Kind kind, std::string message)
      : Error(std::move(message)), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }
  bool retriable() const noexcept { return kind_ == Kind::Network; }

 private:
  Kind kind_;
};

class TranslationError : public Error {
 public:
  enum class Kind {
    EmptyQuestion,
    EmptyIndex,
    BackendUnavailable,
    MalformedServerResponse,
  };
  TranslationError(Kind kind, std::string message)
      : Error(std::move(message)), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class EndpointError : public Error {
 public:
  enum class Kind { Http, Timeout, Connection, MalformedResults, Unsupported };
  EndpointError(Kind kind, std::string message, int status = 0)
      : Error(std::move(message)), kind_(kind), status_(status) {}
  Kind kind() const noexcept { return kind_; }
  /// HTTP status for Kind::Http, 0 otherwise.
  int status() const noexcept { return status_; }

 private:
  Kind kind_;
  int status_;
};

class IdMismatch : public Error {
 public:
  explicit IdMismatch(std::vector<std::string> ids)
      : Error(describe(ids)), ids_(std::move(ids)) {}
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  static std::string describe(const std::vector<std::string>& ids) {
    std::string msg = "predictions without a gold record:";
    for (const auto& id : ids) msg += " " + id;
    return msg;
  }
  std::vector<std::string> ids_;
};

}  // namespace nlqx
