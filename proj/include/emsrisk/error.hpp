#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emsrisk {

/// Broad failure classes. They map one-to-one onto the C API status codes
/// and the CLI exit codes.
enum class ErrorKind { Usage = 1, Data = 2, Internal = 3 };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// Bad caller input: wrong argument ranges, mismatched lengths, bad config.
class UsageError : public Error {
public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

/// Bad or insufficient data.
class DataError : public Error {
public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// A malformed input row. `line` is 1-based and counts the header.
class ParseError : public DataError {
public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// A score has no support in the data (e.g. a category with no venues).
class NoSupportError : public DataError {
public:
  explicit NoSupportError(const std::string& what) : DataError(what) {}
};

/// A value broke a type invariant (negative profile entry, etc).
class InvariantError : public UsageError {
public:
  explicit InvariantError(const std::string& what) : UsageError(what) {}
};

}  // namespace emsrisk
