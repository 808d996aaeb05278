#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cmemh {

/// Input outside the mathematical domain of an operation (bad index, non-finite matrix, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A requested object would not fit the configured memory budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solve or factorization failed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A density was requested for a state that lies outside the window it is evaluated on.
class WindowError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> diagnostics)
      : std::runtime_error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  static std::string join(const std::vector<std::string>& d) {
    std::string out = "invalid reaction system";
    for (const auto& s : d) out += "\n  " + s;
    return out;
  }
  std::vector<std::string> diagnostics_;
};

/// Raised when an MH transition exceeds its rejection budget.
class StallError : public std::runtime_error {
 public:
  StallError(const std::string& what, std::int64_t accepted, std::int64_t rejected)
      : std::runtime_error(what), accepted_(accepted), rejected_(rejected) {}
  std::int64_t accepted() const noexcept { return accepted_; }
  std::int64_t rejected() const noexcept { return rejected_; }

 private:
  std::int64_t accepted_;
  std::int64_t rejected_;
};

}  // namespace cmemh
