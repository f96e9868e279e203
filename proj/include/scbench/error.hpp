#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scbench {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Malformed on-disk input. Carries the file and 1-based line when known.
class FormatError : public Error {
  public:
    FormatError(std::string file, std::size_t line, const std::string &what)
        : Error(file + ":" + std::to_string(line) + ": " + what), file_(std::move(file)), line_(line) {}

    const std::string &file() const { return file_; }
    std::size_t line() const { return line_; }

  private:
    std::string file_;
    std::size_t line_;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

// A precondition or invariant on in-memory data does not hold.
class InvalidArgument : public Error {
  public:
    using Error::Error;
};

class NumericalError : public Error {
  public:
    using Error::Error;
};

} // namespace scbench
