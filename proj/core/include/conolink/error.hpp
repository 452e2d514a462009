#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace conolink {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or type invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed text input. Carries the 1-based line number.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Two sequences that must agree in length do not.
class LengthError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Non-finite values, divergence, or other numeric failure at runtime.
class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace conolink
