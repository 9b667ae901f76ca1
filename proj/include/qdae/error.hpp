#pragma once

#include <stdexcept>
#include <string>

namespace qdae {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (expressions, model files, data files).
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int column)
        : Error(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
          message_(what), line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    /// The description without the position suffix.
    const std::string& message() const noexcept { return message_; }

private:
    std::string message_;
    int line_;
    int column_;
};

/// Invalid arguments or configuration supplied by the caller.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Arithmetic failure: unbound name, division by zero, non-finite state.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iterative method did not reach its tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Numerically singular linear system.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// Post-selection onto a branch whose probability mass is below 1e-14.
class EmptyBranchError : public DomainError {
public:
    using DomainError::DomainError;
};

/// A file could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Index reduction found no complete matching within its budget.
class StructuralError : public Error {
public:
    using Error::Error;
};

}  // namespace qdae
