#pragma once

#include <stdexcept>
#include <string>

namespace dlat {

enum class ErrorKind { invalid_input, numerical };

// Base for everything the library throws. `code` is a stable machine-readable tag.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

// Precondition violations and malformed configuration.
class InvalidInput : public Error {
public:
    InvalidInput(std::string code, const std::string& message)
        : Error(ErrorKind::invalid_input, std::move(code), message) {}
};

class NumericalFailure : public Error {
public:
    NumericalFailure(std::string code, const std::string& message, double value = 0.0)
        : Error(ErrorKind::numerical, std::move(code), message), value_(value) {}

    // Diagnostic payload, e.g. the final gap of a stalled iteration.
    double value() const noexcept { return value_; }

private:
    double value_;
};

} // namespace dlat
