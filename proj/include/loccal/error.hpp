#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace loccal {

enum class ErrorKind { config, io, validation, numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

// Malformed wire line; line numbers are 1-based.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// A record lacks a field an operation needs (e.g. mu_logrank for npr_tok).
class MissingFieldError : public ValidationError {
public:
    explicit MissingFieldError(std::string field, const std::string& context = {})
        : ValidationError("missing field '" + field + "'" + (context.empty() ? "" : " (" + context + ")")),
          field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

// Process exit codes used by the CLI.
constexpr int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::io: return 3;
        case ErrorKind::validation: return 4;
        case ErrorKind::numeric: return 5;
    }
    return 1;
}

}  // namespace loccal
