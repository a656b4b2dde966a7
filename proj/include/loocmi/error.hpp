#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace loocmi {

// Invalid argument for an otherwise well-formed call (index out of range,
// dimension mismatch, n < 2, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Unknown generator, malformed experiment file, inconsistent options.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failed factorization, non-finite loss, singular system.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Raised by train_loo when a single leave-one-out row fails.
class RowError : public std::runtime_error {
public:
    RowError(std::size_t index, const std::string& what)
        : std::runtime_error("leave-one-out row " + std::to_string(index) + ": " + what),
          index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace loocmi
