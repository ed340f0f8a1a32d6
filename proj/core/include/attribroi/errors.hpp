#pragma once

#include <stdexcept>
#include <string>

namespace attribroi {

// Shape or dimension disagreement between operands.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric-domain violation (NaN/Inf input, non-normalized distribution, ...).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// An API precondition was violated by the caller.
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration value.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Index out of range.
class IndexError : public std::runtime_error {
public:
    explicit IndexError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training hit a non-finite gradient and cannot continue.
class TrainAbort : public std::runtime_error {
public:
    explicit TrainAbort(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace attribroi
