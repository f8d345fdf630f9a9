#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dctnet {

/// Base of every exception the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or extents.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (model, metrics, run config, clip spec).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A synthetic clip specification that cannot be rendered as requested.
class SpecError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// A caller violated an API precondition (e.g. backward twice on one tape).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Missing or inconsistent files on disk.
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed file content. Carries the byte offset where parsing failed.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t offset)
        : DataError(what + " (at byte " + std::to_string(offset) + ")"), message_(what), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }
    /// The message without the offset suffix.
    const std::string& message() const noexcept { return message_; }

private:
    std::string message_;
    std::size_t offset_;
};

/// Non-finite values encountered during training.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A verification suite (gradient check, acceptance) failed.
class VerificationError : public Error {
public:
    using Error::Error;
};

}  // namespace dctnet
