#pragma once

#include <stdexcept>
#include <string>

namespace stlfunnel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Syntax or name-resolution failure while reading a formula. Line and column are 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& message, int line, int column);

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string message_;
    int line_;
    int column_;
};

/// A formula is well formed but lies outside the supported temporal fragment.
class FragmentError : public Error {
public:
    using Error::Error;
};

/// A precondition on an argument was violated (bad time index, action index, shape...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration. `key()` is the dot path of the offending entry.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& message);

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Non-finite values appeared while simulating or training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// File system or serialization failure.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace stlfunnel
