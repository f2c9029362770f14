#pragma once

#include <stdexcept>
#include <string>

namespace camforge {

// Base class for all errors raised by the library. Every subclass carries a
// short category tag so the CLI can print "error: <category>: <message>".
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& msg)
        : std::runtime_error(msg), category_(std::move(category)) {}

    const std::string& category() const { return category_; }

private:
    std::string category_;
};

// Invalid configuration: bad preset name, inconsistent dimensions, out-of-range
// hyperparameters.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

// Invalid runtime input: malformed audio, too-short signals, bad label ids.
class InputError : public Error {
public:
    explicit InputError(const std::string& msg) : Error("input", msg) {}
};

// Malformed or inconsistent serialized data (weight files, score files, trials).
class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error("format", msg) {}
};

// Non-finite values produced where finite ones are required.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error("numeric", msg) {}
};

// API misuse: backward on an empty tape, reading gradients before backward.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error("usage", msg) {}
};

// Filesystem problems: missing files, unwritable paths.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error("io", msg) {}
};

} // namespace camforge
