#pragma once

#include <stdexcept>
#include <string>

namespace pcdf {

/// Process exit codes used by the CLI. Library code throws the typed
/// exceptions below; the CLI maps them onto these codes.
enum class ExitCode : int {
    ok = 0,
    usage = 2,    // bad arguments, bad config, incompatible artifacts
    data = 3,     // malformed or unusable input data
    numeric = 4,  // non-finite values, divergence
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Misuse of an operation: bad shapes, invalid enum values, violated preconditions.
class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& what) : Error(ExitCode::usage, what) {}
};

/// Bad configuration file or flag combination.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ExitCode::usage, what) {}
};

/// Malformed input data (CSV parse failures, non-finite fields, missing files).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

/// Numeric failure: divergence during training, non-finite intermediate values.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ExitCode::numeric, what) {}
};

}  // namespace pcdf
