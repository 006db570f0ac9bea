#pragma once

#include <stdexcept>
#include <string>

namespace latdis {

// Error taxonomy shared across modules; the CLI maps these onto exit codes.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Binary file format violations, each distinct so callers can tell a bad
// header from a short read from a corrupted payload.
struct FormatError : DataError {
    explicit FormatError(const std::string& msg) : DataError(msg) {}
};

struct TruncationError : DataError {
    explicit TruncationError(const std::string& msg) : DataError(msg) {}
};

struct ChecksumError : DataError {
    explicit ChecksumError(const std::string& msg) : DataError(msg) {}
};

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace latdis
