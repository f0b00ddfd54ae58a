#pragma once

#include <stdexcept>
#include <string>

namespace tpbs {

enum class ErrorKind {
    InvalidArgument,
    Domain,
    Dimension,
    BadMagic,
    Version,
    Truncated,
    Parse,
    Io,
    Numeric,
    Degenerate,
};

const char* to_string(ErrorKind kind);

/// All library failures are reported through this exception; `kind()` lets
/// callers (notably the CLI) map failures onto distinct exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

}  // namespace tpbs
