#include "tpbs/error.hpp"

namespace tpbs {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid argument";
        case ErrorKind::Domain: return "domain error";
        case ErrorKind::Dimension: return "dimension mismatch";
        case ErrorKind::BadMagic: return "bad magic";
        case ErrorKind::Version: return "unsupported version";
        case ErrorKind::Truncated: return "truncated input";
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::Io: return "I/O error";
        case ErrorKind::Numeric: return "numeric failure";
        case ErrorKind::Degenerate: return "degenerate model";
    }
    return "unknown error";
}

void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace tpbs
