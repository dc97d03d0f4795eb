#pragma once

#include <stdexcept>
#include <string>

namespace athena {

enum class ErrorKind {
    Io,
    Config,
    Parse,
    Precondition,
    DimensionMismatch,
    VersionMismatch,
    CorruptFile,
    ProviderAuth,
    ProviderExhausted,
    ProviderResponse,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io: return "io";
        case ErrorKind::Config: return "config";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Precondition: return "precondition";
        case ErrorKind::DimensionMismatch: return "dimension-mismatch";
        case ErrorKind::VersionMismatch: return "version-mismatch";
        case ErrorKind::CorruptFile: return "corrupt-file";
        case ErrorKind::ProviderAuth: return "provider-auth";
        case ErrorKind::ProviderExhausted: return "provider-exhausted";
        case ErrorKind::ProviderResponse: return "provider-response";
    }
    return "unknown";
}

}  // namespace athena
