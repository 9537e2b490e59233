#pragma once

#include <stdexcept>
#include <string>

namespace gpr {

enum class Errc {
    OutOfRangeLatitude,
    DimensionMismatch,
    DuplicateId,
    IoFailure,
    BadMagic,
    UnsupportedVersion,
    TruncatedFile,
    UnknownId,
    EmptyStore,
    KTooLarge,
    FingerprintMismatch,
    LengthMismatch,
    MissingQueryId,
    ConfigError,
    MissingGroundTruth,
    SpecInvalid,
    InconsistentEngine,
    ParseError,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::OutOfRangeLatitude: return "OutOfRangeLatitude";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::DuplicateId: return "DuplicateId";
        case Errc::IoFailure: return "IoFailure";
        case Errc::BadMagic: return "BadMagic";
        case Errc::UnsupportedVersion: return "UnsupportedVersion";
        case Errc::TruncatedFile: return "TruncatedFile";
        case Errc::UnknownId: return "UnknownId";
        case Errc::EmptyStore: return "EmptyStore";
        case Errc::KTooLarge: return "KTooLarge";
        case Errc::FingerprintMismatch: return "FingerprintMismatch";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::MissingQueryId: return "MissingQueryId";
        case Errc::ConfigError: return "ConfigError";
        case Errc::MissingGroundTruth: return "MissingGroundTruth";
        case Errc::SpecInvalid: return "SpecInvalid";
        case Errc::InconsistentEngine: return "InconsistentEngine";
        case Errc::ParseError: return "ParseError";
    }
    return "UnknownError";
}

/// Exception carrying a stable error code; the CLI prints "<code>: <message>"
/// as a single machine-parsable stderr line.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }
    const char* code_name() const noexcept { return errc_name(code_); }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace gpr
