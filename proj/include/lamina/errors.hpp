#pragma once

#include <stdexcept>
#include <string>

namespace lamina {

enum class ErrorCode {
    OutOfBounds,
    MalformedHeader,
    DimensionMismatch,
    NonOrthogonalFrame,
    DegenerateProjection,
    SeedRejected,
    InsufficientDomain,
    InvalidParam,
    InvalidRange,
    SolverFailure,
    TooManyFreeVariables,
    GridMismatch,
    EmptySurface,
    SeparationViolation,
    NoTripleIntersections,
    FacePairingConflict,
    DegenerateCell,
    UnknownGenerator,
    IoError,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::MalformedHeader: return "MalformedHeader";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonOrthogonalFrame: return "NonOrthogonalFrame";
        case ErrorCode::DegenerateProjection: return "DegenerateProjection";
        case ErrorCode::SeedRejected: return "SeedRejected";
        case ErrorCode::InsufficientDomain: return "InsufficientDomain";
        case ErrorCode::InvalidParam: return "InvalidParam";
        case ErrorCode::InvalidRange: return "InvalidRange";
        case ErrorCode::SolverFailure: return "SolverFailure";
        case ErrorCode::TooManyFreeVariables: return "TooManyFreeVariables";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::EmptySurface: return "EmptySurface";
        case ErrorCode::SeparationViolation: return "SeparationViolation";
        case ErrorCode::NoTripleIntersections: return "NoTripleIntersections";
        case ErrorCode::FacePairingConflict: return "FacePairingConflict";
        case ErrorCode::DegenerateCell: return "DegenerateCell";
        case ErrorCode::UnknownGenerator: return "UnknownGenerator";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace lamina
