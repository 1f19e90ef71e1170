#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fissure {

enum class ErrorCode {
    UnreadableFile,
    FormatMismatch,
    ZeroDimension,
    OutOfBounds,
    PointOutOfBounds,
    DimensionMismatch,
    NotThinned,
    ZeroLength,
    DegenerateGeometry,
    IsotropicGeometry,
    PureCycle,
    MissingDescriptor,
    LengthMismatch,
    ConstantSeries,
    UnknownLabel,
    EmptyInput,
    DegenerateTransform,
    ParamOutOfRange,
    MalformedManifest,
    MissingFile,
    IdMismatch,
    InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::FormatMismatch: return "FormatMismatch";
    case ErrorCode::ZeroDimension: return "ZeroDimension";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::PointOutOfBounds: return "PointOutOfBounds";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotThinned: return "NotThinned";
    case ErrorCode::ZeroLength: return "ZeroLength";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::IsotropicGeometry: return "IsotropicGeometry";
    case ErrorCode::PureCycle: return "PureCycle";
    case ErrorCode::MissingDescriptor: return "MissingDescriptor";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ConstantSeries: return "ConstantSeries";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateTransform: return "DegenerateTransform";
    case ErrorCode::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

/// Exception type thrown by every fissure operation. The code is stable and
/// machine-readable; the message carries the human-facing detail.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace fissure
