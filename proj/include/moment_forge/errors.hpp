#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace moment_forge {

enum class ErrorCode {
    SpectraOverlap,
    IllConditioned,
    NumericalFailure,
    DimensionMismatch,
    InvalidArgument,
    PoleAtPoint,
    DefectiveGenerator,
    ConfigMismatch,
    NotAssignable,
    NotStabilizable,
    NotDetectable,
    RiccatiFailure,
    NotMomentAssigning,
    RankDeficiencyAmbiguous,
    EmptyTrajectory,
    ParseError,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::SpectraOverlap: return "SpectraOverlap";
        case ErrorCode::IllConditioned: return "IllConditioned";
        case ErrorCode::NumericalFailure: return "NumericalFailure";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::PoleAtPoint: return "PoleAtPoint";
        case ErrorCode::DefectiveGenerator: return "DefectiveGenerator";
        case ErrorCode::ConfigMismatch: return "ConfigMismatch";
        case ErrorCode::NotAssignable: return "NotAssignable";
        case ErrorCode::NotStabilizable: return "NotStabilizable";
        case ErrorCode::NotDetectable: return "NotDetectable";
        case ErrorCode::RiccatiFailure: return "RiccatiFailure";
        case ErrorCode::NotMomentAssigning: return "NotMomentAssigning";
        case ErrorCode::RankDeficiencyAmbiguous: return "RankDeficiencyAmbiguous";
        case ErrorCode::EmptyTrajectory: return "EmptyTrajectory";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Single exception type for the library; callers switch on code().
class MomentError : public std::runtime_error {
public:
    MomentError(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

namespace detail {

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) throw MomentError(code, what);
}

} // namespace detail
} // namespace moment_forge
