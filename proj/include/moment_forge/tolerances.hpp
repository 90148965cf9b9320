#pragma once

#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace moment_forge {

// Every numerical comparison in the library is routed through one of these.
//   spectral_gap: eigenvalue separation, relative to (1 + spectral radius)
//   rank_rel:     singular-value cutoff factor; the effective cutoff is
//                 rank_rel * max(rows, cols) * sigma_max
//   residual_rel: relative residual bound for linear/Sylvester solves
struct Tolerances {
    double spectral_gap = 1e-8;
    double rank_rel = 1e-10;
    double residual_rel = 1e-8;

    void validate() const {
        detail::require(spectral_gap > 0 && rank_rel > 0 && residual_rel > 0,
                        ErrorCode::InvalidArgument, "tolerances must be strictly positive");
    }

    [[nodiscard]] double rank_cutoff(long rows, long cols, double sigma_max) const {
        const long dim = rows > cols ? rows : cols;
        return rank_rel * static_cast<double>(dim > 0 ? dim : 1) * sigma_max;
    }
};

/// Named presets: "default", "strict", "loose".
[[nodiscard]] inline std::optional<Tolerances> tolerance_preset(std::string_view name) {
    if (name == "default") return Tolerances{};
    if (name == "strict") return Tolerances{1e-10, 1e-12, 1e-10};
    if (name == "loose") return Tolerances{1e-6, 1e-8, 1e-6};
    return std::nullopt;
}

/// Reads MOMENT_FORGE_TOL_PROFILE; unset means "default".
[[nodiscard]] inline Tolerances tolerances_from_environment() {
    const char* profile = std::getenv("MOMENT_FORGE_TOL_PROFILE");
    if (profile == nullptr || *profile == '\0') return Tolerances{};
    auto preset = tolerance_preset(profile);
    detail::require(preset.has_value(), ErrorCode::InvalidArgument,
                    std::string("unknown tolerance profile '") + profile + "'");
    return *preset;
}

} // namespace moment_forge
