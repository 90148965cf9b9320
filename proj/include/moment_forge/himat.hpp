#pragma once

#include "system.hpp"

namespace moment_forge::himat {

// Linearized longitudinal model of the HiMAT remotely piloted vehicle with
// 30 rad/s actuators. States: velocity, angle of attack, pitch rate, pitch
// angle, elevon and canard deflections. Outputs: angle of attack, pitch angle.

[[nodiscard]] inline Plant plant() {
    RealMatrix a(6, 6), b(6, 2), c(2, 6), p(6, 3);
    a << -0.0226, -36.6, -18.9, -32.1, 3.25, -0.76,
         9.3e-5, -1.90, 0.983, -7.3e-4, -0.17, -0.005,
         0.0123, 11.7, -2.63, 8.8e-4, -31.6, 22.4,
         0, 0, 1, 0, 0, 0,
         0, 0, 0, 0, -30, 0,
         0, 0, 0, 0, 0, -30;
    b << 0, 0,
         0, 0,
         0, 0,
         0, 0,
         30, 0,
         0, 30;
    c << 0, 1, 0, 0, 0, 0,
         0, 0, 0, 1, 0, 0;
    p << 0, 0, 0,
         1, 1, 0,
         1, 0, 1,
         0, 0, 0,
         0, 0, 0,
         0, 0, 0;
    return Plant(a, b, c, RealMatrix::Zero(2, 2), p, RealMatrix::Zero(2, 3));
}

/// Constant plus 3 rad/s sinusoidal disturbance.
[[nodiscard]] inline SignalGenerator generator() {
    RealMatrix s(3, 3);
    s << 0, 0, 0,
         0, 0, 3,
         0, -3, 0;
    return SignalGenerator(s, RealMatrix::Identity(3, 3));
}

/// Angle of attack tracks 0.1 of the first oscillator state, pitch angle 0.1 of the second.
[[nodiscard]] inline RealMatrix desired_moment() {
    RealMatrix m(2, 3);
    m << 0, 0.1, 0,
         0, 0, 0.1;
    return m;
}

[[nodiscard]] inline Eigen::Vector3d initial_exosystem_state() { return {1.0, 1.0, 0.0}; }

inline constexpr double kStabilityMargin = 1.0;
inline constexpr double kHorizon = 30.0;
inline constexpr double kStep = 1e-3;

} // namespace moment_forge::himat
