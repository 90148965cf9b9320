#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "linalg.hpp"
#include "system.hpp"

namespace moment_forge {

/// Generator, plant and compensator as one autonomous system over (omega, x, xi).
struct ClosedLoopModel {
    RealMatrix A_total;   ///< [[S, 0], [P_cl L, A_cl]]
    RealMatrix C_out;     ///< y = C_out * state, i.e. [Q L, C_cl]
    RealMatrix C_ref;     ///< y_des = C_ref * state, i.e. [M_ref, 0]
    Eigen::Index nu = 0;  ///< generator order
    Eigen::Index n = 0;   ///< plant order
    Eigen::Index rho = 0; ///< compensator order

    [[nodiscard]] Eigen::Index dimension() const { return nu + n + rho; }
};

/// `m_ref` is the moment the output is compared against (usually M_des).
[[nodiscard]] inline ClosedLoopModel make_closed_loop_model(const Plant& plant,
                                                            const SignalGenerator& gen,
                                                            const Compensator& comp,
                                                            const RealMatrix& m_ref) {
    gen.validate_against(plant);
    const ClosedLoopMatrices cl = close_loop(plant, comp);
    detail::require(m_ref.rows() == plant.outputs() && m_ref.cols() == gen.order(),
                    ErrorCode::DimensionMismatch, "reference moment must be p x nu, got " +
                                                      detail::dims(m_ref));
    ClosedLoopModel model;
    model.nu = gen.order();
    model.n = plant.states();
    model.rho = comp.order();
    const auto nz = model.n + model.rho;
    const auto dim = model.dimension();
    const auto p = plant.outputs();

    model.A_total = RealMatrix::Zero(dim, dim);
    model.A_total.topLeftCorner(model.nu, model.nu) = gen.S;
    model.A_total.bottomLeftCorner(nz, model.nu) = cl.P_cl * gen.L;
    model.A_total.bottomRightCorner(nz, nz) = cl.A_cl;

    model.C_out.resize(p, dim);
    model.C_out << plant.Q * gen.L, cl.C_cl;
    model.C_ref = RealMatrix::Zero(p, dim);
    model.C_ref.leftCols(model.nu) = m_ref;
    return model;
}

struct Trajectory {
    std::vector<double> times;
    std::vector<RealVector> states;  ///< (omega, x, xi)
    std::vector<RealVector> outputs; ///< y
    std::vector<RealVector> desired; ///< y_des
    std::vector<double> error;       ///< |y - y_des|

    [[nodiscard]] std::size_t size() const { return times.size(); }
};

/// Samples at t = 0, dt, 2 dt, ... up to t_end using the exact one-step map exp(A_total dt).
[[nodiscard]] inline Trajectory simulate(const ClosedLoopModel& model, const RealVector& omega0,
                                         const RealVector& x0, const RealVector& xi0, double t_end,
                                         double dt) {
    detail::require(std::isfinite(dt) && dt > 0.0, ErrorCode::InvalidArgument, "dt must be positive");
    detail::require(std::isfinite(t_end) && t_end >= dt, ErrorCode::InvalidArgument,
                    "t_end must be at least dt");
    detail::require(omega0.size() == model.nu && x0.size() == model.n && xi0.size() == model.rho,
                    ErrorCode::DimensionMismatch, "initial state sizes do not match the model");

    const RealMatrix step = (model.A_total * dt).exp();
    detail::require(step.allFinite(), ErrorCode::NumericalFailure,
                    "matrix exponential is not finite");

    const auto steps = static_cast<std::size_t>(std::floor(t_end / dt * (1.0 + 1e-12)));
    Trajectory traj;
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.outputs.reserve(steps + 1);
    traj.desired.reserve(steps + 1);
    traj.error.reserve(steps + 1);

    RealVector z(model.dimension());
    z << omega0, x0, xi0;
    for (std::size_t k = 0; k <= steps; ++k) {
        if (k > 0) z = step * z;
        RealVector y = model.C_out * z;
        RealVector y_des = model.C_ref * z;
        traj.times.push_back(static_cast<double>(k) * dt);
        traj.error.push_back((y - y_des).norm());
        traj.states.push_back(z);
        traj.outputs.push_back(std::move(y));
        traj.desired.push_back(std::move(y_des));
    }
    return traj;
}

struct SteadyStateError {
    double max_err = 0.0;
    double rms_err = 0.0;
};

/// Error statistics over the trailing `window` fraction of the samples.
[[nodiscard]] inline SteadyStateError steady_state_error(const Trajectory& traj, double window) {
    detail::require(!traj.error.empty(), ErrorCode::EmptyTrajectory, "trajectory has no samples");
    detail::require(window > 0.0 && window <= 1.0, ErrorCode::InvalidArgument,
                    "window must lie in (0, 1]");
    const std::size_t n = traj.error.size();
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(window * static_cast<double>(n))));
    SteadyStateError out;
    double sq = 0.0;
    for (std::size_t i = n - std::min(count, n); i < n; ++i) {
        out.max_err = std::max(out.max_err, traj.error[i]);
        sq += traj.error[i] * traj.error[i];
    }
    out.rms_err = std::sqrt(sq / static_cast<double>(std::min(count, n)));
    return out;
}

} // namespace moment_forge
