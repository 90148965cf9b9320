#pragma once

#include <string>
#include <string_view>
#include <utility>

#include "linalg.hpp"

namespace moment_forge {

/// x' = A x + B u + P mu,  y = C x + D u + Q mu.
struct Plant {
    RealMatrix A, B, C, D, P, Q;

    Plant() = default;
    Plant(RealMatrix a, RealMatrix b, RealMatrix c, RealMatrix d, RealMatrix p, RealMatrix q)
        : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)), P(std::move(p)),
          Q(std::move(q)) {
        validate();
    }

    [[nodiscard]] Eigen::Index states() const { return A.rows(); }
    [[nodiscard]] Eigen::Index inputs() const { return B.cols(); }
    [[nodiscard]] Eigen::Index outputs() const { return C.rows(); }
    [[nodiscard]] Eigen::Index exogenous() const { return P.cols(); }

    void validate() const {
        using detail::require;
        const auto n = A.rows();
        const auto m = B.cols();
        const auto p = C.rows();
        const auto q = P.cols();
        require(n >= 1 && m >= 1 && p >= 1 && q >= 1, ErrorCode::DimensionMismatch,
                "plant dimensions n, m, p, q must all be at least 1");
        detail::require_square(A, "A");
        require(B.rows() == n, ErrorCode::DimensionMismatch, "B must have n rows, got " + detail::dims(B));
        require(C.cols() == n, ErrorCode::DimensionMismatch, "C must have n columns, got " + detail::dims(C));
        require(D.rows() == p && D.cols() == m, ErrorCode::DimensionMismatch, "D must be p x m, got " + detail::dims(D));
        require(P.rows() == n, ErrorCode::DimensionMismatch, "P must have n rows, got " + detail::dims(P));
        require(Q.rows() == p && Q.cols() == q, ErrorCode::DimensionMismatch, "Q must be p x q, got " + detail::dims(Q));
        detail::require_finite(A, "A");
        detail::require_finite(B, "B");
        detail::require_finite(C, "C");
        detail::require_finite(D, "D");
        detail::require_finite(P, "P");
        detail::require_finite(Q, "Q");
    }
};

/// omega' = S omega,  v = L omega.
struct SignalGenerator {
    RealMatrix S, L;

    SignalGenerator() = default;
    SignalGenerator(RealMatrix s, RealMatrix l) : S(std::move(s)), L(std::move(l)) { validate(); }

    [[nodiscard]] Eigen::Index order() const { return S.rows(); }

    void validate() const {
        detail::require(S.rows() >= 1, ErrorCode::DimensionMismatch, "generator order must be at least 1");
        detail::require_square(S, "S");
        detail::require(L.cols() == S.rows(), ErrorCode::DimensionMismatch,
                        "L must have nu columns, got " + detail::dims(L));
        detail::require_finite(S, "S");
        detail::require_finite(L, "L");
    }

    void validate_against(const Plant& plant) const {
        detail::require(L.rows() == plant.exogenous(), ErrorCode::DimensionMismatch,
                        "L must have q = " + std::to_string(plant.exogenous()) + " rows, got " +
                            detail::dims(L));
    }
};

/// xi' = F xi + G u_xi,  y_xi = H xi. Driven by the plant output, drives the plant input.
struct Compensator {
    RealMatrix F, G, H;

    Compensator() = default;
    Compensator(RealMatrix f, RealMatrix g, RealMatrix h)
        : F(std::move(f)), G(std::move(g)), H(std::move(h)) {
        validate();
    }

    [[nodiscard]] Eigen::Index order() const { return F.rows(); }

    void validate() const {
        detail::require(F.rows() >= 1, ErrorCode::DimensionMismatch, "compensator order must be at least 1");
        detail::require_square(F, "F");
        detail::require(G.rows() == F.rows() && H.cols() == F.rows(), ErrorCode::DimensionMismatch,
                        "compensator G rows and H columns must equal its order");
        detail::require_finite(F, "F");
        detail::require_finite(G, "G");
        detail::require_finite(H, "H");
    }

    void validate_against(const Plant& plant) const {
        detail::require(G.cols() == plant.outputs() && H.rows() == plant.inputs(),
                        ErrorCode::DimensionMismatch,
                        "compensator must be driven by p = " + std::to_string(plant.outputs()) +
                            " outputs and drive m = " + std::to_string(plant.inputs()) + " inputs");
    }
};

enum class MomentKind { OpenLoop, ClosedLoop, Compensator, Desired };

[[nodiscard]] constexpr std::string_view to_string(MomentKind k) noexcept {
    switch (k) {
        case MomentKind::OpenLoop: return "open_loop";
        case MomentKind::ClosedLoop: return "closed_loop";
        case MomentKind::Compensator: return "compensator";
        case MomentKind::Desired: return "desired";
    }
    return "unknown";
}

struct MomentMatrix {
    RealMatrix value;
    MomentKind kind = MomentKind::OpenLoop;

    [[nodiscard]] Eigen::Index generator_dim() const { return value.cols(); }
};

/// Plant in feedback with a compensator: z = (x, xi).
struct ClosedLoopMatrices {
    RealMatrix A_cl; ///< [[A, B H], [G C, F + G D H]]
    RealMatrix P_cl; ///< [P; G Q]
    RealMatrix C_cl; ///< [C, D H]
};

[[nodiscard]] inline ClosedLoopMatrices close_loop(const Plant& plant, const Compensator& comp) {
    comp.validate_against(plant);
    const auto n = plant.states();
    const auto rho = comp.order();
    ClosedLoopMatrices cl;
    cl.A_cl.resize(n + rho, n + rho);
    cl.A_cl << plant.A, plant.B * comp.H, comp.G * plant.C, comp.F + comp.G * plant.D * comp.H;
    cl.P_cl.resize(n + rho, plant.exogenous());
    cl.P_cl << plant.P, comp.G * plant.Q;
    cl.C_cl.resize(plant.outputs(), n + rho);
    cl.C_cl << plant.C, plant.D * comp.H;
    return cl;
}

} // namespace moment_forge
