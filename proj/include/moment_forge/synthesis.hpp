#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "assignment.hpp"
#include "linalg.hpp"
#include "moments.hpp"
#include "riccati.hpp"
#include "system.hpp"

namespace moment_forge {

// ---------------------------------------------------------------------------
// PBH tests
// ---------------------------------------------------------------------------

struct PbhResult {
    bool passed = true;
    std::vector<Complex> offending; ///< eigenvalues in the closed right half-plane that fail
};

/// (A, B) stabilizable: [A - lambda I, B] has full row rank for every eigenvalue
/// with Re(lambda) >= -spectral_gap.
[[nodiscard]] inline PbhResult pbh_stabilizable(const RealMatrix& a, const RealMatrix& b,
                                                const Tolerances& tol = {}) {
    detail::require_square(a, "A");
    detail::require(b.rows() == a.rows(), ErrorCode::DimensionMismatch,
                    "B must have as many rows as A");
    const Eigen::Index n = a.rows();
    const Spectrum sp = spectrum(a);
    PbhResult out;
    for (const auto& pt : sp.distinct(100.0 * tol.spectral_gap * (1.0 + sp.radius()))) {
        if (pt.value.real() < -tol.spectral_gap) continue;
        ComplexMatrix pencil(n, n + b.cols());
        pencil.leftCols(n) = a.cast<Complex>() - pt.value * ComplexMatrix::Identity(n, n);
        pencil.rightCols(b.cols()) = b.cast<Complex>();
        if (complex_rank(pencil, tol) < n) {
            out.passed = false;
            out.offending.push_back(pt.value);
        }
    }
    return out;
}

/// (C, A) detectable: the dual test on (A', C').
[[nodiscard]] inline PbhResult pbh_detectable(const RealMatrix& c, const RealMatrix& a,
                                              const Tolerances& tol = {}) {
    detail::require(c.cols() == a.rows(), ErrorCode::DimensionMismatch,
                    "C must have as many columns as A");
    return pbh_stabilizable(a.transpose(), c.transpose(), tol);
}

struct OffendingMode {
    Complex eigenvalue;
    std::string test; ///< "stabilizable(A,B)", "detectable(C,A)" or "detectable(M_open,S)"
};

struct StabilityReport {
    bool plant_stabilizable = false;
    bool plant_detectable = false;
    bool moment_pair_detectable = false;
    std::vector<OffendingMode> offending;

    [[nodiscard]] bool synthesizable() const {
        return plant_stabilizable && plant_detectable && moment_pair_detectable;
    }
};

/// Existence test for a stabilizing moment-assigning compensator: (A,B)
/// stabilizable and both (C,A) and (M_open,S) detectable.
[[nodiscard]] inline StabilityReport stability_report(const Plant& plant, const SignalGenerator& gen,
                                                      const Tolerances& tol = {}) {
    const OpenLoopMoment open = open_loop_moment(plant, gen, tol);
    StabilityReport rep;
    auto collect = [&rep](const PbhResult& r, const char* name) {
        for (const auto& z : r.offending) rep.offending.push_back({z, name});
        return r.passed;
    };
    rep.plant_stabilizable = collect(pbh_stabilizable(plant.A, plant.B, tol), "stabilizable(A,B)");
    rep.plant_detectable = collect(pbh_detectable(plant.C, plant.A, tol), "detectable(C,A)");
    rep.moment_pair_detectable =
        collect(pbh_detectable(open.moment.value, gen.S, tol), "detectable(M_open,S)");
    return rep;
}

// ---------------------------------------------------------------------------
// Augmented system and stabilizer design
// ---------------------------------------------------------------------------

/// Plant plus the moment-matching block xi_a, seen as a plant for the
/// stabilizing block xi_b. State (x, xi_a), input (u, v), output y - M_des xi_a.
struct AugmentedSystem {
    RealMatrix A_aug; ///< [[A, B M_c], [G_a C, S - G_a (M_des - D M_c)]]
    RealMatrix B_aug; ///< [[B, 0], [G_a D, I]]
    RealMatrix C_aug; ///< [C, -(M_des - D M_c)]
    // inputs the blocks were built from
    RealMatrix S, M_des, M_c, G_a;

    [[nodiscard]] Eigen::Index plant_states() const { return A_aug.rows() - S.rows(); }
    [[nodiscard]] Eigen::Index plant_inputs() const { return M_c.rows(); }
};

[[nodiscard]] inline AugmentedSystem build_augmented(const Plant& plant, const SignalGenerator& gen,
                                                     const RealMatrix& m_des, const RealMatrix& m_c,
                                                     const RealMatrix& g_a) {
    const auto n = plant.states();
    const auto m = plant.inputs();
    const auto p = plant.outputs();
    const auto nu = gen.order();
    detail::require(m_des.rows() == p && m_des.cols() == nu, ErrorCode::DimensionMismatch,
                    "M_des must be p x nu, got " + detail::dims(m_des));
    detail::require(m_c.rows() == m && m_c.cols() == nu, ErrorCode::DimensionMismatch,
                    "M_c must be m x nu, got " + detail::dims(m_c));
    detail::require(g_a.rows() == nu && g_a.cols() == p, ErrorCode::DimensionMismatch,
                    "G_a must be nu x p, got " + detail::dims(g_a));

    const RealMatrix shifted = m_des - plant.D * m_c;
    AugmentedSystem aug;
    aug.A_aug.resize(n + nu, n + nu);
    aug.A_aug << plant.A, plant.B * m_c, g_a * plant.C, gen.S - g_a * shifted;
    aug.B_aug.resize(n + nu, m + nu);
    aug.B_aug << plant.B, RealMatrix::Zero(n, nu), g_a * plant.D, RealMatrix::Identity(nu, nu);
    aug.C_aug.resize(p, n + nu);
    aug.C_aug << plant.C, -shifted;
    aug.S = gen.S;
    aug.M_des = m_des;
    aug.M_c = m_c;
    aug.G_a = g_a;
    return aug;
}

/// LQG weights. Unset matrices default to identity. A positive stability_margin
/// alpha solves both Riccati equations for A_aug + alpha I, which places every
/// regulator and observer pole left of -alpha.
struct DesignParams {
    std::optional<RealMatrix> state_weight;       ///< (n+nu) x (n+nu)
    std::optional<RealMatrix> input_weight;       ///< (m+nu) x (m+nu)
    std::optional<RealMatrix> process_weight;     ///< (n+nu) x (n+nu)
    std::optional<RealMatrix> measurement_weight; ///< p x p
    double stability_margin = 0.0;
};

struct StabilizerGains {
    RealMatrix K;     ///< (m+nu) x (n+nu); u_aug = -K x_hat
    RealMatrix L_obs; ///< (n+nu) x p
};

[[nodiscard]] inline StabilizerGains design_stabilizer(const AugmentedSystem& aug,
                                                       const DesignParams& params = {},
                                                       const Tolerances& tol = {}) {
    const auto nx = aug.A_aug.rows();
    const auto nu_in = aug.B_aug.cols();
    const auto ny = aug.C_aug.rows();
    detail::require(params.stability_margin >= 0.0, ErrorCode::InvalidArgument,
                    "stability margin must be non-negative");

    const PbhResult stab = pbh_stabilizable(aug.A_aug, aug.B_aug, tol);
    if (!stab.passed)
        throw MomentError(ErrorCode::NotStabilizable, "augmented pair (A_aug, B_aug) is not stabilizable");
    const PbhResult det = pbh_detectable(aug.C_aug, aug.A_aug, tol);
    if (!det.passed)
        throw MomentError(ErrorCode::NotDetectable, "augmented pair (C_aug, A_aug) is not detectable");

    auto weight = [](const std::optional<RealMatrix>& w, Eigen::Index dim) {
        return w ? *w : RealMatrix(RealMatrix::Identity(dim, dim));
    };
    const RealMatrix a_shift =
        aug.A_aug + params.stability_margin * RealMatrix::Identity(nx, nx);

    StabilizerGains gains;
    gains.K = solve_care(a_shift, aug.B_aug, weight(params.state_weight, nx),
                         weight(params.input_weight, nu_in), tol)
                  .K;
    gains.L_obs = solve_care(a_shift.transpose(), aug.C_aug.transpose(),
                             weight(params.process_weight, nx),
                             weight(params.measurement_weight, ny), tol)
                      .K.transpose();

    detail::require(is_hurwitz(aug.A_aug - aug.B_aug * gains.K, tol) &&
                        is_hurwitz(aug.A_aug - gains.L_obs * aug.C_aug, tol),
                    ErrorCode::RiccatiFailure, "designed gains are not stabilizing");
    return gains;
}

// ---------------------------------------------------------------------------
// Canonical compensator
// ---------------------------------------------------------------------------

/// xi_a' = (S - G_a M_des) xi_a + F_a xi_b + G_a u_xi
/// xi_b' = -G_b M_des xi_a + F_b xi_b + G_b u_xi
/// y_xi  = M_c xi_a + H_b xi_b
struct CanonicalCompensator {
    RealMatrix S, M_des, M_c;
    RealMatrix F_a, F_b, G_a, G_b, H_b;

    [[nodiscard]] Eigen::Index nu() const { return S.rows(); }
    [[nodiscard]] Eigen::Index rho() const { return S.rows() + F_b.rows(); }

    [[nodiscard]] Compensator flatten() const {
        const auto nu_ = nu();
        const auto nb = F_b.rows();
        const auto rho_ = nu_ + nb;
        RealMatrix f(rho_, rho_), g(rho_, G_a.cols()), h(M_c.rows(), rho_);
        f.topLeftCorner(nu_, nu_) = S - G_a * M_des;
        f.topRightCorner(nu_, nb) = F_a;
        f.bottomLeftCorner(nb, nu_) = -G_b * M_des;
        f.bottomRightCorner(nb, nb) = F_b;
        g.topRows(nu_) = G_a;
        g.bottomRows(nb) = G_b;
        h.leftCols(nu_) = M_c;
        h.rightCols(nb) = H_b;
        return Compensator(std::move(f), std::move(g), std::move(h));
    }
};

struct SynthesizedCompensator {
    CanonicalCompensator canonical;
    Compensator flat;
};

/// Observer-based controller for the augmented system, folded into the
/// canonical parameters: [H_b; F_a] = -K, G_b = L_obs,
/// F_b = (A_aug - B_aug K - L_obs C_aug) - G_b D H_b.
[[nodiscard]] inline SynthesizedCompensator assemble_compensator(const AugmentedSystem& aug,
                                                                 const StabilizerGains& gains,
                                                                 const RealMatrix& plant_d) {
    const auto nx = aug.A_aug.rows();
    const auto m = aug.plant_inputs();
    const auto nu = aug.S.rows();
    const auto p = aug.C_aug.rows();
    detail::require(gains.K.rows() == m + nu && gains.K.cols() == nx &&
                        gains.L_obs.rows() == nx && gains.L_obs.cols() == p,
                    ErrorCode::DimensionMismatch, "gain shapes do not match the augmented system");
    detail::require(plant_d.rows() == p && plant_d.cols() == m, ErrorCode::DimensionMismatch,
                    "D must be p x m");

    CanonicalCompensator c;
    c.S = aug.S;
    c.M_des = aug.M_des;
    c.M_c = aug.M_c;
    c.G_a = aug.G_a;
    c.H_b = -gains.K.topRows(m);
    c.F_a = -gains.K.bottomRows(nu);
    c.G_b = gains.L_obs;
    const RealMatrix controller_state =
        aug.A_aug - aug.B_aug * gains.K - gains.L_obs * aug.C_aug;
    c.F_b = controller_state - c.G_b * plant_d * c.H_b;
    return {c, c.flatten()};
}

// ---------------------------------------------------------------------------
// End-to-end synthesis
// ---------------------------------------------------------------------------

struct SynthesisOptions {
    std::optional<RealMatrix> G_a; ///< defaults to zero
    DesignParams design;
    bool require_exact = false; ///< refuse a least-squares fallback
};

struct SynthesisResult {
    AssignmentSolution assignment;
    StabilityReport stability;
    AugmentedSystem augmented;
    StabilizerGains gains;
    CanonicalCompensator canonical;
    Compensator compensator;
    ClosedLoopMoment closed_loop;
    Spectrum closed_loop_spectrum;
};

namespace detail {

inline std::string describe(const std::vector<OffendingMode>& modes) {
    std::string s;
    for (const auto& m : modes) {
        if (!s.empty()) s += ", ";
        s += m.test + " at " + std::to_string(m.eigenvalue.real()) +
             (m.eigenvalue.imag() >= 0 ? "+" : "") + std::to_string(m.eigenvalue.imag()) + "i";
    }
    return s;
}

} // namespace detail

/// Moment assignment followed by closed-loop stabilization. When M_des is not
/// assignable (and require_exact is off) the least-squares moment
/// M_open + T_S(M_c*) becomes the target.
[[nodiscard]] inline SynthesisResult synthesize(const AssignmentProblem& problem,
                                                const SynthesisOptions& options = {},
                                                const Tolerances& tol = {}) {
    const Plant& plant = problem.plant;
    const SignalGenerator& gen = problem.gen;
    SynthesisResult out;
    out.assignment = solve_moment(problem, tol);
    if (options.require_exact && !out.assignment.exact)
        throw MomentError(ErrorCode::NotAssignable,
                          "desired moment is outside the range of the moment transfer operator "
                          "(residual " + std::to_string(out.assignment.residual) + ")");

    out.stability = stability_report(plant, gen, tol);
    if (!out.stability.plant_stabilizable)
        throw MomentError(ErrorCode::NotStabilizable, detail::describe(out.stability.offending));
    if (!out.stability.synthesizable())
        throw MomentError(ErrorCode::NotDetectable, detail::describe(out.stability.offending));

    const RealMatrix g_a =
        options.G_a ? *options.G_a : RealMatrix(RealMatrix::Zero(gen.order(), plant.outputs()));
    out.augmented = build_augmented(plant, gen, out.assignment.M_des_effective.value,
                                    out.assignment.M_c.value, g_a);
    out.gains = design_stabilizer(out.augmented, options.design, tol);
    auto assembled = assemble_compensator(out.augmented, out.gains, plant.D);
    out.canonical = std::move(assembled.canonical);
    out.compensator = std::move(assembled.flat);
    out.closed_loop_spectrum = spectrum(close_loop(plant, out.compensator).A_cl);
    out.closed_loop = closed_loop_moment(plant, gen, out.compensator, tol);
    return out;
}

// ---------------------------------------------------------------------------
// Canonicalization of an arbitrary moment-assigning compensator
// ---------------------------------------------------------------------------

namespace detail {

/// Moment agreement bound used for compensator-level checks.
inline double moment_match_bound(const RealMatrix& m, const Tolerances& tol) {
    return 10.0 * tol.residual_rel * (1.0 + m.norm());
}

inline ComplexMatrix compensator_response(const Compensator& c, Complex s) {
    const auto r = c.order();
    const ComplexMatrix arg = s * ComplexMatrix::Identity(r, r) - c.F.cast<Complex>();
    return c.H.cast<Complex>() * arg.partialPivLu().solve(c.G.cast<Complex>());
}

} // namespace detail

/// Rewrites a moment-assigning compensator in canonical coordinates. The
/// column space of its Sylvester block Pi_xi is split off as the moment-matching
/// block; the complement becomes the stabilizing block (no padding states).
[[nodiscard]] inline CanonicalCompensator canonicalize(const Plant& plant, const SignalGenerator& gen,
                                                       const Compensator& comp,
                                                       const RealMatrix& m_des,
                                                       const Tolerances& tol = {}) {
    comp.validate_against(plant);
    detail::require(m_des.rows() == plant.outputs() && m_des.cols() == gen.order(),
                    ErrorCode::DimensionMismatch, "M_des must be p x nu");
    const ClosedLoopMoment cm = closed_loop_moment(plant, gen, comp, tol);
    const double mismatch = (cm.M_cl.value - m_des).norm();
    if (mismatch > detail::moment_match_bound(m_des, tol))
        throw MomentError(ErrorCode::NotMomentAssigning,
                          "compensator closed-loop moment differs from M_des by " +
                              std::to_string(mismatch));

    const auto rho_bar = comp.order();
    const auto nu = gen.order();
    Eigen::JacobiSVD<RealMatrix> svd(cm.Pi_xi, Eigen::ComputeFullU);
    const RealVector& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    Eigen::Index nu_bar = 0;
    if (smax > 0.0) {
        const double cutoff = tol.rank_cutoff(rho_bar, nu, smax);
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            if (sv(i) > cutoff / 10.0 && sv(i) < cutoff * 10.0)
                throw MomentError(ErrorCode::RankDeficiencyAmbiguous,
                                  "singular value " + std::to_string(sv(i)) +
                                      " of Pi_xi is within a factor 10 of the rank cutoff");
            if (sv(i) > cutoff) ++nu_bar;
        }
    }

    // Orthogonal change of coordinates xi_bar = U' xi.
    const RealMatrix& u = svd.matrixU();
    const RealMatrix f_bar = u.transpose() * comp.F * u;
    const RealMatrix g_bar = u.transpose() * comp.G;
    const RealMatrix h_bar = comp.H * u;
    const RealMatrix pi_bar = u.leftCols(nu_bar).transpose() * cm.Pi_xi; // nu_bar x nu, full row rank
    const RealMatrix right_inv =
        pi_bar.transpose() * (pi_bar * pi_bar.transpose()).inverse(); // nu x nu_bar
    const auto nb = rho_bar - nu_bar;

    CanonicalCompensator c;
    c.S = gen.S;
    c.M_des = m_des;
    c.M_c = cm.M_c.value;
    c.F_a = right_inv * f_bar.topRightCorner(nu_bar, nb);
    c.G_a = right_inv * g_bar.topRows(nu_bar);
    c.F_b = f_bar.bottomRightCorner(nb, nb);
    c.G_b = g_bar.bottomRows(nb);
    c.H_b = h_bar.rightCols(nb);

    // The canonical form must reproduce the compensator's input-output behaviour.
    const Compensator flat = c.flatten();
    const Spectrum sf = spectrum(comp.F);
    const Spectrum sc = spectrum(flat.F);
    const double scale = 1.0 + std::max(sf.radius(), sc.radius());
    const std::array<Complex, 3> probes{Complex(0.31, 1.7) * scale, Complex(-0.23, 0.57) * scale,
                                        Complex(1.13, -0.41) * scale};
    for (const Complex s : probes) {
        const ComplexMatrix w0 = detail::compensator_response(comp, s);
        const ComplexMatrix w1 = detail::compensator_response(flat, s);
        if ((w0 - w1).norm() > std::sqrt(tol.residual_rel) * (1.0 + w0.norm()))
            throw MomentError(ErrorCode::NumericalFailure,
                              "canonical form does not reproduce the compensator response");
    }
    if (nu_bar == nu) {
        const ClosedLoopMoment ccm = closed_loop_moment(plant, gen, flat, tol);
        if ((ccm.M_cl.value - cm.M_cl.value).norm() > detail::moment_match_bound(m_des, tol))
            throw MomentError(ErrorCode::NumericalFailure,
                              "canonical form changes the closed-loop moment");
    }
    return c;
}

} // namespace moment_forge
