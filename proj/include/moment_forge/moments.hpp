#pragma once

#include <optional>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "system.hpp"

namespace moment_forge {

// ---------------------------------------------------------------------------
// Open-loop and closed-loop moments
// ---------------------------------------------------------------------------

struct OpenLoopMoment {
    MomentMatrix moment; ///< C Pi + Q L, p x nu
    RealMatrix Pi;       ///< Pi S = A Pi + P L
};

[[nodiscard]] inline OpenLoopMoment open_loop_moment(const Plant& plant, const SignalGenerator& gen,
                                                     const Tolerances& tol = {}) {
    gen.validate_against(plant);
    OpenLoopMoment out;
    out.Pi = solve_sylvester(gen.S, plant.A, plant.P * gen.L, tol);
    out.moment = {plant.C * out.Pi + plant.Q * gen.L, MomentKind::OpenLoop};
    return out;
}

struct ClosedLoopMoment {
    MomentMatrix M_cl; ///< C Pi_x + D H Pi_xi + Q L
    MomentMatrix M_c;  ///< H Pi_xi
    RealMatrix Pi_x;
    RealMatrix Pi_xi;
};

/// Solves the stacked Sylvester equation [Pi_x; Pi_xi] S = A_cl [Pi_x; Pi_xi] + P_cl L
/// in one shot.
[[nodiscard]] inline ClosedLoopMoment closed_loop_moment(const Plant& plant,
                                                         const SignalGenerator& gen,
                                                         const Compensator& comp,
                                                         const Tolerances& tol = {}) {
    gen.validate_against(plant);
    const ClosedLoopMatrices cl = close_loop(plant, comp);
    const RealMatrix pi = solve_sylvester(gen.S, cl.A_cl, cl.P_cl * gen.L, tol);
    const auto n = plant.states();
    ClosedLoopMoment out;
    out.Pi_x = pi.topRows(n);
    out.Pi_xi = pi.bottomRows(comp.order());
    out.M_c = {comp.H * out.Pi_xi, MomentKind::Compensator};
    out.M_cl = {plant.C * out.Pi_x + plant.D * out.M_c.value + plant.Q * gen.L,
                MomentKind::ClosedLoop};
    return out;
}

// ---------------------------------------------------------------------------
// Frequency-domain k-moments
// ---------------------------------------------------------------------------

struct KMoment {
    Complex s_star;
    int k = 0;
    ComplexMatrix value; ///< p x m
    double scale = 0.0;  ///< |C| |(sI - A)^{-(k+1)} B| (+ |D|): size of the summed terms
};

/// eta_k(s) = C (sI - A)^{-(k+1)} B, plus D when k = 0.
[[nodiscard]] inline KMoment k_moment(const Plant& plant, Complex s_star, int k,
                                      const Tolerances& tol = {}) {
    detail::require(k >= 0, ErrorCode::InvalidArgument, "moment order k must be non-negative");
    const Spectrum sa = spectrum(plant.A);
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& z : sa.eigenvalues) gap = std::min(gap, std::abs(z - s_star));
    detail::require(gap > tol.spectral_gap * (1.0 + std::max(sa.radius(), std::abs(s_star))),
                    ErrorCode::PoleAtPoint, "evaluation point lies on the spectrum of A");

    const auto n = plant.states();
    const ComplexMatrix resolvent_arg =
        s_star * ComplexMatrix::Identity(n, n) - plant.A.cast<Complex>();
    const Eigen::PartialPivLU<ComplexMatrix> lu(resolvent_arg);
    ComplexMatrix x = plant.B.cast<Complex>();
    for (int i = 0; i <= k; ++i) x = lu.solve(x);

    KMoment out{s_star, k, plant.C.cast<Complex>() * x, plant.C.norm() * x.norm()};
    if (k == 0) {
        out.value += plant.D.cast<Complex>();
        out.scale += plant.D.norm();
    }
    return out;
}

/// W(s) = C (sI - A)^{-1} B + D.
[[nodiscard]] inline ComplexMatrix transfer_function(const Plant& plant, Complex s,
                                                     const Tolerances& tol = {}) {
    return k_moment(plant, s, 0, tol).value;
}

// ---------------------------------------------------------------------------
// Moment transfer operator  T_S(M) = C L^{-1}_{(S,A)}(B M) + D M
// ---------------------------------------------------------------------------

[[nodiscard]] inline RealMatrix transfer_apply(const Plant& plant, const RealMatrix& s,
                                               const RealMatrix& m_in, const Tolerances& tol = {}) {
    detail::require(m_in.rows() == plant.inputs() && m_in.cols() == s.rows(),
                    ErrorCode::DimensionMismatch,
                    "M_in must be m x nu, got " + detail::dims(m_in));
    const RealMatrix pi = solve_sylvester(s, plant.A, plant.B * m_in, tol);
    return plant.C * pi + plant.D * m_in;
}

enum class TransferConstruction { BasisProbe, JordanExplicit };

[[nodiscard]] constexpr std::string_view to_string(TransferConstruction c) noexcept {
    return c == TransferConstruction::BasisProbe ? "basis_probe" : "jordan_explicit";
}

struct JordanBlock {
    Complex eigenvalue;
    int size = 1;
};

/// Declared Jordan structure of S: S = T^{-1} Sigma T with Sigma = blkdiag of
/// Jordan blocks in the listed order.
struct JordanStructure {
    ComplexMatrix T;
    std::vector<JordanBlock> blocks;

    [[nodiscard]] ComplexMatrix jordan_form() const {
        Eigen::Index nu = 0;
        for (const auto& b : blocks) nu += b.size;
        ComplexMatrix sigma = ComplexMatrix::Zero(nu, nu);
        Eigen::Index off = 0;
        for (const auto& b : blocks) {
            for (int i = 0; i < b.size; ++i) {
                sigma(off + i, off + i) = b.eigenvalue;
                if (i + 1 < b.size) sigma(off + i, off + i + 1) = 1.0;
            }
            off += b.size;
        }
        return sigma;
    }
};

/// Dense (p nu) x (m nu) matrix with vec(T_S(M)) = matrix * vec(M).
struct MomentTransferOperator {
    Eigen::Index m = 0, p = 0, nu = 0;
    RealMatrix matrix;
    TransferConstruction construction = TransferConstruction::BasisProbe;
    double scale = 0.0; ///< magnitude of the terms that were summed; floors rank decisions

    [[nodiscard]] RealMatrix apply(const RealMatrix& m_in) const {
        detail::require(m_in.rows() == m && m_in.cols() == nu, ErrorCode::DimensionMismatch,
                        "M_in must be m x nu, got " + detail::dims(m_in));
        return unvec(RealVector(matrix * vec(m_in)), p, nu);
    }
};

namespace detail {

inline MomentTransferOperator transfer_matrix_probe(const Plant& plant, const RealMatrix& s,
                                                    const Tolerances& tol) {
    const auto m = plant.inputs();
    const auto p = plant.outputs();
    const auto nu = s.rows();
    const SylvesterSolver solver(s, plant.A, tol);
    MomentTransferOperator op{m, p, nu, RealMatrix(p * nu, m * nu),
                              TransferConstruction::BasisProbe, 0.0};
    for (Eigen::Index j = 0; j < m * nu; ++j) {
        RealMatrix e = RealMatrix::Zero(m, nu);
        e(j % m, j / m) = 1.0; // column-major basis index
        const RealMatrix pi = solver.solve(plant.B * e);
        op.matrix.col(j) = vec(RealMatrix(plant.C * pi + plant.D * e));
        op.scale = std::max(op.scale, plant.C.norm() * pi.norm() + plant.D.norm());
    }
    return op;
}

inline JordanStructure certify_diagonalizable(const RealMatrix& s, const Tolerances& tol) {
    Eigen::ComplexEigenSolver<ComplexMatrix> es(s.cast<Complex>());
    require(es.info() == Eigen::Success, ErrorCode::NumericalFailure,
            "eigendecomposition of S failed");
    const ComplexVector lambda = es.eigenvalues();
    double radius = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) radius = std::max(radius, std::abs(lambda(i)));
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        for (Eigen::Index j = i + 1; j < lambda.size(); ++j)
            require(std::abs(lambda(i) - lambda(j)) > tol.spectral_gap * (1.0 + radius),
                    ErrorCode::DefectiveGenerator,
                    "S has clustered eigenvalues; supply an explicit Jordan structure");
    const ComplexMatrix v = es.eigenvectors();
    const Eigen::PartialPivLU<ComplexMatrix> lu(v);
    JordanStructure js;
    js.T = lu.inverse(); // S = V Lambda V^{-1}  =>  T = V^{-1}
    for (Eigen::Index i = 0; i < lambda.size(); ++i) js.blocks.push_back({lambda(i), 1});
    return js;
}

inline MomentTransferOperator transfer_matrix_jordan(const Plant& plant, const RealMatrix& s,
                                                     const JordanStructure& js,
                                                     const Tolerances& tol) {
    const auto m = plant.inputs();
    const auto p = plant.outputs();
    const auto nu = s.rows();
    const ComplexMatrix sigma = js.jordan_form();
    require(sigma.rows() == nu && js.T.rows() == nu && js.T.cols() == nu,
            ErrorCode::DefectiveGenerator, "Jordan structure does not match the order of S");
    const Eigen::FullPivLU<ComplexMatrix> t_lu(js.T);
    require(t_lu.isInvertible(), ErrorCode::DefectiveGenerator, "Jordan basis T is singular");
    const ComplexMatrix t_inv = t_lu.inverse();
    const ComplexMatrix s_c = s.cast<Complex>();
    const double recon = (t_inv * sigma * js.T - s_c).norm();
    require(recon <= tol.residual_rel * (1.0 + s.norm()), ErrorCode::DefectiveGenerator,
            "declared Jordan structure does not reproduce S (error " + std::to_string(recon) + ")");

    ComplexMatrix op = ComplexMatrix::Zero(p * nu, m * nu);
    double scale = 0.0;
    Eigen::Index off = 0;
    for (const auto& block : js.blocks) {
        ComplexMatrix e = ComplexMatrix::Zero(nu, nu);
        e.block(off, off, block.size, block.size).setIdentity();
        const ComplexMatrix proj = t_inv * e * js.T;
        const ComplexMatrix shift = block.eigenvalue * ComplexMatrix::Identity(nu, nu) - s_c;
        ComplexMatrix shift_pow = ComplexMatrix::Identity(nu, nu);
        for (int k = 0; k < block.size; ++k) {
            const KMoment eta = k_moment(plant, block.eigenvalue, k, tol);
            // vec(eta M X) = (X^T (x) eta) vec(M)
            const ComplexMatrix x = proj * shift_pow * proj;
            op += kron(ComplexMatrix(x.transpose()), eta.value);
            scale += x.norm() * eta.scale;
            shift_pow = shift_pow * shift;
        }
        off += block.size;
    }
    const double imag = op.imag().norm();
    require(imag <= tol.residual_rel * (1.0 + op.real().norm()), ErrorCode::NumericalFailure,
            "Jordan-built operator is not real (imaginary part " + std::to_string(imag) + ")");
    return {m, p, nu, op.real(), TransferConstruction::JordanExplicit, scale};
}

} // namespace detail

/// Builds the dense operator. BasisProbe applies transfer_apply to each basis
/// matrix. JordanExplicit sums eta_k(s_i) M P_i (s_i I - S)^k P_i over the Jordan
/// blocks of S, using `jordan` when given and an eigendecomposition otherwise.
[[nodiscard]] inline MomentTransferOperator transfer_matrix(
    const Plant& plant, const RealMatrix& s,
    TransferConstruction method = TransferConstruction::BasisProbe, const Tolerances& tol = {},
    const std::optional<JordanStructure>& jordan = std::nullopt) {
    detail::require_square(s, "S");
    const SpectralSeparation sep = spectra_disjoint(plant.A, s, tol);
    detail::require(sep.disjoint, ErrorCode::SpectraOverlap, "spectra of A and S intersect");
    if (method == TransferConstruction::BasisProbe) return detail::transfer_matrix_probe(plant, s, tol);
    const JordanStructure js = jordan ? *jordan : detail::certify_diagonalizable(s, tol);
    return detail::transfer_matrix_jordan(plant, s, js, tol);
}

struct EigenvalueRank {
    Complex eigenvalue;
    int multiplicity = 1;
    Eigen::Index eta0_rank = 0;
    bool rank_deficient = false; ///< eta_0 loses rank: transmission zero at this point
};

struct TransferRangeReport {
    Eigen::Index rank = 0;
    Eigen::Index full_row_rank = 0; ///< p * nu
    bool surjective = false;
    std::vector<EigenvalueRank> per_eigenvalue;
};

[[nodiscard]] inline TransferRangeReport transfer_range_diagnostics(const MomentTransferOperator& op,
                                                                    const Spectrum& gen_spectrum,
                                                                    const Plant& plant,
                                                                    const Tolerances& tol = {}) {
    TransferRangeReport out;
    out.rank = rank_and_range(op.matrix, tol, op.scale).rank;
    out.full_row_rank = op.p * op.nu;
    out.surjective = out.rank == out.full_row_rank;
    const double cluster = 100.0 * tol.spectral_gap * (1.0 + gen_spectrum.radius());
    const Eigen::Index full = std::min(plant.outputs(), plant.inputs());
    for (const auto& pt : gen_spectrum.distinct(cluster)) {
        EigenvalueRank er;
        er.eigenvalue = pt.value;
        er.multiplicity = pt.multiplicity;
        const KMoment eta0 = k_moment(plant, pt.value, 0, tol);
        er.eta0_rank = complex_rank(eta0.value, tol, eta0.scale);
        er.rank_deficient = er.eta0_rank < full;
        out.per_eigenvalue.push_back(er);
    }
    return out;
}

} // namespace moment_forge
