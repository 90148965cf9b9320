#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "errors.hpp"
#include "tolerances.hpp"

namespace moment_forge {

using Complex = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

namespace detail {

inline void require_finite(const RealMatrix& m, const std::string& name) {
    require(m.allFinite(), ErrorCode::InvalidArgument, name + " has non-finite entries");
}

inline void require_square(const RealMatrix& m, const std::string& name) {
    require(m.rows() == m.cols(), ErrorCode::DimensionMismatch,
            name + " must be square, got " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()));
}

inline std::string dims(const RealMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace detail

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

struct SpectralPoint {
    Complex value;
    int multiplicity = 1;
};

/// Eigenvalues of a square matrix, each listed once per algebraic multiplicity.
struct Spectrum {
    std::vector<Complex> eigenvalues;

    [[nodiscard]] std::size_t size() const { return eigenvalues.size(); }

    [[nodiscard]] double radius() const {
        double r = 0.0;
        for (const auto& z : eigenvalues) r = std::max(r, std::abs(z));
        return r;
    }

    /// Largest real part; -inf for an empty spectrum.
    [[nodiscard]] double abscissa() const {
        double a = -std::numeric_limits<double>::infinity();
        for (const auto& z : eigenvalues) a = std::max(a, z.real());
        return a;
    }

    /// Groups eigenvalues closer than `cluster_radius` and reports the cluster
    /// mean. The mean of a perturbed multiple eigenvalue is far more accurate
    /// than any single member.
    [[nodiscard]] std::vector<SpectralPoint> distinct(double cluster_radius) const {
        std::vector<bool> used(eigenvalues.size(), false);
        std::vector<SpectralPoint> out;
        for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
            if (used[i]) continue;
            Complex sum = eigenvalues[i];
            int count = 1;
            used[i] = true;
            for (std::size_t j = i + 1; j < eigenvalues.size(); ++j) {
                if (!used[j] && std::abs(eigenvalues[j] - eigenvalues[i]) <= cluster_radius) {
                    used[j] = true;
                    sum += eigenvalues[j];
                    ++count;
                }
            }
            out.push_back({sum / static_cast<double>(count), count});
        }
        return out;
    }
};

[[nodiscard]] inline Spectrum spectrum(const RealMatrix& m) {
    detail::require_square(m, "matrix");
    Spectrum s;
    if (m.rows() == 0) return s;
    Eigen::EigenSolver<RealMatrix> es(m, /*computeEigenvectors=*/false);
    detail::require(es.info() == Eigen::Success, ErrorCode::NumericalFailure,
                    "eigenvalue iteration did not converge");
    s.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + m.rows());
    return s;
}

[[nodiscard]] inline double spectral_abscissa(const RealMatrix& m) { return spectrum(m).abscissa(); }

/// Hurwitz with margin: every eigenvalue has real part below -spectral_gap.
[[nodiscard]] inline bool is_hurwitz(const RealMatrix& m, const Tolerances& tol = {}) {
    return spectral_abscissa(m) < -tol.spectral_gap;
}

/// Largest distance in a greedy nearest-neighbour matching of two spectra viewed
/// as multisets; +inf when their sizes differ.
[[nodiscard]] inline double spectrum_distance(const Spectrum& a, const Spectrum& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    std::vector<bool> used(b.size(), false);
    double worst = 0.0;
    for (const auto& z : a.eigenvalues) {
        std::size_t best = b.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double d = std::abs(z - b.eigenvalues[j]);
            if (!used[j] && d < best_d) {
                best_d = d;
                best = j;
            }
        }
        used[best] = true;
        worst = std::max(worst, best_d);
    }
    return worst;
}

struct SpectralSeparation {
    bool disjoint = true;
    double min_gap = std::numeric_limits<double>::infinity();
};

/// Disjointness of two spectra, with the threshold scaled by (1 + the larger
/// spectral radius).
[[nodiscard]] inline SpectralSeparation spectra_disjoint(const RealMatrix& a, const RealMatrix& s,
                                                         const Tolerances& tol = {}) {
    const Spectrum sa = spectrum(a);
    const Spectrum ss = spectrum(s);
    SpectralSeparation out;
    for (const auto& x : sa.eigenvalues)
        for (const auto& y : ss.eigenvalues) out.min_gap = std::min(out.min_gap, std::abs(x - y));
    const double scale = 1.0 + std::max(sa.radius(), ss.radius());
    out.disjoint = out.min_gap > tol.spectral_gap * scale;
    return out;
}

// ---------------------------------------------------------------------------
// Kronecker algebra (vec is column stacking throughout)
// ---------------------------------------------------------------------------

template <typename DerivedA, typename DerivedB>
[[nodiscard]] auto kron(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(),
                                                              a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

template <typename Derived>
[[nodiscard]] auto vec(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense = m;
    return Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(
        Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(dense.data(), dense.size()));
}

template <typename Derived>
[[nodiscard]] auto unvec(const Eigen::MatrixBase<Derived>& v, Eigen::Index rows, Eigen::Index cols) {
    using Scalar = typename Derived::Scalar;
    detail::require(v.cols() == 1 && v.rows() == rows * cols, ErrorCode::DimensionMismatch,
                    "unvec: length " + std::to_string(v.size()) + " does not equal " +
                        std::to_string(rows) + "*" + std::to_string(cols));
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dense = v;
    return Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>(
        Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>(dense.data(), rows,
                                                                                 cols));
}

// ---------------------------------------------------------------------------
// Sylvester equation  Pi S = A Pi + R
// ---------------------------------------------------------------------------

/// Bartels-Stewart solver on complex Schur forms of A and S. The factorizations
/// are computed once, so repeated right-hand sides are cheap.
class SylvesterSolver {
public:
    SylvesterSolver(const RealMatrix& s, const RealMatrix& a, const Tolerances& tol = {})
        : s_(s), a_(a), tol_(tol) {
        detail::require_square(s, "S");
        detail::require_square(a, "A");
        detail::require_finite(s, "S");
        detail::require_finite(a, "A");
        const SpectralSeparation sep = spectra_disjoint(a, s, tol);
        detail::require(sep.disjoint, ErrorCode::SpectraOverlap,
                        "spectra of A and S intersect (min gap " + std::to_string(sep.min_gap) +
                            ")");
        if (a.rows() > 0 && s.rows() > 0) {
            Eigen::ComplexSchur<RealMatrix> schur_a(a);
            Eigen::ComplexSchur<RealMatrix> schur_s(s);
            detail::require(schur_a.info() == Eigen::Success && schur_s.info() == Eigen::Success,
                            ErrorCode::NumericalFailure, "Schur decomposition failed");
            ta_ = schur_a.matrixT();
            ua_ = schur_a.matrixU();
            ts_ = schur_s.matrixT();
            us_ = schur_s.matrixU();
        }
    }

    [[nodiscard]] Eigen::Index state_dim() const { return a_.rows(); }
    [[nodiscard]] Eigen::Index generator_dim() const { return s_.rows(); }

    [[nodiscard]] RealMatrix solve(const RealMatrix& r) const {
        detail::require(r.rows() == a_.rows() && r.cols() == s_.rows(),
                        ErrorCode::DimensionMismatch,
                        "Sylvester right-hand side is " + detail::dims(r) + ", expected " +
                            std::to_string(a_.rows()) + "x" + std::to_string(s_.rows()));
        detail::require_finite(r, "R");
        if (r.size() == 0) return RealMatrix::Zero(r.rows(), r.cols());

        RealMatrix pi = solve_once(r);
        double res = relative_residual(pi, r);
        if (res > 1e-3 * tol_.residual_rel) {
            // one step of iterative refinement
            pi += solve_once(r - (pi * s_ - a_ * pi));
            res = relative_residual(pi, r);
        }
        detail::require(res <= tol_.residual_rel, ErrorCode::IllConditioned,
                        "Sylvester residual " + std::to_string(res) + " exceeds bound");
        return pi;
    }

    [[nodiscard]] double relative_residual(const RealMatrix& pi, const RealMatrix& r) const {
        return (pi * s_ - a_ * pi - r).norm() / std::max(1.0, r.norm());
    }

private:
    [[nodiscard]] RealMatrix solve_once(const RealMatrix& r) const {
        // With A = Ua Ta Ua^*, S = Us Ts Us^*, Y = Ua^* Pi Us solves Y Ts - Ta Y = F.
        const ComplexMatrix f = ua_.adjoint() * r.cast<Complex>() * us_;
        const Eigen::Index n = a_.rows();
        const Eigen::Index nu = s_.rows();
        ComplexMatrix y(n, nu);
        const ComplexMatrix eye = ComplexMatrix::Identity(n, n);
        for (Eigen::Index j = 0; j < nu; ++j) {
            ComplexVector rhs = f.col(j);
            for (Eigen::Index k = 0; k < j; ++k) rhs -= ts_(k, j) * y.col(k);
            const ComplexMatrix shifted = ts_(j, j) * eye - ta_;
            y.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
        }
        return (ua_ * y * us_.adjoint()).real();
    }

    RealMatrix s_;
    RealMatrix a_;
    Tolerances tol_;
    ComplexMatrix ta_, ua_, ts_, us_;
};

/// Unique Pi with Pi S = A Pi + R; requires sigma(A) and sigma(S) disjoint.
[[nodiscard]] inline RealMatrix solve_sylvester(const RealMatrix& s, const RealMatrix& a,
                                                const RealMatrix& r, const Tolerances& tol = {}) {
    return SylvesterSolver(s, a, tol).solve(r);
}

inline constexpr Eigen::Index kKroneckerSylvesterLimit = 400;

/// Dense route: (S^T (x) I - I (x) A) vec(Pi) = vec(R). Kept as a cross-check for
/// the Schur path; limited to n * nu <= 400.
[[nodiscard]] inline RealMatrix solve_sylvester_kronecker(const RealMatrix& s, const RealMatrix& a,
                                                          const RealMatrix& r,
                                                          const Tolerances& tol = {}) {
    detail::require_square(s, "S");
    detail::require_square(a, "A");
    const Eigen::Index n = a.rows();
    const Eigen::Index nu = s.rows();
    detail::require(r.rows() == n && r.cols() == nu, ErrorCode::DimensionMismatch,
                    "Sylvester right-hand side has wrong shape " + detail::dims(r));
    detail::require(n * nu <= kKroneckerSylvesterLimit, ErrorCode::InvalidArgument,
                    "Kronecker Sylvester path limited to n*nu <= 400");
    const SpectralSeparation sep = spectra_disjoint(a, s, tol);
    detail::require(sep.disjoint, ErrorCode::SpectraOverlap, "spectra of A and S intersect");
    const RealMatrix op = kron(RealMatrix(s.transpose()), RealMatrix::Identity(n, n)) -
                          kron(RealMatrix::Identity(nu, nu), a);
    const RealVector x = op.fullPivLu().solve(vec(r));
    return unvec(x, n, nu);
}

// ---------------------------------------------------------------------------
// Rank and range
// ---------------------------------------------------------------------------

struct RankRange {
    Eigen::Index rank = 0;
    RealMatrix range_basis; ///< orthonormal columns spanning R(M)
    RealMatrix null_basis;  ///< orthonormal columns spanning N(M)
    RealVector singular_values;
};

/// `scale` is an optional magnitude floor for the cutoff: when M is the result of
/// cancellation between terms of size `scale`, singular values below
/// rank_rel * dim * scale are treated as zero even if they dominate M.
[[nodiscard]] inline RankRange rank_and_range(const RealMatrix& m, const Tolerances& tol = {},
                                              double scale = 0.0) {
    detail::require_finite(m, "matrix");
    RankRange out;
    if (m.size() == 0) {
        out.range_basis = RealMatrix::Zero(m.rows(), 0);
        out.null_basis = RealMatrix::Identity(m.cols(), m.cols());
        return out;
    }
    Eigen::JacobiSVD<RealMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.singular_values = svd.singularValues();
    const double smax = out.singular_values.size() > 0 ? out.singular_values(0) : 0.0;
    const double cutoff = tol.rank_cutoff(m.rows(), m.cols(), std::max(smax, scale));
    for (Eigen::Index i = 0; i < out.singular_values.size(); ++i)
        if (out.singular_values(i) > cutoff && out.singular_values(i) > 0.0) ++out.rank;
    out.range_basis = svd.matrixU().leftCols(out.rank);
    out.null_basis = svd.matrixV().rightCols(m.cols() - out.rank);
    return out;
}

/// Numerical rank of a complex matrix under the same cutoff rule.
[[nodiscard]] inline Eigen::Index complex_rank(const ComplexMatrix& m, const Tolerances& tol = {},
                                               double scale = 0.0) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    const auto& sv = svd.singularValues();
    const double cutoff = tol.rank_cutoff(m.rows(), m.cols(), std::max(sv(0), scale));
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff && sv(i) > 0.0) ++r;
    return r;
}

} // namespace moment_forge
