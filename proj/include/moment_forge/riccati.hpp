#pragma once

#include <cmath>
#include <string>

#include "linalg.hpp"

namespace moment_forge {

struct CareSolution {
    RealMatrix X; ///< stabilizing solution of A'X + XA - X B R^{-1} B' X + Q = 0
    RealMatrix K; ///< R^{-1} B' X
    double residual = 0.0;
};

namespace detail {

/// sign(H) by scaled Newton iteration. H must have no eigenvalues on the
/// imaginary axis; the iterate goes singular otherwise.
inline RealMatrix matrix_sign(const RealMatrix& h) {
    const Eigen::Index n = h.rows();
    RealMatrix z = h;
    constexpr int kMaxIter = 100;
    for (int it = 0; it < kMaxIter; ++it) {
        const Eigen::PartialPivLU<RealMatrix> lu(z);
        const double logdet = lu.matrixLU().diagonal().array().abs().log().sum();
        require(std::isfinite(logdet), ErrorCode::RiccatiFailure,
                "Hamiltonian has eigenvalues on the imaginary axis");
        const double c = std::exp(logdet / static_cast<double>(n)); // determinant scaling
        const RealMatrix next = 0.5 * (z / c + c * lu.inverse());
        require(next.allFinite(), ErrorCode::RiccatiFailure, "sign iteration diverged");
        const double change = (next - z).norm();
        z = next;
        if (change <= 1e-13 * z.norm()) return z;
    }
    // Scaling stalls the last digits on some inputs; unscaled steps finish the job.
    for (int it = 0; it < 10; ++it) {
        const RealMatrix next = 0.5 * (z + z.inverse());
        const double change = (next - z).norm();
        z = next;
        if (change <= 1e-13 * z.norm()) return z;
    }
    throw MomentError(ErrorCode::RiccatiFailure, "sign iteration did not converge");
}

inline double care_residual(const RealMatrix& a, const RealMatrix& g, const RealMatrix& q,
                            const RealMatrix& x) {
    return (a.transpose() * x + x * a - x * g * x + q).norm() / std::max(1.0, q.norm());
}

} // namespace detail

/// Stabilizing solution of the continuous algebraic Riccati equation.
/// Needs (A,B) stabilizable, R > 0, and no unobservable imaginary-axis mode of (Q,A).
[[nodiscard]] inline CareSolution solve_care(const RealMatrix& a, const RealMatrix& b,
                                             const RealMatrix& q, const RealMatrix& r,
                                             const Tolerances& tol = {}) {
    detail::require_square(a, "A");
    const Eigen::Index n = a.rows();
    detail::require(b.rows() == n && q.rows() == n && q.cols() == n && r.rows() == b.cols() &&
                        r.cols() == b.cols(),
                    ErrorCode::DimensionMismatch, "CARE dimensions do not match");
    const Eigen::LLT<RealMatrix> r_llt(r);
    detail::require(r_llt.info() == Eigen::Success, ErrorCode::InvalidArgument,
                    "input weight R must be positive definite");
    const RealMatrix r_inv_bt = r_llt.solve(b.transpose());
    const RealMatrix g = b * r_inv_bt;

    RealMatrix ham(2 * n, 2 * n);
    ham << a, -g, -q, -a.transpose();
    const RealMatrix w = detail::matrix_sign(ham);

    // Stable invariant subspace: (W - I) [I; X] = 0, solved in least squares.
    const RealMatrix id = RealMatrix::Identity(n, n);
    RealMatrix lhs(2 * n, n), rhs(2 * n, n);
    lhs << w.topRightCorner(n, n), w.bottomRightCorner(n, n) + id;
    rhs << w.topLeftCorner(n, n) + id, w.bottomLeftCorner(n, n);
    RealMatrix x = lhs.colPivHouseholderQr().solve(-rhs);
    x = 0.5 * (x + x.transpose()).eval();
    detail::require(x.allFinite(), ErrorCode::RiccatiFailure, "Riccati solution is not finite");

    // Newton-Kleinman polish: (A - G X)' X+ + X+ (A - G X) = -(Q + X G X).
    for (int it = 0; it < 3; ++it) {
        const RealMatrix acl = a - g * x;
        if (!is_hurwitz(acl, tol)) break;
        if (detail::care_residual(a, g, q, x) <= 1e-3 * tol.residual_rel) break;
        const RealMatrix next =
            solve_sylvester(acl, -acl.transpose(), -(q + x * g * x), tol);
        x = 0.5 * (next + next.transpose());
    }

    CareSolution out;
    out.X = x;
    out.K = r_inv_bt * x;
    out.residual = detail::care_residual(a, g, q, x);
    detail::require(out.residual <= std::sqrt(tol.residual_rel), ErrorCode::RiccatiFailure,
                    "Riccati residual " + std::to_string(out.residual) + " too large");
    detail::require(is_hurwitz(a - b * out.K, tol), ErrorCode::RiccatiFailure,
                    "Riccati solution is not stabilizing");
    return out;
}

} // namespace moment_forge
