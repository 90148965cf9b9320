#pragma once

#include <optional>
#include <string>

#include "linalg.hpp"
#include "moments.hpp"
#include "system.hpp"

namespace moment_forge {

struct AssignmentProblem {
    Plant plant;
    SignalGenerator gen;
    RealMatrix M_des;                  ///< p x nu
    std::optional<RealMatrix> weights; ///< p x nu positive penalties on the moment difference

    AssignmentProblem() = default;
    AssignmentProblem(Plant plant_, SignalGenerator gen_, RealMatrix m_des,
                      std::optional<RealMatrix> weights_ = std::nullopt)
        : plant(std::move(plant_)), gen(std::move(gen_)), M_des(std::move(m_des)),
          weights(std::move(weights_)) {
        validate();
    }

    void validate() const {
        gen.validate_against(plant);
        detail::require(M_des.rows() == plant.outputs() && M_des.cols() == gen.order(),
                        ErrorCode::DimensionMismatch,
                        "M_des must be p x nu, got " + detail::dims(M_des));
        detail::require_finite(M_des, "M_des");
        if (weights) {
            detail::require(weights->rows() == M_des.rows() && weights->cols() == M_des.cols(),
                            ErrorCode::DimensionMismatch, "weights must match the shape of M_des");
            detail::require(weights->allFinite() && (weights->array() > 0.0).all(),
                            ErrorCode::InvalidArgument, "weights must be finite and positive");
        }
    }
};

struct AssignabilityCheck {
    bool assignable = false;
    RealMatrix delta_M;        ///< M_des - M_open
    double range_defect = 0.0; ///< |vec(delta_M) - T x*| for the least-squares x*
};

struct AssignmentSolution {
    MomentMatrix M_c;
    bool exact = false;
    double residual = 0.0;          ///< |M_des_effective - M_des|_F
    double weighted_residual = 0.0; ///< same difference in the weighted norm
    MomentMatrix M_des_effective;   ///< M_open + T_S(M_c)
    RealMatrix M_des;               ///< the requested target
    RealMatrix M_open;
};

namespace detail {

struct LeastSquares {
    RealVector x;
    Eigen::Index rank = 0;
};

/// Minimum-norm minimizer of |W^{1/2}(b - T x)| via SVD of W^{1/2} T.
inline LeastSquares min_norm_least_squares(const RealMatrix& t, const RealVector& b,
                                           const RealVector& w_sqrt, double scale,
                                           const Tolerances& tol) {
    const RealMatrix wt = w_sqrt.asDiagonal() * t;
    const RealVector wb = w_sqrt.asDiagonal() * b;
    LeastSquares out;
    out.x = RealVector::Zero(t.cols());
    if (t.size() == 0) return out;
    Eigen::JacobiSVD<RealMatrix> svd(wt, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RealVector& sv = svd.singularValues();
    const double cutoff =
        tol.rank_cutoff(t.rows(), t.cols(), std::max(sv(0), scale * w_sqrt.maxCoeff()));
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (!(sv(i) > cutoff)) break;
        out.x += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(wb) / sv(i));
        ++out.rank;
    }
    return out;
}

inline bool within_exact_bound(double residual, const RealMatrix& m_des, const Tolerances& tol) {
    return residual <= tol.residual_rel * (1.0 + m_des.norm());
}

} // namespace detail

/// Decides whether M_des - M_open lies in the range of the moment transfer operator.
[[nodiscard]] inline AssignabilityCheck check_assignable(const AssignmentProblem& problem,
                                                         const Tolerances& tol = {}) {
    const OpenLoopMoment open = open_loop_moment(problem.plant, problem.gen, tol);
    const MomentTransferOperator op = transfer_matrix(problem.plant, problem.gen.S,
                                                      TransferConstruction::BasisProbe, tol);
    AssignabilityCheck out;
    out.delta_M = problem.M_des - open.moment.value;
    const RealVector b = vec(out.delta_M);
    const auto ls = detail::min_norm_least_squares(op.matrix, b, RealVector::Ones(b.size()),
                                                   op.scale, tol);
    out.range_defect = (b - op.matrix * ls.x).norm();
    out.assignable = detail::within_exact_bound(out.range_defect, problem.M_des, tol);
    return out;
}

/// Compensator moment M_c with T_S(M_c) = M_des - M_open when one exists
/// (minimum norm), otherwise the weighted least-squares minimizer.
[[nodiscard]] inline AssignmentSolution solve_moment(const AssignmentProblem& problem,
                                                     const Tolerances& tol = {}) {
    problem.validate();
    const OpenLoopMoment open = open_loop_moment(problem.plant, problem.gen, tol);
    const MomentTransferOperator op = transfer_matrix(problem.plant, problem.gen.S,
                                                      TransferConstruction::BasisProbe, tol);
    const RealMatrix delta = problem.M_des - open.moment.value;
    const RealVector b = vec(delta);
    const RealVector w = problem.weights ? RealVector(vec(*problem.weights))
                                         : RealVector(RealVector::Ones(b.size()));
    const RealVector w_sqrt = w.cwiseSqrt();
    const auto ls = detail::min_norm_least_squares(op.matrix, b, w_sqrt, op.scale, tol);

    AssignmentSolution sol;
    sol.M_open = open.moment.value;
    sol.M_des = problem.M_des;
    sol.M_c = {unvec(ls.x, op.m, op.nu), MomentKind::Compensator};
    // Recompute the achieved moment through the Sylvester route, not the dense matrix.
    const RealMatrix achieved =
        open.moment.value + transfer_apply(problem.plant, problem.gen.S, sol.M_c.value, tol);
    sol.M_des_effective = {achieved, MomentKind::Desired};
    const RealMatrix diff = achieved - problem.M_des;
    sol.residual = diff.norm();
    sol.weighted_residual = (w_sqrt.asDiagonal() * vec(diff)).norm();
    sol.exact = detail::within_exact_bound(sol.residual, problem.M_des, tol);
    return sol;
}

struct RegulatorCheck {
    bool passed = false;
    double residual = 0.0; ///< |C Pi + D M_c + Q|_F
    RealMatrix Pi;         ///< Pi S = A Pi + B M_c + P
};

/// Output-regulation reading of an assignment with M_des = 0 and L = I:
/// (Pi, M_c) must solve the classical regulator equations.
[[nodiscard]] inline RegulatorCheck regulator_equations_check(const Plant& plant,
                                                              const SignalGenerator& gen,
                                                              const AssignmentSolution& solution,
                                                              const Tolerances& tol = {}) {
    gen.validate_against(plant);
    const auto nu = gen.order();
    detail::require(gen.L.rows() == nu &&
                        (gen.L - RealMatrix::Identity(nu, nu)).norm() <= tol.residual_rel,
                    ErrorCode::ConfigMismatch, "regulator check needs L = I (so q = nu)");
    detail::require(solution.M_des.size() > 0 && solution.M_des.norm() <= tol.residual_rel,
                    ErrorCode::ConfigMismatch, "regulator check needs M_des = 0");
    detail::require(solution.M_c.value.rows() == plant.inputs() &&
                        solution.M_c.value.cols() == nu,
                    ErrorCode::DimensionMismatch, "M_c does not match plant and generator");
    RegulatorCheck out;
    out.Pi = solve_sylvester(gen.S, plant.A, plant.P + plant.B * solution.M_c.value, tol);
    out.residual = (plant.C * out.Pi + plant.D * solution.M_c.value + plant.Q).norm();
    out.passed = out.residual <= tol.residual_rel * (1.0 + plant.Q.norm());
    return out;
}

} // namespace moment_forge
