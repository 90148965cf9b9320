#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "model_io.hpp"

namespace moment_forge::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int parse = 2;
inline constexpr int spectral = 3;
inline constexpr int not_assignable = 4;
inline constexpr int not_stabilizable = 5;
} // namespace exit_code

[[nodiscard]] inline int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::InvalidArgument:
        case ErrorCode::ConfigMismatch: return exit_code::parse;
        case ErrorCode::SpectraOverlap:
        case ErrorCode::PoleAtPoint:
        case ErrorCode::DefectiveGenerator:
        case ErrorCode::IllConditioned: return exit_code::spectral;
        case ErrorCode::NotAssignable: return exit_code::not_assignable;
        case ErrorCode::NotStabilizable:
        case ErrorCode::NotDetectable: return exit_code::not_stabilizable;
        default: return exit_code::failure;
    }
}

// ---------------------------------------------------------------------------
// Arguments
// ---------------------------------------------------------------------------

struct CommonArgs {
    ToleranceOverrides tol_flags;
    std::optional<std::string> report_path;
};

struct AnalyzeArgs {
    CommonArgs common;
    std::string model_path;
};

struct AssignArgs {
    CommonArgs common;
    std::string model_path;
    std::optional<std::string> m_des;   ///< "zero", "open", inline JSON or a file
    std::optional<std::string> weights; ///< inline JSON or a file
    bool require_exact = false;
};

struct SynthesizeArgs {
    AssignArgs assign;
    std::string out_path;
    std::optional<std::string> g_a;
    std::optional<double> stability_margin;
};

struct SimulateArgs {
    CommonArgs common;
    std::string model_path;
    std::string comp_path;
    std::optional<std::string> m_des;
    double t_end = 30.0;
    double dt = 1e-3;
    std::optional<std::string> omega0;
    bool start_on_manifold = false;
    double window = 0.2;
    std::optional<std::string> csv_path;
    std::optional<std::string> gnuplot_path;
};

struct DemoArgs {
    CommonArgs common;
    std::optional<std::string> m_des;
    std::optional<std::string> g_a;
    double stability_margin = himat::kStabilityMargin;
    double t_end = himat::kHorizon;
    double dt = himat::kStep;
    std::optional<std::string> omega0;
    std::optional<std::string> csv_path;
    std::optional<std::string> gnuplot_path;
    std::optional<std::string> comp_out;
};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

/// Preset from MOMENT_FORGE_TOL_PROFILE, then the model file, then command-line flags.
[[nodiscard]] inline Tolerances resolve_tolerances(const ModelFile& mf, const CommonArgs& args) {
    Tolerances tol = tolerances_from_environment();
    mf.tolerances.apply(tol);
    args.tol_flags.apply(tol);
    tol.validate();
    return tol;
}

[[nodiscard]] inline RealVector parse_vector(const std::string& text, const std::string& name) {
    std::string s = text;
    for (char& c : s)
        if (c == '[' || c == ']' || c == ',') c = ' ';
    std::istringstream in(s);
    std::vector<double> values;
    std::string token;
    while (in >> token) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size())
            throw MomentError(ErrorCode::ParseError, name + ": '" + token + "' is not a number");
        values.push_back(v);
    }
    return Eigen::Map<const RealVector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// --m-des: "zero", "open" (the open-loop moment) or a matrix.
[[nodiscard]] inline RealMatrix resolve_m_des(const std::optional<std::string>& flag,
                                              const std::optional<RealMatrix>& from_model,
                                              const Plant& plant, const SignalGenerator& gen,
                                              const Tolerances& tol) {
    if (flag) {
        if (*flag == "zero") return RealMatrix::Zero(plant.outputs(), gen.order());
        if (*flag == "open") return open_loop_moment(plant, gen, tol).moment.value;
        return matrix_argument(*flag, "M_des");
    }
    if (from_model) return *from_model;
    throw MomentError(ErrorCode::ParseError, "no desired moment: add M_des to the model or pass --m-des");
}

[[nodiscard]] inline json spectrum_json(const Spectrum& s) { return complex_list(s.eigenvalues); }

[[nodiscard]] inline json stability_json(const StabilityReport& rep) {
    json j;
    j["plant_stabilizable"] = rep.plant_stabilizable;
    j["plant_detectable"] = rep.plant_detectable;
    j["moment_pair_detectable"] = rep.moment_pair_detectable;
    j["synthesizable"] = rep.synthesizable();
    json off = json::array();
    for (const auto& o : rep.offending)
        off.push_back({{"test", o.test}, {"eigenvalue", {o.eigenvalue.real(), o.eigenvalue.imag()}}});
    j["offending"] = off;
    return j;
}

[[nodiscard]] inline json assignment_json(const AssignmentSolution& sol, const AssignabilityCheck& chk) {
    json j;
    j["M_open"] = matrix_to_json(sol.M_open);
    j["M_des"] = matrix_to_json(sol.M_des);
    j["delta_M"] = matrix_to_json(chk.delta_M);
    j["assignable"] = chk.assignable;
    j["range_defect"] = chk.range_defect;
    j["M_c"] = matrix_to_json(sol.M_c.value);
    j["exact"] = sol.exact;
    j["residual"] = sol.residual;
    j["weighted_residual"] = sol.weighted_residual;
    j["M_des_effective"] = matrix_to_json(sol.M_des_effective.value);
    return j;
}

inline void emit_report(const json& report, const CommonArgs& args, std::ostream& out) {
    const std::string text = report.dump(2) + "\n";
    if (args.report_path) write_text_file(*args.report_path, text);
    out << text;
}

/// Identity-like partition check of the compensator block of the Sylvester solution.
struct PartitionError {
    double top = 0.0;    ///< |Pi_xi,a - I|
    double bottom = 0.0; ///< |Pi_xi,b|
};

[[nodiscard]] inline PartitionError canonical_partition_error(const RealMatrix& pi_xi, Eigen::Index nu) {
    PartitionError e;
    e.top = (pi_xi.topRows(nu) - RealMatrix::Identity(nu, nu)).norm();
    e.bottom = pi_xi.rows() > nu ? pi_xi.bottomRows(pi_xi.rows() - nu).norm() : 0.0;
    return e;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const MomentError& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::failure;
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

[[nodiscard]] inline json analyze_report(const ModelFile& mf, const Tolerances& tol) {
    const Plant& plant = mf.plant;
    const SignalGenerator& gen = mf.gen;
    json j;
    j["dimensions"] = {{"n", plant.states()}, {"m", plant.inputs()}, {"p", plant.outputs()},
                       {"q", plant.exogenous()}, {"nu", gen.order()}};
    j["tolerances"] = {{"spectral_gap", tol.spectral_gap}, {"rank_rel", tol.rank_rel},
                       {"residual_rel", tol.residual_rel}};
    const Spectrum sa = spectrum(plant.A);
    const Spectrum ss = spectrum(gen.S);
    j["spectrum_A"] = spectrum_json(sa);
    j["spectrum_S"] = spectrum_json(ss);
    const SpectralSeparation sep = spectra_disjoint(plant.A, gen.S, tol);
    j["spectra_disjoint"] = {{"disjoint", sep.disjoint}, {"min_gap", sep.min_gap}};
    if (!sep.disjoint)
        throw MomentError(ErrorCode::SpectraOverlap,
                          "A and S share an eigenvalue (gap " + std::to_string(sep.min_gap) + ")");

    j["M_open"] = matrix_to_json(open_loop_moment(plant, gen, tol).moment.value);
    const MomentTransferOperator op = transfer_matrix(plant, gen.S, TransferConstruction::BasisProbe, tol);
    const TransferRangeReport range = transfer_range_diagnostics(op, ss, plant, tol);
    json per = json::array();
    for (const auto& e : range.per_eigenvalue)
        per.push_back({{"eigenvalue", {e.eigenvalue.real(), e.eigenvalue.imag()}},
                       {"multiplicity", e.multiplicity},
                       {"eta0_rank", e.eta0_rank},
                       {"rank_deficient", e.rank_deficient}});
    j["transfer_operator"] = {{"rank", range.rank},
                              {"full_row_rank", range.full_row_rank},
                              {"surjective", range.surjective},
                              {"per_eigenvalue", per}};
    j["stability"] = stability_json(stability_report(plant, gen, tol));
    return j;
}

inline int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ModelFile mf = load_model(args.model_path);
        const Tolerances tol = resolve_tolerances(mf, args.common);
        emit_report(analyze_report(mf, tol), args.common, out);
        return exit_code::ok;
    });
}

[[nodiscard]] inline AssignmentProblem make_problem(const ModelFile& mf, const AssignArgs& args,
                                                    const Tolerances& tol) {
    RealMatrix m_des = resolve_m_des(args.m_des, mf.M_des, mf.plant, mf.gen, tol);
    std::optional<RealMatrix> weights = mf.weights;
    if (args.weights) weights = matrix_argument(*args.weights, "weights");
    return AssignmentProblem(mf.plant, mf.gen, std::move(m_des), std::move(weights));
}

[[nodiscard]] inline json assign_report(const AssignmentProblem& problem, const AssignmentSolution& sol,
                                        const Tolerances& tol) {
    json j = assignment_json(sol, check_assignable(problem, tol));
    const auto nu = problem.gen.order();
    const bool regulation = sol.M_des.norm() <= tol.residual_rel && problem.gen.L.rows() == nu &&
                            (problem.gen.L - RealMatrix::Identity(nu, nu)).norm() <= tol.residual_rel;
    if (regulation) {
        const RegulatorCheck rc = regulator_equations_check(problem.plant, problem.gen, sol, tol);
        j["regulator_check"] = {{"passed", rc.passed}, {"residual", rc.residual}};
    }
    return j;
}

inline int cmd_assign(const AssignArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ModelFile mf = load_model(args.model_path);
        const Tolerances tol = resolve_tolerances(mf, args.common);
        const AssignmentProblem problem = make_problem(mf, args, tol);
        const AssignmentSolution sol = solve_moment(problem, tol);
        emit_report(assign_report(problem, sol, tol), args.common, out);
        if (args.require_exact && !sol.exact) {
            err << "error: NotAssignable: desired moment is not assignable (residual " << sol.residual
                << ")\n";
            return exit_code::not_assignable;
        }
        return exit_code::ok;
    });
}

[[nodiscard]] inline json synthesis_report(const AssignmentProblem& problem, const SynthesisResult& r,
                                           const Tolerances& tol) {
    json j;
    j["assignment"] = assignment_json(r.assignment, check_assignable(problem, tol));
    j["stability"] = stability_json(r.stability);
    j["compensator_order"] = r.compensator.order();
    j["closed_loop_spectrum"] = spectrum_json(r.closed_loop_spectrum);
    j["closed_loop_abscissa"] = r.closed_loop_spectrum.abscissa();
    j["M_cl"] = matrix_to_json(r.closed_loop.M_cl.value);
    j["M_cl_error"] = (r.closed_loop.M_cl.value - problem.M_des).norm();
    j["M_cl_effective_error"] = (r.closed_loop.M_cl.value - r.assignment.M_des_effective.value).norm();
    const PartitionError pe = canonical_partition_error(r.closed_loop.Pi_xi, problem.gen.order());
    j["Pi_xi_partition_error"] = {{"moment_block", pe.top}, {"stabilizing_block", pe.bottom}};
    return j;
}

[[nodiscard]] inline SynthesisOptions synthesis_options(const ModelFile& mf, const SynthesizeArgs& args) {
    SynthesisOptions opt;
    opt.G_a = mf.G_a;
    if (args.g_a) opt.G_a = matrix_argument(*args.g_a, "G_a");
    opt.design = mf.design;
    if (args.stability_margin) opt.design.stability_margin = *args.stability_margin;
    opt.require_exact = args.assign.require_exact;
    return opt;
}

inline int cmd_synthesize(const SynthesizeArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ModelFile mf = load_model(args.assign.model_path);
        const Tolerances tol = resolve_tolerances(mf, args.assign.common);
        const AssignmentProblem problem = make_problem(mf, args.assign, tol);
        const SynthesisResult r = synthesize(problem, synthesis_options(mf, args), tol);
        write_text_file(args.out_path, compensator_to_json(r.compensator, &r.canonical).dump(2) + "\n");
        emit_report(synthesis_report(problem, r, tol), args.assign.common, out);
        return exit_code::ok;
    });
}

struct SimulationOutcome {
    ClosedLoopModel model;
    Trajectory traj;
    SteadyStateError steady;
};

[[nodiscard]] inline SimulationOutcome run_simulation(const Plant& plant, const SignalGenerator& gen,
                                                      const Compensator& comp, const RealMatrix& m_ref,
                                                      const RealVector& omega0, bool on_manifold,
                                                      double t_end, double dt, double window,
                                                      const Tolerances& tol) {
    SimulationOutcome o;
    o.model = make_closed_loop_model(plant, gen, comp, m_ref);
    detail::require(omega0.size() == gen.order(), ErrorCode::DimensionMismatch,
                    "omega0 must have " + std::to_string(gen.order()) + " entries");
    RealVector x0 = RealVector::Zero(plant.states());
    RealVector xi0 = RealVector::Zero(comp.order());
    if (on_manifold) {
        const ClosedLoopMoment cm = closed_loop_moment(plant, gen, comp, tol);
        x0 = cm.Pi_x * omega0;
        xi0 = cm.Pi_xi * omega0;
    }
    o.traj = simulate(o.model, omega0, x0, xi0, t_end, dt);
    o.steady = steady_state_error(o.traj, window);
    return o;
}

inline void write_plot_files(const SimulationOutcome& o, Eigen::Index outputs,
                             const std::optional<std::string>& csv_path,
                             const std::optional<std::string>& gnuplot_path) {
    if (csv_path) {
        std::ofstream csv(*csv_path);
        if (!csv) throw MomentError(ErrorCode::ParseError, "cannot write '" + *csv_path + "'");
        write_trajectory_csv(csv, o.traj, o.model);
    }
    if (gnuplot_path)
        write_text_file(*gnuplot_path,
                        gnuplot_script(csv_path.value_or("trajectory.csv"), o.model, outputs));
}

[[nodiscard]] inline json simulation_json(const SimulationOutcome& o, double window) {
    json j;
    j["samples"] = o.traj.size();
    j["t_end"] = o.traj.times.back();
    j["window"] = window;
    j["steady_state_max_error"] = o.steady.max_err;
    j["steady_state_rms_error"] = o.steady.rms_err;
    j["final_error"] = o.traj.error.back();
    j["closed_loop_abscissa"] =
        spectral_abscissa(o.model.A_total.bottomRightCorner(o.model.n + o.model.rho, o.model.n + o.model.rho));
    return j;
}

inline int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ModelFile mf = load_model(args.model_path);
        const Tolerances tol = resolve_tolerances(mf, args.common);
        const CompensatorFile cf = load_compensator(args.comp_path);
        cf.comp.validate_against(mf.plant);
        std::optional<RealMatrix> reference = mf.M_des ? mf.M_des : cf.M_des;
        const RealMatrix m_ref = resolve_m_des(args.m_des, reference, mf.plant, mf.gen, tol);
        const RealVector omega0 = args.omega0 ? parse_vector(*args.omega0, "omega0")
                                              : RealVector(RealVector::Ones(mf.gen.order()));
        const SimulationOutcome o = run_simulation(mf.plant, mf.gen, cf.comp, m_ref, omega0,
                                                   args.start_on_manifold, args.t_end, args.dt,
                                                   args.window, tol);
        write_plot_files(o, mf.plant.outputs(), args.csv_path, args.gnuplot_path);
        emit_report(simulation_json(o, args.window), args.common, out);
        return exit_code::ok;
    });
}

// ---------------------------------------------------------------------------
// HiMAT demonstration
// ---------------------------------------------------------------------------

inline constexpr double kDemoTrackingBound = 1e-6; ///< trailing-window error
inline constexpr double kDemoWindow = 0.2;
inline constexpr double kDemoMomentBound = 1e-7;    ///< |M_cl - M_des| relative to 1 + |M_des|
inline constexpr double kDemoPartitionBound = 1e-8; ///< |Pi_xi - [I; 0]|

[[nodiscard]] inline ModelFile himat_model() {
    ModelFile mf;
    mf.plant = himat::plant();
    mf.gen = himat::generator();
    mf.M_des = himat::desired_moment();
    mf.design.stability_margin = himat::kStabilityMargin;
    return mf;
}

inline int cmd_demo_himat(const DemoArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        ModelFile mf = himat_model();
        const Tolerances tol = resolve_tolerances(mf, args.common);
        json report;
        std::string failed;
        auto stage = [&](const std::string& name, bool pass, const std::string& detail) {
            out << std::left << std::setw(11) << name << (pass ? "PASS  " : "FAIL  ") << detail << "\n";
            if (!pass && failed.empty()) failed = name;
            return pass;
        };
        auto fmt = [](double v) {
            std::ostringstream s;
            s << std::setprecision(3) << std::scientific << v;
            return s.str();
        };

        // analyze
        const json analysis = analyze_report(mf, tol);
        report["analyze"] = analysis;
        const bool surjective = analysis["transfer_operator"]["surjective"].get<bool>();
        const bool synthesizable = analysis["stability"]["synthesizable"].get<bool>();
        stage("analyze", synthesizable,
              std::string("operator ") + (surjective ? "surjective" : "not surjective") +
                  ", stability report " + (synthesizable ? "all true" : "failed"));

        // assign
        AssignArgs assign_args;
        assign_args.m_des = args.m_des;
        const AssignmentProblem problem = make_problem(mf, assign_args, tol);
        const AssignmentSolution sol = solve_moment(problem, tol);
        report["assign"] = assign_report(problem, sol, tol);
        {
            bool pass = sol.exact;
            std::string detail = std::string(sol.exact ? "exact" : "not exact") + ", residual " + fmt(sol.residual);
            if (report["assign"].contains("regulator_check")) {
                const bool rc = report["assign"]["regulator_check"]["passed"].get<bool>();
                pass = pass && rc;
                detail += ", regulator equations " + std::string(rc ? "hold" : "fail") + " (residual " +
                          fmt(report["assign"]["regulator_check"]["residual"].get<double>()) + ")";
            }
            if (args.m_des && *args.m_des == "open") {
                const double mc = sol.M_c.value.norm();
                pass = pass && mc <= tol.residual_rel * (1.0 + problem.M_des.norm());
                detail += ", |M_c| " + fmt(mc);
            }
            stage("assign", pass, detail);
        }

        // synthesize
        SynthesizeArgs syn_args;
        syn_args.assign = assign_args;
        syn_args.g_a = args.g_a;
        syn_args.stability_margin = args.stability_margin;
        const SynthesisResult r = synthesize(problem, synthesis_options(mf, syn_args), tol);
        report["synthesize"] = synthesis_report(problem, r, tol);
        if (args.comp_out)
            write_text_file(*args.comp_out, compensator_to_json(r.compensator, &r.canonical).dump(2) + "\n");
        {
            const double abscissa = r.closed_loop_spectrum.abscissa();
            const double moment_err = (r.closed_loop.M_cl.value - problem.M_des).norm();
            const PartitionError pe = canonical_partition_error(r.closed_loop.Pi_xi, mf.gen.order());
            const bool pass = abscissa < 0.0 &&
                              moment_err <= kDemoMomentBound * (1.0 + problem.M_des.norm()) &&
                              pe.top <= kDemoPartitionBound && pe.bottom <= kDemoPartitionBound;
            stage("synthesize", pass,
                  "order " + std::to_string(r.compensator.order()) + ", abscissa " + fmt(abscissa) +
                      ", |M_cl - M_des| " + fmt(moment_err) + ", Pi_xi partition " +
                      fmt(std::max(pe.top, pe.bottom)));
        }

        // simulate
        const RealVector omega0 = args.omega0 ? parse_vector(*args.omega0, "omega0")
                                              : RealVector(himat::initial_exosystem_state());
        const SimulationOutcome o = run_simulation(mf.plant, mf.gen, r.compensator, problem.M_des, omega0,
                                                   false, args.t_end, args.dt, kDemoWindow, tol);
        write_plot_files(o, mf.plant.outputs(), args.csv_path, args.gnuplot_path);
        report["simulate"] = simulation_json(o, kDemoWindow);
        stage("simulate",
              o.steady.max_err <= kDemoTrackingBound && o.traj.error.back() <= kDemoTrackingBound,
              "tail max error " + fmt(o.steady.max_err) + ", error at t_end " + fmt(o.traj.error.back()));

        report["passed"] = failed.empty();
        if (args.common.report_path) write_text_file(*args.common.report_path, report.dump(2) + "\n");
        if (!failed.empty()) {
            err << "demo-himat: stage '" << failed << "' failed\n";
            return exit_code::failure;
        }
        out << "demo-himat: all stages passed\n";
        return exit_code::ok;
    });
}

} // namespace moment_forge::cli
