#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace mf = moment_forge::cli;

namespace {

void add_common(CLI::App* app, mf::CommonArgs& common) {
    app->add_option("--tol-gap", common.tol_flags.spectral_gap, "spectral separation tolerance");
    app->add_option("--tol-rank", common.tol_flags.rank_rel, "relative rank tolerance");
    app->add_option("--tol-residual", common.tol_flags.residual_rel, "relative residual tolerance");
    app->add_option("--report", common.report_path, "also write the JSON report to this file");
}

void add_assign_options(CLI::App* app, mf::AssignArgs& a) {
    add_common(app, a.common);
    app->add_option("model", a.model_path, "model file (JSON)")->required();
    app->add_option("--m-des", a.m_des, "desired moment: zero, open, inline JSON or file");
    app->add_option("--weights", a.weights, "positive p x nu weights: inline JSON or file");
    app->add_flag("--require-exact", a.require_exact, "fail with exit code 4 unless exactly assignable");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Moment analysis, assignment and compensator synthesis for linear systems"};
    app.require_subcommand(1);

    mf::AnalyzeArgs analyze;
    auto* c_analyze = app.add_subcommand("analyze", "open-loop moment, spectra and assignability diagnostics");
    add_common(c_analyze, analyze.common);
    c_analyze->add_option("model", analyze.model_path, "model file (JSON)")->required();

    mf::AssignArgs assign;
    auto* c_assign = app.add_subcommand("assign", "compute the compensator moment for M_des");
    add_assign_options(c_assign, assign);

    mf::SynthesizeArgs syn;
    auto* c_syn = app.add_subcommand("synthesize", "build a stabilizing moment-assigning compensator");
    add_assign_options(c_syn, syn.assign);
    c_syn->add_option("-o,--out", syn.out_path, "compensator output file")->required();
    c_syn->add_option("--ga", syn.g_a, "G_a override: inline JSON or file");
    c_syn->add_option("--stability-margin", syn.stability_margin, "shift used in both Riccati designs");

    mf::SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "simulate generator, plant and compensator");
    add_common(c_sim, sim.common);
    c_sim->add_option("model", sim.model_path, "model file (JSON)")->required();
    c_sim->add_option("compensator", sim.comp_path, "compensator file (JSON)")->required();
    c_sim->add_option("--m-des", sim.m_des, "reference moment: zero, open, inline JSON or file");
    c_sim->add_option("--t-end", sim.t_end, "horizon [s]")->capture_default_str();
    c_sim->add_option("--dt", sim.dt, "sample step [s]")->capture_default_str();
    c_sim->add_option("--omega0", sim.omega0, "initial generator state, e.g. 1,1,0");
    c_sim->add_flag("--on-manifold", sim.start_on_manifold, "start plant and compensator on the invariant manifold");
    c_sim->add_option("--window", sim.window, "trailing fraction for steady-state error")->capture_default_str();
    c_sim->add_option("--csv", sim.csv_path, "trajectory CSV output");
    c_sim->add_option("--gnuplot", sim.gnuplot_path, "gnuplot script output");

    mf::DemoArgs demo;
    auto* c_demo = app.add_subcommand("demo-himat", "full pipeline on the embedded HiMAT aircraft model");
    add_common(c_demo, demo.common);
    c_demo->add_option("--m-des", demo.m_des, "desired moment: zero, open, inline JSON or file");
    c_demo->add_option("--ga", demo.g_a, "G_a override: inline JSON or file");
    c_demo->add_option("--stability-margin", demo.stability_margin, "shift used in both Riccati designs")
        ->capture_default_str();
    c_demo->add_option("--t-end", demo.t_end, "horizon [s]")->capture_default_str();
    c_demo->add_option("--dt", demo.dt, "sample step [s]")->capture_default_str();
    c_demo->add_option("--omega0", demo.omega0, "initial generator state (default 1,1,0)");
    c_demo->add_option("--csv", demo.csv_path, "trajectory CSV output");
    c_demo->add_option("--gnuplot", demo.gnuplot_path, "gnuplot script output");
    c_demo->add_option("--out", demo.comp_out, "compensator output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : mf::exit_code::parse;
    }

    if (c_analyze->parsed()) return mf::cmd_analyze(analyze, std::cout, std::cerr);
    if (c_assign->parsed()) return mf::cmd_assign(assign, std::cout, std::cerr);
    if (c_syn->parsed()) return mf::cmd_synthesize(syn, std::cout, std::cerr);
    if (c_sim->parsed()) return mf::cmd_simulate(sim, std::cout, std::cerr);
    return mf::cmd_demo_himat(demo, std::cout, std::cerr);
}
