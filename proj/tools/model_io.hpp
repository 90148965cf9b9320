#pragma once

#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "moment_forge/moment_forge.hpp"

namespace moment_forge::cli {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Matrices as arrays of rows
// ---------------------------------------------------------------------------

inline json matrix_to_json(const RealMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline RealMatrix matrix_from_json(const json& j, const std::string& name) {
    auto fail = [&name](const std::string& why) {
        throw MomentError(ErrorCode::ParseError, "matrix '" + name + "': " + why);
    };
    if (j.is_number()) return RealMatrix::Constant(1, 1, j.get<double>());
    if (!j.is_array()) fail("expected an array of rows");
    if (j.empty()) return RealMatrix(0, 0);
    // a flat list of numbers is a single row
    if (j.front().is_number()) return matrix_from_json(json::array({j}), name);
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (!j.front().is_array()) fail("rows must be arrays");
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    RealMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            fail("row " + std::to_string(i) + " does not have " + std::to_string(cols) + " entries");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const json& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) fail("non-numeric entry at (" + std::to_string(i) + "," + std::to_string(c) + ")");
            m(i, c) = v.get<double>();
        }
    }
    return m;
}

inline json complex_list(const std::vector<Complex>& values) {
    json out = json::array();
    for (const auto& z : values) out.push_back(json::array({z.real(), z.imag()}));
    return out;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MomentError(ErrorCode::ParseError, "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw MomentError(ErrorCode::ParseError, "'" + path + "': " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw MomentError(ErrorCode::ParseError, "cannot write '" + path + "'");
    out << text;
}

/// A matrix given either inline ("[[1,2],[3,4]]") or as a file holding a bare
/// matrix or an object with the matrix under `key`.
inline RealMatrix matrix_argument(const std::string& arg, const std::string& key) {
    json j;
    const auto first = arg.find_first_not_of(" \t");
    if (first != std::string::npos && (arg[first] == '[' || arg[first] == '{')) {
        try {
            j = json::parse(arg);
        } catch (const json::exception& e) {
            throw MomentError(ErrorCode::ParseError, key + ": " + e.what());
        }
    } else {
        j = read_json_file(arg);
    }
    if (j.is_object()) {
        if (!j.contains(key)) throw MomentError(ErrorCode::ParseError, "no '" + key + "' entry in " + arg);
        return matrix_from_json(j.at(key), key);
    }
    return matrix_from_json(j, key);
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

struct ToleranceOverrides {
    std::optional<double> spectral_gap, rank_rel, residual_rel;

    void apply(Tolerances& tol) const {
        if (spectral_gap) tol.spectral_gap = *spectral_gap;
        if (rank_rel) tol.rank_rel = *rank_rel;
        if (residual_rel) tol.residual_rel = *residual_rel;
    }
    [[nodiscard]] bool empty() const { return !spectral_gap && !rank_rel && !residual_rel; }
};

struct ModelFile {
    Plant plant;
    SignalGenerator gen;
    std::optional<RealMatrix> M_des;
    std::optional<RealMatrix> weights;
    std::optional<RealMatrix> G_a;
    ToleranceOverrides tolerances;
    DesignParams design;
};

inline ModelFile model_from_json(const json& j) {
    if (!j.is_object()) throw MomentError(ErrorCode::ParseError, "model file must be a JSON object");
    auto need = [&j](const char* key) {
        if (!j.contains(key)) throw MomentError(ErrorCode::ParseError, std::string("missing matrix '") + key + "'");
        return matrix_from_json(j.at(key), key);
    };
    auto maybe = [&j](const char* key) -> std::optional<RealMatrix> {
        if (!j.contains(key)) return std::nullopt;
        return matrix_from_json(j.at(key), key);
    };

    ModelFile mf;
    RealMatrix a = need("A"), b = need("B"), c = need("C"), p = need("P");
    RealMatrix d = maybe("D").value_or(RealMatrix::Zero(c.rows(), b.cols()));
    RealMatrix q = maybe("Q").value_or(RealMatrix::Zero(c.rows(), p.cols()));
    mf.plant = Plant(a, b, c, d, p, q);
    mf.gen = SignalGenerator(need("S"), need("L"));
    mf.gen.validate_against(mf.plant);
    mf.M_des = maybe("M_des");
    mf.weights = maybe("weights");
    mf.G_a = maybe("G_a");

    if (j.contains("tolerances")) {
        const json& t = j.at("tolerances");
        auto num = [&t](const char* key) -> std::optional<double> {
            if (!t.contains(key)) return std::nullopt;
            if (!t.at(key).is_number())
                throw MomentError(ErrorCode::ParseError, std::string("tolerance '") + key + "' must be a number");
            return t.at(key).get<double>();
        };
        mf.tolerances.spectral_gap = num("spectral_gap");
        mf.tolerances.rank_rel = num("rank_rel");
        mf.tolerances.residual_rel = num("residual_rel");
    }
    if (j.contains("design")) {
        const json& dj = j.at("design");
        auto dm = [&dj](const char* key) -> std::optional<RealMatrix> {
            if (!dj.contains(key)) return std::nullopt;
            return matrix_from_json(dj.at(key), key);
        };
        mf.design.state_weight = dm("state_weight");
        mf.design.input_weight = dm("input_weight");
        mf.design.process_weight = dm("process_weight");
        mf.design.measurement_weight = dm("measurement_weight");
        if (dj.contains("stability_margin")) {
            if (!dj.at("stability_margin").is_number())
                throw MomentError(ErrorCode::ParseError, "stability_margin must be a number");
            mf.design.stability_margin = dj.at("stability_margin").get<double>();
        }
    }
    return mf;
}

inline json model_to_json(const ModelFile& mf) {
    json j;
    j["A"] = matrix_to_json(mf.plant.A);
    j["B"] = matrix_to_json(mf.plant.B);
    j["C"] = matrix_to_json(mf.plant.C);
    j["D"] = matrix_to_json(mf.plant.D);
    j["P"] = matrix_to_json(mf.plant.P);
    j["Q"] = matrix_to_json(mf.plant.Q);
    j["S"] = matrix_to_json(mf.gen.S);
    j["L"] = matrix_to_json(mf.gen.L);
    if (mf.M_des) j["M_des"] = matrix_to_json(*mf.M_des);
    if (mf.weights) j["weights"] = matrix_to_json(*mf.weights);
    if (mf.G_a) j["G_a"] = matrix_to_json(*mf.G_a);
    if (!mf.tolerances.empty()) {
        json t = json::object();
        if (mf.tolerances.spectral_gap) t["spectral_gap"] = *mf.tolerances.spectral_gap;
        if (mf.tolerances.rank_rel) t["rank_rel"] = *mf.tolerances.rank_rel;
        if (mf.tolerances.residual_rel) t["residual_rel"] = *mf.tolerances.residual_rel;
        j["tolerances"] = t;
    }
    const DesignParams& d = mf.design;
    if (d.state_weight || d.input_weight || d.process_weight || d.measurement_weight ||
        d.stability_margin != 0.0) {
        json dj = json::object();
        if (d.state_weight) dj["state_weight"] = matrix_to_json(*d.state_weight);
        if (d.input_weight) dj["input_weight"] = matrix_to_json(*d.input_weight);
        if (d.process_weight) dj["process_weight"] = matrix_to_json(*d.process_weight);
        if (d.measurement_weight) dj["measurement_weight"] = matrix_to_json(*d.measurement_weight);
        dj["stability_margin"] = d.stability_margin;
        j["design"] = dj;
    }
    return j;
}

inline ModelFile load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

inline void save_model(const ModelFile& mf, const std::string& path) {
    write_text_file(path, model_to_json(mf).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Compensator files
// ---------------------------------------------------------------------------

struct CompensatorFile {
    Compensator comp;
    std::optional<RealMatrix> M_des;
};

inline json compensator_to_json(const Compensator& comp, const CanonicalCompensator* canonical) {
    json j;
    j["F"] = matrix_to_json(comp.F);
    j["G"] = matrix_to_json(comp.G);
    j["H"] = matrix_to_json(comp.H);
    if (canonical != nullptr) {
        j["M_des"] = matrix_to_json(canonical->M_des);
        json c;
        c["S"] = matrix_to_json(canonical->S);
        c["M_c"] = matrix_to_json(canonical->M_c);
        c["F_a"] = matrix_to_json(canonical->F_a);
        c["F_b"] = matrix_to_json(canonical->F_b);
        c["G_a"] = matrix_to_json(canonical->G_a);
        c["G_b"] = matrix_to_json(canonical->G_b);
        c["H_b"] = matrix_to_json(canonical->H_b);
        c["rho"] = canonical->rho();
        j["canonical"] = c;
    }
    return j;
}

inline CompensatorFile compensator_from_json(const json& j) {
    if (!j.is_object()) throw MomentError(ErrorCode::ParseError, "compensator file must be a JSON object");
    for (const char* key : {"F", "G", "H"})
        if (!j.contains(key)) throw MomentError(ErrorCode::ParseError, std::string("missing matrix '") + key + "'");
    CompensatorFile cf;
    cf.comp = Compensator(matrix_from_json(j.at("F"), "F"), matrix_from_json(j.at("G"), "G"),
                          matrix_from_json(j.at("H"), "H"));
    if (j.contains("M_des")) cf.M_des = matrix_from_json(j.at("M_des"), "M_des");
    return cf;
}

inline CompensatorFile load_compensator(const std::string& path) {
    return compensator_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const ClosedLoopModel& model) {
    const auto p = traj.outputs.empty() ? Eigen::Index{0} : traj.outputs.front().size();
    out << "t";
    for (Eigen::Index i = 1; i <= model.nu; ++i) out << ",omega" << i;
    for (Eigen::Index i = 1; i <= model.n; ++i) out << ",x" << i;
    for (Eigen::Index i = 1; i <= model.rho; ++i) out << ",xi" << i;
    for (Eigen::Index i = 1; i <= p; ++i) out << ",y" << i;
    for (Eigen::Index i = 1; i <= p; ++i) out << ",ydes" << i;
    out << ",err\n";
    out << std::setprecision(12);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << traj.times[k];
        for (Eigen::Index i = 0; i < traj.states[k].size(); ++i) out << ',' << traj.states[k](i);
        for (Eigen::Index i = 0; i < p; ++i) out << ',' << traj.outputs[k](i);
        for (Eigen::Index i = 0; i < p; ++i) out << ',' << traj.desired[k](i);
        out << ',' << traj.error[k] << '\n';
    }
}

/// gnuplot script plotting outputs against their references and the error on a log scale.
inline std::string gnuplot_script(const std::string& csv_path, const ClosedLoopModel& model,
                                  Eigen::Index outputs) {
    const Eigen::Index y0 = 1 + model.dimension() + 1; // 1-based column of y1
    std::ostringstream s;
    s << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set multiplot layout 2,1\n"
      << "set xlabel 't [s]'\n"
      << "plot ";
    for (Eigen::Index i = 0; i < outputs; ++i) {
        if (i > 0) s << ", \\\n     ";
        s << "'" << csv_path << "' using 1:" << y0 + i << " with lines, '" << csv_path
          << "' using 1:" << y0 + outputs + i << " with lines dashtype 2";
    }
    s << "\nset logscale y\n"
      << "plot '" << csv_path << "' using 1:" << y0 + 2 * outputs << " with lines\n"
      << "unset multiplot\n";
    return s.str();
}

} // namespace moment_forge::cli
