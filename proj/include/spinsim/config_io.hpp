#pragma once

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "spinsim/lattice_model.hpp"

namespace spinsim {

using nlohmann::json;

inline constexpr const char* kVersion = "spinsim 0.1.0";

// Complex numbers are [re, im] pairs; matrices are row-major lists of rows.
inline Mat mat_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ConfigError("matrix: expected a non-empty array of rows");
    const size_t rows = j.size();
    const size_t cols = j[0].size();
    Mat m(rows, cols);
    for (size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ConfigError("matrix: ragged rows");
        for (size_t c = 0; c < cols; ++c) {
            const json& e = j[r][c];
            if (!e.is_array() || e.size() != 2) throw ConfigError("matrix: entries must be [re, im]");
            m(r, c) = cxd(e[0].get<double>(), e[1].get<double>());
        }
    }
    return m;
}

inline json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(row);
    }
    return rows;
}

namespace detail {

inline std::vector<std::pair<int, int>> nearest_neighbor_pairs(const Lattice& lat) {
    std::vector<std::pair<int, int>> pairs;
    for (int site = 0; site < lat.n; ++site) {
        std::vector<int> c = lat.coords(site);
        for (int a = 0; a < lat.ndim(); ++a) {
            int v = c[a] + 1;
            if (v >= lat.dims[a]) {
                if (!lat.periodic || lat.dims[a] < 3) continue;
                v = 0;
            }
            std::vector<int> cc = c;
            cc[a] = v;
            int other = lat.index(cc);
            pairs.emplace_back(std::min(site, other), std::max(site, other));
        }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

inline std::vector<LindbladTerm> interaction_preset(const std::string& name, const Lattice& lat,
                                                    double g_target) {
    std::vector<LindbladTerm> terms;
    if (name == "heisenberg_nn" || name == "ising_x_nn") {
        Mat coupling;
        if (name == "heisenberg_nn")
            coupling = kron(pauli_x(), pauli_x()) + kron(pauli_y(), pauli_y()) + kron(pauli_z(), pauli_z());
        else
            coupling = kron(pauli_x(), pauli_x());
        for (auto [a, b] : nearest_neighbor_pairs(lat)) {
            LindbladTerm t;
            t.support = {a, b};
            t.hamiltonian = coupling;
            terms.push_back(std::move(t));
        }
    } else if (name == "dephasing_site") {
        for (int site = 0; site < lat.n; ++site) {
            LindbladTerm t;
            t.support = {site};
            t.jump_ops = {pauli_z()};
            terms.push_back(std::move(t));
        }
    } else {
        throw ConfigError("unknown interaction preset: " + name);
    }
    // rescale so the interaction strength equals g_target (Hamiltonian terms
    // scale linearly, jump operators with the square root)
    const double g0 = interaction_strength(terms);
    if (g0 <= 0.0) throw ConfigError("interaction preset has zero strength");
    const double lin = g_target / g0;
    for (LindbladTerm& t : terms) {
        if (t.hamiltonian) *t.hamiltonian *= lin;
        for (Mat& l : t.jump_ops) l *= std::sqrt(lin);
    }
    return terms;
}

inline EntanglementBreakingChannel noise_from_json(const json& j) {
    if (j.contains("preset")) {
        const std::string name = j["preset"].get<std::string>();
        if (name == "z_measure") return z_measure_channel();
        if (name == "depolarize") return depolarize_channel();
        if (name == "reset_zero") return reset_zero_channel();
        if (name == "thermal") return thermal_channel(j.value("epsilon", 0.5));
        throw ConfigError("unknown noise preset: " + name);
    }
    EntanglementBreakingChannel ch;
    for (const json& e : j.at("povm")) ch.povm.push_back(mat_from_json(e));
    for (const json& s : j.at("states")) ch.states.push_back(mat_from_json(s));
    ch.validate();
    return ch;
}

inline std::vector<Mat> initial_state_from_json(const json& j, int n) {
    std::vector<Mat> rho0;
    if (j.contains("preset")) {
        const std::string name = j["preset"].get<std::string>();
        Mat site;
        if (name == "all_zero") {
            site = ket_bra(0, 0);
        } else if (name == "all_plus") {
            site = Mat::Constant(2, 2, 0.5);
        } else if (name == "maximally_mixed") {
            site = 0.5 * Mat::Identity(2, 2);
        } else {
            throw ConfigError("unknown initial state preset: " + name);
        }
        rho0.assign(n, site);
    } else {
        for (const json& s : j.at("sites")) rho0.push_back(mat_from_json(s));
        if (static_cast<int>(rho0.size()) != n)
            throw ConfigError("initial_state: need one state per site");
    }
    return rho0;
}

}  // namespace detail

inline ModelSpec load_model_spec(const json& j) {
    ModelSpec model;
    try {
        const json& lat = j.at("lattice");
        std::vector<int> dims = lat.at("dims").get<std::vector<int>>();
        model.lattice = Lattice(dims, lat.value("periodic", false));

        const json& inter = j.at("interaction");
        if (inter.contains("preset")) {
            model.terms = detail::interaction_preset(inter["preset"].get<std::string>(), model.lattice,
                                                     inter.value("g", 1.0));
        } else {
            for (const json& tj : inter.at("terms")) {
                LindbladTerm t;
                t.support = tj.at("support").get<std::vector<int>>();
                if (tj.contains("hamiltonian")) t.hamiltonian = mat_from_json(tj["hamiltonian"]);
                if (tj.contains("jumps"))
                    for (const json& lj : tj["jumps"]) t.jump_ops.push_back(mat_from_json(lj));
                model.terms.push_back(std::move(t));
            }
        }
        int max_diam = 1;
        for (const LindbladTerm& t : model.terms)
            max_diam = std::max(max_diam, model.lattice.diameter(t.support));
        model.range = inter.value("range", max_diam);

        model.kappa = j.at("kappa").get<double>();
        model.noise = detail::noise_from_json(j.at("noise"));
        model.rho0 = detail::initial_state_from_json(j.at("initial_state"), model.n());
        model.t = j.at("time").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    model.validate();
    return model;
}

inline ModelSpec load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config parse: ") + e.what());
    }
    return load_model_spec(j);
}

}  // namespace spinsim
