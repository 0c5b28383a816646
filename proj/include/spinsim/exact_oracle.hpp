#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "spinsim/percolation.hpp"

namespace spinsim {

// Full density matrix of the whole register; the brute-force reference for
// everything else. Exponential evolution is capped at 6 qubits, channel
// application at 10.
struct FullState {
    int n = 0;
    Mat rho;

    void validate(double tol = 1e-9) const { validate_density_matrix(rho, tol); }
};

inline Mat product_state(const std::vector<Mat>& per_site) {
    Mat rho = per_site.at(0);
    for (size_t i = 1; i < per_site.size(); ++i) rho = kron(rho, per_site[i]);
    return rho;
}

// Full generator in superoperator form:
//   G = sum_terms Embed(L_term) + kappa sum_i Embed(N_i - Id).
inline Mat full_generator(const ModelSpec& model) {
    const int n = model.n();
    const Eigen::Index dim = Eigen::Index(1) << (2 * n);
    Mat g = Mat::Zero(dim, dim);
    for (const LindbladTerm& term : model.terms)
        g += embed_superop(term_superoperator(term).matrix, n, term.support);
    if (model.kappa != 0.0) {
        Mat local = model.noise.as_superoperator().matrix - Mat::Identity(4, 4);
        for (int i = 0; i < n; ++i) g += model.kappa * embed_superop(local, n, {i});
    }
    return g;
}

inline FullState evolve_exact(const ModelSpec& model) {
    const int n = model.n();
    if (n > 6) throw ConfigError("evolve_exact: n > 6 exceeds the exponential-evolution cap");
    model.validate();
    Mat prop = expm(Mat(model.t * full_generator(model)));
    Vec v = prop * vectorize(product_state(model.rho0));
    FullState st{n, unvectorize(v, Eigen::Index(1) << n)};
    st.rho /= st.rho.trace().real();
    return st;
}

// Diagonal of rho in the computational basis, clipped at zero and
// renormalized. Entries below -1e-9 are treated as a numerical failure.
inline std::vector<double> basis_distribution(const FullState& st) {
    const Eigen::Index dim = st.rho.rows();
    std::vector<double> p(dim);
    double total = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
        double v = st.rho(i, i).real();
        if (v < -1e-9) throw NumericalError("basis_distribution: negative diagonal entry");
        p[i] = std::max(0.0, v);
        total += p[i];
    }
    if (total <= 0.0) throw NumericalError("basis_distribution: zero total probability");
    for (double& v : p) v /= total;
    return p;
}

inline double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw ConfigError("tv_distance: length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

namespace detail {

// Applies the fired slots of one assignment, in slot order, to the vectorized
// full state; entanglement-breaking slots use the full mixture form of the
// channel, which equals averaging the measure-and-prepare unraveling.
struct AssignmentApplier {
    const TrotterCircuit* circuit = nullptr;
    int n = 0;
    Vec rho0_vec;
    std::vector<LocalApplyPlan> plans;     // per step-layout index
    std::vector<const Mat*> channel_mats;  // per step-layout index
    mutable std::vector<cxd> scratch;

    explicit AssignmentApplier(const TrotterCircuit& circ) : circuit(&circ), n(circ.model->n()) {
        rho0_vec = vectorize(product_state(circuit->model->rho0));
        const auto& layout = circuit->step_layout;
        plans.reserve(layout.size());
        channel_mats.reserve(layout.size());
        for (const auto& t : layout) {
            if (t.kind == SlotKind::Horizontal) {
                plans.emplace_back(n, circuit->model->terms[t.target].support);
                channel_mats.push_back(&circuit->horizontal_channels[t.target].matrix);
            } else {
                plans.emplace_back(n, std::vector<int>{t.target});
                channel_mats.push_back(&circuit->noise_channel.matrix);
            }
        }
    }

    Vec apply(const std::vector<int64_t>& fired_sorted) const {
        Vec state = rho0_vec;
        const int64_t stride = circuit->slots_per_step();
        for (int64_t id : fired_sorted) {
            const size_t j = static_cast<size_t>(id % stride);
            plans[j].apply(*channel_mats[j], state, scratch);
        }
        return state;
    }
};

inline void accumulate_diagonal(const Vec& state, int n, double weight, std::vector<double>& acc) {
    const Eigen::Index dim = Eigen::Index(1) << n;
    for (Eigen::Index b = 0; b < dim; ++b) acc[b] += weight * state[b + dim * b].real();
}

}  // namespace detail

struct ConditionedDistribution {
    std::vector<double> probs;
    double acceptance = 0.0;   // accepted fraction (weight or count)
    int64_t n_used = 0;        // accepted assignments entering the average
    bool enumerated = false;
};

struct ConditionedOptions {
    int64_t n_assignments = 1'000'000;
    uint64_t seed = 12345;
    int enumerate_threshold = 16;  // exhaustive enumeration below this slot count
    double tau_c = 0.3;
};

// Reference distribution of the sampling algorithm: the expectation, over
// channel assignments accepted by the cluster-size rule, of each assignment's
// exact output distribution. Exhaustive over all 2^slots assignments when
// small enough, quasi-exhaustive Monte Carlo otherwise.
inline ConditionedDistribution conditioned_trotter_distribution(const TrotterCircuit& circuit,
                                                                double c_prime,
                                                                const ConditionedOptions& opt = {}) {
    const ModelSpec& model = *circuit.model;
    const int n = model.n();
    if (n > 4) throw ConfigError("conditioned_trotter_distribution: n > 4 exceeds the reference cap");
    const double tau = percolation_tau(model.kappa, opt.tau_c);
    const double threshold = cluster_rejection_threshold(c_prime, n);
    detail::AssignmentApplier applier(circuit);
    const Eigen::Index dim = Eigen::Index(1) << n;
    std::vector<double> acc(dim, 0.0);

    ConditionedDistribution out;
    if (circuit.slot_count() <= opt.enumerate_threshold) {
        out.enumerated = true;
        const int64_t slots = circuit.slot_count();
        double total_weight = 0.0;
        std::vector<int64_t> fired;
        for (uint64_t mask = 0; mask < (uint64_t(1) << slots); ++mask) {
            double w = 1.0;
            fired.clear();
            for (int64_t id = 0; id < slots; ++id) {
                const double p = circuit.slot(id).p_fire;
                if (mask & (uint64_t(1) << id)) {
                    w *= p;
                    fired.push_back(id);
                } else {
                    w *= 1.0 - p;
                }
            }
            if (w == 0.0) continue;
            ChannelAssignment a{slots, fired};
            if (find_clusters(build_percolation_config(circuit, a, tau)).max_size > threshold) continue;
            detail::accumulate_diagonal(applier.apply(fired), n, w, acc);
            total_weight += w;
            ++out.n_used;
        }
        if (total_weight <= 0.0) throw NumericalError("conditioned_trotter_distribution: zero accepted weight");
        out.acceptance = total_weight;
        for (double& v : acc) v /= total_weight;
    } else {
        int64_t accepted = 0;
        for (int64_t trial = 0; trial < opt.n_assignments; ++trial) {
            Rng rng = Rng::stream(opt.seed, static_cast<uint64_t>(trial));
            ChannelAssignment a = sample_assignment(circuit, rng);
            if (find_clusters(build_percolation_config(circuit, a, tau)).max_size > threshold) continue;
            detail::accumulate_diagonal(applier.apply(a.fired), n, 1.0, acc);
            ++accepted;
        }
        if (accepted == 0) throw NumericalError("conditioned_trotter_distribution: no assignment accepted");
        out.acceptance = static_cast<double>(accepted) / static_cast<double>(opt.n_assignments);
        out.n_used = accepted;
        for (double& v : acc) v /= static_cast<double>(accepted);
    }
    // numerical cleanup: clip and renormalize
    double total = 0.0;
    for (double& v : acc) {
        if (v < -1e-9) throw NumericalError("conditioned_trotter_distribution: negative probability");
        v = std::max(0.0, v);
        total += v;
    }
    for (double& v : acc) v /= total;
    out.probs = std::move(acc);
    return out;
}

}  // namespace spinsim
