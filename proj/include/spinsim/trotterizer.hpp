#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "spinsim/lattice_model.hpp"

namespace spinsim {

enum class SlotKind { Horizontal, Noise };

// One probabilistic channel slot of the trotterized circuit.
struct ChannelSlot {
    SlotKind kind = SlotKind::Noise;
    int target = 0;  // term index (horizontal) or site (noise)
    int64_t step = 0;
    int layer = 0;
    double p_fire = 0.0;
};

constexpr double kDefaultGFactor = 1.001;

// Time-ordered lattice of channel slots realizing the trotterized state. A
// step consists of, for each layer in order: that layer's horizontal slots
// (term-index order), then one noise slot per site (site order). Slots are
// listed in application order (the first slot acts on the state first); the
// layout repeats identically for all N steps, so slots are enumerated
// lazily from a per-step template rather than materialized.
struct TrotterCircuit {
    const ModelSpec* model = nullptr;
    int64_t N = 0;
    double g = 0.0;  // interaction strength actually used for the split
    LayerPartition partition;
    int L = 1;  // effective layer count (>= 1 so noise slots exist without terms)
    double horizontal_p = 0.0;
    double noise_p = 0.0;

    struct SlotTemplate {
        SlotKind kind;
        int target;
        int layer;
    };
    std::vector<SlotTemplate> step_layout;

    std::vector<Superoperator> horizontal_channels;  // per term, convex-split channel
    Superoperator noise_channel;                     // EB channel in full mixture form

    int64_t slots_per_step() const { return static_cast<int64_t>(step_layout.size()); }
    int64_t slot_count() const { return N * slots_per_step(); }

    ChannelSlot slot(int64_t id) const {
        if (id < 0 || id >= slot_count()) throw ConfigError("TrotterCircuit: slot id out of range");
        const SlotTemplate& t = step_layout[static_cast<size_t>(id % slots_per_step())];
        return {t.kind, t.target, id / slots_per_step(), t.layer,
                t.kind == SlotKind::Horizontal ? horizontal_p : noise_p};
    }

    int64_t slot_id(int64_t step, int64_t within_step) const { return step * slots_per_step() + within_step; }
};

inline TrotterCircuit build_trotter_circuit(const ModelSpec& model, int64_t N,
                                            double g_factor = kDefaultGFactor) {
    if (N < 1) throw InfeasibleError("build_trotter_circuit: N must be at least 1");
    TrotterCircuit circ;
    circ.model = &model;
    circ.N = N;
    circ.partition = partition_layers(model.terms);
    circ.L = std::max(1, circ.partition.count());
    circ.g = model.terms.empty() ? 0.0 : g_factor * interaction_strength(model.terms);
    circ.horizontal_p = circ.g * model.t / static_cast<double>(N);
    circ.noise_p = model.kappa * model.t / (static_cast<double>(N) * circ.L);
    if (circ.horizontal_p >= 1.0 || circ.noise_p >= 1.0)
        throw InfeasibleError("build_trotter_circuit: slot probability >= 1, N too small");

    const double tau = model.t / static_cast<double>(N);
    circ.horizontal_channels.reserve(model.terms.size());
    for (const LindbladTerm& term : model.terms)
        circ.horizontal_channels.push_back(convex_split(term, circ.g, tau).channel);
    circ.noise_channel = model.noise.as_superoperator();

    for (int l = 0; l < circ.L; ++l) {
        if (l < circ.partition.count())
            for (int ti : circ.partition.layers[l])
                circ.step_layout.push_back({SlotKind::Horizontal, ti, l});
        for (int site = 0; site < model.n(); ++site)
            circ.step_layout.push_back({SlotKind::Noise, site, l});
    }
    return circ;
}

// Block duration picked by e^{-kappa tau} = tau_c, the knob that makes the
// percolation problem subcritical. Infinite when kappa = 0 (noise never cuts
// the time axis).
inline double percolation_tau(double kappa, double tau_c = 0.3) {
    if (tau_c <= 0.0 || tau_c >= 1.0) throw ConfigError("percolation_tau: constant must be in (0,1)");
    if (kappa <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log(tau_c) / kappa;
}

// Number of time blocks for the percolation mapping: blocks of duration
// approximately tau covering [0, t]. The block size in steps is N / Q, so N
// must be a multiple of Q (choose_N pads for this).
inline int64_t percolation_blocks(double t, double tau) {
    if (!(tau > 0.0)) throw ConfigError("percolation_blocks: tau must be positive");
    if (t <= 0.0 || !std::isfinite(tau)) return 1;
    return std::max<int64_t>(1, static_cast<int64_t>(std::llround(t / tau)));
}

// Steps for a target trotterization error: N = ceil(C t^2 (2gM + 2n kappa)^2 / eps),
// using 2g per term and 2 for the noise-channel gap as norm proxies, then
// padded up so the percolation block count divides N.
inline int64_t choose_N(const ModelSpec& model, double eps_target, double tau_c = 0.3, double C = 1.0,
                        double g_factor = kDefaultGFactor) {
    if (eps_target <= 0.0 || eps_target >= 1.0) throw ConfigError("choose_N: eps_target must be in (0,1)");
    const double g = model.terms.empty() ? 0.0 : g_factor * interaction_strength(model.terms);
    const double m_terms = static_cast<double>(model.terms.size());
    const double rate = 2.0 * g * m_terms + 2.0 * static_cast<double>(model.n()) * model.kappa;
    double raw = C * model.t * model.t * rate * rate / eps_target;
    int64_t n0 = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(raw)));
    if (model.kappa > 0.0 && model.t > 0.0) {
        int64_t q = percolation_blocks(model.t, percolation_tau(model.kappa, tau_c));
        n0 = ((n0 + q - 1) / q) * q;
    }
    return n0;
}

// Deterministic full-system mixture form of the trotterized circuit: composes
// (1 - p) Id + p Channel for every slot, in slot order. Small n only; used as
// the dense reference for the Trotter-error scans.
inline Superoperator average_trotter_channel(const TrotterCircuit& circuit) {
    const ModelSpec& model = *circuit.model;
    const int n = model.n();
    if (n > 6) throw ConfigError("average_trotter_channel: n > 6 not supported");
    const Eigen::Index dim = Eigen::Index(1) << (2 * n);
    Mat step = Mat::Identity(dim, dim);
    for (const TrotterCircuit::SlotTemplate& t : circuit.step_layout) {
        Mat full;
        double p;
        if (t.kind == SlotKind::Horizontal) {
            p = circuit.horizontal_p;
            full = embed_superop(circuit.horizontal_channels[t.target].matrix, n,
                                 model.terms[t.target].support);
        } else {
            p = circuit.noise_p;
            full = embed_superop(circuit.noise_channel.matrix, n, {t.target});
        }
        Mat mix = (1.0 - p) * Mat::Identity(dim, dim) + p * full;
        step = mix * step;  // later slots act after earlier ones
    }
    // step^N by binary exponentiation
    Mat result = Mat::Identity(dim, dim);
    Mat base = step;
    int64_t e = circuit.N;
    while (e > 0) {
        if (e & 1) result = base * result;
        base = base * base;
        e >>= 1;
    }
    return Superoperator(n, std::move(result));
}

}  // namespace spinsim
