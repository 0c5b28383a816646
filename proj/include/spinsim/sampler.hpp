#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "spinsim/percolation.hpp"

namespace spinsim {

struct SamplerParams {
    double c_prime = 3.0;      // cluster rejection constant (max size c' ln n)
    double tau_c = 0.3;        // e^{-kappa tau} = tau_c fixes the block duration
    int contraction_cap = 12;  // hard cap on qubits contracted jointly
    int max_retries = 100;     // resampling budget per requested sample
};

// One end-to-end sample. bitstring is empty unless accepted.
struct SampleRecord {
    std::string bitstring;
    bool accepted = false;
    int64_t max_cluster = 0;
    int64_t n_noise_events = 0;
    std::string seed_path;
    int retries = 0;
};

// A cluster's worth of circuit: input product states and the time-ordered
// fired slots to push them through.
struct ClusterCircuit {
    std::vector<int> qubits;  // tensor-factor order
    std::vector<Mat> inputs;  // one 2x2 state per qubit
    struct Slot {
        Superoperator op;
        std::vector<int> targets;  // qubit ids, in the operator's factor order
    };
    std::vector<Slot> slots;
};

// Dense density-matrix evolution of the cluster through its slots.
inline Mat contract_cluster(const ClusterCircuit& cc, int cap = 12) {
    const int k = static_cast<int>(cc.qubits.size());
    if (k > cap) throw ConfigError("contract_cluster: cluster exceeds the contraction cap");
    if (cc.inputs.size() != cc.qubits.size()) throw ConfigError("contract_cluster: input/qubit mismatch");
    Mat rho = cc.inputs.empty() ? Mat::Identity(1, 1) : cc.inputs[0];
    for (size_t i = 1; i < cc.inputs.size(); ++i) rho = kron(rho, cc.inputs[i]);
    Vec state = vectorize(rho);
    std::vector<cxd> scratch;
    for (const ClusterCircuit::Slot& slot : cc.slots) {
        std::vector<int> positions;
        for (int q : slot.targets) {
            auto it = std::find(cc.qubits.begin(), cc.qubits.end(), q);
            if (it == cc.qubits.end()) throw ConfigError("contract_cluster: slot targets qubit outside cluster");
            positions.push_back(static_cast<int>(it - cc.qubits.begin()));
        }
        LocalApplyPlan plan(k, positions);
        plan.apply(slot.op.matrix, state, scratch);
    }
    Mat out = unvectorize(state, Eigen::Index(1) << k);
    const double tr = out.trace().real();
    if (!(tr > 0.0)) throw NumericalError("contract_cluster: non-positive trace");
    return out / tr;
}

struct EbEventRecord {
    int64_t slot_id = 0;
    int site = 0;
    int outcome = 0;
};

struct GroupState {
    std::vector<int> qubits;  // tensor-factor order
    Mat rho;
    bool alive = true;
};

struct SequentialSamplingResult {
    std::vector<EbEventRecord> events;
    std::vector<GroupState> groups;  // final, dead entries removed
};

namespace detail {

struct GroupArena {
    std::vector<GroupState> groups;
    std::vector<int> group_of;  // per qubit

    explicit GroupArena(const ModelSpec& model) {
        const int n = model.n();
        groups.reserve(2 * n);
        group_of.resize(n);
        for (int q = 0; q < n; ++q) {
            groups.push_back({{q}, model.rho0[q], true});
            group_of[q] = q;
        }
    }

    GroupState& of(int qubit) { return groups[group_of[qubit]]; }

    // Merge all groups containing `sites` into one (first-appearance order),
    // enforcing the contraction cap.
    GroupState& merge(const std::vector<int>& sites, int cap) {
        std::vector<int> gids;
        for (int q : sites) {
            int g = group_of[q];
            if (std::find(gids.begin(), gids.end(), g) == gids.end()) gids.push_back(g);
        }
        if (gids.size() == 1) return groups[gids[0]];
        size_t total = 0;
        for (int g : gids) total += groups[g].qubits.size();
        if (total > static_cast<size_t>(cap))
            throw ConfigError("sampler: contraction would exceed the hard cap of " + std::to_string(cap) +
                              " qubits; raise the cap or lower c'");
        GroupState merged;
        merged.rho = groups[gids[0]].rho;
        merged.qubits = groups[gids[0]].qubits;
        for (size_t i = 1; i < gids.size(); ++i) {
            merged.rho = kron(merged.rho, groups[gids[i]].rho);
            merged.qubits.insert(merged.qubits.end(), groups[gids[i]].qubits.begin(),
                                 groups[gids[i]].qubits.end());
        }
        for (int g : gids) groups[g].alive = false;
        const int idx = static_cast<int>(groups.size());
        groups.push_back(std::move(merged));
        for (int q : groups[idx].qubits) group_of[q] = idx;
        return groups[idx];
    }

    // Split `qubit` out of its group into a fresh singleton with state sigma,
    // conditioning the remainder on POVM element E (already chosen).
    void split_after_measurement(int qubit, const Mat& povm_element, const Mat& sigma) {
        const int gid = group_of[qubit];
        GroupState& g = groups[gid];
        if (g.qubits.size() == 1) {
            g.rho = sigma;
            return;
        }
        const int k = static_cast<int>(g.qubits.size());
        const int pos = static_cast<int>(std::find(g.qubits.begin(), g.qubits.end(), qubit) - g.qubits.begin());
        // rest state = Tr_q[(E (x) I) rho] / p
        Vec state = vectorize(g.rho);
        std::vector<cxd> scratch;
        LocalApplyPlan plan(k, {pos});
        Mat e_left = kron(Mat::Identity(2, 2).transpose(), povm_element);  // rho -> E rho
        plan.apply(e_left, state, scratch);
        std::vector<int> keep;
        for (int p = 0; p < k; ++p)
            if (p != pos) keep.push_back(p);
        Mat rest = partial_trace(unvectorize(state, Eigen::Index(1) << k), k, keep);
        const double tr = rest.trace().real();
        if (!(tr > 0.0)) throw NumericalError("sampler: zero-probability branch after measurement");
        rest /= tr;
        GroupState rest_group;
        rest_group.rho = std::move(rest);
        for (int p = 0; p < k; ++p)
            if (p != pos) rest_group.qubits.push_back(g.qubits[p]);
        g.alive = false;
        const int rest_idx = static_cast<int>(groups.size());
        groups.push_back(std::move(rest_group));
        for (int q : groups[rest_idx].qubits) group_of[q] = rest_idx;
        const int solo_idx = static_cast<int>(groups.size());
        groups.push_back({{qubit}, sigma, true});
        group_of[qubit] = solo_idx;
    }
};

inline void renormalize(Mat& rho) {
    const double tr = rho.trace().real();
    if (!(tr > 0.0)) throw NumericalError("sampler: state trace collapsed");
    rho /= tr;
}

inline Mat one_qubit_marginal(const GroupState& g, int qubit) {
    if (g.qubits.size() == 1) return g.rho;
    const int k = static_cast<int>(g.qubits.size());
    const int pos = static_cast<int>(std::find(g.qubits.begin(), g.qubits.end(), qubit) - g.qubits.begin());
    Mat m = partial_trace(g.rho, k, {pos});
    if (!is_hermitian(m, 1e-7) || std::abs(m.trace().real() - 1.0) > 1e-7)
        throw NumericalError("sampler: invalid one-qubit marginal");
    return m;
}

}  // namespace detail

// Step 2 of the sampling algorithm: walk the fired slots in time order,
// contracting interaction channels into joint group states and resolving each
// fired entanglement-breaking slot by a POVM measurement of the qubit's
// marginal followed by replacement with the prepared state. The remaining
// group is conditioned on the observed outcome.
inline SequentialSamplingResult sequential_eb_sampling(const TrotterCircuit& circuit,
                                                       const ChannelAssignment& assignment, Rng& rng,
                                                       int contraction_cap = 12) {
    const ModelSpec& model = *circuit.model;
    detail::GroupArena arena(model);
    SequentialSamplingResult result;
    std::vector<cxd> scratch;
    for (int64_t id : assignment.fired) {
        ChannelSlot slot = circuit.slot(id);
        if (slot.kind == SlotKind::Horizontal) {
            const LindbladTerm& term = model.terms[slot.target];
            GroupState& g = arena.merge(term.support, contraction_cap);
            std::vector<int> positions;
            for (int q : term.support)
                positions.push_back(static_cast<int>(std::find(g.qubits.begin(), g.qubits.end(), q) -
                                                     g.qubits.begin()));
            Vec state = vectorize(g.rho);
            LocalApplyPlan plan(static_cast<int>(g.qubits.size()), positions);
            plan.apply(circuit.horizontal_channels[slot.target].matrix, state, scratch);
            g.rho = unvectorize(state, g.rho.rows());
            detail::renormalize(g.rho);
        } else {
            const int site = slot.target;
            Mat marginal = detail::one_qubit_marginal(arena.of(site), site);
            EbOutcome out = eb_apply_as_measurement(model.noise, marginal, rng);
            arena.split_after_measurement(site, model.noise.povm[out.outcome], out.replacement);
            result.events.push_back({id, site, out.outcome});
        }
    }
    for (GroupState& g : arena.groups)
        if (g.alive) result.groups.push_back(std::move(g));
    return result;
}

// Computational-basis measurement of the final product-of-groups state.
inline std::string measure_groups(const std::vector<GroupState>& groups, int n, Rng& rng) {
    std::string bits(n, '0');
    for (const GroupState& g : groups) {
        const Eigen::Index dim = g.rho.rows();
        std::vector<double> p(dim);
        for (Eigen::Index b = 0; b < dim; ++b) p[b] = std::max(0.0, g.rho(b, b).real());
        const int k = static_cast<int>(g.qubits.size());
        const int idx = rng.discrete(p.data(), static_cast<int>(dim));
        for (int pos = 0; pos < k; ++pos)
            if (idx & (1 << (k - 1 - pos))) bits[g.qubits[pos]] = '1';
    }
    return bits;
}

// One end-to-end sample: draw an assignment, reject on oversized clusters,
// otherwise contract and measure.
inline SampleRecord sample_once(const TrotterCircuit& circuit, const SamplerParams& params, Rng& rng,
                                std::string seed_path = {}) {
    const ModelSpec& model = *circuit.model;
    SampleRecord rec;
    rec.seed_path = std::move(seed_path);
    ChannelAssignment assignment = sample_assignment(circuit, rng);
    PercolationConfig cfg =
        build_percolation_config(circuit, assignment, percolation_tau(model.kappa, params.tau_c));
    rec.max_cluster = find_clusters(cfg).max_size;
    for (int64_t id : assignment.fired)
        if (circuit.step_layout[static_cast<size_t>(id % circuit.slots_per_step())].kind == SlotKind::Noise)
            ++rec.n_noise_events;
    if (rec.max_cluster > cluster_rejection_threshold(params.c_prime, model.n())) {
        rec.accepted = false;
        return rec;
    }
    SequentialSamplingResult seq = sequential_eb_sampling(circuit, assignment, rng, params.contraction_cap);
    rec.bitstring = measure_groups(seq.groups, model.n(), rng);
    rec.accepted = true;
    return rec;
}

struct SampleStats {
    std::map<std::string, int64_t> counts;        // accepted bitstrings
    std::map<int64_t, int64_t> cluster_hist;      // max cluster size over all attempts
    int64_t n_requested = 0;
    int64_t n_accepted = 0;
    int64_t n_attempts = 0;
    double rejection_rate = 0.0;
    std::vector<SampleRecord> records;            // one per requested sample

    std::map<std::string, double> distribution() const {
        std::map<std::string, double> d;
        for (const auto& [k, v] : counts) d[k] = static_cast<double>(v) / static_cast<double>(n_accepted);
        return d;
    }
};

// Aggregates sample_once over per-sample substreams keyed by (seed, index);
// rejected draws are retried from the same substream up to the retry budget.
// The outcome is a pure function of (seed, n_samples) and is independent of
// the worker count.
inline SampleStats sample_distribution(const TrotterCircuit& circuit, const SamplerParams& params,
                                       int64_t n_samples, int workers, uint64_t seed,
                                       bool keep_records = false) {
    if (n_samples < 1) throw ConfigError("sample_distribution: need at least one sample");
    if (workers < 1) throw ConfigError("sample_distribution: need at least one worker");
    SampleStats stats;
    stats.n_requested = n_samples;
    stats.records.resize(static_cast<size_t>(n_samples));

    std::atomic<int64_t> next{0};
    std::vector<SampleStats> partial(workers);
    auto work = [&](int w) {
        SampleStats& local = partial[w];
        while (true) {
            const int64_t i = next.fetch_add(1);
            if (i >= n_samples) break;
            Rng rng = Rng::stream(seed, static_cast<uint64_t>(i));
            std::string path = std::to_string(seed) + "/" + std::to_string(i);
            SampleRecord rec;
            for (int attempt = 0; attempt < params.max_retries; ++attempt) {
                rec = sample_once(circuit, params, rng, path);
                rec.retries = attempt;
                ++local.n_attempts;
                ++local.cluster_hist[rec.max_cluster];
                if (rec.accepted) break;
            }
            if (rec.accepted) {
                ++local.n_accepted;
                ++local.counts[rec.bitstring];
            }
            stats.records[static_cast<size_t>(i)] = std::move(rec);
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (std::thread& t : pool) t.join();
    }
    for (const SampleStats& local : partial) {
        stats.n_accepted += local.n_accepted;
        stats.n_attempts += local.n_attempts;
        for (const auto& [k, v] : local.counts) stats.counts[k] += v;
        for (const auto& [k, v] : local.cluster_hist) stats.cluster_hist[k] += v;
    }
    stats.rejection_rate =
        static_cast<double>(stats.n_attempts - stats.n_accepted) / static_cast<double>(stats.n_attempts);
    if (!keep_records) stats.records.clear();
    return stats;
}

}  // namespace spinsim
