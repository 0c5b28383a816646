#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "spinsim/rng.hpp"
#include "spinsim/trotterizer.hpp"

namespace spinsim {

// Finite axis-aligned grid in any dimension with per-axis periodicity; the
// vertex set of the percolation problems. Row-major, axis 0 most significant.
struct Grid {
    std::vector<int64_t> dims;
    std::vector<bool> periodic;
    int64_t size = 0;

    Grid() = default;
    Grid(std::vector<int64_t> extents, std::vector<bool> wrap)
        : dims(std::move(extents)), periodic(std::move(wrap)) {
        if (dims.empty() || dims.size() != periodic.size()) throw ConfigError("Grid: bad dims/periodic");
        size = 1;
        for (int64_t d : dims) {
            if (d < 1) throw ConfigError("Grid: extents must be positive");
            size *= d;
        }
    }
    static Grid open(std::vector<int64_t> extents) {
        std::vector<bool> wrap(extents.size(), false);
        return Grid(std::move(extents), std::move(wrap));
    }

    int ndim() const { return static_cast<int>(dims.size()); }

    // Calls fn for each von Neumann neighbour of v.
    template <typename Fn>
    void for_each_neighbor(int64_t v, Fn&& fn) const {
        int64_t stride = 1;
        for (int a = ndim() - 1; a >= 0; --a) {
            int64_t coord = (v / stride) % dims[a];
            for (int step : {-1, 1}) {
                int64_t c = coord + step;
                if (c < 0 || c >= dims[a]) {
                    if (!periodic[a] || dims[a] < 3) continue;
                    c = (c + dims[a]) % dims[a];
                }
                fn(v + (c - coord) * stride);
            }
            stride *= dims[a];
        }
    }
};

namespace detail {

// Union-find with union by size and path halving.
struct UnionFind {
    std::vector<int64_t> parent;
    std::vector<int64_t> size;

    explicit UnionFind(int64_t n) : parent(n), size(n, 1) {
        std::iota(parent.begin(), parent.end(), 0);
    }

    int64_t find(int64_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    int64_t unite(int64_t a, int64_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return a;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
        return a;
    }
};

}  // namespace detail

// Channel assignment: which slots chose the non-identity branch. Stored
// sparsely (sorted fired slot ids); the logical content is one bit per slot.
struct ChannelAssignment {
    int64_t slot_count = 0;
    std::vector<int64_t> fired;

    bool is_fired(int64_t id) const {
        return std::binary_search(fired.begin(), fired.end(), id);
    }
};

// Independently fires every slot with its p_fire. Slots of the same kind are
// visited via geometric gap skipping, template-major then step-major, so the
// cost is proportional to the number of fires, not to N.
inline ChannelAssignment sample_assignment(const TrotterCircuit& circuit, Rng& rng) {
    ChannelAssignment a;
    a.slot_count = circuit.slot_count();
    const int64_t stride = circuit.slots_per_step();
    std::vector<uint64_t> steps;
    for (int64_t j = 0; j < stride; ++j) {
        double p = circuit.step_layout[static_cast<size_t>(j)].kind == SlotKind::Horizontal
                       ? circuit.horizontal_p
                       : circuit.noise_p;
        steps.clear();
        bernoulli_positions(static_cast<uint64_t>(circuit.N), p, rng, steps);
        for (uint64_t s : steps) a.fired.push_back(static_cast<int64_t>(s) * stride + j);
    }
    std::sort(a.fired.begin(), a.fired.end());
    return a;
}

// The equivalent percolation problem: one vertex per (site, time block).
// Vertex (i, q) is open iff no fired horizontal slot touches qubit i during
// block q and at least one noise slot on qubit i fired in the block. Grid
// layout: spatial axes of the model lattice first, time axis last (always
// open-boundary).
struct PercolationConfig {
    Grid grid;
    std::vector<uint8_t> open;
    int64_t m = 0;          // block size in steps
    double tau_block = 0.0; // actual block duration m t / N
};

inline PercolationConfig build_percolation_config(const TrotterCircuit& circuit,
                                                  const ChannelAssignment& assignment, double tau) {
    const ModelSpec& model = *circuit.model;
    if (assignment.slot_count != circuit.slot_count())
        throw ConfigError("build_percolation_config: assignment length mismatch");
    const int64_t blocks = percolation_blocks(model.t, tau);
    if (circuit.N % blocks != 0)
        throw InfeasibleError("build_percolation_config: block size does not divide N (use choose_N)");
    PercolationConfig cfg;
    cfg.m = circuit.N / blocks;
    cfg.tau_block = model.t > 0.0 ? cfg.m * model.t / static_cast<double>(circuit.N) : 0.0;
    std::vector<int64_t> dims;
    std::vector<bool> wrap;
    for (int d : model.lattice.dims) {
        dims.push_back(d);
        wrap.push_back(model.lattice.periodic);
    }
    dims.push_back(blocks);
    wrap.push_back(false);
    cfg.grid = Grid(std::move(dims), std::move(wrap));

    const int n = model.n();
    std::vector<uint8_t> horiz_hit(static_cast<size_t>(n) * blocks, 0);
    std::vector<uint8_t> noise_hit(static_cast<size_t>(n) * blocks, 0);
    for (int64_t id : assignment.fired) {
        ChannelSlot slot = circuit.slot(id);
        const int64_t q = slot.step / cfg.m;
        if (slot.kind == SlotKind::Horizontal) {
            for (int site : model.terms[slot.target].support)
                horiz_hit[static_cast<size_t>(site) * blocks + q] = 1;
        } else {
            noise_hit[static_cast<size_t>(slot.target) * blocks + q] = 1;
        }
    }
    cfg.open.assign(static_cast<size_t>(n) * blocks, 0);
    for (size_t v = 0; v < cfg.open.size(); ++v) cfg.open[v] = (!horiz_hit[v] && noise_hit[v]) ? 1 : 0;
    return cfg;
}

// Connected components of closed vertices under von Neumann adjacency.
struct ClusterLabeling {
    std::vector<int32_t> label;     // -1 for open vertices
    std::vector<int64_t> sizes;     // size per cluster label
    int64_t max_size = 0;
};

inline ClusterLabeling find_clusters(const Grid& grid, const std::vector<uint8_t>& open) {
    if (static_cast<int64_t>(open.size()) != grid.size) throw ConfigError("find_clusters: field size mismatch");
    detail::UnionFind uf(grid.size);
    for (int64_t v = 0; v < grid.size; ++v) {
        if (open[v]) continue;
        grid.for_each_neighbor(v, [&](int64_t w) {
            if (w < v && !open[w]) uf.unite(v, w);
        });
    }
    ClusterLabeling out;
    out.label.assign(open.size(), -1);
    std::vector<int32_t> root_label(grid.size, -1);
    for (int64_t v = 0; v < grid.size; ++v) {
        if (open[v]) continue;
        int64_t r = uf.find(v);
        if (root_label[r] < 0) {
            root_label[r] = static_cast<int32_t>(out.sizes.size());
            out.sizes.push_back(uf.size[r]);
            out.max_size = std::max(out.max_size, uf.size[r]);
        }
        out.label[v] = root_label[r];
    }
    return out;
}

inline ClusterLabeling find_clusters(const PercolationConfig& cfg) { return find_clusters(cfg.grid, cfg.open); }

// Samples whose largest closed cluster exceeds c' ln(max(n,2)) vertices are
// rejected by the sampling algorithm.
inline double cluster_rejection_threshold(double c_prime, int n) {
    return c_prime * std::log(static_cast<double>(std::max(n, 2)));
}

// Leading term of the worst-case conditional open probability:
//   e^{-g tau l_v} (1 - e^{-kappa tau}) e^{-kappa |N_v| tau}
//     / ( e^{-kappa |N_v| tau} + 1 - e^{-g tau r} )
// The O(1/poly N) correction is dropped.
inline double conditional_open_lower_bound(double g, double kappa, double tau, int l_v, int nbhd, int r) {
    if (kappa <= 0.0 || tau <= 0.0) throw ConfigError("conditional_open_lower_bound: kappa, tau must be positive");
    const double open_self = std::exp(-g * tau * l_v);
    const double noise_hits = -std::expm1(-kappa * tau);
    const double nbhd_quiet = std::exp(-kappa * nbhd * tau);
    const double denom = nbhd_quiet - std::expm1(-g * tau * r);
    return open_self * noise_hits * nbhd_quiet / denom;
}

// Uniformly random independent open/closed field, for threshold scans and
// tail studies.
inline std::vector<uint8_t> random_open_field(const Grid& grid, double p_open, Rng& rng) {
    std::vector<uint8_t> open(static_cast<size_t>(grid.size));
    for (auto& b : open) b = rng.bernoulli(p_open) ? 1 : 0;
    return open;
}

// Newman-Ziff style estimate of the site-percolation threshold: per trial,
// sites open one by one in random order; the occupation fraction at which an
// open cluster first spans axis 0 is recorded. The threshold estimate is the
// median spanning fraction (the point where the spanning probability crosses
// 1/2), with a percentile bootstrap CI over trials.
struct ThresholdEstimate {
    double p_c = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    int64_t lattice_size = 0;
    std::vector<double> spanning_fractions;  // sorted, for the largest size
    // spanning probability at open probability p (fraction of trials that
    // span at occupation <= p)
    double spanning_prob(double p) const {
        auto it = std::upper_bound(spanning_fractions.begin(), spanning_fractions.end(), p);
        return static_cast<double>(it - spanning_fractions.begin()) / spanning_fractions.size();
    }
};

namespace detail {

inline std::vector<double> spanning_fractions_for_grid(const Grid& grid, int trials, Rng& rng) {
    std::vector<double> fractions;
    fractions.reserve(trials);
    const int64_t n = grid.size;
    const int64_t stride0 = n / grid.dims[0];  // axis-0 stride is the product of later dims
    std::vector<int64_t> order(n);
    UnionFind uf(n);
    std::vector<uint8_t> occupied(n);
    std::vector<int64_t> min0(n), max0(n);
    for (int trial = 0; trial < trials; ++trial) {
        std::iota(order.begin(), order.end(), 0);
        for (int64_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.next_below(static_cast<uint64_t>(i + 1))]);
        std::iota(uf.parent.begin(), uf.parent.end(), 0);
        std::fill(uf.size.begin(), uf.size.end(), 1);
        std::fill(occupied.begin(), occupied.end(), 0);
        double frac = 1.0;
        for (int64_t k = 0; k < n; ++k) {
            int64_t v = order[k];
            occupied[v] = 1;
            min0[v] = max0[v] = v / stride0;
            grid.for_each_neighbor(v, [&](int64_t w) {
                if (!occupied[w]) return;
                int64_t rv = uf.find(v);
                int64_t rw = uf.find(w);
                if (rv == rw) return;
                int64_t lo = std::min(min0[rv], min0[rw]);
                int64_t hi = std::max(max0[rv], max0[rw]);
                int64_t root = uf.unite(rv, rw);
                min0[root] = lo;
                max0[root] = hi;
            });
            int64_t r = uf.find(v);
            if (max0[r] - min0[r] == grid.dims[0] - 1) {
                frac = static_cast<double>(k + 1) / static_cast<double>(n);
                break;
            }
        }
        fractions.push_back(frac);
    }
    std::sort(fractions.begin(), fractions.end());
    return fractions;
}

inline double median_sorted(const std::vector<double>& v) {
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline ThresholdEstimate estimate_threshold(int d_plus_1, const std::vector<int>& sizes, int trials,
                                            Rng& rng, int bootstrap = 1000) {
    if (d_plus_1 < 1) throw ConfigError("estimate_threshold: dimension must be >= 1");
    if (sizes.size() < 2) throw ConfigError("estimate_threshold: need at least 2 lattice extents");
    if (trials < 100) throw InfeasibleError("estimate_threshold: need at least 100 trials for a CI");
    ThresholdEstimate est;
    for (int size : sizes) {
        Grid grid = Grid::open(std::vector<int64_t>(d_plus_1, size));
        est.spanning_fractions = detail::spanning_fractions_for_grid(grid, trials, rng);
        est.lattice_size = size;
    }
    est.p_c = detail::median_sorted(est.spanning_fractions);
    // percentile bootstrap of the median
    std::vector<double> medians(bootstrap);
    std::vector<double> sample(est.spanning_fractions.size());
    for (int b = 0; b < bootstrap; ++b) {
        for (double& s : sample)
            s = est.spanning_fractions[rng.next_below(est.spanning_fractions.size())];
        std::sort(sample.begin(), sample.end());
        medians[b] = detail::median_sorted(sample);
    }
    std::sort(medians.begin(), medians.end());
    est.ci_lo = medians[static_cast<size_t>(0.025 * bootstrap)];
    est.ci_hi = medians[static_cast<size_t>(0.975 * bootstrap)];
    return est;
}

// Conditional specification of a dependent site-percolation field: for each
// vertex, its deleted neighbourhood and the open probability for every
// neighbourhood bit-pattern (bit i of the pattern = state of nbrs[v][i]).
struct ConditionalTable {
    Grid grid;
    std::vector<std::vector<int64_t>> nbrs;
    std::vector<std::vector<double>> probs;  // size 2^deg per vertex

    void validate() const {
        if (static_cast<int64_t>(nbrs.size()) != grid.size || probs.size() != nbrs.size())
            throw ConfigError("ConditionalTable: inconsistent table dimensions");
        for (size_t v = 0; v < nbrs.size(); ++v) {
            if (probs[v].size() != (size_t(1) << nbrs[v].size()))
                throw ConfigError("ConditionalTable: pattern table size mismatch");
            for (double p : probs[v])
                if (p < 0.0 || p > 1.0) throw ConfigError("ConditionalTable: probability out of [0,1]");
        }
    }

    double min_conditional() const {
        double m = 1.0;
        for (const auto& pv : probs)
            for (double p : pv) m = std::min(m, p);
        return m;
    }

    // Grid-adjacent neighbourhood with probabilities from fn(vertex, pattern).
    static ConditionalTable from_function(Grid grid,
                                          const std::function<double(int64_t, uint32_t)>& fn) {
        ConditionalTable t;
        t.grid = std::move(grid);
        t.nbrs.resize(t.grid.size);
        t.probs.resize(t.grid.size);
        for (int64_t v = 0; v < t.grid.size; ++v) {
            t.grid.for_each_neighbor(v, [&](int64_t w) { t.nbrs[v].push_back(w); });
            std::sort(t.nbrs[v].begin(), t.nbrs[v].end());
            t.probs[v].resize(size_t(1) << t.nbrs[v].size());
            for (uint32_t x = 0; x < t.probs[v].size(); ++x) t.probs[v][x] = fn(v, x);
        }
        t.validate();
        return t;
    }
};

struct CoupledSample {
    std::vector<uint8_t> x;        // dependent field
    std::vector<uint8_t> z_floor;  // independent field Z_{v, x_v}
};

// Explicit coupling of the dependent field X to an independent Bernoulli
// field: with x_v the argmin pattern, Z_{v,x_v} fires with the minimum
// conditional probability and forces X_v = 1; otherwise X_v = Z_{v,x} for the
// realized neighbourhood pattern, with
//   P(Z_{v,x}=1) = (P(1|x) - P(1|x_v)) / P(0|x_v).
// Vertices are swept in index order (time-major, then lexicographic sites for
// circuit-derived grids); the pattern is read from the current X array, with
// not-yet-swept vertices at 0. Per sample, Z_{v,x_v} = 1 implies X_v = 1, so
// the X clusters are dominated by the Z_floor clusters.
inline CoupledSample coupled_dependent_sample(const ConditionalTable& table, Rng& rng) {
    table.validate();
    const int64_t n = table.grid.size;
    CoupledSample s;
    s.x.assign(n, 0);
    s.z_floor.assign(n, 0);
    for (int64_t v = 0; v < n; ++v) {
        const std::vector<double>& pv = table.probs[v];
        uint32_t x_min = 0;
        for (uint32_t x = 1; x < pv.size(); ++x)
            if (pv[x] < pv[x_min]) x_min = x;
        const double p_floor = pv[x_min];
        if (p_floor < 0.0) throw ConfigError("coupled_dependent_sample: negative floor probability");
        s.z_floor[v] = rng.bernoulli(p_floor) ? 1 : 0;
        if (s.z_floor[v]) {
            s.x[v] = 1;
            continue;
        }
        uint32_t pattern = 0;
        for (size_t i = 0; i < table.nbrs[v].size(); ++i)
            if (s.x[table.nbrs[v][i]]) pattern |= uint32_t(1) << i;
        if (pattern == x_min) {
            s.x[v] = 0;  // Z_{v,x_v} already drawn as 0
            continue;
        }
        const double excess = p_floor >= 1.0 ? 0.0 : (pv[pattern] - p_floor) / (1.0 - p_floor);
        s.x[v] = rng.bernoulli(excess) ? 1 : 0;
    }
    return s;
}

// Empirical complementary CDF of the maximum cluster size plus a least-squares
// exponential tail fit of log P(max >= s) against s.
struct TailStats {
    std::vector<std::pair<int64_t, double>> ccdf;  // (s, P(max >= s)) for s >= 1
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline TailStats cluster_tail_stats(const std::vector<int64_t>& max_sizes) {
    if (max_sizes.size() < 100) throw ConfigError("cluster_tail_stats: need at least 100 configurations");
    TailStats t;
    int64_t biggest = 0;
    for (int64_t s : max_sizes) biggest = std::max(biggest, s);
    const double total = static_cast<double>(max_sizes.size());
    for (int64_t s = 1; s <= biggest; ++s) {
        int64_t count = 0;
        for (int64_t ms : max_sizes)
            if (ms >= s) ++count;
        t.ccdf.emplace_back(s, count / total);
    }
    // OLS of log ccdf vs s over the strictly positive part
    std::vector<double> xs, ys;
    for (auto& [s, p] : t.ccdf)
        if (p > 0.0) {
            xs.push_back(static_cast<double>(s));
            ys.push_back(std::log(p));
        }
    if (xs.size() >= 2) {
        const double n = static_cast<double>(xs.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        for (size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
            syy += ys[i] * ys[i];
        }
        const double denom = n * sxx - sx * sx;
        if (denom > 0) {
            t.slope = (n * sxy - sx * sy) / denom;
            t.intercept = (sy - t.slope * sx) / n;
            const double ss_tot = syy - sy * sy / n;
            double ss_res = 0;
            for (size_t i = 0; i < xs.size(); ++i) {
                const double r = ys[i] - (t.intercept + t.slope * xs[i]);
                ss_res += r * r;
            }
            t.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
        }
    }
    return t;
}

inline TailStats cluster_tail_stats(const std::vector<PercolationConfig>& configs) {
    std::vector<int64_t> maxes;
    maxes.reserve(configs.size());
    for (const PercolationConfig& c : configs) maxes.push_back(find_clusters(c).max_size);
    return cluster_tail_stats(maxes);
}

}  // namespace spinsim
