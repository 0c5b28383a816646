#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "spinsim/channel_algebra.hpp"

namespace spinsim {

// Finite d-dimensional lattice. Sites are linearized row-major with axis 0
// most significant; open boundaries by default, periodic optional (applied
// consistently to neighbourhoods and percolation adjacency).
struct Lattice {
    std::vector<int> dims;
    bool periodic = false;
    int n = 0;

    Lattice() = default;
    explicit Lattice(std::vector<int> extents, bool wrap = false) : dims(std::move(extents)), periodic(wrap) {
        if (dims.empty()) throw ConfigError("Lattice: empty dims");
        n = 1;
        for (int d : dims) {
            if (d < 1) throw ConfigError("Lattice: extents must be positive");
            n *= d;
        }
    }

    int ndim() const { return static_cast<int>(dims.size()); }

    int index(const std::vector<int>& coords) const {
        if (static_cast<int>(coords.size()) != ndim()) throw ConfigError("Lattice: coordinate rank mismatch");
        int idx = 0;
        for (int a = 0; a < ndim(); ++a) {
            if (coords[a] < 0 || coords[a] >= dims[a]) throw ConfigError("Lattice: coordinate out of range");
            idx = idx * dims[a] + coords[a];
        }
        return idx;
    }

    std::vector<int> coords(int site) const {
        if (site < 0 || site >= n) throw ConfigError("Lattice: site out of range");
        std::vector<int> c(ndim());
        for (int a = ndim() - 1; a >= 0; --a) {
            c[a] = site % dims[a];
            site /= dims[a];
        }
        return c;
    }

    // Per-axis separation honouring periodic wrap.
    int axis_distance(int x, int y, int axis) const {
        int d = std::abs(x - y);
        if (periodic) d = std::min(d, dims[axis] - d);
        return d;
    }

    // Chebyshev (max-axis) diameter of a site set.
    int diameter(const std::vector<int>& sites) const {
        int diam = 0;
        for (size_t i = 0; i < sites.size(); ++i) {
            std::vector<int> ci = coords(sites[i]);
            for (size_t j = i + 1; j < sites.size(); ++j) {
                std::vector<int> cj = coords(sites[j]);
                for (int a = 0; a < ndim(); ++a) diam = std::max(diam, axis_distance(ci[a], cj[a], a));
            }
        }
        return diam;
    }

    // Nearest-neighbour site ids (von Neumann adjacency).
    std::vector<int> neighbors(int site) const {
        std::vector<int> c = coords(site);
        std::vector<int> out;
        for (int a = 0; a < ndim(); ++a) {
            for (int step : {-1, 1}) {
                int v = c[a] + step;
                if (v < 0 || v >= dims[a]) {
                    if (!periodic || dims[a] < 3) continue;
                    v = (v + dims[a]) % dims[a];
                }
                std::vector<int> cc = c;
                cc[a] = v;
                out.push_back(index(cc));
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

// Disjoint-support layers; each inner vector holds indices into the owning
// term list.
struct LayerPartition {
    std::vector<std::vector<int>> layers;
    int count() const { return static_cast<int>(layers.size()); }
};

constexpr int kMaxLayers = 16;

// Greedy coloring of the support-overlap graph. Terms are processed in
// lexicographic support order (deterministic), each placed in the first layer
// whose supports it does not touch; layer count is at most the maximum
// overlap degree plus one. More than kMaxLayers layers signals a non-local
// model and is rejected.
inline LayerPartition partition_layers(const std::vector<LindbladTerm>& terms) {
    std::vector<int> order(terms.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return terms[a].support < terms[b].support; });
    LayerPartition part;
    std::vector<std::vector<char>> used;  // per layer: site id -> occupied
    int max_site = 0;
    for (const LindbladTerm& t : terms)
        for (int s : t.support) max_site = std::max(max_site, s);
    for (int ti : order) {
        const std::vector<int>& sup = terms[ti].support;
        int placed = -1;
        for (size_t l = 0; l < part.layers.size(); ++l) {
            bool clash = false;
            for (int s : sup)
                if (used[l][s]) { clash = true; break; }
            if (!clash) { placed = static_cast<int>(l); break; }
        }
        if (placed < 0) {
            if (part.count() >= kMaxLayers)
                throw ConfigError("partition_layers: more than 16 layers needed; model is not local enough");
            part.layers.emplace_back();
            used.emplace_back(max_site + 1, 0);
            placed = part.count() - 1;
        }
        part.layers[placed].push_back(ti);
        for (int s : sup) used[placed][s] = 1;
    }
    return part;
}

// Full continuous-time model: lattice, local generator terms, noise rate and
// channel, per-site product initial state, evolution time.
struct ModelSpec {
    Lattice lattice;
    std::vector<LindbladTerm> terms;
    double kappa = 0.0;
    EntanglementBreakingChannel noise;
    std::vector<Mat> rho0;  // one 2x2 density matrix per site
    double t = 0.0;
    int range = 1;

    int n() const { return lattice.n; }

    void validate() const {
        if (kappa < 0.0) throw ConfigError("ModelSpec: negative noise rate");
        if (t < 0.0) throw ConfigError("ModelSpec: negative evolution time");
        if (static_cast<int>(rho0.size()) != n()) throw ConfigError("ModelSpec: rho0 must have one state per site");
        for (const Mat& r : rho0) validate_density_matrix(r, 1e-9);
        noise.validate();
        for (const LindbladTerm& term : terms) {
            if (term.support.empty()) throw ConfigError("ModelSpec: term with empty support");
            for (size_t i = 1; i < term.support.size(); ++i)
                if (term.support[i] <= term.support[i - 1])
                    throw ConfigError("ModelSpec: term supports must be strictly ascending");
            if (term.support.front() < 0 || term.support.back() >= n())
                throw ConfigError("ModelSpec: term support outside lattice");
            if (lattice.diameter(term.support) > range)
                throw ConfigError("ModelSpec: term diameter exceeds interaction range");
            term_superoperator(term);  // validates operator dimensions/Hermiticity
        }
    }
};

struct Neighbourhood {
    std::vector<int> sites;  // deleted neighbourhood N_v
    int l_v = 0;             // number of terms containing the site
};

// N_v = { j != i : some term support contains both i and j }, plus the count
// of terms containing i.
inline Neighbourhood deleted_neighbourhood(const ModelSpec& model, int site) {
    if (site < 0 || site >= model.n()) throw ConfigError("deleted_neighbourhood: site out of range");
    Neighbourhood nb;
    std::vector<char> seen(model.n(), 0);
    for (const LindbladTerm& term : model.terms) {
        bool contains = std::find(term.support.begin(), term.support.end(), site) != term.support.end();
        if (!contains) continue;
        ++nb.l_v;
        for (int j : term.support)
            if (j != site && !seen[j]) {
                seen[j] = 1;
                nb.sites.push_back(j);
            }
    }
    std::sort(nb.sites.begin(), nb.sites.end());
    return nb;
}

// Number of terms whose support intersects the given site set (the r
// parameter of the conditional bound).
inline int terms_touching(const ModelSpec& model, const std::vector<int>& sites) {
    int r = 0;
    for (const LindbladTerm& term : model.terms) {
        bool touch = false;
        for (int s : term.support)
            if (std::find(sites.begin(), sites.end(), s) != sites.end()) { touch = true; break; }
        if (touch) ++r;
    }
    return r;
}

}  // namespace spinsim
