#include "spinsim/lattice_model.hpp"

#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"

using namespace spinsim;

namespace {

LindbladTerm pair_term(int a, int b) {
    LindbladTerm t;
    t.support = {std::min(a, b), std::max(a, b)};
    t.hamiltonian = kron(pauli_z(), pauli_z());
    return t;
}

ModelSpec chain_model(int n, std::vector<LindbladTerm> terms, double kappa = 1.0, double t = 1.0) {
    ModelSpec m;
    m.lattice = Lattice({n});
    m.terms = std::move(terms);
    m.kappa = kappa;
    m.noise = z_measure_channel();
    m.rho0.assign(n, ket_bra(0, 0));
    m.t = t;
    m.range = 4;
    return m;
}

// brute-force check that a partition is a valid disjoint-layer covering
void check_partition(const LayerPartition& part, const std::vector<LindbladTerm>& terms) {
    std::multiset<int> covered;
    for (const auto& layer : part.layers) {
        std::set<int> sites;
        for (int ti : layer) {
            covered.insert(ti);
            for (int s : terms[ti].support) {
                ASSERT_TRUE(sites.insert(s).second) << "layer supports overlap";
            }
        }
    }
    ASSERT_EQ(covered.size(), terms.size());
    for (size_t i = 0; i < terms.size(); ++i) ASSERT_EQ(covered.count(static_cast<int>(i)), 1u);
}

}  // namespace

TEST(Lattice, IndexCoordRoundTrip) {
    Lattice lat({3, 4, 5});
    EXPECT_EQ(lat.n, 60);
    for (int s = 0; s < lat.n; ++s) EXPECT_EQ(lat.index(lat.coords(s)), s);
    EXPECT_THROW(lat.index({3, 0, 0}), ConfigError);
    EXPECT_THROW(lat.coords(60), ConfigError);
}

TEST(Lattice, NeighborsOpenAndPeriodic) {
    Lattice open({4});
    EXPECT_EQ(open.neighbors(0), (std::vector<int>{1}));
    EXPECT_EQ(open.neighbors(2), (std::vector<int>{1, 3}));
    Lattice ring({4}, true);
    EXPECT_EQ(ring.neighbors(0), (std::vector<int>{1, 3}));
}

TEST(Lattice, Diameter) {
    Lattice lat({4, 4});
    EXPECT_EQ(lat.diameter({lat.index({0, 0}), lat.index({0, 1})}), 1);
    EXPECT_EQ(lat.diameter({lat.index({0, 0}), lat.index({2, 3})}), 3);
    Lattice ring({6}, true);
    EXPECT_EQ(ring.diameter({0, 5}), 1);
}

TEST(PartitionLayers, ChainPairsSplitEvenOdd) {
    std::vector<LindbladTerm> terms = {pair_term(0, 1), pair_term(1, 2), pair_term(2, 3)};
    LayerPartition part = partition_layers(terms);
    ASSERT_EQ(part.count(), 2);
    EXPECT_EQ(part.layers[0], (std::vector<int>{0, 2}));  // (0,1), (2,3)
    EXPECT_EQ(part.layers[1], (std::vector<int>{1}));     // (1,2)
    check_partition(part, terms);
}

TEST(PartitionLayers, SingleTermOneLayer) {
    std::vector<LindbladTerm> terms = {pair_term(0, 1)};
    LayerPartition part = partition_layers(terms);
    EXPECT_EQ(part.count(), 1);
    check_partition(part, terms);
}

TEST(PartitionLayers, Grid3x3NearestNeighbors) {
    Lattice lat({3, 3});
    std::vector<LindbladTerm> terms;
    for (int s = 0; s < lat.n; ++s) {
        for (int nb : lat.neighbors(s))
            if (nb > s) terms.push_back(pair_term(s, nb));
    }
    ASSERT_EQ(terms.size(), 12u);
    LayerPartition part = partition_layers(terms);
    EXPECT_LE(part.count(), 4);
    check_partition(part, terms);
}

TEST(PartitionLayers, RandomTermSetsStayDisjoint) {
    Rng rng(101);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<LindbladTerm> terms;
        const int n = 12;
        const int m = 3 + static_cast<int>(rng.next_below(10));
        for (int i = 0; i < m; ++i) {
            int a = static_cast<int>(rng.next_below(n - 2));
            int len = 1 + static_cast<int>(rng.next_below(3));
            LindbladTerm t;
            for (int s = a; s < a + len; ++s) t.support.push_back(s);
            terms.push_back(std::move(t));
        }
        LayerPartition part = partition_layers(terms);
        check_partition(part, terms);
        // greedy bound: layers <= max overlap degree + 1
        int max_deg = 0;
        for (size_t i = 0; i < terms.size(); ++i) {
            int deg = 0;
            for (size_t j = 0; j < terms.size(); ++j) {
                if (i == j) continue;
                bool overlap = false;
                for (int s : terms[i].support)
                    for (int s2 : terms[j].support)
                        if (s == s2) overlap = true;
                if (overlap) ++deg;
            }
            max_deg = std::max(max_deg, deg);
        }
        EXPECT_LE(part.count(), max_deg + 1);
    }
}

TEST(PartitionLayers, RejectsExcessiveLayerCount) {
    // 20 terms all sharing site 0 need 20 layers
    std::vector<LindbladTerm> terms;
    for (int i = 1; i <= 20; ++i) {
        LindbladTerm t;
        t.support = {0, i};
        terms.push_back(std::move(t));
    }
    EXPECT_THROW(partition_layers(terms), ConfigError);
}

TEST(DeletedNeighbourhood, InteriorChainSite) {
    ModelSpec m = chain_model(4, {pair_term(0, 1), pair_term(1, 2), pair_term(2, 3)});
    Neighbourhood nb = deleted_neighbourhood(m, 1);
    EXPECT_EQ(nb.sites, (std::vector<int>{0, 2}));
    EXPECT_EQ(nb.l_v, 2);
    EXPECT_THROW(deleted_neighbourhood(m, 4), ConfigError);
}

TEST(DeletedNeighbourhood, IsolatedSite) {
    ModelSpec m = chain_model(3, {pair_term(0, 1)});
    Neighbourhood nb = deleted_neighbourhood(m, 2);
    EXPECT_TRUE(nb.sites.empty());
    EXPECT_EQ(nb.l_v, 0);
}

TEST(DeletedNeighbourhood, ThreeSiteTerms) {
    std::vector<LindbladTerm> terms;
    for (int i = 0; i + 2 < 7; ++i) {
        LindbladTerm t;
        t.support = {i, i + 1, i + 2};
        terms.push_back(std::move(t));
    }
    ModelSpec m = chain_model(7, std::move(terms));
    Neighbourhood nb = deleted_neighbourhood(m, 3);
    EXPECT_EQ(nb.sites, (std::vector<int>{1, 2, 4, 5}));
    EXPECT_EQ(nb.l_v, 3);
    EXPECT_EQ(terms_touching(m, nb.sites), 5);
}

TEST(DeletedNeighbourhood, SymmetryProperty) {
    Rng rng(55);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<LindbladTerm> terms;
        const int n = 10;
        for (int i = 0; i < 6; ++i) {
            int a = static_cast<int>(rng.next_below(n - 1));
            LindbladTerm t;
            t.support = {a, a + 1};
            terms.push_back(std::move(t));
        }
        ModelSpec m = chain_model(n, std::move(terms));
        for (int i = 0; i < n; ++i) {
            for (int j : deleted_neighbourhood(m, i).sites) {
                auto back = deleted_neighbourhood(m, j).sites;
                EXPECT_TRUE(std::find(back.begin(), back.end(), i) != back.end());
            }
        }
    }
}

TEST(DeletedNeighbourhood, TranslationInvariantBulk) {
    std::vector<LindbladTerm> terms;
    const int n = 8;
    for (int i = 0; i + 1 < n; ++i) terms.push_back(pair_term(i, i + 1));
    ModelSpec m = chain_model(n, std::move(terms));
    for (int i = 1; i + 1 < n; ++i) EXPECT_EQ(deleted_neighbourhood(m, i).l_v, 2);
}

TEST(ModelSpec, ValidationCatchesBadInput) {
    ModelSpec m = chain_model(4, {pair_term(0, 1)});
    EXPECT_NO_THROW(m.validate());
    m.kappa = -1.0;
    EXPECT_THROW(m.validate(), ConfigError);
    m.kappa = 1.0;
    m.range = 0;
    EXPECT_THROW(m.validate(), ConfigError);  // diameter 1 > range 0
}

TEST(ModelSpec, RejectsOutOfLatticeSupport) {
    ModelSpec m = chain_model(2, {pair_term(1, 2)});
    EXPECT_THROW(m.validate(), ConfigError);
}
