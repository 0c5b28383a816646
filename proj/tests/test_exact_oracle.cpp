#include "spinsim/exact_oracle.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace spinsim;
using spinsim::test::expect_mat_near;

namespace {

ModelSpec bare_noise_model(int n, double kappa, double t, EntanglementBreakingChannel noise,
                           Mat site_state) {
    ModelSpec m;
    m.lattice = Lattice({n});
    m.kappa = kappa;
    m.noise = std::move(noise);
    m.rho0.assign(n, std::move(site_state));
    m.t = t;
    return m;
}

}  // namespace

TEST(EvolveExact, NoDynamicsKeepsInitialState) {
    ModelSpec m = bare_noise_model(2, 0.0, 3.0, z_measure_channel(), Mat::Constant(2, 2, 0.5));
    FullState st = evolve_exact(m);
    st.validate();
    expect_mat_near(st.rho, product_state(m.rho0), 1e-10);
}

TEST(EvolveExact, DepolarizingDrivesToMaximallyMixed) {
    ModelSpec m = bare_noise_model(2, 1.0, 40.0, depolarize_channel(), ket_bra(0, 0));
    FullState st = evolve_exact(m);
    st.validate();
    expect_mat_near(st.rho, Mat(0.25 * Mat::Identity(4, 4)), 1e-6);
}

TEST(EvolveExact, ZMeasureCoherenceDecay) {
    // single qubit, kappa = 1, rho0 = |+><+|, t = 1: off-diagonal e^{-1}/2
    ModelSpec m = bare_noise_model(1, 1.0, 1.0, z_measure_channel(), Mat::Constant(2, 2, 0.5));
    FullState st = evolve_exact(m);
    st.validate();
    EXPECT_NEAR(st.rho(0, 1).real(), 0.5 * std::exp(-1.0), 1e-10);
    EXPECT_NEAR(st.rho(0, 0).real(), 0.5, 1e-10);
}

TEST(EvolveExact, StateInvariantsHoldWithCoupling) {
    Rng rng(71);
    ModelSpec m = bare_noise_model(3, 0.8, 0.9, z_measure_channel(), Mat::Constant(2, 2, 0.5));
    LindbladTerm term;
    term.support = {0, 1};
    term.hamiltonian = kron(pauli_x(), pauli_x());
    m.terms.push_back(term);
    term.support = {1, 2};
    m.terms.push_back(term);
    m.range = 1;
    FullState st = evolve_exact(m);
    st.validate();
}

TEST(EvolveExact, SizeCap) {
    ModelSpec m = bare_noise_model(7, 1.0, 1.0, z_measure_channel(), ket_bra(0, 0));
    EXPECT_THROW(evolve_exact(m), ConfigError);
}

TEST(BasisDistribution, DeltaOnComputationalState) {
    FullState st{2, kron(ket_bra(0, 0), ket_bra(0, 0))};
    std::vector<double> p = basis_distribution(st);
    EXPECT_EQ(p.size(), 4u);
    EXPECT_NEAR(p[0], 1.0, 1e-12);
}

TEST(BasisDistribution, UniformForMaximallyMixed) {
    FullState st{2, 0.25 * Mat::Identity(4, 4)};
    for (double v : basis_distribution(st)) EXPECT_NEAR(v, 0.25, 1e-12);
}

TEST(BasisDistribution, MatchesDirectDiagonalReadoff) {
    Rng rng(73);
    Mat rho = spinsim::test::random_density(8, rng);
    FullState st{3, rho};
    std::vector<double> p = basis_distribution(st);
    double total = 0.0;
    for (int b = 0; b < 8; ++b) total += rho(b, b).real();
    for (int b = 0; b < 8; ++b) EXPECT_NEAR(p[b], rho(b, b).real() / total, 1e-12);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
}

TEST(BasisDistribution, RejectsNegativeDiagonal) {
    Mat rho = Mat::Zero(2, 2);
    rho(0, 0) = 1.5;
    rho(1, 1) = -0.5;
    FullState st{1, rho};
    EXPECT_THROW(basis_distribution(st), NumericalError);
}

TEST(TvDistance, BasicValues) {
    EXPECT_EQ(tv_distance({0.5, 0.5}, {0.5, 0.5}), 0.0);
    EXPECT_EQ(tv_distance({1.0, 0.0}, {0.0, 1.0}), 1.0);
    EXPECT_NEAR(tv_distance({0.75, 0.25}, {0.5, 0.5}), 0.25, 1e-15);
    EXPECT_THROW(tv_distance({1.0}, {0.5, 0.5}), ConfigError);
}

TEST(ConditionedTrotter, NoNoiseEqualsDeterministicCircuitOutput) {
    // kappa = 0 and a huge c': only acceptance region is everything, and the
    // average over assignments equals the deterministic mixture circuit
    ModelSpec m;
    m.lattice = Lattice({2});
    LindbladTerm term;
    term.support = {0, 1};
    term.hamiltonian = kron(pauli_x(), pauli_x());
    *term.hamiltonian /= interaction_strength({term});
    m.terms.push_back(term);
    m.kappa = 0.0;
    m.noise = z_measure_channel();
    m.rho0.assign(2, ket_bra(0, 0));
    m.t = 0.8;
    m.range = 1;
    TrotterCircuit circ = build_trotter_circuit(m, 3);
    ConditionedDistribution ref = conditioned_trotter_distribution(circ, 1e9);
    EXPECT_TRUE(ref.enumerated);
    Mat rho = average_trotter_channel(circ).apply(product_state(m.rho0));
    rho /= rho.trace().real();
    std::vector<double> direct = basis_distribution({2, rho});
    EXPECT_LE(tv_distance(ref.probs, direct), 1e-10);
}

TEST(ConditionedTrotter, SingleQubitTwoStepsMatchesHandEnumeration) {
    // single qubit, no terms, N=2: four assignments over the two noise slots;
    // Z measure-and-prepare leaves diag(rho) unchanged, so every branch has
    // the same distribution: diag(rho0)
    ModelSpec m = bare_noise_model(1, 0.4, 1.0, z_measure_channel(), Mat::Constant(2, 2, 0.5));
    TrotterCircuit circ = build_trotter_circuit(m, 2);
    ASSERT_EQ(circ.slot_count(), 2);
    ConditionedDistribution ref = conditioned_trotter_distribution(circ, 1e9);
    EXPECT_TRUE(ref.enumerated);
    EXPECT_EQ(ref.n_used, 4);
    EXPECT_NEAR(ref.probs[0], 0.5, 1e-12);
    EXPECT_NEAR(ref.probs[1], 0.5, 1e-12);
    // hand enumeration with a biased channel: prepare |0> with probability
    // p0 = 0.9 regardless of input
    EntanglementBreakingChannel biased;
    biased.povm = {0.9 * Mat::Identity(2, 2), 0.1 * Mat::Identity(2, 2)};
    biased.states = {ket_bra(0, 0), ket_bra(1, 1)};
    ModelSpec mb = bare_noise_model(1, 0.4, 1.0, biased, ket_bra(1, 1));
    TrotterCircuit cb = build_trotter_circuit(mb, 2);
    const double p = cb.noise_p;
    ConditionedDistribution refb = conditioned_trotter_distribution(cb, 1e9);
    // P(0) = P(at least one slot fired) * 0.9; both slots silent leaves |1>
    const double p_any = 1.0 - (1.0 - p) * (1.0 - p);
    EXPECT_NEAR(refb.probs[0], p_any * 0.9, 1e-12);
    EXPECT_NEAR(refb.probs[1], 1.0 - p_any * 0.9, 1e-12);
}

TEST(ConditionedTrotter, MonteCarloAgreesWithEnumeration) {
    ModelSpec m = bare_noise_model(2, 2.0, 0.6, z_measure_channel(), Mat::Constant(2, 2, 0.5));
    LindbladTerm term;
    term.support = {0, 1};
    term.hamiltonian = kron(pauli_x(), pauli_x()) + kron(pauli_z(), pauli_z());
    m.terms.push_back(term);
    m.range = 1;
    TrotterCircuit circ = build_trotter_circuit(m, 4);  // 4*(1+2) = 12 slots
    ConditionedDistribution exact = conditioned_trotter_distribution(circ, 3.0);
    ASSERT_TRUE(exact.enumerated);
    ConditionedOptions opt;
    opt.enumerate_threshold = 0;  // force the Monte Carlo path
    opt.n_assignments = 400000;
    ConditionedDistribution mc = conditioned_trotter_distribution(circ, 3.0, opt);
    EXPECT_FALSE(mc.enumerated);
    EXPECT_LE(tv_distance(exact.probs, mc.probs), 0.01);
    EXPECT_NEAR(mc.acceptance, exact.acceptance, 0.01);
}

TEST(ConditionedTrotter, SizeGuard) {
    ModelSpec m = bare_noise_model(5, 1.0, 1.0, z_measure_channel(), ket_bra(0, 0));
    TrotterCircuit circ = build_trotter_circuit(m, 2);
    EXPECT_THROW(conditioned_trotter_distribution(circ, 3.0), ConfigError);
}
