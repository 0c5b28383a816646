#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spinsim/channel_algebra.hpp"

namespace spinsim {

// A one-qubit mixed state together with its polarization (gap of its
// eigenvalues) and eigenbasis. Column 0 of `basis` is the cold (majority)
// eigenvector, column 1 the hot one.
struct PolarizedState {
    Mat sigma;
    double eps = 0.0;
    Mat basis;

    static PolarizedState from_density(const Mat& sigma) {
        validate_density_matrix(sigma, 1e-9);
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sigma + sigma.adjoint()));
        PolarizedState ps;
        ps.sigma = sigma;
        ps.eps = es.eigenvalues()(1) - es.eigenvalues()(0);
        ps.basis = Mat(2, 2);
        ps.basis.col(0) = es.eigenvectors().col(1);  // larger eigenvalue = cold
        ps.basis.col(1) = es.eigenvectors().col(0);
        return ps;
    }

    static PolarizedState diagonal(double eps) {
        if (eps < 0.0 || eps > 1.0) throw ConfigError("PolarizedState: eps must be in [0,1]");
        Mat sigma = Mat::Zero(2, 2);
        sigma(0, 0) = 0.5 * (1.0 + eps);
        sigma(1, 1) = 0.5 * (1.0 - eps);
        PolarizedState ps;
        ps.sigma = sigma;
        ps.eps = eps;
        ps.basis = Mat::Identity(2, 2);
        return ps;
    }
};

inline double polarization(const Mat& sigma) {
    validate_density_matrix(sigma, 1e-9);
    Eigen::VectorXd ev = hermitian_eigenvalues(sigma, 1e-9);
    return ev(1) - ev(0);
}

// One application of the three-qubit majority boost.
inline double compression_map(double eps) { return 0.5 * (3.0 * eps - eps * eps * eps); }

// Permutation on 3-qubit basis states sorting by majority weight: indices
// with at most one hot bit map to target-bit-0 states (stable within each
// class), so the target qubit's new cold weight is P(majority cold).
inline Mat majority_sort_unitary() {
    std::vector<int> majority0, majority1;
    for (int b = 0; b < 8; ++b)
        (__builtin_popcount(static_cast<unsigned>(b)) <= 1 ? majority0 : majority1).push_back(b);
    Mat u = Mat::Zero(8, 8);
    for (int k = 0; k < 4; ++k) {
        u(k, majority0[k]) = 1.0;      // maps |majority0[k]> -> |k>, target bit 0
        u(k + 4, majority1[k]) = 1.0;  // target bit 1
    }
    return u;
}

struct CompressionResult {
    PolarizedState boosted;
    std::array<PolarizedState, 2> residuals;
};

namespace detail {

// All three states expressed in states[0]'s eigenbasis must be diagonal.
inline void check_common_basis(const std::array<PolarizedState, 3>& states) {
    const Mat& b = states[0].basis;
    for (const PolarizedState& s : states) {
        Mat d = b.adjoint() * s.sigma * b;
        if (std::abs(d(0, 1)) > 1e-9 || std::abs(d(1, 0)) > 1e-9)
            throw ConfigError("basic_compression: states do not share an eigenbasis");
    }
}

}  // namespace detail

// The three-qubit compression primitive: conjugates the joint 8x8 state by
// the majority-sort permutation and returns the boosted target (qubit 0)
// plus the two residual qubits. Equal input polarizations eps map to
// (3 eps - eps^3)/2 on the target.
inline CompressionResult basic_compression(const std::array<PolarizedState, 3>& states) {
    detail::check_common_basis(states);
    const Mat& basis = states[0].basis;
    // work in the shared eigenbasis
    auto to_diag = [&](const PolarizedState& s) { return Mat(basis.adjoint() * s.sigma * basis); };
    Mat joint = kron(kron(to_diag(states[0]), to_diag(states[1])), to_diag(states[2]));
    Mat u = majority_sort_unitary();
    joint = u * joint * u.adjoint();
    auto back = [&](const Mat& d) { return Mat(basis * d * basis.adjoint()); };
    CompressionResult out;
    out.boosted = PolarizedState::from_density(back(partial_trace(joint, 3, {0})));
    out.residuals[0] = PolarizedState::from_density(back(partial_trace(joint, 3, {1})));
    out.residuals[1] = PolarizedState::from_density(back(partial_trace(joint, 3, {2})));
    // keep the reported basis aligned with the inputs (eigenvectors of nearly
    // maximally mixed residuals are not meaningful on their own)
    out.boosted.basis = basis;
    out.residuals[0].basis = basis;
    out.residuals[1].basis = basis;
    return out;
}

// Recursive majority-compression schedule on m = 3^k qubits; round j
// compresses triples of the previous round's boosted qubits (which are
// independent, since the triples are disjoint).
struct CoolingSchedule {
    int rounds = 0;
    std::vector<std::vector<std::array<int, 3>>> groups;  // per round: triples of qubit ids
    double achieved = 0.0;
};

inline CoolingSchedule cooling_circuit(int m, double eps_in, double eta) {
    if (eps_in <= 0.0 || eps_in > 1.0) throw ConfigError("cooling_circuit: eps_in must be in (0,1]");
    if (eta <= 0.0 || eta >= 1.0) throw ConfigError("cooling_circuit: eta must be in (0,1)");
    int k = 0;
    int p = 1;
    while (p < m) {
        p *= 3;
        ++k;
    }
    if (p != m) throw ConfigError("cooling_circuit: m must be a power of 3");
    CoolingSchedule sched;
    sched.rounds = k;
    // survivors after round j are the first qubit of each triple
    std::vector<int> active(m);
    for (int i = 0; i < m; ++i) active[i] = i;
    double eps = eps_in;
    for (int round = 0; round < k; ++round) {
        std::vector<std::array<int, 3>> triples;
        std::vector<int> next;
        for (size_t i = 0; i + 2 < active.size(); i += 3) {
            triples.push_back({active[i], active[i + 1], active[i + 2]});
            next.push_back(active[i]);
        }
        sched.groups.push_back(std::move(triples));
        active = std::move(next);
        eps = compression_map(eps);
    }
    sched.achieved = eps;
    if (sched.achieved < 1.0 - eta)
        throw InfeasibleError("cooling_circuit: polarization " + std::to_string(sched.achieved) +
                              " falls short of target " + std::to_string(1.0 - eta) +
                              "; more qubits needed");
    return sched;
}

// Smallest dissipation time after an m-pair SWAP layer that keeps the failure
// probability from growing:
//   tau_d = -(1/kappa) ln(1 - (((1-q)(1-e^{-2m kappa tau_s})) /
//                              (1 - (1-q) e^{-2m kappa tau_s}))^{1/m}).
inline double tau_d_bound(int m, double kappa, double tau_s, double q) {
    if (m < 1) throw ConfigError("tau_d_bound: m must be >= 1");
    if (kappa <= 0.0 || tau_s <= 0.0) throw ConfigError("tau_d_bound: kappa and tau_s must be positive");
    if (q <= 0.0 || q >= 1.0) throw ConfigError("tau_d_bound: q must be in (0,1)");
    const double x = std::exp(-2.0 * m * kappa * tau_s);
    const double ratio = (1.0 - q) * (1.0 - x) / (1.0 - (1.0 - q) * x);
    const double arg = 1.0 - std::pow(ratio, 1.0 / m);
    if (!(arg > 0.0)) throw InfeasibleError("tau_d_bound: infeasible regime (log argument <= 0)");
    return -std::log(arg) / kappa;
}

// Small-kappa asymptotic form of the bound.
inline double tau_d_bound_asymptotic(int m, double kappa, double tau_s, double q) {
    return std::pow(2.0 * m * (1.0 - q) / q, 1.0 / m) * std::pow(kappa * tau_s, 1.0 / m) / kappa;
}

// One shift unit: a layer of m SWAPs (duration tau_s) followed by free
// dissipation under the noise for tau_d, acting on 2m+1 qubits of which the
// even ones 2,4,...,2m carry the replacer-channel output state.
struct ShiftExperiment {
    int m = 1;
    double kappa = 0.0;
    double tau_s = 0.0;
    double tau_d = 0.0;
    double q = 0.0;  // input failure probability

    void validate() const {
        if (m < 1 || kappa < 0.0 || tau_s < 0.0 || tau_d < 0.0 || q < 0.0 || q >= 1.0)
            throw ConfigError("ShiftExperiment: invalid parameters");
    }
};

// Failure recursion of the noisy shift, as printed:
//   1 - q' = e^{-2m kappa tau_s}(1-q) + (1-e^{-kappa tau_d})^m (1 - e^{-2 kappa tau_s}(1-q)).
inline double shift_q_prime(const ShiftExperiment& exp) {
    exp.validate();
    const double swap_ok = std::exp(-2.0 * exp.m * exp.kappa * exp.tau_s);
    const double redress = std::pow(-std::expm1(-exp.kappa * exp.tau_d), exp.m);
    const double one_minus_qp =
        swap_ok * (1.0 - exp.q) + redress * (1.0 - std::exp(-2.0 * exp.kappa * exp.tau_s) * (1.0 - exp.q));
    return 1.0 - one_minus_qp;
}

namespace detail {

// SWAP written as g (I - SWAP) so that exp(-i H tau_s) is exactly SWAP.
inline Mat swap_gate() {
    Mat s = Mat::Zero(4, 4);
    s(0, 0) = s(3, 3) = 1.0;
    s(1, 2) = s(2, 1) = 1.0;
    return s;
}

inline Mat swap_hamiltonian(double tau_s) {
    const double g = M_PI / (2.0 * tau_s);
    return g * (Mat::Identity(4, 4) - swap_gate());
}

// Evolves rho under pairwise SWAP Hamiltonians on `pairs` plus per-qubit
// noise generators kappa (N - Id), by Strang splitting.
inline Mat evolve_swap_layer(Mat rho, int n, const std::vector<std::pair<int, int>>& pairs,
                             const EntanglementBreakingChannel& noise, double kappa, double tau_s,
                             int steps) {
    const double dt = tau_s / steps;
    // exact half-step noise channel per qubit (superoperator exponential)
    Mat noise_half = expm(Mat(0.5 * dt * kappa * (noise.as_superoperator().matrix - Mat::Identity(4, 4))));
    Mat u_pair = expm(Mat(cxd(0, -1) * dt * swap_hamiltonian(tau_s)));
    Superoperator u_super = Superoperator::from_unitary(u_pair);
    Vec state = vectorize(rho);
    std::vector<cxd> scratch;
    std::vector<LocalApplyPlan> noise_plans;
    std::vector<LocalApplyPlan> pair_plans;
    for (int qb = 0; qb < n; ++qb) noise_plans.emplace_back(n, std::vector<int>{qb});
    for (const auto& [a, b] : pairs) pair_plans.emplace_back(n, std::vector<int>{a, b});
    for (int s = 0; s < steps; ++s) {
        for (const LocalApplyPlan& p : noise_plans) p.apply(noise_half, state, scratch);
        for (const LocalApplyPlan& p : pair_plans) p.apply(u_super.matrix, state, scratch);
        for (const LocalApplyPlan& p : noise_plans) p.apply(noise_half, state, scratch);
    }
    Mat out = unvectorize(state, rho.rows());
    return out / out.trace().real();
}

// Per-qubit noise for a time window applied exactly (the generators commute
// across qubits).
inline Mat dissipate(Mat rho, int n, const EntanglementBreakingChannel& noise, double kappa, double t) {
    if (kappa * t == 0.0) return rho;
    Mat ch = expm(Mat(t * kappa * (noise.as_superoperator().matrix - Mat::Identity(4, 4))));
    Vec state = vectorize(rho);
    std::vector<cxd> scratch;
    for (int qb = 0; qb < n; ++qb) {
        LocalApplyPlan plan(n, {qb});
        plan.apply(ch, state, scratch);
    }
    Mat out = unvectorize(state, rho.rows());
    return out / out.trace().real();
}

// Largest lambda with rho >= lambda * target (a witnessed lower bound on the
// weight of `target` in any convex decomposition of rho).
inline double dominated_weight(const Mat& rho, const Mat& target) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (target + target.adjoint()));
    if (es.eigenvalues().minCoeff() <= 1e-12) {
        // singular target: fall back to the overlap lower bound for pure-ish targets
        return std::max(0.0, 1.0 - (rho - target).cwiseAbs().sum());
    }
    Mat inv_sqrt = es.operatorInverseSqrt();
    Eigen::VectorXd ev = hermitian_eigenvalues(Mat(inv_sqrt * rho * inv_sqrt), 1e-7);
    return std::max(0.0, ev.minCoeff());
}

}  // namespace detail

struct ShiftResult {
    double q_prime = 0.0;        // closed-form recursion value
    bool simulated = false;
    double sim_good_weight = 0.0;  // lower bound on the separable-with-correct-basis weight
};

// Closed-form q' plus, for m <= 4, a density-matrix simulation of the
// (2m+1)-qubit shift (SWAP Hamiltonian layer under continuous noise, then
// free dissipation) with a q = 0 input. The simulated good weight is the
// largest lambda with rho_targets >= lambda sigma^{(x) m} and should dominate
// 1 - q'.
inline ShiftResult shift_with_noise_sim(const ShiftExperiment& exp, double eps_in = 0.5,
                                        int strang_steps = 200) {
    exp.validate();
    ShiftResult out;
    out.q_prime = shift_q_prime(exp);
    if (exp.m > 4) return out;
    out.simulated = true;
    const int n = 2 * exp.m + 1;
    EntanglementBreakingChannel noise = thermal_channel(eps_in);
    Mat sigma = noise.states[0];
    std::vector<Mat> init(n, ket_bra(0, 0));
    for (int i = 1; i <= exp.m; ++i) init[2 * i] = sigma;  // payload on even qubits 2..2m
    Mat rho = init[0];
    for (int i = 1; i < n; ++i) rho = kron(rho, init[i]);
    std::vector<std::pair<int, int>> pairs;
    for (int i = 1; i <= exp.m; ++i) pairs.emplace_back(2 * i - 1, 2 * i);
    if (exp.kappa > 0.0 && exp.tau_s > 0.0) {
        rho = detail::evolve_swap_layer(rho, n, pairs, noise, exp.kappa, exp.tau_s, strang_steps);
        rho = detail::dissipate(rho, n, noise, exp.kappa, exp.tau_d);
    } else if (exp.tau_s > 0.0) {
        // noiseless limit: exact SWAPs
        Vec state = vectorize(rho);
        std::vector<cxd> scratch;
        Superoperator sw = Superoperator::from_unitary(detail::swap_gate());
        for (const auto& [a, b] : pairs) {
            LocalApplyPlan plan(n, {a, b});
            plan.apply(sw.matrix, state, scratch);
        }
        rho = unvectorize(state, rho.rows());
    }
    std::vector<int> targets;
    for (int i = 1; i <= exp.m; ++i) targets.push_back(2 * i - 1);
    Mat rho_targets = partial_trace(rho, n, targets);
    Mat sigma_prod = sigma;
    for (int i = 1; i < exp.m; ++i) sigma_prod = kron(sigma_prod, sigma);
    out.sim_good_weight = detail::dominated_weight(rho_targets, sigma_prod);
    return out;
}

// Repeated cool -> swap -> replenish cycles on one computational qubit plus m
// auxiliary qubits, with the noise acting continuously during the swap and
// for tau_d during the replenish step. Cooling is applied as an instantaneous
// permutation unitary (m = 3: one compression level; m = 1: plain swap of the
// fresh thermal qubit). Returns the fidelity of the computational qubit with
// the cold state right after each swap.
inline std::vector<double> restart_fidelity_sim(int m, double kappa, double tau_s, double tau_d,
                                                double eps_in, int rounds, int strang_steps = 100) {
    if (m != 1 && m != 3) throw ConfigError("restart_fidelity_sim: exact simulation supports m in {1,3}");
    if (rounds < 1) throw ConfigError("restart_fidelity_sim: rounds must be >= 1");
    if (eps_in <= 0.0 || eps_in > 1.0) throw ConfigError("restart_fidelity_sim: eps_in must be in (0,1]");
    const int n = m + 1;  // qubit 0 computational, 1..m auxiliary
    EntanglementBreakingChannel noise = thermal_channel(eps_in);
    Mat sigma = noise.states[0];
    Mat cold = ket_bra(0, 0);
    Mat rho = 0.5 * Mat::Identity(2, 2);
    for (int i = 0; i < m; ++i) rho = kron(rho, sigma);
    std::vector<double> fidelities;
    std::vector<cxd> scratch;
    for (int round = 0; round < rounds; ++round) {
        // cool: majority compression on the auxiliary triple
        if (m == 3) {
            Mat u8 = majority_sort_unitary();
            Superoperator us = Superoperator::from_unitary(u8);
            Vec state = vectorize(rho);
            LocalApplyPlan plan(n, {1, 2, 3});
            plan.apply(us.matrix, state, scratch);
            rho = unvectorize(state, rho.rows());
        }
        // swap computational qubit with the cooled auxiliary, under noise
        if (kappa > 0.0 && tau_s > 0.0) {
            rho = detail::evolve_swap_layer(rho, n, {{0, 1}}, noise, kappa, tau_s, strang_steps);
        } else {
            Vec state = vectorize(rho);
            Superoperator sw = Superoperator::from_unitary(detail::swap_gate());
            LocalApplyPlan plan(n, {0, 1});
            plan.apply(sw.matrix, state, scratch);
            rho = unvectorize(state, rho.rows());
        }
        Mat comp = partial_trace(rho, n, {0});
        fidelities.push_back((cold * comp).trace().real());
        // replenish: fresh thermal auxiliaries arrive having dissipated tau_d
        Mat comp_only = partial_trace(rho, n, {0});
        rho = comp_only;
        for (int i = 0; i < m; ++i) rho = kron(rho, sigma);
        rho = detail::dissipate(rho, n, noise, kappa, tau_d);
    }
    return fidelities;
}

}  // namespace spinsim
