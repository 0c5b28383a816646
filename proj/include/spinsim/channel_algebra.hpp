#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spinsim/linalg.hpp"
#include "spinsim/rng.hpp"

namespace spinsim {

// Dense superoperator on a k-qubit support: a (4^k x 4^k) complex matrix
// acting on column-stacked density operators.
struct Superoperator {
    int support_size = 0;
    Mat matrix;

    Superoperator() = default;
    Superoperator(int k, Mat m) : support_size(k), matrix(std::move(m)) {
        const Eigen::Index d = Eigen::Index(1) << (2 * k);
        if (matrix.rows() != d || matrix.cols() != d)
            throw ConfigError("Superoperator: matrix dimension does not match support size");
    }

    static Superoperator identity(int k) {
        const Eigen::Index d = Eigen::Index(1) << (2 * k);
        return Superoperator(k, Mat::Identity(d, d));
    }

    // rho -> A rho B as kron(B^T, A)
    static Superoperator from_sandwich(const Mat& a, const Mat& b) {
        int k = 0;
        while ((Eigen::Index(1) << k) < a.rows()) ++k;
        return Superoperator(k, kron(b.transpose(), a));
    }

    static Superoperator from_unitary(const Mat& u) { return from_sandwich(u, u.adjoint()); }

    Eigen::Index dim() const { return Eigen::Index(1) << support_size; }

    Mat apply(const Mat& rho) const {
        if (rho.rows() != dim()) throw ConfigError("Superoperator::apply: dimension mismatch");
        return unvectorize(matrix * vectorize(rho), dim());
    }
};

// One bounded-support generator term: optional Hamiltonian plus jump
// operators, all acting on the listed sites (ascending order).
struct LindbladTerm {
    std::vector<int> support;
    std::optional<Mat> hamiltonian;
    std::vector<Mat> jump_ops;

    int num_qubits() const { return static_cast<int>(support.size()); }
    Eigen::Index dim() const { return Eigen::Index(1) << num_qubits(); }
};

// Generator in superoperator form on the term's own support:
//   L(rho) = -i[H, rho] + sum_j ( L_j rho L_j^+ - 1/2 {L_j^+ L_j, rho} )
inline Superoperator term_superoperator(const LindbladTerm& term) {
    const Eigen::Index d = term.dim();
    const Eigen::Index d2 = d * d;
    Mat s = Mat::Zero(d2, d2);
    Mat eye = Mat::Identity(d, d);
    if (term.hamiltonian) {
        const Mat& h = *term.hamiltonian;
        if (h.rows() != d) throw ConfigError("LindbladTerm: Hamiltonian dimension mismatch");
        if (!is_hermitian(h, 1e-9)) throw ConfigError("LindbladTerm: Hamiltonian not Hermitian");
        s += cxd(0, -1) * (kron(eye, h) - kron(h.transpose(), eye));
    }
    for (const Mat& l : term.jump_ops) {
        if (l.rows() != d) throw ConfigError("LindbladTerm: jump operator dimension mismatch");
        Mat ldl = l.adjoint() * l;
        s += kron(l.conjugate(), l);
        s -= 0.5 * kron(eye, ldl);
        s -= 0.5 * kron(ldl.transpose(), eye);
    }
    return Superoperator(term.num_qubits(), std::move(s));
}

// Measure-and-prepare channel N(rho) = sum_i states[i] * Tr(povm[i] rho).
struct EntanglementBreakingChannel {
    std::vector<Mat> povm;
    std::vector<Mat> states;

    void validate(double tol = 1e-9) const {
        if (povm.empty() || povm.size() != states.size())
            throw ConfigError("EB channel: POVM/state count mismatch");
        Mat sum = Mat::Zero(2, 2);
        for (const Mat& e : povm) {
            if (e.rows() != 2 || e.cols() != 2) throw ConfigError("EB channel: POVM element not 2x2");
            if (hermitian_eigenvalues(e, tol).minCoeff() < -tol)
                throw ConfigError("EB channel: POVM element not PSD");
            sum += e;
        }
        if ((sum - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() > tol)
            throw ConfigError("EB channel: POVM does not sum to identity");
        for (const Mat& st : states) validate_density_matrix(st, tol);
    }

    // Full mixture form: S = sum_i vec(states[i]) vec(povm[i])^H (POVM
    // elements are Hermitian, so Tr(E rho) = vec(E)^H vec(rho)).
    Superoperator as_superoperator() const {
        Mat s = Mat::Zero(4, 4);
        for (size_t i = 0; i < povm.size(); ++i)
            s += vectorize(states[i]) * vectorize(povm[i]).adjoint();
        return Superoperator(1, std::move(s));
    }
};

inline EntanglementBreakingChannel z_measure_channel() {
    return {{ket_bra(0, 0), ket_bra(1, 1)}, {ket_bra(0, 0), ket_bra(1, 1)}};
}

// Replaces the qubit by I/2 regardless of input (single-element POVM).
inline EntanglementBreakingChannel depolarize_channel() {
    return {{Mat::Identity(2, 2)}, {0.5 * Mat::Identity(2, 2)}};
}

inline EntanglementBreakingChannel reset_zero_channel() {
    return {{Mat::Identity(2, 2)}, {ket_bra(0, 0)}};
}

// Replacer channel with thermal-like output diag((1+eps)/2, (1-eps)/2) in the
// computational basis.
inline EntanglementBreakingChannel thermal_channel(double eps) {
    if (eps < 0.0 || eps > 1.0) throw ConfigError("thermal channel: eps must be in [0,1]");
    Mat sigma = Mat::Zero(2, 2);
    sigma(0, 0) = 0.5 * (1.0 + eps);
    sigma(1, 1) = 0.5 * (1.0 - eps);
    return {{Mat::Identity(2, 2)}, {sigma}};
}

// Unnormalized Choi matrix C = sum_ij S(E_ij) (x) E_ij with E_ij the
// elementary matrix units; the Choi of a trace-preserving map has trace equal
// to the support dimension.
inline Mat choi_matrix(const Superoperator& s) {
    const Eigen::Index d = s.dim();
    Mat c = Mat::Zero(d * d, d * d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            Vec col = s.matrix.col(i + d * j);  // vec(E_ij) is the unit vector at i + d*j
            Mat sij = unvectorize(col, d);
            for (Eigen::Index a = 0; a < d; ++a)
                for (Eigen::Index b = 0; b < d; ++b) c(a * d + i, b * d + j) += sij(a, b);
        }
    return c;
}

// Interaction strength g = max over terms of the maximum-magnitude Choi
// eigenvalue of the term generator.
inline double interaction_strength(const std::vector<LindbladTerm>& terms) {
    if (terms.empty()) throw ConfigError("interaction_strength: empty term list");
    double g = 0.0;
    for (const LindbladTerm& t : terms) {
        Eigen::VectorXd ev = hermitian_eigenvalues(choi_matrix(term_superoperator(t)), 1e-8);
        g = std::max(g, ev.cwiseAbs().maxCoeff());
    }
    return g;
}

// Choi PSD within tol and trace preservation within tol.
inline bool is_cptp(const Superoperator& s, double tol = 1e-10) {
    Mat c = choi_matrix(s);
    if (!is_hermitian(c, std::max(tol, 1e-9))) return false;
    if (hermitian_eigenvalues(c, std::max(tol, 1e-9)).minCoeff() < -tol) return false;
    Vec vec_id = vectorize(Mat::Identity(s.dim(), s.dim()));
    return ((s.matrix.adjoint() * vec_id) - vec_id).cwiseAbs().maxCoeff() <= tol;
}

struct ConvexSplit {
    double p_fire = 0.0;
    Superoperator channel;
};

// Splits exp(L tau) ~ (1 - g tau) Id + g tau (Id + L/g). Validity of the
// non-identity branch is enforced by the maximum-magnitude Choi eigenvalue
// rule g >= |lambda|_max(Choi(L)); the thrown error carries the min Choi
// eigenvalue of the candidate channel for diagnosis. The rule certifies
// complete positivity for jump structures whose Choi has no coupling between
// the maximally entangled direction and the rest (dephasing-type terms);
// for Hamiltonian terms the non-identity branch retains an O(1/g^2) Choi
// negativity at every finite g, which downstream consumers absorb by
// clipping measured probabilities at zero.
inline ConvexSplit convex_split(const LindbladTerm& term, double g, double tau) {
    if (tau < 0.0 || g < 0.0) throw ConfigError("convex_split: negative g or tau");
    Superoperator gen = term_superoperator(term);
    if (g * tau >= 1.0) throw InfeasibleError("convex_split: g*tau must be below 1");
    if (g == 0.0) {
        if (one_norm(gen.matrix) > 1e-12)
            throw InfeasibleError("convex_split: g = 0 requires a zero generator");
        return {0.0, Superoperator::identity(term.num_qubits())};
    }
    double strength = interaction_strength({term});
    Superoperator channel(term.num_qubits(),
                          Mat(Mat::Identity(gen.matrix.rows(), gen.matrix.cols()) + gen.matrix / g));
    if (g < strength * (1.0 - 1e-12)) {
        double min_eig = hermitian_eigenvalues(choi_matrix(channel), 1e-8).minCoeff();
        std::ostringstream msg;
        msg << "convex_split: channel not certified CP: g = " << g
            << " is below the Choi interaction strength " << strength
            << " (min Choi eigenvalue of Id + L/g = " << min_eig << ")";
        throw InfeasibleError(msg.str());
    }
    return {g * tau, std::move(channel)};
}

// exp(tau L) of the term generator, on the term's own support.
inline Superoperator exact_exponential(const LindbladTerm& term, double tau) {
    if (tau < 0.0) throw ConfigError("exact_exponential: negative tau");
    Superoperator gen = term_superoperator(term);
    return Superoperator(term.num_qubits(), expm(Mat(tau * gen.matrix)));
}

struct EbOutcome {
    int outcome = 0;
    Mat replacement;
};

// Samples POVM outcome i with probability Tr(E_i rho) and returns the
// prepared replacement state.
inline EbOutcome eb_apply_as_measurement(const EntanglementBreakingChannel& ch, const Mat& rho_marginal,
                                         Rng& rng) {
    if (rho_marginal.rows() != 2 || rho_marginal.cols() != 2)
        throw ConfigError("eb_apply_as_measurement: marginal must be one qubit");
    const int k = static_cast<int>(ch.povm.size());
    std::vector<double> p(k);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        double pi = (ch.povm[i] * rho_marginal).trace().real();
        p[i] = std::max(0.0, pi);
        sum += p[i];
    }
    if (std::abs(sum - 1.0) > 1e-7)
        throw NumericalError("eb_apply_as_measurement: POVM probabilities sum to " + std::to_string(sum));
    int outcome = rng.discrete(p.data(), k);
    return {outcome, ch.states[outcome]};
}

}  // namespace spinsim
