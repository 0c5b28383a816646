#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "spinsim/errors.hpp"

namespace spinsim {

using cxd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// Conventions used throughout:
//  * qubit s of an n-qubit register owns bit (n-1-s) of the basis index, i.e.
//    |b_0 b_1 ... b_{n-1}> has index sum b_s * 2^(n-1-s); tensor products are
//    built qubit-0-first (coarsest factor).
//  * density operators are vectorized by column stacking,
//    vec(rho)[r + dim*c] = rho(r, c), which is exactly Eigen's column-major
//    storage, so Map-based vec/unvec are copies of contiguous data.
//  * a superoperator for rho -> A rho B is kron(B^T, A).

inline Mat pauli_x() { return (Mat(2, 2) << 0, 1, 1, 0).finished(); }
inline Mat pauli_y() { return (Mat(2, 2) << 0, cxd(0, -1), cxd(0, 1), 0).finished(); }
inline Mat pauli_z() { return (Mat(2, 2) << 1, 0, 0, -1).finished(); }
inline Mat identity2() { return Mat::Identity(2, 2); }
inline Mat ket_bra(int i, int j, int dim = 2) {
    Mat m = Mat::Zero(dim, dim);
    m(i, j) = 1.0;
    return m;
}

inline Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    out = Eigen::kroneckerProduct(a, b);
    return out;
}

inline Vec vectorize(const Mat& rho) {
    return Eigen::Map<const Vec>(rho.data(), rho.size());
}

inline Mat unvectorize(const Vec& v, Eigen::Index dim) {
    return Eigen::Map<const Mat>(v.data(), dim, dim);
}

inline double one_norm(const Mat& a) {
    return a.cwiseAbs().colwise().sum().maxCoeff();
}

// Sum of singular values; used as the trace distance (after the 1/2 factor
// applied by callers where appropriate).
inline double trace_norm(const Mat& a) {
    Eigen::JacobiSVD<Mat> svd(a);
    return svd.singularValues().sum();
}

inline bool is_hermitian(const Mat& a, double tol) {
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

// Eigenvalues of a matrix that is Hermitian up to `tol` (it is symmetrized
// before decomposition). Ascending order.
inline Eigen::VectorXd hermitian_eigenvalues(const Mat& a, double tol = 1e-8) {
    if (!is_hermitian(a, tol))
        throw NumericalError("hermitian_eigenvalues: matrix is not Hermitian within tolerance");
    Mat h = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

// Matrix exponential by scaling and squaring with a truncated Taylor series.
// The argument is scaled until its 1-norm is <= 0.5, where the series reaches
// machine precision in ~20 terms; relative tolerance 1e-12 or better.
inline Mat expm(const Mat& a) {
    if (!a.allFinite()) throw NumericalError("expm: non-finite entries");
    const Eigen::Index d = a.rows();
    if (a.cols() != d) throw NumericalError("expm: matrix not square");
    double norm = one_norm(a);
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
        if (squarings > 60) throw NumericalError("expm: norm too large");
    }
    Mat b = a / std::pow(2.0, squarings);
    Mat result = Mat::Identity(d, d);
    Mat term = Mat::Identity(d, d);
    for (int k = 1; k <= 64; ++k) {
        term = (term * b) / static_cast<double>(k);
        result += term;
        if (one_norm(term) <= 1e-16 * one_norm(result)) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

namespace detail {

// v-space offsets (v = r + 2^n * c) enumerating the row/col bits of a subset
// of qubits, everything else held at zero. offsets(sites) and
// offsets(complement) partition the index bits, so any v decomposes uniquely
// as loc + rest. The order of `sites` defines the local tensor-factor order
// and need not be ascending.
inline std::vector<uint64_t> vec_offsets(int n, const std::vector<int>& sites) {
    const int k = static_cast<int>(sites.size());
    std::vector<uint64_t> out;
    out.resize(uint64_t(1) << (2 * k));
    for (uint64_t l = 0; l < out.size(); ++l) {
        // local vec index l = r_loc + 2^k * c_loc, site order = ascending
        uint64_t r_loc = l & ((uint64_t(1) << k) - 1);
        uint64_t c_loc = l >> k;
        uint64_t r = 0, c = 0;
        for (int i = 0; i < k; ++i) {
            uint64_t bit = uint64_t(1) << (k - 1 - i);       // site i of the subset
            uint64_t full = uint64_t(1) << (n - 1 - sites[i]);
            if (r_loc & bit) r |= full;
            if (c_loc & bit) c |= full;
        }
        out[l] = r + (c << n);
    }
    return out;
}

inline std::vector<int> complement_sites(int n, const std::vector<int>& sites) {
    std::vector<int> rest;
    rest.reserve(n - sites.size());
    std::vector<char> in(n, 0);
    for (int s : sites) in[s] = 1;
    for (int s = 0; s < n; ++s)
        if (!in[s]) rest.push_back(s);
    return rest;
}

}  // namespace detail

// Precomputed index plan for applying a k-qubit superoperator to the
// vectorized state of an n-qubit register. Reused across many applications in
// the Monte Carlo hot loops.
struct LocalApplyPlan {
    int n = 0;
    int k = 0;
    std::vector<uint64_t> loc;   // 4^k offsets of the support
    std::vector<uint64_t> rest;  // 4^(n-k) offsets of the complement

    LocalApplyPlan() = default;
    // `sites` lists the qubits the local operator acts on, in the operator's
    // own tensor-factor order; entries must be distinct.
    LocalApplyPlan(int n_qubits, std::vector<int> sites) : n(n_qubits), k(static_cast<int>(sites.size())) {
        std::vector<char> seen(n, 0);
        for (int s : sites) {
            if (s < 0 || s >= n) throw ConfigError("apply plan: site out of range");
            if (seen[s]) throw ConfigError("apply plan: duplicate site");
            seen[s] = 1;
        }
        loc = detail::vec_offsets(n, sites);
        rest = detail::vec_offsets(n, detail::complement_sites(n, sites));
    }

    // state <- S_local applied on the plan's support; `state` has 4^n entries.
    void apply(const Mat& s_local, Vec& state, std::vector<cxd>& scratch) const {
        const uint64_t dloc = loc.size();
        scratch.resize(dloc);
        for (uint64_t restoff : rest) {
            for (uint64_t out = 0; out < dloc; ++out) {
                cxd acc(0, 0);
                const cxd* row = s_local.data() + out;  // column-major: S(out, in) = data[out + dloc*in]
                for (uint64_t in = 0; in < dloc; ++in)
                    acc += row[in * dloc] * state[restoff + loc[in]];
                scratch[out] = acc;
            }
            for (uint64_t out = 0; out < dloc; ++out) state[restoff + loc[out]] = scratch[out];
        }
    }
};

inline void apply_superop_at(const Mat& s_local, Vec& state, int n, const std::vector<int>& sites) {
    LocalApplyPlan plan(n, sites);
    std::vector<cxd> scratch;
    plan.apply(s_local, state, scratch);
}

// Dense 4^n x 4^n embedding of a k-qubit superoperator acting on `sites`,
// identity elsewhere.
inline Mat embed_superop(const Mat& s_local, int n, const std::vector<int>& sites) {
    LocalApplyPlan plan(n, sites);
    const uint64_t dfull = uint64_t(1) << (2 * n);
    const uint64_t dloc = plan.loc.size();
    Mat out = Mat::Zero(dfull, dfull);
    for (uint64_t restoff : plan.rest)
        for (uint64_t a = 0; a < dloc; ++a)
            for (uint64_t b = 0; b < dloc; ++b)
                out(restoff + plan.loc[a], restoff + plan.loc[b]) = s_local(a, b);
    return out;
}

// Partial trace keeping `keep` (ascending site ids) of an n-qubit density
// matrix; the kept qubits appear in the same relative order.
inline Mat partial_trace(const Mat& rho, int n, const std::vector<int>& keep) {
    const int k = static_cast<int>(keep.size());
    for (size_t i = 1; i < keep.size(); ++i)
        if (keep[i] <= keep[i - 1]) throw ConfigError("partial_trace: keep sites must be ascending");
    std::vector<int> traced = detail::complement_sites(n, keep);
    const int t = static_cast<int>(traced.size());
    // row-index offsets for kept and traced bit patterns
    auto row_offsets = [&](const std::vector<int>& sites) {
        const int m = static_cast<int>(sites.size());
        std::vector<uint64_t> out(uint64_t(1) << m, 0);
        for (uint64_t x = 0; x < out.size(); ++x) {
            uint64_t r = 0;
            for (int i = 0; i < m; ++i)
                if (x & (uint64_t(1) << (m - 1 - i))) r |= uint64_t(1) << (n - 1 - sites[i]);
            out[x] = r;
        }
        return out;
    };
    auto koff = row_offsets(keep);
    auto toff = row_offsets(traced);
    const uint64_t dk = uint64_t(1) << k, dt = uint64_t(1) << t;
    Mat out = Mat::Zero(dk, dk);
    for (uint64_t r = 0; r < dk; ++r)
        for (uint64_t c = 0; c < dk; ++c) {
            cxd acc(0, 0);
            for (uint64_t x = 0; x < dt; ++x) acc += rho(koff[r] + toff[x], koff[c] + toff[x]);
            out(r, c) = acc;
        }
    return out;
}

inline void validate_density_matrix(const Mat& rho, double tol = 1e-9) {
    if (rho.rows() != rho.cols()) throw NumericalError("state: not square");
    if (!rho.allFinite()) throw NumericalError("state: non-finite entries");
    if (!is_hermitian(rho, tol)) throw NumericalError("state: not Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > tol || std::abs(rho.trace().imag()) > tol)
        throw NumericalError("state: trace != 1");
    Eigen::VectorXd ev = hermitian_eigenvalues(rho, tol);
    if (ev.minCoeff() < -tol) throw NumericalError("state: negative eigenvalue beyond tolerance");
}

}  // namespace spinsim
