#pragma once

#include <gtest/gtest.h>

#include "spinsim/channel_algebra.hpp"
#include "spinsim/rng.hpp"

namespace spinsim::test {

inline void expect_mat_near(const Mat& a, const Mat& b, double tol, const char* what = "") {
    ASSERT_EQ(a.rows(), b.rows()) << what;
    ASSERT_EQ(a.cols(), b.cols()) << what;
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), tol) << what;
}

inline Mat random_matrix(int rows, int cols, Rng& rng) {
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = cxd(2.0 * rng.next_double() - 1.0, 2.0 * rng.next_double() - 1.0);
    return m;
}

inline Mat random_hermitian(int dim, Rng& rng) {
    Mat m = random_matrix(dim, dim, rng);
    return 0.5 * (m + m.adjoint());
}

inline Mat random_density(int dim, Rng& rng) {
    Mat m = random_matrix(dim, dim, rng);
    Mat rho = m * m.adjoint();
    return rho / rho.trace().real();
}

// Random Lindblad generator on k qubits (Hamiltonian + one jump operator).
inline LindbladTerm random_term(std::vector<int> support, Rng& rng) {
    LindbladTerm t;
    t.support = std::move(support);
    const int dim = 1 << t.num_qubits();
    t.hamiltonian = random_hermitian(dim, rng);
    t.jump_ops.push_back(random_matrix(dim, dim, rng));
    return t;
}

inline LindbladTerm dephasing_term(int site) {
    LindbladTerm t;
    t.support = {site};
    t.jump_ops = {pauli_z()};
    return t;
}

}  // namespace spinsim::test
