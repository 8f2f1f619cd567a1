#pragma once

#include "vaedyn/common.hpp"
#include "vaedyn/generative.hpp"
#include "vaedyn/micro.hpp"

#include <string>
#include <vector>

namespace vaedyn {

/// Order parameters of the student, with W* normalised so that W*^T W* / N = I:
///   m = W^T W* / N,  d = V^T W* / N,  Q = W^T W / N,  E = V^T V / N,  R = W^T V / N,  D.
/// Q and E are kept symmetric; the flat layout stores only their upper triangles.
template <typename Scalar = double>
struct MacroState {
    Mat<Scalar> m;  // M x M*
    Mat<Scalar> d;  // M x M*
    Mat<Scalar> Q;  // M x M, symmetric
    Mat<Scalar> E;  // M x M, symmetric
    Mat<Scalar> R;  // M x M
    Vec<Scalar> D;  // M

    int M() const { return int(m.rows()); }
    int M_star() const { return int(m.cols()); }

    static MacroState zeros(int M, int M_star) {
        MacroState s;
        s.m = Mat<Scalar>::Zero(M, M_star);
        s.d = Mat<Scalar>::Zero(M, M_star);
        s.Q = Mat<Scalar>::Zero(M, M);
        s.E = Mat<Scalar>::Zero(M, M);
        s.R = Mat<Scalar>::Zero(M, M);
        s.D = Vec<Scalar>::Zero(M);
        return s;
    }

    /// Collapsed point: all overlaps zero and D = 1.
    static MacroState collapsed(int M, int M_star) {
        MacroState s = zeros(M, M_star);
        s.D.setOnes();
        return s;
    }

    template <typename Other>
    MacroState<Other> cast() const {
        return {m.template cast<Other>(), d.template cast<Other>(), Q.template cast<Other>(),
                E.template cast<Other>(), R.template cast<Other>(), D.template cast<Other>()};
    }

    bool same_shape(const MacroState& o) const {
        return m.rows() == o.m.rows() && m.cols() == o.m.cols();
    }

    void symmetrize() {
        Q = (0.5 * (Q + Q.transpose())).eval();
        E = (0.5 * (E + E.transpose())).eval();
    }
};

using Macro = MacroState<double>;

/// Length of the flat state vector: 2 M M* + M(M+1) + M^2 + M.
inline int flat_size(int M, int M_star) { return 2 * M * M_star + M * (M + 1) + M * M + M; }

/// Stable flat order: m (row-major), d (row-major), Q upper, E upper, R (row-major), D.
/// Upper triangles run i <= j with i outer.
template <typename Scalar>
Vec<Scalar> flatten(const MacroState<Scalar>& s) {
    const int M = s.M(), K = s.M_star();
    Vec<Scalar> v(flat_size(M, K));
    int p = 0;
    for (int i = 0; i < M; ++i)
        for (int l = 0; l < K; ++l) v[p++] = s.m(i, l);
    for (int i = 0; i < M; ++i)
        for (int l = 0; l < K; ++l) v[p++] = s.d(i, l);
    for (int i = 0; i < M; ++i)
        for (int j = i; j < M; ++j) v[p++] = s.Q(i, j);
    for (int i = 0; i < M; ++i)
        for (int j = i; j < M; ++j) v[p++] = s.E(i, j);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) v[p++] = s.R(i, j);
    for (int i = 0; i < M; ++i) v[p++] = s.D[i];
    return v;
}

template <typename Scalar, typename Derived>
MacroState<Scalar> unflatten(const Eigen::MatrixBase<Derived>& v, int M, int M_star) {
    if (v.size() != flat_size(M, M_star)) throw ConfigError("unflatten: wrong vector length");
    MacroState<Scalar> s = MacroState<Scalar>::zeros(M, M_star);
    int p = 0;
    for (int i = 0; i < M; ++i)
        for (int l = 0; l < M_star; ++l) s.m(i, l) = v[p++];
    for (int i = 0; i < M; ++i)
        for (int l = 0; l < M_star; ++l) s.d(i, l) = v[p++];
    for (int i = 0; i < M; ++i)
        for (int j = i; j < M; ++j) s.Q(i, j) = s.Q(j, i) = v[p++];
    for (int i = 0; i < M; ++i)
        for (int j = i; j < M; ++j) s.E(i, j) = s.E(j, i) = v[p++];
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) s.R(i, j) = v[p++];
    for (int i = 0; i < M; ++i) s.D[i] = v[p++];
    return s;
}

/// Column names matching `flatten`, 1-based: m_1_1, ..., Q_1_2, ..., D_1.
std::vector<std::string> flat_labels(int M, int M_star);

/// Frobenius norm over all matrix entries (both triangles of Q and E).
double frobenius_distance(const Macro& a, const Macro& b);

/// Order parameters of a microscopic state.
Macro measure_macro(const MicroState& s, const GenerativeConfig& cfg);

/// Deterministic large-N limit of the order parameters produced by `init_micro`.
Macro expected_initial_macro(int M, int M_star, const InitOptions& init);

/// Throws NumericalError unless entries are finite, Q and E are symmetric and D > 0.
void check_macro(const Macro& s, double sym_tol = 1e-12);

}  // namespace vaedyn
