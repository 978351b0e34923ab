/**
 * @file
 * @brief Rate matrices and the composition functions that turn an ordered
 *        word sequence into a context embedding.
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 *
 * Conventions: matrices act on column vectors from the left, so a rate matrix
 * has non-negative off-diagonals and columns summing to zero, and a stochastic
 * matrix has columns summing to one. Sequences are given in sentence order;
 * the first word's factor is applied to the initial distribution first.
 */
#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <iterator>
#include <ranges>
#include <string>

#include <Eigen/Dense>

#include "common.hpp"

namespace word2rate {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using MatrixView = Eigen::Map<const Matrix>;

/// Anything with Eigen's dense-matrix interface (Matrix, Map, Block, ...).
template <class T>
concept DenseMatrix = requires(const T &m) {
    { m.rows() } -> std::convertible_to<Eigen::Index>;
    { m.cols() } -> std::convertible_to<Eigen::Index>;
    { m * Vector() };
};

/// Ordered sequence of matrices, first word first.
template <class R>
concept MatrixSequence = std::ranges::forward_range<R> && DenseMatrix<std::ranges::range_value_t<R>>;

template <class R>
concept VectorSequence = std::ranges::forward_range<R> && requires(std::ranges::range_reference_t<R> v) {
    { v.size() } -> std::convertible_to<Eigen::Index>;
};

inline Vector uniform_distribution(std::size_t d) {
    if (d == 0) throw Error("uniform distribution needs dimension >= 1");
    return Vector::Constant(static_cast<Eigen::Index>(d), 1.0 / static_cast<double>(d));
}

/// Clamp off-diagonals at zero, then set each diagonal entry to minus the sum
/// of its column's off-diagonals.
template <DenseMatrix M>
Matrix project_rate_matrix(const M &q) {
    if (q.rows() != q.cols()) throw Error("rate matrix must be square");
    Matrix out(q.rows(), q.cols());
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
        double off = 0.0;
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            const double x = q(i, j);
            if (!std::isfinite(x)) {
                throw Error("non-finite entry in rate matrix at (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
            }
            if (i == j) continue;
            out(i, j) = x > 0.0 ? x : 0.0;
            off += out(i, j);
        }
        out(j, j) = -off;
    }
    return out;
}

/// In-place projection on raw column-major storage of a d x d matrix.
inline void project_rate_matrix_inplace(double *data, std::size_t d) {
    Eigen::Map<Matrix> q(data, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    q = project_rate_matrix(q);
}

template <DenseMatrix M>
bool is_valid_rate_matrix(const M &q, double tol = 1e-12) {
    if (q.rows() != q.cols()) return false;
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            if (!std::isfinite(q(i, j))) return false;
            if (i != j && q(i, j) < 0.0) return false;
            sum += q(i, j);
        }
        if (std::abs(sum) >= tol) return false;
    }
    return true;
}

namespace detail {

template <MatrixSequence R>
void check_square(const R &qs, Eigen::Index d) {
    for (const auto &q : qs) {
        if (q.rows() != d || q.cols() != d) {
            throw Error("dimension mismatch: expected " + std::to_string(d) + "x" + std::to_string(d) +
                        " matrix, got " + std::to_string(q.rows()) + "x" + std::to_string(q.cols()));
        }
    }
}

} // namespace detail

/// (I + eps * sum Q_i) p
template <MatrixSequence R>
Vector compose_fos(const R &qs, double eps, const Vector &p) {
    detail::check_square(qs, p.size());
    Matrix total = Matrix::Zero(p.size(), p.size());
    for (const auto &q : qs) total += q;
    return p + eps * (total * p);
}

/// (I + eps Q_k) ... (I + eps Q_1) p
template <MatrixSequence R>
Vector compose_fop(const R &qs, double eps, const Vector &p) {
    detail::check_square(qs, p.size());
    Vector s = p;
    for (const auto &q : qs) s += eps * (q * s);
    return s;
}

/// Every term of the product of exponentials through eps^2:
///   p + eps sum_i Q_i p + eps^2 sum_{i<j} Q_j Q_i p + eps^2/2 sum_i Q_i^2 p
/// where i < j means word i precedes word j.
template <MatrixSequence R>
Vector compose_sos(const R &qs, double eps, const Vector &p) {
    detail::check_square(qs, p.size());
    Vector linear = Vector::Zero(p.size());
    Vector quadratic = Vector::Zero(p.size());
    Vector prefix = Vector::Zero(p.size()); // sum of Q_i p over earlier words
    for (const auto &q : qs) {
        const Vector u = q * p;
        quadratic += q * (prefix + 0.5 * u);
        linear += u;
        prefix += u;
    }
    return p + eps * linear + (eps * eps) * quadratic;
}

template <VectorSequence R>
Vector compose_cbow(const R &vs, std::size_t d) {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(d));
    for (const auto &v : vs) {
        if (v.size() != out.size()) {
            throw Error("dimension mismatch: expected vector of size " + std::to_string(d) + ", got " +
                        std::to_string(v.size()));
        }
        out += v;
    }
    return out;
}

/// Row-major unrolling of a square matrix.
template <DenseMatrix M>
Vector unroll_row_major(const M &m) {
    Vector out(m.rows() * m.cols());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out(k++) = m(i, j);
    }
    return out;
}

/// M_k ... M_1, unrolled row-major. The empty product is the identity.
template <MatrixSequence R>
Vector compose_cmow(const R &ms, std::size_t side) {
    const auto n = static_cast<Eigen::Index>(side);
    detail::check_square(ms, n);
    Matrix product = Matrix::Identity(n, n);
    for (const auto &m : ms) product = m * product;
    return unroll_row_major(product);
}

inline Vector compose_hybrid(const Vector &a, const Vector &b) {
    Vector out(a.size() + b.size());
    out << a, b;
    return out;
}

inline constexpr std::size_t max_bruteforce_length = 12;

/// Sums eps^|T| (prod_{t in T, descending} Q_t) p over all 2^k subsets T of
/// positions. Agrees exactly (in exact arithmetic) with compose_fop.
template <MatrixSequence R>
Vector expand_fop_bruteforce(const R &qs, double eps, const Vector &p) {
    detail::check_square(qs, p.size());
    std::vector<Matrix> seq;
    for (const auto &q : qs) seq.emplace_back(q);
    if (seq.size() > max_bruteforce_length) {
        throw Error("sequence too long for brute-force expansion (" + std::to_string(seq.size()) + " > " +
                    std::to_string(max_bruteforce_length) + ")");
    }
    Vector out = Vector::Zero(p.size());
    const std::size_t subsets = std::size_t{1} << seq.size();
    for (std::size_t mask = 0; mask < subsets; ++mask) {
        Vector term = p;
        double scale = 1.0;
        for (std::size_t t = 0; t < seq.size(); ++t) {
            if (mask & (std::size_t{1} << t)) {
                term = seq[t] * term;
                scale *= eps;
            }
        }
        out += scale * term;
    }
    return out;
}

} // namespace word2rate
