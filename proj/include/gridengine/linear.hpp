#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gridengine/error.hpp"

namespace gridengine {

using Complex = std::complex<double>;

template <class Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;
using RealSparse = SparseMatrix<double>;
using ComplexSparse = SparseMatrix<Complex>;

template <class Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace detail {

inline void fnv_mix(std::uint64_t& h, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
    }
}

inline void fnv_mix_scalar(std::uint64_t& h, double v) { fnv_mix(h, std::bit_cast<std::uint64_t>(v)); }

inline void fnv_mix_scalar(std::uint64_t& h, const Complex& v)
{
    fnv_mix_scalar(h, v.real());
    fnv_mix_scalar(h, v.imag());
}

inline bool is_finite(double v) { return std::isfinite(v); }
inline bool is_finite(const Complex& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

}  // namespace detail

/// Hash of dimension, sparsity pattern and values of a sparse matrix.
template <class Scalar>
std::uint64_t matrix_fingerprint(const SparseMatrix<Scalar>& a)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    detail::fnv_mix(h, static_cast<std::uint64_t>(a.rows()));
    detail::fnv_mix(h, static_cast<std::uint64_t>(a.cols()));
    for (int k = 0; k < a.outerSize(); ++k) {
        for (typename SparseMatrix<Scalar>::InnerIterator it(a, k); it; ++it) {
            detail::fnv_mix(h, static_cast<std::uint64_t>(it.row()));
            detail::fnv_mix(h, static_cast<std::uint64_t>(it.col()));
            detail::fnv_mix_scalar(h, it.value());
        }
    }
    return h;
}

/// Sparse LU factorization (row pivoting, COLAMD column ordering) that can be
/// reused across many right-hand sides. Copies share the same immutable
/// factors; concurrent solve() calls are safe because each uses its own
/// workspace.
template <class Scalar>
class Factorization {
public:
    using Matrix = SparseMatrix<Scalar>;
    using Vector = DenseVector<Scalar>;

    Factorization() = default;

    /// Throws ErrorKind::Singular for non-square, structurally or
    /// numerically singular matrices.
    static Factorization factorize(const Matrix& a)
    {
        if (a.rows() != a.cols()) {
            throw Error(ErrorKind::InvalidValue, "cannot factorize a non-square matrix");
        }
        Factorization f;
        f.dimension_ = static_cast<std::size_t>(a.rows());
        f.fingerprint_ = matrix_fingerprint(a);
        if (a.rows() == 0) {
            return f;
        }
        Matrix compressed = a;
        compressed.makeCompressed();
        auto lu = std::make_shared<Solver>();
        lu->analyzePattern(compressed);
        lu->factorize(compressed);
        if (lu->info() != Eigen::Success) {
            throw Error(ErrorKind::Singular, "matrix is singular: " + lu->lastErrorMessage());
        }
        f.lu_ = std::move(lu);
        return f;
    }

    std::size_t dimension() const noexcept { return dimension_; }
    std::uint64_t source_fingerprint() const noexcept { return fingerprint_; }

    Vector solve(const Vector& b) const
    {
        if (static_cast<std::size_t>(b.size()) != dimension_) {
            throw Error(ErrorKind::InvalidValue, "right-hand side dimension " + std::to_string(b.size()) +
                                                     " does not match matrix dimension " +
                                                     std::to_string(dimension_));
        }
        if (dimension_ == 0) {
            return Vector(0);
        }
        Vector x = lu_->solve(b);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (!detail::is_finite(x[i])) {
                throw Error(ErrorKind::Singular, "solution is not finite; matrix is numerically singular");
            }
        }
        return x;
    }

    std::vector<Scalar> solve(std::span<const Scalar> b) const
    {
        Vector rhs = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
        Vector x = solve(rhs);
        return std::vector<Scalar>(x.data(), x.data() + x.size());
    }

private:
    using Solver = Eigen::SparseLU<Matrix, Eigen::COLAMDOrdering<int>>;

    std::shared_ptr<const Solver> lu_;
    std::size_t dimension_ = 0;
    std::uint64_t fingerprint_ = 0;
};

using RealFactorization = Factorization<double>;
using ComplexFactorization = Factorization<Complex>;

/// One-shot factorize + solve.
template <class Scalar>
std::vector<Scalar> solve_linear(const SparseMatrix<Scalar>& a, std::span<const Scalar> b)
{
    return Factorization<Scalar>::factorize(a).solve(b);
}

/// Sparse matrix from a dense row-major list, mostly for small literals.
template <class Scalar>
SparseMatrix<Scalar> sparse_from_dense(const std::vector<std::vector<Scalar>>& rows)
{
    const auto n = static_cast<int>(rows.size());
    const int m = n == 0 ? 0 : static_cast<int>(rows.front().size());
    std::vector<Eigen::Triplet<Scalar>> triplets;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            if (rows[i][j] != Scalar{}) {
                triplets.emplace_back(i, j, rows[i][j]);
            }
        }
    }
    SparseMatrix<Scalar> a(n, m);
    a.setFromTriplets(triplets.begin(), triplets.end());
    return a;
}

}  // namespace gridengine
