#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "mvgc/error.hpp"
#include "mvgc/numeric/rng.hpp"

namespace mvgc {

using real = double;

/// Row-major dense matrix; the storage type for every matrix in the library.
using dense_matrix = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using vector = Eigen::Matrix<real, Eigen::Dynamic, 1>;

inline std::string shape_string(const dense_matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline bool all_finite(const dense_matrix& m) { return m.allFinite(); }

inline dense_matrix matmul(const dense_matrix& a, const dense_matrix& b) {
    if (a.cols() != b.rows()) {
        throw shape_error("matmul: cannot multiply " + shape_string(a) + " by " + shape_string(b));
    }
    return a * b;
}

inline dense_matrix hadamard(const dense_matrix& a, const dense_matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw shape_error("hadamard: shape mismatch " + shape_string(a) + " vs " + shape_string(b));
    }
    return a.cwiseProduct(b);
}

struct element_stats {
    real mean = 0.0;
    real std = 0.0;  // population standard deviation
};

/// Mean and population standard deviation over all elements (two-pass).
inline element_stats elem_stats(const dense_matrix& a) {
    if (a.size() == 0) throw domain_error("elem_stats: empty matrix");
    const auto count = static_cast<real>(a.size());
    const real mean = a.sum() / count;
    const real var = (a.array() - mean).square().sum() / count;
    return {mean, std::sqrt(var)};
}

inline bool is_symmetric(const dense_matrix& a, real tol = 1e-10) {
    if (a.rows() != a.cols()) return false;
    const real scale = std::max<real>(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

struct spectral_estimate {
    real value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

inline constexpr std::uint64_t power_iteration_seed = 0x5eedULL;

/// Largest eigenvalue magnitude of a symmetric matrix by power iteration.
///
/// The start vector is drawn from a fixed seed so estimates are reproducible.
/// Iteration stops once successive Rayleigh quotients differ by less than
/// `tol`; otherwise the last estimate is returned with `converged == false`.
inline spectral_estimate spectral_radius_max(const dense_matrix& symmetric, std::size_t iters = 200,
                                             real tol = 1e-8) {
    if (symmetric.rows() != symmetric.cols()) {
        throw shape_error("spectral_radius_max: matrix is not square (" + shape_string(symmetric) + ")");
    }
    if (!is_symmetric(symmetric)) throw shape_error("spectral_radius_max: matrix is not symmetric");
    const auto n = symmetric.rows();
    if (n == 0) return {0.0, true, 0};

    rng gen(power_iteration_seed);
    vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = gen.uniform(-1.0, 1.0);
    v.normalize();

    spectral_estimate out;
    real previous = 0.0;
    vector w(n);
    for (std::size_t it = 1; it <= iters; ++it) {
        w.noalias() = symmetric * v;
        const real rayleigh = v.dot(w);
        const real norm = w.norm();
        out.value = std::abs(rayleigh);
        out.iterations = it;
        if (norm == 0.0) {
            out.value = 0.0;
            out.converged = true;
            return out;
        }
        if (it > 1 && std::abs(rayleigh - previous) < tol) {
            out.converged = true;
            return out;
        }
        previous = rayleigh;
        v = w / norm;
    }
    return out;
}

/// Largest eigenvalue of a symmetric matrix via a dense self-adjoint solver.
/// Depends only on the spectrum, so it is invariant to simultaneous row and
/// column permutations up to round-off.
inline real largest_eigenvalue(const dense_matrix& symmetric) {
    if (symmetric.rows() != symmetric.cols()) {
        throw shape_error("largest_eigenvalue: matrix is not square (" + shape_string(symmetric) + ")");
    }
    if (!is_symmetric(symmetric)) throw shape_error("largest_eigenvalue: matrix is not symmetric");
    if (symmetric.rows() == 0) return 0.0;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(symmetric), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw numeric_error("largest_eigenvalue: eigensolver did not converge");
    return solver.eigenvalues()[solver.eigenvalues().size() - 1];
}

}  // namespace mvgc
