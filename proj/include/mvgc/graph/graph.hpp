#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mvgc/error.hpp"
#include "mvgc/numeric/dense.hpp"
#include "mvgc/numeric/rng.hpp"

namespace mvgc {

/// Undirected graph with a dense vertex signal and a class label.
struct graph {
    dense_matrix adjacency;  // n x n, binary, symmetric, zero diagonal
    dense_matrix features;   // n x d
    std::size_t label = 0;

    std::size_t vertex_count() const noexcept { return static_cast<std::size_t>(adjacency.rows()); }
    std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(features.cols()); }

    /// Undirected edge count (each pair once).
    std::size_t edge_count() const {
        return static_cast<std::size_t>(adjacency.sum() / 2.0 + 0.5);
    }
};

inline void validate(const graph& g) {
    const auto& a = g.adjacency;
    if (a.rows() != a.cols()) throw shape_error("graph: adjacency is not square (" + shape_string(a) + ")");
    if (g.features.rows() != a.rows()) {
        throw shape_error("graph: " + std::to_string(g.features.rows()) + " feature rows for " +
                          std::to_string(a.rows()) + " vertices");
    }
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (a(i, i) != 0.0) throw domain_error("graph: self loop at vertex " + std::to_string(i));
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const real w = a(i, j);
            if (w != 0.0 && w != 1.0) throw domain_error("graph: adjacency entries must be 0 or 1");
            if (w != a(j, i)) throw domain_error("graph: adjacency is not symmetric");
        }
    }
}

/// Erdos-Renyi graph with features drawn from U(-1, 1).
inline graph random_graph(std::size_t n, std::size_t feature_dim, real edge_probability, rng& gen,
                          std::size_t label = 0) {
    graph g;
    const auto nn = static_cast<Eigen::Index>(n);
    g.adjacency = dense_matrix::Zero(nn, nn);
    for (Eigen::Index i = 0; i < nn; ++i)
        for (Eigen::Index j = i + 1; j < nn; ++j)
            if (gen.bernoulli(edge_probability)) g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
    g.features.resize(nn, static_cast<Eigen::Index>(feature_dim));
    for (Eigen::Index i = 0; i < g.features.size(); ++i) g.features.data()[i] = gen.uniform(-1.0, 1.0);
    g.label = label;
    return g;
}

/// Ordered family of same-sized symmetric Laplacians, one per view.
struct laplacian_set {
    std::vector<dense_matrix> matrices;

    std::size_t size() const noexcept { return matrices.size(); }
    const dense_matrix& operator[](std::size_t i) const { return matrices.at(i); }
};

struct normalized_laplacian_result {
    dense_matrix laplacian;
    vector inv_sqrt_degree;  // zero for zero-degree vertices
};

/// I - D^{-1/2} W D^{-1/2}, keeping D^{-1/2} for the backward pass.
/// Zero-degree vertices get a zero scaling, so their Laplacian row is the
/// identity row.
inline normalized_laplacian_result normalized_laplacian_parts(const dense_matrix& weights) {
    if (weights.rows() != weights.cols()) {
        throw shape_error("normalized_laplacian: weights not square (" + shape_string(weights) + ")");
    }
    if (weights.size() > 0 && weights.minCoeff() < 0.0) {
        throw domain_error("normalized_laplacian: negative edge weight");
    }
    const auto n = weights.rows();
    normalized_laplacian_result out;
    out.inv_sqrt_degree.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const real deg = weights.row(i).sum();
        out.inv_sqrt_degree[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    const auto& s = out.inv_sqrt_degree;
    out.laplacian = -(s.asDiagonal() * weights * s.asDiagonal());
    out.laplacian.diagonal().array() += 1.0;
    return out;
}

inline dense_matrix normalized_laplacian(const dense_matrix& weights) {
    return normalized_laplacian_parts(weights).laplacian;
}

/// (2 / lambda_max) L - I; maps a spectrum in [0, lambda_max] onto [-1, 1].
inline dense_matrix rescale_laplacian(const dense_matrix& l, real lambda_max) {
    if (!(lambda_max > 0.0)) throw domain_error("rescale_laplacian: lambda_max must be positive");
    if (l.rows() != l.cols()) throw shape_error("rescale_laplacian: not square (" + shape_string(l) + ")");
    dense_matrix out = (2.0 / lambda_max) * l;
    out.diagonal().array() -= 1.0;
    return out;
}

}  // namespace mvgc
