#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvgc/error.hpp"
#include "mvgc/graph/graph.hpp"
#include "mvgc/numeric/dense.hpp"

namespace mvgc {

/// Stability floor added under the square root of every pairwise distance.
inline constexpr real distance_epsilon = 1e-12;

/// Trainable factor of one view; the view metric is Q Q^T.
struct view_params {
    dense_matrix q_factor;  // d x d
    std::size_t view_index = 0;
};

/// Unordered vertex pairs (i < j) in lexicographic order.
struct pair_index {
    std::size_t n = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;

    std::size_t size() const noexcept { return pairs.size(); }

    static pair_index complete(std::size_t n) {
        pair_index idx;
        idx.n = n;
        idx.pairs.reserve(n * (n > 0 ? n - 1 : 0) / 2);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                idx.pairs.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        return idx;
    }
};

struct feature_difference_result {
    dense_matrix diffs;  // c x d, row r = x_i - x_j
    pair_index index;
};

inline feature_difference_result feature_differences(const dense_matrix& x) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n < 2) throw domain_error("feature_differences: need at least 2 vertices, got " + std::to_string(n));
    feature_difference_result out;
    out.index = pair_index::complete(n);
    out.diffs.resize(static_cast<Eigen::Index>(out.index.size()), x.cols());
    Eigen::Index r = 0;
    for (const auto& [i, j] : out.index.pairs) out.diffs.row(r++) = x.row(i) - x.row(j);
    return out;
}

/// dX from dF for F = feature_differences(X).
inline dense_matrix feature_differences_backward(const dense_matrix& d_diffs, const pair_index& idx) {
    dense_matrix dx = dense_matrix::Zero(static_cast<Eigen::Index>(idx.n), d_diffs.cols());
    Eigen::Index r = 0;
    for (const auto& [i, j] : idx.pairs) {
        dx.row(i) += d_diffs.row(r);
        dx.row(j) -= d_diffs.row(r);
        ++r;
    }
    return dx;
}

struct metric_result {
    dense_matrix metric;  // Q Q^T / max(Q Q^T)
    dense_matrix gram;    // Q Q^T before normalization
    Eigen::Index max_row = 0;
    Eigen::Index max_col = 0;
    real max_value = 0.0;
    bool degenerate = false;  // gram had no positive entry; metric left unscaled
};

/// M = Q Q^T divided by its largest entry. The first occurrence of the
/// maximum (row-major) is recorded for the backward pass.
inline metric_result regularized_metric(const view_params& view) {
    const auto& q = view.q_factor;
    if (q.rows() != q.cols()) throw shape_error("regularized_metric: Q must be square, got " + shape_string(q));
    if (!q.allFinite()) throw numeric_error("regularized_metric: non-finite entry in Q of view " + std::to_string(view.view_index));
    metric_result out;
    out.gram.noalias() = q * q.transpose();
    if (out.gram.size() == 0) {
        out.metric = out.gram;
        out.degenerate = true;
        return out;
    }
    out.max_value = out.gram.maxCoeff(&out.max_row, &out.max_col);
    if (out.max_value > 0.0) {
        out.metric = out.gram / out.max_value;
    } else {
        out.metric = out.gram;
        out.degenerate = true;
    }
    return out;
}

/// dQ from dM. The position of the maximum is held fixed.
inline dense_matrix regularized_metric_backward(const view_params& view, const metric_result& fwd,
                                                const dense_matrix& d_metric) {
    dense_matrix d_gram;
    if (fwd.degenerate) {
        d_gram = d_metric;
    } else {
        const real inv = 1.0 / fwd.max_value;
        d_gram = d_metric * inv;
        d_gram(fwd.max_row, fwd.max_col) -= d_metric.cwiseProduct(fwd.gram).sum() * inv * inv;
    }
    return (d_gram + d_gram.transpose()) * view.q_factor;
}

/// Mahalanobis length of every row of F under M: sqrt(((F M) .* F) 1 + eps).
/// Only the c x d product F M is materialized, never the c x c matrix F M F^T.
inline vector pairwise_mahalanobis(const dense_matrix& f, const dense_matrix& m, real eps = distance_epsilon) {
    if (m.rows() != m.cols() || f.cols() != m.rows()) {
        throw shape_error("pairwise_mahalanobis: F is " + shape_string(f) + ", M is " + shape_string(m));
    }
    dense_matrix fm(f.rows(), f.cols());
    fm.noalias() = f * m;
    vector t = fm.cwiseProduct(f).rowwise().sum();
    return (t.array().max(0.0) + eps).sqrt().matrix();
}

struct mahalanobis_gradients {
    dense_matrix d_diffs;
    dense_matrix d_metric;
};

inline mahalanobis_gradients pairwise_mahalanobis_backward(const dense_matrix& f, const dense_matrix& m,
                                                           const vector& dist, const vector& d_dist) {
    const vector dt = d_dist.cwiseQuotient(2.0 * dist);
    dense_matrix scaled = dt.asDiagonal() * f;
    mahalanobis_gradients out;
    out.d_metric.noalias() = f.transpose() * scaled;
    out.d_diffs.noalias() = scaled * (m + m.transpose());
    return out;
}

/// Places pair distances into a symmetric n x n matrix with zero diagonal.
inline dense_matrix scatter_distances(const vector& d, const pair_index& idx) {
    if (static_cast<std::size_t>(d.size()) != idx.size()) {
        throw shape_error("scatter_distances: " + std::to_string(d.size()) + " distances for " +
                          std::to_string(idx.size()) + " pairs");
    }
    const auto n = static_cast<Eigen::Index>(idx.n);
    dense_matrix h = dense_matrix::Zero(n, n);
    Eigen::Index r = 0;
    for (const auto& [i, j] : idx.pairs) {
        h(i, j) = d[r];
        h(j, i) = d[r];
        ++r;
    }
    return h;
}

/// Reads pair values back out of an n x n matrix (upper triangle).
inline vector gather_distances(const dense_matrix& h, const pair_index& idx) {
    vector d(static_cast<Eigen::Index>(idx.size()));
    Eigen::Index r = 0;
    for (const auto& [i, j] : idx.pairs) d[r++] = h(i, j);
    return d;
}

/// Adjoint of scatter_distances: each pair collects both symmetric entries.
inline vector scatter_distances_backward(const dense_matrix& d_h, const pair_index& idx) {
    vector d(static_cast<Eigen::Index>(idx.size()));
    Eigen::Index r = 0;
    for (const auto& [i, j] : idx.pairs) d[r++] = d_h(i, j) + d_h(j, i);
    return d;
}

/// exp(-H / 2 sigma^2), or exp(-H^2 / 2 sigma^2) when `squared`.
inline dense_matrix gaussian_similarity(const dense_matrix& h, real sigma, bool squared = false) {
    if (!(sigma > 0.0)) throw domain_error("gaussian_similarity: sigma must be positive");
    const real scale = -1.0 / (2.0 * sigma * sigma);
    if (squared) return (h.array().square() * scale).exp().matrix();
    return (h.array() * scale).exp().matrix();
}

/// dH from dS. The diagonal of S is exp(0) regardless of parameters and
/// receives no gradient.
inline dense_matrix gaussian_similarity_backward(const dense_matrix& h, const dense_matrix& s, const dense_matrix& d_s,
                                                 real sigma, bool squared = false) {
    const real scale = -1.0 / (2.0 * sigma * sigma);
    dense_matrix d_h = squared ? dense_matrix((d_s.array() * s.array() * h.array() * (2.0 * scale)).matrix())
                               : dense_matrix((d_s.array() * s.array() * scale).matrix());
    d_h.diagonal().setZero();
    return d_h;
}

/// Median of the pair distances; a data-driven kernel width.
inline real median_sigma(const vector& d) {
    if (d.size() == 0) return 1.0;
    std::vector<real> v(d.data(), d.data() + d.size());
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid > 0.0 ? *mid : 1.0;
}

/// dW from dL for L = normalized_laplacian(W) with D the row sums of W.
inline dense_matrix normalized_laplacian_backward(const dense_matrix& weights, const vector& inv_sqrt_degree,
                                                  const dense_matrix& d_laplacian) {
    const auto& s = inv_sqrt_degree;
    // L = I - N with N = diag(s) W diag(s).
    const dense_matrix d_n = -d_laplacian;
    dense_matrix d_w = s.asDiagonal() * d_n * s.asDiagonal();
    // ds_i = sum_j dN_ij W_ij s_j + sum_k dN_ki s_k W_ki
    const dense_matrix g = d_n.cwiseProduct(weights);
    const vector d_s = (g * s) + (g.transpose() * s);
    for (Eigen::Index i = 0; i < weights.rows(); ++i) {
        if (s[i] == 0.0) continue;
        // s = deg^{-1/2}  =>  ds/ddeg = -s^3 / 2
        const real d_deg = d_s[i] * (-0.5) * s[i] * s[i] * s[i];
        d_w.row(i).array() += d_deg;
    }
    return d_w;
}

struct view_laplacian {
    dense_matrix l_view;
    dense_matrix l_hybrid;
    vector inv_sqrt_degree;  // D^{-1/2} of the similarity graph
};

/// L_v from the similarity graph S_v, then L_h = L_in + alpha L_v.
inline view_laplacian hybrid_laplacian(const dense_matrix& l_in, const dense_matrix& s_v, real alpha) {
    if (l_in.rows() != l_in.cols() || s_v.rows() != s_v.cols() || l_in.rows() != s_v.rows()) {
        throw shape_error("hybrid_laplacian: L_in is " + shape_string(l_in) + ", S is " + shape_string(s_v));
    }
    if (!(alpha >= 0.0)) throw domain_error("hybrid_laplacian: alpha must be non-negative");
    auto parts = normalized_laplacian_parts(s_v);
    view_laplacian out;
    out.l_view = std::move(parts.laplacian);
    out.inv_sqrt_degree = std::move(parts.inv_sqrt_degree);
    out.l_hybrid = l_in + alpha * out.l_view;
    return out;
}

/// Everything one view derives from (X, L_in, Q).
struct view_graph {
    dense_matrix h_matrix;
    dense_matrix s_matrix;
    dense_matrix l_view;
    dense_matrix l_hybrid;
};

struct view_graph_options {
    real alpha = 1.0;
    real sigma = 1.0;
    bool squared_kernel = false;
};

inline view_graph build_view_graph(const dense_matrix& x, const dense_matrix& l_in, const view_params& view,
                                   const view_graph_options& opt = {}) {
    const auto fd = feature_differences(x);
    const auto m = regularized_metric(view);
    const auto d = pairwise_mahalanobis(fd.diffs, m.metric);
    view_graph out;
    out.h_matrix = scatter_distances(d, fd.index);
    out.s_matrix = gaussian_similarity(out.h_matrix, opt.sigma, opt.squared_kernel);
    auto lap = hybrid_laplacian(l_in, out.s_matrix, opt.alpha);
    out.l_view = std::move(lap.l_view);
    out.l_hybrid = std::move(lap.l_hybrid);
    return out;
}

}  // namespace mvgc
