#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mvgc/error.hpp"
#include "mvgc/graph/graph.hpp"
#include "mvgc/model/params.hpp"
#include "mvgc/numeric/dense.hpp"

namespace mvgc {

using index_matrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-view normalization state kept for the backward pass.
struct batch_norm_cache {
    dense_matrix normalized;  // (x - mean) / (std + eps)
    real mean = 0.0;
    real std = 0.0;
    real eps = 1e-5;
};

/// Normalizes one view by the statistics of all its elements.
inline batch_norm_cache batch_norm_forward(const dense_matrix& x, real eps) {
    const auto st = elem_stats(x);
    batch_norm_cache c;
    c.mean = st.mean;
    c.std = st.std;
    c.eps = eps;
    c.normalized = (x.array() - st.mean) / (st.std + eps);
    return c;
}

/// dX from d(normalized) for one view.
inline dense_matrix batch_norm_backward(const batch_norm_cache& c, const dense_matrix& d_normalized) {
    const auto count = static_cast<real>(d_normalized.size());
    const real denom = c.std + c.eps;
    dense_matrix dx = (d_normalized.array() - d_normalized.mean()) / denom;
    if (c.std > 0.0) {
        // d std / dx_k = (x_k - mean) / (count * std), and x_k - mean = normalized_k * denom.
        const real coupling = d_normalized.cwiseProduct(c.normalized).sum();
        dx.array() -= c.normalized.array() * (coupling / (count * c.std));
    }
    return dx;
}

/// gamma_v * (X_v - mean) / (std + eps) + beta_v for every view.
inline std::vector<dense_matrix> view_batch_norm(std::span<const dense_matrix> signals, const vector& gamma,
                                                 const vector& beta, real eps = 1e-5) {
    if (gamma.size() != static_cast<Eigen::Index>(signals.size()) || beta.size() != gamma.size()) {
        throw shape_error("view_batch_norm: " + std::to_string(signals.size()) + " views but " +
                          std::to_string(gamma.size()) + " gammas and " + std::to_string(beta.size()) + " betas");
    }
    std::vector<dense_matrix> out;
    out.reserve(signals.size());
    for (std::size_t v = 0; v < signals.size(); ++v) {
        if (signals[v].rows() != signals[0].rows() || signals[v].cols() != signals[0].cols()) {
            throw shape_error("view_batch_norm: view " + std::to_string(v) + " is " + shape_string(signals[v]) +
                              ", view 0 is " + shape_string(signals[0]));
        }
        const auto v_idx = static_cast<Eigen::Index>(v);
        auto c = batch_norm_forward(signals[v], eps);
        out.emplace_back((gamma[v_idx] * c.normalized.array() + beta[v_idx]).matrix());
    }
    return out;
}

struct pool_outcome {
    dense_matrix pooled;
    index_matrix argmax_view;
    std::size_t dominant_index = 0;
    std::vector<std::size_t> view_counts;  // how often each view won
};

/// Element-wise max across views. Ties go to the lowest view index, both per
/// element and when picking the most frequent winner.
inline pool_outcome view_max_pool(std::span<const dense_matrix> normed) {
    if (normed.empty()) throw domain_error("view_max_pool: no views");
    pool_outcome out;
    out.pooled = normed[0];
    out.argmax_view = index_matrix::Zero(normed[0].rows(), normed[0].cols());
    for (std::size_t v = 1; v < normed.size(); ++v) {
        if (normed[v].rows() != out.pooled.rows() || normed[v].cols() != out.pooled.cols()) {
            throw shape_error("view_max_pool: view " + std::to_string(v) + " is " + shape_string(normed[v]) +
                              ", view 0 is " + shape_string(normed[0]));
        }
        const auto& x = normed[v];
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (x.data()[i] > out.pooled.data()[i]) {
                out.pooled.data()[i] = x.data()[i];
                out.argmax_view.data()[i] = static_cast<std::int32_t>(v);
            }
        }
    }
    out.view_counts.assign(normed.size(), 0);
    for (Eigen::Index i = 0; i < out.argmax_view.size(); ++i) ++out.view_counts[out.argmax_view.data()[i]];
    for (std::size_t v = 1; v < normed.size(); ++v) {
        if (out.view_counts[v] > out.view_counts[out.dominant_index]) out.dominant_index = v;
    }
    return out;
}

inline const dense_matrix& dominant_laplacian(const pool_outcome& outcome, const laplacian_set& laplacians) {
    if (outcome.dominant_index >= laplacians.size()) {
        throw error("dominant_laplacian: index " + std::to_string(outcome.dominant_index) + " out of range for " +
                    std::to_string(laplacians.size()) + " Laplacians");
    }
    return laplacians.matrices[outcome.dominant_index];
}

struct pooled_laplacian {
    dense_matrix matrix;
    index_matrix argmax_view;  // filled for max pooling only
};

/// Reduces the per-view hybrid Laplacians to the next block's input.
inline pooled_laplacian pool_laplacians(const pool_outcome& outcome, const laplacian_set& laplacians,
                                        laplacian_pooling mode) {
    pooled_laplacian out;
    switch (mode) {
        case laplacian_pooling::dominant:
            out.matrix = dominant_laplacian(outcome, laplacians);
            break;
        case laplacian_pooling::mean: {
            out.matrix = laplacians[0];
            for (std::size_t v = 1; v < laplacians.size(); ++v) out.matrix += laplacians[v];
            out.matrix /= static_cast<real>(laplacians.size());
            break;
        }
        case laplacian_pooling::max: {
            out.matrix = laplacians[0];
            out.argmax_view = index_matrix::Zero(out.matrix.rows(), out.matrix.cols());
            for (std::size_t v = 1; v < laplacians.size(); ++v) {
                const auto& l = laplacians[v];
                for (Eigen::Index i = 0; i < l.size(); ++i) {
                    if (l.data()[i] > out.matrix.data()[i]) {
                        out.matrix.data()[i] = l.data()[i];
                        out.argmax_view.data()[i] = static_cast<std::int32_t>(v);
                    }
                }
            }
            break;
        }
    }
    return out;
}

}  // namespace mvgc
