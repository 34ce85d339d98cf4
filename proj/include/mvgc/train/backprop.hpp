#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvgc/error.hpp"
#include "mvgc/model/model.hpp"
#include "mvgc/model/params.hpp"
#include "mvgc/numeric/dense.hpp"
#include "mvgc/view/view_metric.hpp"

namespace mvgc {

namespace detail {

struct block_gradient_result {
    dense_matrix d_input;
    dense_matrix d_l_in;
};

inline block_gradient_result block_backward(const layer_params& layer, const block_trace& t, const model_config& cfg,
                                            const dense_matrix& d_output, const dense_matrix* d_l_next,
                                            layer_params& grads) {
    const auto n_views = layer.view_count();
    const auto n = t.input.rows();

    dense_matrix d_act = t.dropout_scale.size() > 0 ? dense_matrix(d_output.cwiseProduct(t.dropout_scale)) : d_output;
    const dense_matrix d_pre = (t.pre_activation.array() > 0.0).select(d_act, 0.0);
    grads.weight.noalias() += t.pool.pooled.transpose() * d_pre;
    grads.bias += d_pre.colwise().sum().transpose();
    const dense_matrix d_pooled = d_pre * layer.weight.transpose();

    block_gradient_result out;
    out.d_input = dense_matrix::Zero(n, t.input.cols());
    out.d_l_in = dense_matrix::Zero(n, n);
    dense_matrix d_diffs = dense_matrix::Zero(t.conv.diffs.diffs.rows(), t.conv.diffs.diffs.cols());

    for (std::size_t v = 0; v < n_views; ++v) {
        const auto vi = static_cast<Eigen::Index>(v);
        const auto& vf = t.conv.views[v];

        // Gradient arriving at this view's hybrid Laplacian through the next block.
        std::optional<dense_matrix> d_lh_next;
        if (d_l_next != nullptr) {
            switch (cfg.laplacian_pool) {
                case laplacian_pooling::dominant:
                    if (t.pool.dominant_index == v) d_lh_next = *d_l_next;
                    break;
                case laplacian_pooling::mean:
                    d_lh_next = *d_l_next / static_cast<real>(n_views);
                    break;
                case laplacian_pooling::max:
                    d_lh_next = (t.l_next.argmax_view.array() == static_cast<std::int32_t>(v)).select(*d_l_next, 0.0);
                    break;
            }
        }

        const dense_matrix d_bn_out = (t.pool.argmax_view.array() == static_cast<std::int32_t>(v)).select(d_pooled, 0.0);
        const bool routed = t.pool.view_counts[v] > 0;
        if (!routed && !d_lh_next) continue;

        dense_matrix d_lh;
        if (routed) {
            const auto& bn = t.bn[v];
            grads.bn_gamma[vi] += d_bn_out.cwiseProduct(bn.normalized).sum();
            grads.bn_beta[vi] += d_bn_out.sum();
            const dense_matrix d_signal = batch_norm_backward(bn, layer.bn_gamma[vi] * d_bn_out);
            const std::span<const real> theta(layer.thetas.row(vi).data(), layer.order());
            auto proj = project_signal_backward(vf.basis, theta, d_signal);
            grads.thetas.row(vi) += proj.d_theta.transpose();
            auto cheb = chebyshev_backward(vf.basis, std::move(proj.d_terms));
            out.d_input += cheb.d_x;
            // lambda_max is a constant here.
            d_lh = (2.0 / vf.lambda_max) * cheb.d_rescaled;
        } else {
            d_lh = dense_matrix::Zero(n, n);
        }
        if (d_lh_next) d_lh += *d_lh_next;

        out.d_l_in += d_lh;
        if (layer.alpha == 0.0) continue;
        const dense_matrix d_lv = layer.alpha * d_lh;
        const dense_matrix d_s = normalized_laplacian_backward(vf.s, vf.laplacian.inv_sqrt_degree, d_lv);
        const dense_matrix d_h = gaussian_similarity_backward(vf.h, vf.s, d_s, vf.sigma, cfg.squared_kernel);
        const vector d_dist = scatter_distances_backward(d_h, t.conv.diffs.index);
        const auto maha = pairwise_mahalanobis_backward(t.conv.diffs.diffs, vf.metric.metric, vf.distances, d_dist);
        d_diffs += maha.d_diffs;
        grads.views[v].q_factor += regularized_metric_backward(layer.views[v], vf.metric, maha.d_metric);
    }
    out.d_input += feature_differences_backward(d_diffs, t.conv.diffs.index);
    return out;
}

inline void check_finite(const dense_matrix& m, const std::string& what) {
    if (!m.allFinite()) throw numeric_error("non-finite value in " + what);
}

/// Scans a trace in evaluation order and names the first non-finite quantity.
inline void check_trace(const forward_trace& t) {
    for (std::size_t b = 0; b < t.blocks.size(); ++b) {
        const auto& bt = t.blocks[b];
        const auto prefix = "block " + std::to_string(b + 1);
        check_finite(bt.input, prefix + " input");
        for (std::size_t v = 0; v < bt.conv.views.size(); ++v) {
            const auto& vf = bt.conv.views[v];
            const auto tag = prefix + " view " + std::to_string(v);
            check_finite(vf.metric.metric, tag + " metric");
            check_finite(vf.distances, tag + " distances");
            check_finite(vf.s, tag + " similarity");
            check_finite(vf.laplacian.l_hybrid, tag + " hybrid Laplacian");
            check_finite(vf.signal.x_v, tag + " filtered signal");
        }
        check_finite(bt.pool.pooled, prefix + " pooled signal");
        check_finite(bt.output, prefix + " output");
    }
    check_finite(t.pooled.features, "readout");
    check_finite(t.hidden, "hidden layer");
    check_finite(t.logits, "logits");
}

}  // namespace detail

struct gradient_result {
    real loss = 0.0;
    gradient_set grads;
    forward_trace trace;
};

/// Loss of an already computed forward pass.
inline real trace_loss(const forward_trace& t, std::size_t target) { return cross_entropy(t.probabilities, target); }

/// Reverse-mode gradients of the cross-entropy loss for one graph.
///
/// Max operations route their gradient to the recorded argmax. lambda_max
/// and a data-driven sigma are treated as constants.
inline gradient_result backpropagate(const model& m, const graph& g, forward_trace trace) {
    detail::check_trace(trace);
    gradient_result r;
    r.loss = trace_loss(trace, g.label);
    if (!std::isfinite(r.loss)) throw numeric_error("non-finite loss");
    r.grads = zeros_like(m);
    auto& grads = r.grads;

    const auto target = static_cast<Eigen::Index>(g.label);
    vector d_logits = trace.probabilities;
    if (trace.probabilities[target] >= probability_floor) {
        d_logits[target] -= 1.0;
    } else {
        d_logits.setZero();  // loss is clamped at the floor
    }
    grads.fc2.weight.noalias() += trace.hidden * d_logits.transpose();
    grads.fc2.bias += d_logits;
    const vector d_hidden = m.fc2.weight * d_logits;
    const vector d_hidden_pre = (trace.hidden_pre.array() > 0.0).select(d_hidden, 0.0);
    grads.fc1.weight.noalias() += trace.pooled.features * d_hidden_pre.transpose();
    grads.fc1.bias += d_hidden_pre;
    const vector d_read = m.fc1.weight * d_hidden_pre;

    const auto& last = trace.blocks.back().output;
    const auto width = last.cols();
    dense_matrix d_y = dense_matrix::Zero(last.rows(), width);
    const real inv_n = 1.0 / static_cast<real>(last.rows());
    for (Eigen::Index j = 0; j < width; ++j) {
        d_y.col(j).array() += d_read[j] * inv_n;
        d_y(trace.pooled.argmax[static_cast<std::size_t>(j)], j) += d_read[width + j];
    }

    std::optional<dense_matrix> d_l_next;
    for (std::size_t b = m.blocks.size(); b-- > 0;) {
        auto res = detail::block_backward(m.blocks[b], trace.blocks[b], m.config, d_y,
                                          d_l_next ? &*d_l_next : nullptr, grads.blocks[b]);
        d_y = std::move(res.d_input);
        d_l_next = std::move(res.d_l_in);
    }
    r.trace = std::move(trace);
    return r;
}

/// Forward (training mode, dropout drawn from `gen`) followed by backprop.
inline gradient_result compute_gradients(const model& m, const graph& g, rng& gen, bool training = true,
                                         const frozen_constants* frozen = nullptr) {
    auto trace = forward(m, g, {training, &gen, frozen});
    return backpropagate(m, g, std::move(trace));
}

}  // namespace mvgc
