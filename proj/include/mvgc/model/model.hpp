#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mvgc/conv/spectral_conv.hpp"
#include "mvgc/error.hpp"
#include "mvgc/graph/graph.hpp"
#include "mvgc/model/params.hpp"
#include "mvgc/model/view_pool.hpp"
#include "mvgc/numeric/dense.hpp"
#include "mvgc/numeric/rng.hpp"

namespace mvgc {

/// Probability floor applied before taking the log in the loss.
inline constexpr real probability_floor = 1e-12;

/// Quantities excluded from differentiation (lambda_max, data-driven sigma),
/// captured from one forward pass so later passes can reuse them.
struct frozen_constants {
    std::vector<std::vector<real>> lambdas;  // [block][view]
    std::vector<std::vector<real>> sigmas;   // [block][view]
};

struct block_options {
    bool training = false;
    rng* dropout_rng = nullptr;
    real bn_eps = 1e-5;
    laplacian_pooling laplacian_pool = laplacian_pooling::dominant;
    spectral_options spectral;
};

/// Everything one block computed, kept for the backward pass.
struct block_trace {
    dense_matrix input;
    dense_matrix l_in;
    mvgc_result conv;
    std::vector<batch_norm_cache> bn;
    pool_outcome pool;
    dense_matrix pre_activation;  // VPOOL(Z) W + b
    dense_matrix dropout_scale;   // mask / (1 - rate); empty when dropout is inactive
    dense_matrix output;          // n x m
    pooled_laplacian l_next;
};

/// MV-GC -> batch norm -> max view pooling -> linear -> ReLU -> inverted dropout.
inline block_trace block_forward(const dense_matrix& x, const dense_matrix& l_in, const layer_params& layer,
                                 const block_options& opt = {}) {
    block_trace t;
    t.input = x;
    t.l_in = l_in;
    t.conv = mvgc_forward(x, l_in, layer, opt.spectral);

    const auto n_views = layer.view_count();
    std::vector<dense_matrix> normed;
    normed.reserve(n_views);
    t.bn.reserve(n_views);
    for (std::size_t v = 0; v < n_views; ++v) {
        t.bn.push_back(batch_norm_forward(t.conv.views[v].signal.x_v, opt.bn_eps));
        const auto vi = static_cast<Eigen::Index>(v);
        normed.emplace_back((layer.bn_gamma[vi] * t.bn.back().normalized.array() + layer.bn_beta[vi]).matrix());
    }
    t.pool = view_max_pool(normed);

    t.pre_activation.noalias() = t.pool.pooled * layer.weight;
    t.pre_activation.rowwise() += layer.bias.transpose();
    t.output = t.pre_activation.cwiseMax(0.0);
    if (opt.training && layer.dropout_rate > 0.0) {
        if (opt.dropout_rng == nullptr) throw error("block_forward: dropout in training mode needs a random stream");
        const real keep = 1.0 - layer.dropout_rate;
        t.dropout_scale.resize(t.output.rows(), t.output.cols());
        for (Eigen::Index i = 0; i < t.dropout_scale.size(); ++i) {
            t.dropout_scale.data()[i] = opt.dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
        }
        t.output = t.output.cwiseProduct(t.dropout_scale);
    }
    t.l_next = pool_laplacians(t.pool, t.conv.laplacians, opt.laplacian_pool);
    return t;
}

struct readout_result {
    vector features;                   // [column means, column maxes], length 2m
    std::vector<Eigen::Index> argmax;  // row holding each column max (lowest on ties)
};

inline readout_result readout(const dense_matrix& y) {
    if (y.rows() < 1) throw domain_error("readout: graph has no vertices");
    const auto m = y.cols();
    readout_result r;
    r.features.resize(2 * m);
    r.argmax.resize(static_cast<std::size_t>(m));
    r.features.head(m) = y.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < y.rows(); ++i)
            if (y(i, j) > y(best, j)) best = i;
        r.argmax[static_cast<std::size_t>(j)] = best;
        r.features[m + j] = y(best, j);
    }
    return r;
}

inline vector softmax(const vector& logits) {
    vector p = (logits.array() - logits.maxCoeff()).exp().matrix();
    return p / p.sum();
}

inline real cross_entropy(const vector& pred, std::size_t target) {
    if (target >= static_cast<std::size_t>(pred.size())) {
        throw domain_error("cross_entropy: target " + std::to_string(target) + " outside " +
                           std::to_string(pred.size()) + " classes");
    }
    if (std::abs(pred.sum() - 1.0) > 1e-6) throw domain_error("cross_entropy: prediction does not sum to 1");
    return -std::log(std::max(pred[static_cast<Eigen::Index>(target)], probability_floor));
}

struct forward_options {
    bool training = false;
    rng* dropout_rng = nullptr;
    const frozen_constants* frozen = nullptr;
};

struct forward_trace {
    std::vector<block_trace> blocks;
    readout_result pooled;
    vector hidden_pre;
    vector hidden;
    vector logits;
    vector probabilities;

    /// lambda_max and sigma used by every view of this pass.
    frozen_constants constants() const {
        frozen_constants c;
        for (const auto& b : blocks) {
            auto& ls = c.lambdas.emplace_back();
            auto& ss = c.sigmas.emplace_back();
            for (const auto& v : b.conv.views) {
                ls.push_back(v.lambda_max);
                ss.push_back(v.sigma);
            }
        }
        return c;
    }
};

inline forward_trace forward(const model& m, const graph& g, const forward_options& opt = {}) {
    if (g.feature_dim() != m.config.input_dim) {
        throw shape_error("model expects " + std::to_string(m.config.input_dim) + " features per vertex, graph has " +
                          std::to_string(g.feature_dim()));
    }
    if (g.adjacency.rows() != g.features.rows() || g.adjacency.rows() != g.adjacency.cols()) {
        throw shape_error("graph adjacency " + shape_string(g.adjacency) + " does not match features " +
                          shape_string(g.features));
    }
    forward_trace t;
    t.blocks.reserve(m.blocks.size());
    dense_matrix l_in = normalized_laplacian(g.adjacency);
    const dense_matrix* x = &g.features;
    real bound = 2.0;
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        const auto& layer = m.blocks[b];
        bound += 2.0 * layer.alpha;
        block_options bo;
        bo.training = opt.training;
        bo.dropout_rng = opt.dropout_rng;
        bo.bn_eps = m.config.bn_eps;
        bo.laplacian_pool = m.config.laplacian_pool;
        bo.spectral.lambda_mode = m.config.lambda_mode;
        bo.spectral.lambda_bound = bound;
        bo.spectral.squared_kernel = m.config.squared_kernel;
        bo.spectral.median_sigma = m.config.median_sigma;
        if (opt.frozen != nullptr) {
            bo.spectral.frozen_lambdas = opt.frozen->lambdas.at(b);
            bo.spectral.frozen_sigmas = opt.frozen->sigmas.at(b);
        }
        try {
            t.blocks.push_back(block_forward(*x, l_in, layer, bo));
        } catch (const shape_error& e) {
            throw shape_error("block " + std::to_string(b + 1) + ": " + e.what());
        } catch (const domain_error& e) {
            throw domain_error("block " + std::to_string(b + 1) + ": " + e.what());
        }
        l_in = t.blocks.back().l_next.matrix;
        x = &t.blocks.back().output;
    }
    t.pooled = readout(*x);
    t.hidden_pre = m.fc1.weight.transpose() * t.pooled.features + m.fc1.bias;
    t.hidden = t.hidden_pre.cwiseMax(0.0);
    t.logits = m.fc2.weight.transpose() * t.hidden + m.fc2.bias;
    t.probabilities = softmax(t.logits);
    return t;
}

/// Class probabilities for one graph.
inline vector classify(const model& m, const graph& g, bool training = false, rng* gen = nullptr) {
    return forward(m, g, {training, gen, nullptr}).probabilities;
}

/// Index of the most probable class; ties go to the lowest class.
inline std::size_t predict(const model& m, const graph& g) {
    const auto p = classify(m, g);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return static_cast<std::size_t>(best);
}

}  // namespace mvgc
