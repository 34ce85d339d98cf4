#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mvgc/error.hpp"
#include "mvgc/numeric/dense.hpp"
#include "mvgc/numeric/rng.hpp"
#include "mvgc/view/view_metric.hpp"

namespace mvgc {

/// How the per-view hybrid Laplacians are reduced to the next block's input.
enum class laplacian_pooling { dominant, mean, max };

/// Where the Chebyshev rescaling takes lambda_max from.
enum class lambda_estimate {
    exact,  // dense symmetric eigensolver per graph and view
    power,  // power iteration per graph and view, bound on non-convergence
    bound,  // analytic upper bound 2 + 2 * alpha * block_number
};

inline std::string to_string(laplacian_pooling p) {
    switch (p) {
        case laplacian_pooling::dominant: return "dominant";
        case laplacian_pooling::mean: return "mean";
        case laplacian_pooling::max: return "max";
    }
    return "?";
}

inline laplacian_pooling parse_laplacian_pooling(std::string_view s) {
    if (s == "dominant") return laplacian_pooling::dominant;
    if (s == "mean") return laplacian_pooling::mean;
    if (s == "max") return laplacian_pooling::max;
    throw config_error("unknown laplacian pooling '" + std::string(s) + "' (dominant|mean|max)");
}

inline std::string to_string(lambda_estimate e) {
    switch (e) {
        case lambda_estimate::exact: return "exact";
        case lambda_estimate::power: return "power";
        case lambda_estimate::bound: return "bound";
    }
    return "?";
}

inline lambda_estimate parse_lambda_estimate(std::string_view s) {
    if (s == "exact") return lambda_estimate::exact;
    if (s == "power") return lambda_estimate::power;
    if (s == "bound") return lambda_estimate::bound;
    throw config_error("unknown lambda mode '" + std::string(s) + "' (exact|power|bound)");
}

/// Architecture hyperparameters. Defaults follow the published recipe.
struct model_config {
    std::size_t input_dim = 0;
    std::size_t num_classes = 2;
    std::size_t order = 6;  // Chebyshev K
    std::vector<std::size_t> views{8, 6, 6};
    std::vector<std::size_t> widths{80, 128, 256};
    std::size_t hidden = 128;
    real dropout = 0.0;
    real alpha = 1.0;
    real sigma = 1.0;
    bool squared_kernel = false;
    bool median_sigma = false;
    laplacian_pooling laplacian_pool = laplacian_pooling::dominant;
    lambda_estimate lambda_mode = lambda_estimate::exact;
    real bn_eps = 1e-5;

    void validate() const {
        if (input_dim == 0) throw config_error("input_dim must be positive");
        if (num_classes < 2) throw config_error("need at least 2 classes");
        if (order < 1) throw config_error("Chebyshev order must be at least 1");
        if (views.empty() || views.size() != widths.size()) {
            throw config_error("views and widths must list one entry per block");
        }
        for (auto v : views)
            if (v < 1) throw config_error("every block needs at least one view");
        for (auto m : widths)
            if (m < 1) throw config_error("block widths must be positive");
        if (hidden < 1) throw config_error("hidden width must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw config_error("dropout must lie in [0, 1)");
        if (!(alpha >= 0.0)) throw config_error("alpha must be non-negative");
        if (!(sigma > 0.0)) throw config_error("sigma must be positive");
    }
};

/// One MV-GC + VPOOL + linear block.
struct layer_params {
    std::vector<view_params> views;
    dense_matrix thetas;  // N x K, row v holds view v's Chebyshev coefficients
    vector bn_gamma;      // N
    vector bn_beta;       // N
    dense_matrix weight;  // K*d x m
    vector bias;          // m
    real dropout_rate = 0.0;
    real alpha = 1.0;
    real sigma = 1.0;

    std::size_t view_count() const noexcept { return views.size(); }
    std::size_t order() const noexcept { return static_cast<std::size_t>(thetas.cols()); }
    std::size_t input_dim() const noexcept { return views.empty() ? 0 : static_cast<std::size_t>(views[0].q_factor.rows()); }
    std::size_t output_dim() const noexcept { return static_cast<std::size_t>(weight.cols()); }

    void validate() const {
        const auto n = static_cast<Eigen::Index>(views.size());
        if (n == 0) throw shape_error("layer has no views");
        if (thetas.rows() != n || bn_gamma.size() != n || bn_beta.size() != n) {
            throw shape_error("layer: per-view parameter counts disagree with " + std::to_string(n) + " views");
        }
        const auto d = static_cast<Eigen::Index>(input_dim());
        for (const auto& v : views)
            if (v.q_factor.rows() != d || v.q_factor.cols() != d) throw shape_error("layer: Q factors must all be d x d");
        if (weight.rows() != thetas.cols() * d) {
            throw shape_error("layer: weight has " + std::to_string(weight.rows()) + " rows, expected K*d = " +
                              std::to_string(thetas.cols() * d));
        }
        if (bias.size() != weight.cols()) throw shape_error("layer: bias length differs from weight columns");
    }
};

struct dense_layer {
    dense_matrix weight;  // in x out
    vector bias;          // out
};

/// Three view blocks, mean/max readout, and a two-layer classifier head.
struct model {
    model_config config;
    std::vector<layer_params> blocks;
    dense_layer fc1;
    dense_layer fc2;

    std::size_t num_classes() const noexcept { return config.num_classes; }
};

namespace detail {

inline dense_matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, rng& gen) {
    const real limit = std::sqrt(6.0 / static_cast<real>(fan_in + fan_out));
    dense_matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = gen.uniform(-limit, limit);
    return w;
}

}  // namespace detail

/// Q ~ U(0,1), theta ~ U(-1/K, 1/K), gamma = 1, beta = 0, Glorot-uniform
/// linear weights and zero biases.
inline model init_model(const model_config& cfg, rng& gen) {
    cfg.validate();
    model m;
    m.config = cfg;
    const auto k = static_cast<Eigen::Index>(cfg.order);
    auto d = static_cast<Eigen::Index>(cfg.input_dim);
    for (std::size_t b = 0; b < cfg.views.size(); ++b) {
        layer_params layer;
        const auto n = static_cast<Eigen::Index>(cfg.views[b]);
        for (Eigen::Index v = 0; v < n; ++v) {
            view_params vp;
            vp.view_index = static_cast<std::size_t>(v);
            vp.q_factor.resize(d, d);
            for (Eigen::Index i = 0; i < vp.q_factor.size(); ++i) vp.q_factor.data()[i] = gen.uniform_open();
            layer.views.push_back(std::move(vp));
        }
        layer.thetas.resize(n, k);
        const real bound = 1.0 / static_cast<real>(k);
        for (Eigen::Index i = 0; i < layer.thetas.size(); ++i) layer.thetas.data()[i] = gen.uniform(-bound, bound);
        layer.bn_gamma = vector::Ones(n);
        layer.bn_beta = vector::Zero(n);
        const auto m_out = static_cast<Eigen::Index>(cfg.widths[b]);
        layer.weight = detail::glorot(k * d, m_out, gen);
        layer.bias = vector::Zero(m_out);
        layer.dropout_rate = cfg.dropout;
        layer.alpha = cfg.alpha;
        layer.sigma = cfg.sigma;
        m.blocks.push_back(std::move(layer));
        d = m_out;
    }
    const auto hidden = static_cast<Eigen::Index>(cfg.hidden);
    m.fc1.weight = detail::glorot(2 * d, hidden, gen);
    m.fc1.bias = vector::Zero(hidden);
    m.fc2.weight = detail::glorot(hidden, static_cast<Eigen::Index>(cfg.num_classes), gen);
    m.fc2.bias = vector::Zero(static_cast<Eigen::Index>(cfg.num_classes));
    return m;
}

/// Same shapes as `m`, every parameter zero.
inline model zeros_like(const model& m) {
    model z = m;
    for (auto& layer : z.blocks) {
        for (auto& v : layer.views) v.q_factor.setZero();
        layer.thetas.setZero();
        layer.bn_gamma.setZero();
        layer.bn_beta.setZero();
        layer.weight.setZero();
        layer.bias.setZero();
    }
    z.fc1.weight.setZero();
    z.fc1.bias.setZero();
    z.fc2.weight.setZero();
    z.fc2.bias.setZero();
    return z;
}

/// Gradient of the loss for every trainable parameter, shaped like the model.
using gradient_set = model;

/// One trainable tensor as seen by a parameter visitor.
template <typename Scalar>
struct parameter_ref {
    std::string key;    // unique, e.g. "block1.view3.q"
    std::string group;  // gradient-check group, e.g. "block1.q"
    Scalar* data;
    Eigen::Index rows;
    Eigen::Index cols;

    Eigen::Index size() const noexcept { return rows * cols; }
};

/// Calls `f(parameter_ref)` for every trainable tensor in a fixed order.
template <typename Model, typename F>
    requires std::same_as<std::remove_const_t<Model>, model>
void for_each_parameter(Model& m, F&& f) {
    using scalar = std::conditional_t<std::is_const_v<Model>, const real, real>;
    auto emit = [&](std::string key, std::string group, auto& t) {
        f(parameter_ref<scalar>{std::move(key), std::move(group), t.data(), t.rows(), t.cols()});
    };
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        auto& layer = m.blocks[b];
        const auto prefix = "block" + std::to_string(b + 1);
        for (std::size_t v = 0; v < layer.views.size(); ++v) {
            emit(prefix + ".view" + std::to_string(v) + ".q", prefix + ".q", layer.views[v].q_factor);
        }
        emit(prefix + ".theta", prefix + ".theta", layer.thetas);
        emit(prefix + ".bn_gamma", prefix + ".bn_gamma", layer.bn_gamma);
        emit(prefix + ".bn_beta", prefix + ".bn_beta", layer.bn_beta);
        emit(prefix + ".weight", prefix + ".weight", layer.weight);
        emit(prefix + ".bias", prefix + ".bias", layer.bias);
    }
    emit("fc1.weight", "fc1.weight", m.fc1.weight);
    emit("fc1.bias", "fc1.bias", m.fc1.bias);
    emit("fc2.weight", "fc2.weight", m.fc2.weight);
    emit("fc2.bias", "fc2.bias", m.fc2.bias);
}

inline std::vector<parameter_ref<real>> parameters(model& m) {
    std::vector<parameter_ref<real>> out;
    for_each_parameter(m, [&](parameter_ref<real> p) { out.push_back(std::move(p)); });
    return out;
}

inline std::vector<parameter_ref<const real>> parameters(const model& m) {
    std::vector<parameter_ref<const real>> out;
    for_each_parameter(m, [&](parameter_ref<const real> p) { out.push_back(std::move(p)); });
    return out;
}

}  // namespace mvgc
