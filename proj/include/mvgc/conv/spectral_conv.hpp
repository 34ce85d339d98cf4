#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvgc/error.hpp"
#include "mvgc/graph/graph.hpp"
#include "mvgc/model/params.hpp"
#include "mvgc/numeric/dense.hpp"
#include "mvgc/view/view_metric.hpp"

namespace mvgc {

/// Chebyshev terms T_p(L~) X for p = 0 .. K-1.
struct chebyshev_basis {
    std::size_t order = 0;
    std::vector<dense_matrix> terms;  // each n x d
    dense_matrix rescaled_laplacian;
};

inline chebyshev_basis chebyshev_terms(const dense_matrix& x, const dense_matrix& l_h, std::size_t k, real lambda_max) {
    if (k < 1) throw domain_error("chebyshev_terms: order must be at least 1");
    if (l_h.rows() != l_h.cols() || l_h.rows() != x.rows()) {
        throw shape_error("chebyshev_terms: L is " + shape_string(l_h) + ", X is " + shape_string(x));
    }
    chebyshev_basis basis;
    basis.order = k;
    basis.rescaled_laplacian = rescale_laplacian(l_h, lambda_max);
    const auto& lt = basis.rescaled_laplacian;
    basis.terms.reserve(k);
    basis.terms.push_back(x);
    if (k >= 2) basis.terms.push_back(lt * x);
    for (std::size_t p = 2; p < k; ++p) {
        dense_matrix next = 2.0 * (lt * basis.terms[p - 1]) - basis.terms[p - 2];
        basis.terms.push_back(std::move(next));
    }
    return basis;
}

struct chebyshev_gradients {
    dense_matrix d_x;
    dense_matrix d_rescaled;
};

/// Reverse pass of the recurrence given dL/dT_p for every term.
inline chebyshev_gradients chebyshev_backward(const chebyshev_basis& basis, std::vector<dense_matrix> d_terms) {
    const auto& lt = basis.rescaled_laplacian;
    const auto k = basis.order;
    chebyshev_gradients out;
    out.d_rescaled = dense_matrix::Zero(lt.rows(), lt.cols());
    for (std::size_t p = k; p-- > 2;) {
        out.d_rescaled.noalias() += 2.0 * d_terms[p] * basis.terms[p - 1].transpose();
        d_terms[p - 1].noalias() += 2.0 * lt.transpose() * d_terms[p];
        d_terms[p - 2] -= d_terms[p];
    }
    out.d_x = d_terms[0];
    if (k >= 2) {
        out.d_rescaled.noalias() += d_terms[1] * basis.terms[0].transpose();
        out.d_x.noalias() += lt.transpose() * d_terms[1];
    }
    return out;
}

/// Block p of the result is theta_p * T_p; blocks are concatenated column-wise
/// so the output is n x K*d.
inline dense_matrix project_signal(const chebyshev_basis& basis, std::span<const real> theta) {
    if (theta.size() != basis.order) {
        throw shape_error("project_signal: " + std::to_string(theta.size()) + " coefficients for order " +
                          std::to_string(basis.order));
    }
    const auto n = basis.terms[0].rows();
    const auto d = basis.terms[0].cols();
    dense_matrix out(n, d * static_cast<Eigen::Index>(basis.order));
    for (std::size_t p = 0; p < basis.order; ++p) {
        out.middleCols(static_cast<Eigen::Index>(p) * d, d) = theta[p] * basis.terms[p];
    }
    return out;
}

struct projection_gradients {
    std::vector<dense_matrix> d_terms;
    vector d_theta;
};

inline projection_gradients project_signal_backward(const chebyshev_basis& basis, std::span<const real> theta,
                                                    const dense_matrix& d_signal) {
    const auto d = basis.terms[0].cols();
    projection_gradients out;
    out.d_theta.resize(static_cast<Eigen::Index>(basis.order));
    out.d_terms.reserve(basis.order);
    for (std::size_t p = 0; p < basis.order; ++p) {
        const auto block = d_signal.middleCols(static_cast<Eigen::Index>(p) * d, d);
        out.d_theta[static_cast<Eigen::Index>(p)] = block.cwiseProduct(basis.terms[p]).sum();
        out.d_terms.emplace_back(theta[p] * block);
    }
    return out;
}

/// Filtered signal of one view together with its coefficients.
struct view_signal {
    dense_matrix x_v;  // n x K*d
    vector theta;      // K
};

/// Per-view intermediates retained for the backward pass.
struct view_forward {
    metric_result metric;
    vector distances;
    real sigma = 1.0;
    dense_matrix h;
    dense_matrix s;
    view_laplacian laplacian;
    real lambda_max = 2.0;
    bool lambda_converged = true;
    chebyshev_basis basis;
    view_signal signal;
};

struct spectral_options {
    lambda_estimate lambda_mode = lambda_estimate::exact;
    real lambda_bound = 4.0;  // used in bound mode and when power iteration stalls
    std::size_t power_iterations = 200;
    real power_tolerance = 1e-8;
    bool squared_kernel = false;
    bool median_sigma = false;
    std::span<const real> frozen_lambdas;  // per view; empty = estimate
    std::span<const real> frozen_sigmas;   // per view; empty = compute
};

struct mvgc_result {
    feature_difference_result diffs;
    std::vector<view_forward> views;
    laplacian_set laplacians;  // L_h per view, in view order
};

namespace detail {

template <typename F>
auto annotate_view(std::size_t v, F&& f) {
    const auto tag = "view " + std::to_string(v) + ": ";
    try {
        return f();
    } catch (const shape_error& e) {
        throw shape_error(tag + e.what());
    } catch (const domain_error& e) {
        throw domain_error(tag + e.what());
    } catch (const numeric_error& e) {
        throw numeric_error(tag + e.what());
    }
}

}  // namespace detail

/// Runs every view of one MV-GC layer: metric, pairwise distances, Gaussian
/// similarity, hybrid Laplacian, Chebyshev filtering and projection.
/// Views are independent; results are kept in view order.
inline mvgc_result mvgc_forward(const dense_matrix& x, const dense_matrix& l_in, const layer_params& layer,
                                const spectral_options& opt = {}) {
    layer.validate();
    if (static_cast<std::size_t>(x.cols()) != layer.input_dim()) {
        throw shape_error("mvgc_forward: signal has " + std::to_string(x.cols()) + " features, layer expects " +
                          std::to_string(layer.input_dim()));
    }
    if (l_in.rows() != x.rows() || l_in.cols() != x.rows()) {
        throw shape_error("mvgc_forward: L_in is " + shape_string(l_in) + " for " + std::to_string(x.rows()) + " vertices");
    }
    mvgc_result out;
    out.diffs = feature_differences(x);
    const auto n_views = layer.view_count();
    out.views.reserve(n_views);
    out.laplacians.matrices.reserve(n_views);
    for (std::size_t v = 0; v < n_views; ++v) {
        out.views.push_back(detail::annotate_view(v, [&] {
            view_forward vf;
            vf.metric = regularized_metric(layer.views[v]);
            vf.distances = pairwise_mahalanobis(out.diffs.diffs, vf.metric.metric);
            vf.h = scatter_distances(vf.distances, out.diffs.index);
            if (!opt.frozen_sigmas.empty()) {
                vf.sigma = opt.frozen_sigmas[v];
            } else {
                vf.sigma = opt.median_sigma ? median_sigma(vf.distances) : layer.sigma;
            }
            vf.s = gaussian_similarity(vf.h, vf.sigma, opt.squared_kernel);
            vf.laplacian = hybrid_laplacian(l_in, vf.s, layer.alpha);
            if (!opt.frozen_lambdas.empty()) {
                vf.lambda_max = opt.frozen_lambdas[v];
            } else if (opt.lambda_mode == lambda_estimate::bound) {
                vf.lambda_max = opt.lambda_bound;
            } else if (opt.lambda_mode == lambda_estimate::exact) {
                vf.lambda_max = largest_eigenvalue(vf.laplacian.l_hybrid);
                if (!(vf.lambda_max > 0.0)) vf.lambda_max = opt.lambda_bound;
            } else {
                const auto est = spectral_radius_max(vf.laplacian.l_hybrid, opt.power_iterations, opt.power_tolerance);
                vf.lambda_converged = est.converged && est.value > 0.0;
                vf.lambda_max = vf.lambda_converged ? est.value : opt.lambda_bound;
            }
            vf.basis = chebyshev_terms(x, vf.laplacian.l_hybrid, layer.order(), vf.lambda_max);
            const std::span<const real> theta(layer.thetas.row(static_cast<Eigen::Index>(v)).data(), layer.order());
            vf.signal.x_v = project_signal(vf.basis, theta);
            vf.signal.theta = layer.thetas.row(static_cast<Eigen::Index>(v)).transpose();
            return vf;
        }));
        out.laplacians.matrices.push_back(out.views.back().laplacian.l_hybrid);
    }
    return out;
}

}  // namespace mvgc
