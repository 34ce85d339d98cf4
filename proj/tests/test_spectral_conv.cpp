#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "jacobi.hpp"
#include "mvgc/conv/spectral_conv.hpp"

using namespace mvgc;
using mvgc::test::random_matrix;

namespace {

layer_params make_layer(std::size_t views, std::size_t d, std::size_t k, std::size_t m, rng& gen) {
    model_config c = mvgc::test::small_config(d);
    c.order = k;
    c.views = {views};
    c.widths = {m};
    return init_model(c, gen).blocks[0];
}

/// U g(Lambda~) U^T X with g(t) = sum_p theta_p cos(p arccos t).
dense_matrix spectral_filter(const dense_matrix& l, double lambda_max, const std::vector<double>& theta,
                             const dense_matrix& x) {
    const auto eig = mvgc::test::jacobi_eigen(l);
    const auto n = l.rows();
    vector g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = std::clamp(2.0 * eig.values[static_cast<std::size_t>(i)] / lambda_max - 1.0, -1.0, 1.0);
        double s = 0.0;
        for (std::size_t p = 0; p < theta.size(); ++p) s += theta[p] * std::cos(static_cast<double>(p) * std::acos(t));
        g[i] = s;
    }
    return eig.vectors * g.asDiagonal() * eig.vectors.transpose() * x;
}

/// Hop distance from `src` in the support of `l` (off-diagonal non-zeros).
std::vector<int> hops(const dense_matrix& l, Eigen::Index src) {
    std::vector<int> dist(static_cast<std::size_t>(l.rows()), -1);
    std::vector<Eigen::Index> frontier{src};
    dist[static_cast<std::size_t>(src)] = 0;
    for (int h = 1; !frontier.empty(); ++h) {
        std::vector<Eigen::Index> next;
        for (auto u : frontier)
            for (Eigen::Index v = 0; v < l.rows(); ++v)
                if (v != u && l(u, v) != 0.0 && dist[static_cast<std::size_t>(v)] < 0) {
                    dist[static_cast<std::size_t>(v)] = h;
                    next.push_back(v);
                }
        frontier = std::move(next);
    }
    return dist;
}

}  // namespace

TEST(ChebyshevTerms, OrderOneIsIdentity) {
    rng gen(1);
    const auto x = random_matrix(4, 3, gen);
    const auto b = chebyshev_terms(x, dense_matrix::Identity(4, 4), 1, 2.0);
    ASSERT_EQ(b.terms.size(), 1u);
    EXPECT_EQ(b.terms[0], x);
}

TEST(ChebyshevTerms, ZeroOperator) {
    rng gen(2);
    const auto x = random_matrix(4, 3, gen);
    // L = I with lambda_max 2 rescales to the zero matrix.
    const auto b = chebyshev_terms(x, dense_matrix::Identity(4, 4), 2, 2.0);
    EXPECT_EQ(b.terms[0], x);
    EXPECT_EQ(b.terms[1], dense_matrix::Zero(4, 3));
}

TEST(ChebyshevTerms, RecurrenceHolds) {
    rng gen(3);
    const auto g = mvgc::test::connected_ish_graph(7, 2, gen);
    const auto l = normalized_laplacian(g.adjacency);
    const auto b = chebyshev_terms(g.features, l, 6, 2.0);
    const auto& lt = b.rescaled_laplacian;
    EXPECT_LT((b.terms[1] - lt * g.features).cwiseAbs().maxCoeff(), 1e-12);
    for (std::size_t p = 2; p < 6; ++p) {
        EXPECT_LT((b.terms[p] - (2.0 * lt * b.terms[p - 1] - b.terms[p - 2])).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(ChebyshevTerms, MatchesEigendecomposition) {
    rng gen(4);
    const auto g = mvgc::test::connected_ish_graph(6, 3, gen);
    const auto l = normalized_laplacian(g.adjacency);
    const double lmax = mvgc::test::jacobi_eigenvalues(l).back();
    const auto b = chebyshev_terms(g.features, l, 6, lmax);
    for (std::size_t p = 0; p < 6; ++p) {
        std::vector<double> theta(6, 0.0);
        theta[p] = 1.0;
        EXPECT_LT((b.terms[p] - spectral_filter(l, lmax, theta, g.features)).cwiseAbs().maxCoeff(), 1e-8) << p;
    }
}

TEST(ChebyshevTerms, FilterMatchesSpectralEvaluation) {
    rng gen(5);
    for (int t = 0; t < 20; ++t) {
        const auto n = 2 + gen.next() % 9;
        const auto k = static_cast<std::size_t>(1 + gen.next() % 8);
        const auto g = random_graph(n, 3, 0.4, gen);
        const auto l = normalized_laplacian(g.adjacency);
        const double lmax = std::max(mvgc::test::jacobi_eigenvalues(l).back(), 1e-3);
        const auto b = chebyshev_terms(g.features, l, k, lmax);
        std::vector<double> theta(k);
        for (auto& th : theta) th = gen.uniform(-1, 1);
        dense_matrix filtered = dense_matrix::Zero(g.features.rows(), g.features.cols());
        for (std::size_t p = 0; p < k; ++p) filtered += theta[p] * b.terms[p];
        const auto oracle = spectral_filter(l, lmax, theta, g.features);
        EXPECT_LT((filtered - oracle).norm() / std::max(oracle.norm(), 1e-12), 1e-7);
    }
}

TEST(ChebyshevTerms, Locality) {
    rng gen(6);
    const auto g = mvgc::test::connected_ish_graph(10, 2, gen, 0.2);
    const auto l = normalized_laplacian(g.adjacency);
    for (std::size_t p = 0; p < 5; ++p) {
        const auto base = chebyshev_terms(g.features, l, p + 1, 2.0).terms[p];
        for (Eigen::Index i = 0; i < 10; ++i) {
            const auto dist = hops(l, i);
            dense_matrix x = g.features;
            for (Eigen::Index v = 0; v < 10; ++v) {
                const int d = dist[static_cast<std::size_t>(v)];
                if (d < 0 || d > static_cast<int>(p)) x.row(v).setConstant(123.0);
            }
            const auto changed = chebyshev_terms(x, l, p + 1, 2.0).terms[p];
            EXPECT_LT((changed.row(i) - base.row(i)).cwiseAbs().maxCoeff(), 1e-12) << "p=" << p << " i=" << i;
        }
    }
}

TEST(ChebyshevTerms, BadInputsRejected) {
    EXPECT_THROW(chebyshev_terms(dense_matrix::Ones(3, 2), dense_matrix::Identity(3, 3), 0, 2.0), domain_error);
    EXPECT_THROW(chebyshev_terms(dense_matrix::Ones(3, 2), dense_matrix::Identity(4, 4), 2, 2.0), shape_error);
}

TEST(ChebyshevTerms, BackwardIsAdjoint) {
    rng gen(7);
    const auto g = mvgc::test::connected_ish_graph(5, 2, gen);
    const auto l = normalized_laplacian(g.adjacency);
    const std::size_t k = 4;
    std::vector<dense_matrix> w;
    for (std::size_t p = 0; p < k; ++p) w.push_back(random_matrix(5, 2, gen));
    auto loss = [&](const dense_matrix& x, const dense_matrix& lt) {
        // lt is already rescaled: lambda 2 and L = lt + I reproduce it.
        dense_matrix lap = lt;
        lap.diagonal().array() += 1.0;
        const auto b = chebyshev_terms(x, lap, k, 2.0);
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += b.terms[p].cwiseProduct(w[p]).sum();
        return s;
    };
    const auto basis = chebyshev_terms(g.features, l, k, 2.0);
    const auto grads = chebyshev_backward(basis, w);
    const double h = 1e-6;
    dense_matrix x = g.features;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double o = x.data()[i];
        x.data()[i] = o + h;
        const double fp = loss(x, basis.rescaled_laplacian);
        x.data()[i] = o - h;
        const double fm = loss(x, basis.rescaled_laplacian);
        x.data()[i] = o;
        EXPECT_NEAR((fp - fm) / (2 * h), grads.d_x.data()[i], 1e-6);
    }
    dense_matrix lt = basis.rescaled_laplacian;
    for (Eigen::Index i = 0; i < lt.size(); ++i) {
        const double o = lt.data()[i];
        lt.data()[i] = o + h;
        const double fp = loss(g.features, lt);
        lt.data()[i] = o - h;
        const double fm = loss(g.features, lt);
        lt.data()[i] = o;
        EXPECT_NEAR((fp - fm) / (2 * h), grads.d_rescaled.data()[i], 1e-6);
    }
}

TEST(ProjectSignal, SelectorCoefficients) {
    rng gen(8);
    const auto x = random_matrix(4, 3, gen);
    const auto b = chebyshev_terms(x, normalized_laplacian(mvgc::test::connected_ish_graph(4, 1, gen).adjacency), 3, 2.0);
    const std::vector<double> theta{1.0, 0.0, 0.0};
    const auto out = project_signal(b, theta);
    ASSERT_EQ(out.rows(), 4);
    ASSERT_EQ(out.cols(), 9);
    EXPECT_EQ(out.leftCols(3), x);
    EXPECT_EQ(out.rightCols(6), dense_matrix::Zero(4, 6));
}

TEST(ProjectSignal, NullFilter) {
    rng gen(9);
    const auto b = chebyshev_terms(random_matrix(4, 3, gen), dense_matrix::Identity(4, 4), 3, 1.5);
    const std::vector<double> theta(3, 0.0);
    EXPECT_EQ(project_signal(b, theta), dense_matrix::Zero(4, 9));
}

TEST(ProjectSignal, BlockwiseScaling) {
    rng gen(10);
    const auto g = mvgc::test::connected_ish_graph(6, 2, gen);
    const auto b = chebyshev_terms(g.features, normalized_laplacian(g.adjacency), 5, 2.0);
    std::vector<double> theta(5);
    for (auto& t : theta) t = gen.uniform(-1, 1);
    const auto out = project_signal(b, theta);
    for (std::size_t p = 0; p < 5; ++p) {
        EXPECT_LT((out.middleCols(static_cast<Eigen::Index>(2 * p), 2) - theta[p] * b.terms[p]).cwiseAbs().maxCoeff(),
                  1e-12);
    }
}

TEST(ProjectSignal, LengthMismatchRejected) {
    const auto b = chebyshev_terms(dense_matrix::Ones(3, 2), dense_matrix::Identity(3, 3), 3, 2.0);
    const std::vector<double> theta(2, 1.0);
    EXPECT_THROW(project_signal(b, theta), shape_error);
}

TEST(ProjectSignal, BackwardMatchesFiniteDifferences) {
    rng gen(11);
    const auto b = chebyshev_terms(random_matrix(4, 2, gen), normalized_laplacian(mvgc::test::connected_ish_graph(4, 1, gen).adjacency), 3, 2.0);
    std::vector<double> theta{0.3, -0.2, 0.5};
    const auto w = random_matrix(4, 6, gen);
    const auto grads = project_signal_backward(b, theta, w);
    for (std::size_t p = 0; p < 3; ++p) {
        EXPECT_NEAR(grads.d_theta[static_cast<Eigen::Index>(p)], w.middleCols(static_cast<Eigen::Index>(2 * p), 2).cwiseProduct(b.terms[p]).sum(), 1e-12);
        EXPECT_EQ(grads.d_terms[p], theta[p] * w.middleCols(static_cast<Eigen::Index>(2 * p), 2));
    }
}

TEST(MvgcForward, PassThrough) {
    rng gen(12);
    auto layer = make_layer(1, 3, 4, 5, gen);
    layer.alpha = 0.0;
    layer.thetas.setZero();
    layer.thetas(0, 0) = 1.0;
    const auto g = mvgc::test::connected_ish_graph(6, 3, gen);
    const auto r = mvgc_forward(g.features, normalized_laplacian(g.adjacency), layer);
    ASSERT_EQ(r.views.size(), 1u);
    EXPECT_EQ(r.views[0].signal.x_v.leftCols(3), g.features);
    EXPECT_EQ(r.views[0].signal.x_v.rightCols(9), dense_matrix::Zero(6, 9));
}

TEST(MvgcForward, IdenticalViewsGiveIdenticalSignals) {
    rng gen(13);
    auto layer = make_layer(2, 3, 4, 5, gen);
    layer.views[1].q_factor = layer.views[0].q_factor;
    layer.thetas.row(1) = layer.thetas.row(0);
    const auto g = mvgc::test::connected_ish_graph(6, 3, gen);
    const auto r = mvgc_forward(g.features, normalized_laplacian(g.adjacency), layer);
    EXPECT_EQ(r.views[0].signal.x_v, r.views[1].signal.x_v);
    EXPECT_EQ(r.laplacians[0], r.laplacians[1]);
}

TEST(MvgcForward, EightViewsFirstLayer) {
    rng gen(14);
    const auto& data = mvgc::test::mutag();
    const auto layer = make_layer(8, data.feature_dim, 6, 80, gen);
    const auto& g = data.graphs[0];
    const auto r = mvgc_forward(g.features, normalized_laplacian(g.adjacency), layer);
    EXPECT_EQ(r.views.size(), 8u);
    EXPECT_EQ(r.laplacians.size(), 8u);
    for (const auto& v : r.views) {
        EXPECT_EQ(v.signal.x_v.rows(), g.features.rows());
        EXPECT_EQ(v.signal.x_v.cols(), 42);
    }
}

TEST(MvgcForward, OutputWidthIndependentOfVertexCount) {
    rng gen(15);
    const auto layer = make_layer(2, 3, 4, 5, gen);
    for (std::size_t n : {2u, 5u, 11u}) {
        const auto g = random_graph(n, 3, 0.5, gen);
        const auto r = mvgc_forward(g.features, normalized_laplacian(g.adjacency), layer);
        EXPECT_EQ(r.views[0].signal.x_v.cols(), 12);
        EXPECT_EQ(r.views[0].signal.x_v.rows(), static_cast<Eigen::Index>(n));
    }
}

TEST(MvgcForward, LambdaModes) {
    rng gen(16);
    const auto layer = make_layer(2, 3, 4, 5, gen);
    const auto g = mvgc::test::connected_ish_graph(7, 3, gen);
    const auto l = normalized_laplacian(g.adjacency);
    spectral_options exact;
    const auto a = mvgc_forward(g.features, l, layer, exact);
    for (const auto& v : a.views) {
        EXPECT_NEAR(v.lambda_max, mvgc::test::jacobi_eigenvalues(v.laplacian.l_hybrid).back(), 1e-10);
    }
    spectral_options bound;
    bound.lambda_mode = lambda_estimate::bound;
    bound.lambda_bound = 4.0;
    for (const auto& v : mvgc_forward(g.features, l, layer, bound).views) EXPECT_EQ(v.lambda_max, 4.0);
    spectral_options power;
    power.lambda_mode = lambda_estimate::power;
    power.power_iterations = 1;
    power.lambda_bound = 4.0;
    for (const auto& v : mvgc_forward(g.features, l, layer, power).views) {
        EXPECT_FALSE(v.lambda_converged);
        EXPECT_EQ(v.lambda_max, 4.0);
    }
}

TEST(MvgcForward, ErrorsNameTheView) {
    rng gen(17);
    auto layer = make_layer(3, 2, 3, 4, gen);
    layer.views[2].q_factor(0, 0) = std::nan("");
    const auto g = mvgc::test::connected_ish_graph(4, 2, gen);
    try {
        mvgc_forward(g.features, normalized_laplacian(g.adjacency), layer);
        FAIL() << "expected numeric_error";
    } catch (const numeric_error& e) {
        EXPECT_NE(std::string(e.what()).find("view 2"), std::string::npos);
    }
    EXPECT_THROW(mvgc_forward(dense_matrix::Ones(4, 3), normalized_laplacian(g.adjacency), make_layer(1, 2, 3, 4, gen)),
                 shape_error);
}
