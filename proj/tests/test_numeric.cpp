#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "jacobi.hpp"
#include "mvgc/numeric/dense.hpp"
#include "mvgc/numeric/rng.hpp"

using namespace mvgc;
using mvgc::test::random_matrix;

namespace {

dense_matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    dense_matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrix) {
    const auto a = mat({{1, 2}, {3, 4}});
    EXPECT_EQ(matmul(dense_matrix::Identity(2, 2), a), a);
}

TEST(Matmul, RowTimesColumn) {
    const auto r = matmul(mat({{1, 2}}), mat({{3}, {4}}));
    ASSERT_EQ(r.rows(), 1);
    ASSERT_EQ(r.cols(), 1);
    EXPECT_EQ(r(0, 0), 11.0);
}

TEST(Matmul, MatchesTripleLoop) {
    rng gen(3);
    const auto a = random_matrix(5, 4, gen);
    const auto b = random_matrix(4, 3, gen);
    const auto c = matmul(a, b);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
            EXPECT_NEAR(c(i, j), s, 1e-12);
        }
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
    try {
        matmul(dense_matrix::Zero(2, 3), dense_matrix::Zero(2, 3));
        FAIL() << "expected shape_error";
    } catch (const shape_error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos);
        EXPECT_NE(msg.find("by 2x3"), std::string::npos);
    }
}

TEST(Matmul, Associative) {
    rng gen(11);
    for (int t = 0; t < 20; ++t) {
        const auto a = random_matrix(4, 5, gen);
        const auto b = random_matrix(5, 3, gen);
        const auto c = random_matrix(3, 6, gen);
        const auto l = matmul(matmul(a, b), c);
        const auto r = matmul(a, matmul(b, c));
        EXPECT_LE((l - r).norm() / l.norm(), 1e-9);
    }
}

TEST(Hadamard, OnesIsIdentity) {
    rng gen(1);
    const auto a = random_matrix(3, 4, gen);
    EXPECT_EQ(hadamard(a, dense_matrix::Ones(3, 4)), a);
}

TEST(Hadamard, HandComputed) {
    EXPECT_EQ(hadamard(mat({{1, 2}, {3, 4}}), mat({{0, 1}, {1, 0}})), mat({{0, 2}, {3, 0}}));
}

TEST(Hadamard, ShapeMismatchThrows) {
    EXPECT_THROW(hadamard(dense_matrix::Zero(2, 2), dense_matrix::Zero(2, 3)), shape_error);
}

TEST(Hadamard, Commutative) {
    rng gen(2);
    const auto a = random_matrix(5, 5, gen);
    const auto b = random_matrix(5, 5, gen);
    EXPECT_EQ(hadamard(a, b), hadamard(b, a));
}

TEST(Hadamard, DiagonalIdentityOnRandomPairs) {
    rng gen(5);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto c = static_cast<Eigen::Index>(1 + gen.next() % 10);
        const auto d = static_cast<Eigen::Index>(1 + gen.next() % 10);
        const auto a = random_matrix(c, d, gen);
        const auto b = random_matrix(c, d, gen);
        const dense_matrix abt = matmul(a, b.transpose());
        const dense_matrix rows = hadamard(a, b).rowwise().sum();
        for (Eigen::Index i = 0; i < c; ++i) worst = std::max(worst, std::abs(abt(i, i) - rows(i, 0)));
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(ElemStats, ConstantMatrix) {
    const auto s = elem_stats(mat({{2, 2}, {2, 2}}));
    EXPECT_EQ(s.mean, 2.0);
    EXPECT_EQ(s.std, 0.0);
}

TEST(ElemStats, HandComputed) {
    const auto s = elem_stats(mat({{0, 2}}));
    EXPECT_DOUBLE_EQ(s.mean, 1.0);
    EXPECT_DOUBLE_EQ(s.std, 1.0);
}

TEST(ElemStats, MatchesTwoPassOracle) {
    rng gen(8);
    const auto a = random_matrix(4, 4, gen);
    double mean = 0.0;
    for (int i = 0; i < 16; ++i) mean += a.data()[i];
    mean /= 16.0;
    double var = 0.0;
    for (int i = 0; i < 16; ++i) var += (a.data()[i] - mean) * (a.data()[i] - mean);
    const auto s = elem_stats(a);
    EXPECT_NEAR(s.mean, mean, 1e-12);
    EXPECT_NEAR(s.std, std::sqrt(var / 16.0), 1e-12);
}

TEST(ElemStats, EmptyThrows) { EXPECT_THROW(elem_stats(dense_matrix(0, 0)), domain_error); }

TEST(SpectralRadius, Diagonal) {
    dense_matrix d = dense_matrix::Zero(3, 3);
    d.diagonal() << 1, 3, 2;
    const auto e = spectral_radius_max(d, 200, 1e-8);
    EXPECT_NEAR(e.value, 3.0, 1e-8);
}

TEST(SpectralRadius, TwoVertexPathLaplacian) {
    const auto e = spectral_radius_max(mat({{1, -1}, {-1, 1}}), 200, 1e-8);
    EXPECT_TRUE(e.converged);
    EXPECT_NEAR(e.value, 2.0, 1e-8);
}

TEST(SpectralRadius, RandomSymmetricMatchesJacobi) {
    rng gen(21);
    for (int t = 0; t < 5; ++t) {
        // Shift to make the top eigenvalue the largest in magnitude and well separated.
        dense_matrix a = mvgc::test::random_symmetric(8, gen);
        a.diagonal().array() += 3.0;
        a(0, 0) += 2.0;
        const auto oracle = mvgc::test::jacobi_eigenvalues(a).back();
        const auto e = spectral_radius_max(a, 2000, 1e-14);
        EXPECT_NEAR(e.value, oracle, 1e-6);
    }
}

TEST(SpectralRadius, NonConvergenceIsFlagged) {
    // Nearly degenerate top pair: 3 iterations cannot settle.
    dense_matrix d = dense_matrix::Zero(3, 3);
    d.diagonal() << 1.0, 0.999, 0.5;
    const auto e = spectral_radius_max(d, 3, 1e-14);
    EXPECT_FALSE(e.converged);
    EXPECT_GT(e.value, 0.0);
}

TEST(SpectralRadius, RejectsBadInput) {
    EXPECT_THROW(spectral_radius_max(dense_matrix::Zero(2, 3), 10, 1e-8), shape_error);
    EXPECT_THROW(spectral_radius_max(mat({{1, 2}, {0, 1}}), 10, 1e-8), shape_error);
}

TEST(LargestEigenvalue, MatchesJacobi) {
    rng gen(4);
    for (int t = 0; t < 10; ++t) {
        const auto a = mvgc::test::random_symmetric(7, gen);
        EXPECT_NEAR(largest_eigenvalue(a), mvgc::test::jacobi_eigenvalues(a).back(), 1e-10);
    }
    EXPECT_THROW(largest_eigenvalue(mat({{1, 2}, {0, 1}})), shape_error);
}

TEST(Rng, SameSeedSameStream) {
    rng a(123), b(123);
    for (int i = 0; i < 10000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, DifferentSeedsDiffer) {
    rng a(1), b(2);
    EXPECT_NE(a.next(), b.next());
}

TEST(Rng, SplitIsDeterministicAndDistinct) {
    const rng root(9);
    auto a = root.split(1), b = root.split(1), c = root.split(2);
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
}

TEST(Rng, UniformRanges) {
    rng gen(6);
    for (int i = 0; i < 10000; ++i) {
        const double u = gen.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double o = gen.uniform_open();
        ASSERT_GT(o, 0.0);
        ASSERT_LT(o, 1.0);
    }
}
