#include <gtest/gtest.h>

#include <random>

#include "emlab/numerics.hpp"

using namespace emlab;

namespace {

double reconstruction_error(const SymMatrix& a, const SymEig& e) {
    const std::size_t n = a.dim();
    Matrix r(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) r(i, j) += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m = std::max(m, std::abs(r(i, j) - a(i, j)));
    return m;
}

}  // namespace

TEST(SymEig, Identity) {
    const SymEig e = sym_eig(SymMatrix(Matrix::identity(3)));
    for (double v : e.values) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(SymEig, DiagonalSortedNonIncreasing) {
    const SymEig e = sym_eig(SymMatrix(Matrix::diag({0.0, 5.0, 0.0})));
    EXPECT_NEAR(e.values[0], 5.0, 1e-14);
    EXPECT_NEAR(e.values[1], 0.0, 1e-14);
    EXPECT_NEAR(e.values[2], 0.0, 1e-14);
    EXPECT_NEAR(std::abs(e.vectors(1, 0)), 1.0, 1e-14);
}

TEST(SymEig, TwoByTwoHandRoots) {
    // det([[2-l,1],[1,2-l]]) = (2-l)^2 - 1 -> l = 3, 1
    const SymEig e = sym_eig(SymMatrix{{2, 1}, {1, 2}});
    EXPECT_NEAR(e.values[0], 3.0, 1e-13);
    EXPECT_NEAR(e.values[1], 1.0, 1e-13);
    EXPECT_NEAR(std::abs(e.vectors(0, 0)), std::sqrt(0.5), 1e-13);
}

TEST(SymEig, RandomReconstructionAndOrthogonality) {
    std::mt19937 rng(7);
    std::normal_distribution<double> nd(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + trial % 8;
        Matrix a(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = nd(rng);
        const SymMatrix s(a);
        const SymEig e = sym_eig(s);
        EXPECT_LE(reconstruction_error(s, e), 1e-9 * std::max(1.0, s.frobenius()));
        const Matrix vtv = e.vectors.transpose() * e.vectors;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(vtv(i, j), i == j ? 1.0 : 0.0, 1e-10);
        for (std::size_t i = 1; i < n; ++i) EXPECT_GE(e.values[i - 1], e.values[i]);
    }
}

TEST(SymEig, RejectsNonFinite) {
    SymMatrix s(2);
    s(0, 0) = std::nan("");
    EXPECT_THROW(sym_eig(s), NumericError);
}

TEST(SymMatrixTest, RejectsAsymmetric) {
    EXPECT_THROW(SymMatrix(Matrix{{1, 2}, {0, 1}}), NumericError);
}

TEST(RankWithTol, Examples) {
    EXPECT_EQ(rank_with_tol({3, 1}, 1e-8), 2u);
    EXPECT_EQ(rank_with_tol({1, 0}, 1e-8), 1u);
    EXPECT_EQ(rank_with_tol({0.5, 3e-17}, 1e-8), 1u);
    EXPECT_THROW(rank_with_tol({1.0, -0.5}, 1e-8), NumericError);
}

TEST(ProjectionFromEigvecs, FullAndEmptyRank) {
    const SymEig e = sym_eig(SymMatrix{{2, 1}, {1, 2}});
    const SplitBasis full = projection_from_eigvecs(e, 2);
    const SplitBasis none = projection_from_eigvecs(e, 0);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            EXPECT_NEAR(full.P(i, j), i == j ? 1.0 : 0.0, 1e-12);
            EXPECT_EQ(none.P(i, j), 0.0);
        }
}

TEST(ProjectionFromEigvecs, ConditionalFisherShape) {
    const SymEig e = sym_eig(SymMatrix{{0, 0}, {0, 0.5}});
    const std::size_t m = rank_with_tol(e.values);
    ASSERT_EQ(m, 1u);
    const SplitBasis s = projection_from_eigvecs(e, m);
    EXPECT_NEAR(s.P(0, 0), 0.0, 1e-14);
    EXPECT_NEAR(s.P(1, 1), 1.0, 1e-14);
    EXPECT_NEAR(s.P(0, 1), 0.0, 1e-14);
}

TEST(ProjectionFromEigvecs, IdempotentSymmetric) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> ud(-1, 1);
    Matrix a(5, 5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i; j < 5; ++j) a(i, j) = a(j, i) = ud(rng);
    const SymEig e = sym_eig(SymMatrix(a));
    for (std::size_t m = 0; m <= 5; ++m) {
        const SplitBasis s = projection_from_eigvecs(e, m);
        const Matrix p2 = s.P * s.P;
        double tr = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            tr += s.P(i, i);
            for (std::size_t j = 0; j < 5; ++j) {
                EXPECT_NEAR(p2(i, j), s.P(i, j), 1e-12);
                EXPECT_NEAR(s.P(i, j), s.P(j, i), 1e-12);
            }
        }
        EXPECT_NEAR(tr, static_cast<double>(m), 1e-12);
    }
}

TEST(NewtonSolve, AffineOneStep) {
    auto f = [](const Vec& x) { return Vec{x[0] - 1.0}; };
    auto j = [](const Vec&) { return Matrix{{1.0}}; };
    const NewtonResult r = newton_solve(f, j, Vec{0.0});
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_NEAR(r.x[0], 1.0, 1e-15);
}

TEST(NewtonSolve, SingularRootIsSlow) {
    auto f = [](const Vec& x) { return Vec{x[0] * x[0]}; };
    auto j = [](const Vec& x) { return Matrix{{2.0 * x[0]}}; };
    const NewtonResult r = newton_solve(f, j, Vec{1.0});
    EXPECT_TRUE(r.slow);
    EXPECT_GT(r.iterations, 10);
}

TEST(NewtonSolve, GaussianMeanInversion) {
    // grad psi for psi = -t1^2/(4 t2) - log(-t2)
    auto f = [](const Vec& t) {
        if (t[1] >= 0) return Vec{std::nan(""), std::nan("")};
        return Vec{-t[0] / (2 * t[1]) - 1.0, t[0] * t[0] / (4 * t[1] * t[1]) - 1.0 / t[1] - 2.0};
    };
    auto j = [](const Vec& t) {
        return Matrix{{-1.0 / (2 * t[1]), t[0] / (2 * t[1] * t[1])},
                      {t[0] / (2 * t[1] * t[1]), -t[0] * t[0] / (2 * t[1] * t[1] * t[1]) + 1.0 / (t[1] * t[1])}};
    };
    const NewtonResult r = newton_solve(f, j, Vec{0.0, -0.5});
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 2.0, 1e-9);
    EXPECT_NEAR(r.x[1], -1.0, 1e-9);
}

TEST(NewtonSolve, SingularJacobianFallsBack) {
    auto f = [](const Vec& x) { return Vec{x[0] + x[1] - 2.0, x[0] + x[1] - 2.0}; };
    auto j = [](const Vec&) { return Matrix{{1.0, 1.0}, {1.0, 1.0}}; };
    const NewtonResult r = newton_solve(f, j, Vec{0.0, 0.0});
    EXPECT_TRUE(r.fallback_used);
    EXPECT_TRUE(r.converged);
}

TEST(FiniteDiff, ScalarSquare) {
    auto f = [](const Vec& x) { return x[0] * x[0]; };
    const FdGradient g = fd_gradient(f, Vec{3.0}, 1e-5);
    EXPECT_NEAR(g.value[0], 6.0, 1e-8);
    EXPECT_FALSE(g.one_sided);
}

TEST(FiniteDiff, HalfNormHessianIsIdentity) {
    auto f = [](const Vec& x) { return 0.5 * dot(x, x); };
    const FdHessian h = fd_hessian(f, Vec{0.3, -1.2, 2.0});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(h.value(i, j), i == j ? 1.0 : 0.0, 1e-6);
}

TEST(FiniteDiff, GaussianPsiHessian) {
    auto psi = [](const Vec& t) { return t[1] < 0 ? -t[0] * t[0] / (4 * t[1]) - std::log(-t[1]) : INFINITY; };
    const FdHessian h = fd_hessian(psi, Vec{2.0, -1.0});
    // analytic: [[1/2, 1], [1, 3]] at (2,-1)
    EXPECT_NEAR(h.value(0, 0), 0.5, 1e-5);
    EXPECT_NEAR(h.value(0, 1), 1.0, 1e-5);
    EXPECT_NEAR(h.value(1, 1), 3.0, 1e-5);
}

TEST(FiniteDiff, OneSidedFallbackFlagged) {
    auto f = [](const Vec& x) { return x[0] >= 0 ? x[0] * x[0] * x[0] : INFINITY; };
    const FdGradient g = fd_gradient(f, Vec{1e-8}, 1e-6);
    EXPECT_TRUE(g.one_sided);
    EXPECT_NEAR(g.value[0], 0.0, 1e-10);
}

TEST(LinearSolve, LuAndDamped) {
    auto x = lu_solve(Matrix{{4, 1}, {1, 3}}, Vec{1, 2});
    ASSERT_TRUE(x);
    EXPECT_NEAR((*x)[0], 1.0 / 11.0, 1e-14);
    EXPECT_NEAR((*x)[1], 7.0 / 11.0, 1e-14);
    EXPECT_FALSE(lu_solve(Matrix{{1, 1}, {1, 1}}, Vec{1, 1}));
    // singular PSD: damped solve keeps the kernel component at zero
    const Vec d = damped_solve(Matrix{{1, 1}, {1, 1}}, Vec{2, 2});
    EXPECT_NEAR(d[0] - d[1], 0.0, 1e-12);
    EXPECT_NEAR(d[0] + d[1], 2.0, 1e-12);
}

TEST(Scalar, RootAndMinimum) {
    auto g = [](double u) { return u * u - 2.0; };
    EXPECT_NEAR(bracketed_root(g, 0.0, 2.0, g(0.0), g(2.0)), std::sqrt(2.0), 1e-14);
    auto [u, v] = minimize_1d([](double s) { return (s - 0.3) * (s - 0.3) + 1.0; }, -1.0, 1.0);
    EXPECT_NEAR(u, 0.3, 1e-7);
    EXPECT_NEAR(v, 1.0, 1e-14);
}
