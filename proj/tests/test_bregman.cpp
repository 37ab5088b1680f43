#include <gtest/gtest.h>

#include <random>

#include "emlab/bregman.hpp"

using namespace emlab;

namespace {

// KL between 2-sample Gaussian laws, from moments
double gaussian2_kl_oracle(const Vec& th, const Vec& thp) {
    const GaussianMoments a = gaussian_moments(th), b = gaussian_moments(thp);
    const double single = 0.5 * std::log(b.s2 / a.s2) + (a.s2 + (a.mu - b.mu) * (a.mu - b.mu)) / (2.0 * b.s2) - 0.5;
    return 2.0 * single;
}

}  // namespace

TEST(KLDivergence, ExampleValue) {
    const ExpFamily g = gaussian_family(2);
    EXPECT_NEAR(kl_divergence(g, {0, -1}, {2, -1}), 1.0, 1e-9);
    EXPECT_NEAR(kl_divergence(g, {2, -1}, {2, -1}), 0.0, 1e-15);
}

TEST(KLDivergence, MatchesClosedFormOnSampledPairs) {
    const ExpFamily g = gaussian_family(2);
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> mu(-2.0, 2.0), s2(0.2, 3.0);
    for (int i = 0; i < 25; ++i) {
        const Vec a = gaussian_natural(mu(rng), s2(rng)), b = gaussian_natural(mu(rng), s2(rng));
        EXPECT_NEAR(kl_divergence(g, a, b), gaussian2_kl_oracle(a, b), 1e-9);
    }
}

TEST(KLDivergence, RejectsBoundaryArguments) {
    const ExpFamily g = gaussian_family(2);
    EXPECT_THROW(kl_divergence(g, {0, 0}, {0, -1}), DomainError);
    EXPECT_THROW(kl_divergence(g, {0, -1}, {0, 1}), DomainError);
}

TEST(BregmanDiv, QuadraticIsHalfSquaredDistance) {
    const ExpFamily q = quadratic_family(3);
    EXPECT_NEAR(bregman_div(q, {1, 2, 3}, {0, 0, 1}), 0.5 * (1 + 4 + 4), 1e-14);
}

TEST(BregmanDiv, NonnegativeAndZeroOnDiagonal) {
    const ExpFamily g = gaussian_family(2);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> t1(-3, 3), t2(-4, -0.1);
    for (int i = 0; i < 50; ++i) {
        const Vec x{t1(rng), t2(rng)}, y{t1(rng), t2(rng)};
        EXPECT_GE(bregman_div(g, x, y), -1e-12);
        EXPECT_NEAR(bregman_div(g, x, x), 0.0, 1e-12);
    }
}

TEST(BregmanDiv, InfiniteOutsideDomain) {
    const ExpFamily g = gaussian_family(2);
    EXPECT_EQ(bregman_div(g, {0, -1}, {0, 1}), kInf);
    EXPECT_EQ(bregman_div(g, {0, 1}, {0, -1}), kInf);
}

TEST(BregmanDiv, NegentropyIsGeneralizedKL) {
    const LegendreGenerator g = negentropy_generator(2);
    const Vec x{0.3, 1.2}, y{0.5, 0.7};
    double kl = 0.0;
    for (int i = 0; i < 2; ++i) kl += x[i] * std::log(x[i] / y[i]) - x[i] + y[i];
    EXPECT_NEAR(bregman_div(g, x, y), kl, 1e-14);
    EXPECT_EQ(bregman_div(g, x, {0.0, 1.0}), kInf);
}

TEST(Projection, LeftOntoAffineIsEuclideanForQuadratic) {
    const ExpFamily q = quadratic_family(2);
    const ConstraintSet line = ConstraintSet::affine(Matrix{{1.0, 1.0}}, {1.0});
    const InnerResult r = left_projection(q, line, {2.0, 0.0});
    EXPECT_NEAR(r.x[0], 1.5, 1e-12);
    EXPECT_NEAR(r.x[1], -0.5, 1e-12);
    EXPECT_TRUE(r.converged);
}

TEST(Projection, LeftOntoDiagonalMatchesMeanCondition) {
    // minimizing D(theta, target) over an affine set makes grad psi(theta) - grad psi(target) normal to it
    const ExpFamily g = gaussian_family(2);
    const ConstraintSet m = ConstraintSet::affine(Matrix{{1.0, 1.0}}, {0.0});  // theta2 = -theta1
    const Vec target{0.5, -2.0};
    const InnerResult r = left_projection(g, m, target, {.start = Vec{1.0, -1.0}});
    const Vec d = g.grad(r.x) - g.grad(target);
    EXPECT_NEAR(d[0] - d[1], 0.0, 1e-9);
    EXPECT_NEAR(r.x[0] + r.x[1], 0.0, 1e-12);
}

TEST(Projection, RightOntoCurveIsStationary) {
    const LegendreGenerator g = negentropy_generator(2);
    const Vec p{-1, -2}, q{-2, -1};
    auto arc = [&](double t) { return Vec{std::exp(t * p[0] + (1 - t) * q[0]), std::exp(t * p[1] + (1 - t) * q[1])}; };
    const ConstraintSet c = ConstraintSet::parametric(2, arc, 0.0, 1.0);
    const Vec source{0.3, 0.2};
    const InnerResult r = right_projection(g, c, source);
    ASSERT_TRUE(r.u);
    // derivative of D(source, arc(t)) along the arc vanishes at an interior solution
    const double h = 1e-6, u = *r.u;
    const double d = (bregman_div(g, source, arc(u + h)) - bregman_div(g, source, arc(u - h))) / (2 * h);
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_NEAR(d, 0.0, 1e-7);
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) EXPECT_LE(r.value, bregman_div(g, source, arc(t)) + 1e-15);
}
