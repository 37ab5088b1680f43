#include <gtest/gtest.h>

#include "emlab/experiments.hpp"

using namespace emlab;

namespace {

const std::vector<Vec> kInterior = {{0.0, -1.0}, {2.0, -1.0}, {-1.0, -0.5}, {0.5, -3.0}, {3.0, -2.0}};

}  // namespace

TEST(Split, ConditionalFisherAtReferencePoint) {
    const IncompleteModel md = gaussian2_missing(0.0);
    const SymMatrix im = conditional_fisher(md, {0.0, -1.0});
    EXPECT_NEAR(im(0, 0), 0.0, 1e-9);
    EXPECT_NEAR(im(0, 1), 0.0, 1e-9);
    EXPECT_NEAR(im(1, 1), 0.5, 1e-9);
    const SplitCoordinates s = split_parameters(md, {0.0, -1.0});
    EXPECT_EQ(s.m, 1u);
    EXPECT_NEAR(s.P(0, 0), 0.0, 1e-9);
    EXPECT_NEAR(s.P(0, 1), 0.0, 1e-9);
    EXPECT_NEAR(s.P(1, 1), 1.0, 1e-9);
}

TEST(Split, InformationDecomposition) {
    // hess psi = observed information + missing information
    for (double y : {0.0, 1.0, -0.7}) {
        const IncompleteModel md = gaussian2_missing(y);
        for (const Vec& th : kInterior) {
            const SymMatrix obs = fd_hessian(md.neg_log_q, th).value;
            const SymMatrix miss = conditional_fisher(md, th);
            const SymMatrix full = md.fam.hess(th);
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(full(i, j), obs(i, j) + miss(i, j), 1e-5);
        }
    }
}

TEST(Split, MissingComponentAlignsWithHiddenCoordinate) {
    const IncompleteModel md = gaussian_missing_component(SymMatrix{{1.0, 0.5}, {0.5, 2.0}}, 1.0);
    const SplitCoordinates s = split_parameters(md, {0.0, 0.0});
    EXPECT_EQ(s.m, 1u);
    EXPECT_NEAR(std::abs(s.Q(0, 1)), 1.0, 1e-12);
    EXPECT_NEAR(s.P(1, 1), 1.0, 1e-12);
}

TEST(Split, CompleteDataHasNoAccurateCoordinates) {
    const IncompleteModel md = complete_data_model(gaussian_family(2), {1.0, 2.0});
    EXPECT_EQ(split_parameters(md, {0.0, -1.0}).m, 0u);
}

TEST(EStep, MatchesConditionalNormalizerGradient) {
    const IncompleteModel md = gaussian2_missing(0.8);
    for (const Vec& th : kInterior) {
        const Vec t = e_step(md, th);
        const Vec fd = fd_gradient(md.psi_y, th).value;
        EXPECT_NEAR(t[0], fd[0], 1e-6);
        EXPECT_NEAR(t[1], fd[1], 1e-6);
    }
    EXPECT_THROW(e_step(md, {0.0, 1.0}), DomainError);
}

TEST(MStep, WholeSpaceIsDualParameter) {
    const IncompleteModel md = gaussian2_missing(1.0);
    const Vec th = m_step(md, {1.0, 2.0});
    EXPECT_NEAR(th[0], 2.0, 1e-12);
    EXPECT_NEAR(th[1], -1.0, 1e-12);
    EXPECT_THROW(m_step(md, {1.0, 0.5}), DualDomainError);
}

TEST(EMRun, EquivalentToKLProximalRun) {
    const GaussianCurvedConfig c;
    const IncompleteModel md = gaussian_curved_model(c);
    EMConfig ec;
    ec.max_iter = 50;
    ec.step_tol = 0.0;
    const EMTrace em = em_run(md, c.theta0, ec);
    ProxConfig pc;
    pc.max_iter = 50;
    pc.step_tol = 0.0;
    const IterateTrace px = prox_run(md.nlq_objective(), md.M, kl_em_regularizer(md, c.theta0), pc, c.theta0);
    ASSERT_EQ(em.size(), 51u);
    ASSERT_EQ(px.size(), 51u);
    for (std::size_t k = 0; k < em.size(); ++k) EXPECT_LE(distance(em.rows[k].x, px.rows[k].x), 1e-8) << "iterate " << k;
}

TEST(EMRun, CurvedGaussianConverges) {
    const GaussianCurvedConfig c;
    const EMTrace em = em_run(gaussian_curved_model(c), c.theta0, c.em);
    EXPECT_TRUE(em.descent_ok);
    EXPECT_EQ(em.stop, StopReason::step_tol);
    EXPECT_LE(em.size(), 201u);
    const Vec& th = em.back().x;
    EXPECT_NEAR(th[0] * th[0] + 4.0 * th[1], 0.0, 1e-8);
    for (const auto& r : em.rows) EXPECT_NEAR(r.x[0] * r.x[0] + 4.0 * r.x[1], 0.0, 1e-8 * std::max(1.0, norm(r.x)));
}

TEST(EMRun, CurvedGaussianZeroDatumStaysFeasible) {
    GaussianCurvedConfig c;
    c.y = 0.0;
    c.theta0 = {1.0, -0.25};
    const EMTrace em = em_run(gaussian_curved_model(c), c.theta0, c.em);
    EXPECT_TRUE(em.descent_ok);
    for (const auto& r : em.rows) EXPECT_LE(std::abs(r.x[0] * r.x[0] + 4.0 * r.x[1]), 1e-8 * std::max(1.0, norm(r.x)));
}

TEST(EMRun, UnconstrainedMeanPinnedAtDatum) {
    for (double y : {1.0, 0.0, -2.0}) {
        const EMTrace em = em_run(gaussian2_missing(y), {0.0, -1.0});
        EXPECT_TRUE(em.descent_ok);
        for (std::size_t k = 1; k < em.size(); ++k) {
            EXPECT_NEAR(gaussian_moments(em.rows[k].x).mu, y, 1e-10);
            EXPECT_LE(std::abs(em.rows[k].x[0] + 2.0 * y * em.rows[k].x[1]), 1e-9 * std::max(1.0, norm(em.rows[k].x)));
            // variance halves each step
            EXPECT_NEAR(gaussian_moments(em.rows[k].x).s2, std::ldexp(1.0, -static_cast<int>(k)), 1e-12);
        }
        EXPECT_EQ(em.stop, StopReason::escaping);
    }
}

TEST(EMRun, RejectsOffModelStart) {
    const IncompleteModel md = gaussian_curved_model(GaussianCurvedConfig{});
    EXPECT_THROW(em_run(md, {1.0, -1.0}), InfeasibleError);
}

TEST(RegularizedEM, LimitsReduceToPlainStep) {
    const GaussianCurvedConfig c;
    const IncompleteModel md = gaussian_curved_model(c);
    const Vec plain = m_step_detail(md, e_step(md, c.theta0), c.theta0).x;
    const SplitCoordinates s = split_parameters(md, c.theta0);
    EXPECT_LE(distance(regularized_em_step(md, c.theta0, kInf, s), plain), 1e-14);
    EXPECT_LE(distance(regularized_em_step(md, c.theta0, 0.3, identity_split(2)), plain), 1e-14);
}

TEST(RegularizedEM, MonotoneOnCurvedGaussian) {
    GaussianCurvedConfig c;
    c.em.spare_penalty = 0.5;
    const EMTrace em = em_run(gaussian_curved_model(c), c.theta0, c.em);
    EXPECT_TRUE(em.descent_ok);
    EXPECT_LE(em.max_increase, 1e-12);
}

TEST(SplitProgram, MatchesDirectMinimization) {
    const SymMatrix cov{{1.0, 0.5}, {0.5, 2.0}};
    const IncompleteModel md = gaussian_missing_component(cov, 1.0);
    const SplitCoordinates s = split_parameters(md, {0.0, 0.0});
    const double tz = 0.4;
    const SplitProgramResult r = split_program_solve(md, {s.Q(0, 1) * tz}, s);
    // oracle: minimize -log q over theta_y with theta_z fixed
    auto [ty, v] = minimize_1d([&](double u) { return md.neg_log_q({u, tz}); }, -10.0, 10.0);
    EXPECT_NEAR(r.theta[0], ty, 1e-6);
    EXPECT_NEAR(r.theta[1], tz, 1e-12);
    EXPECT_NEAR(r.value, v, 1e-10);
    EXPECT_TRUE(r.strictly_convex);
    EXPECT_EQ(r.section_dim, 1u);
}

TEST(BoundaryMonitor, InclusiveThreshold) {
    IterateTrace tr;
    for (double m : {1.0, 0.5, 1e-6}) {
        IterateRecord r;
        r.domain_margin = m;
        tr.rows.push_back(r);
    }
    EXPECT_TRUE(boundary_monitor(tr).approaching);
    tr.rows.back().domain_margin = 2e-6;
    EXPECT_FALSE(boundary_monitor(tr).approaching);
}

TEST(Duplicated, RegularizedStaysOnBranchPlainFlips) {
    const DuplicatedRuns runs = duplicated_runs(DuplicatedConfig{});
    EXPECT_EQ(runs.plain.split.m, 1u);
    EXPECT_TRUE(runs.plain.descent_ok);
    EXPECT_TRUE(runs.regularized.descent_ok);
    EXPECT_LT(runs.regularized_sums[runs.regularized_sums.size() / 2], 1e-6);
    EXPECT_GT(runs.plain_sums[runs.plain_sums.size() / 2], 1e-5);
    // consecutive plain iterates sit on opposite branches
    const auto& r = runs.plain.rows;
    for (std::size_t k = 2; k < r.size(); ++k)
        EXPECT_NEAR((r[k].x[0] - r[k].x[1]) + (r[k - 1].x[0] - r[k - 1].x[1]), 0.0, 1e-12);
}
