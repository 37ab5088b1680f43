#pragma once

#include <functional>
#include <string>

#include "emlab/em.hpp"

namespace emlab {

// D = {vartheta in G : (grad psi(vartheta))_i = value_i for i in observed}
struct DataSetSpec {
    std::vector<std::size_t> observed;
    Vec value;

    double residual(const LegendreGenerator& gen, const Vec& th) const {
        const Vec eta = gen.grad(th);
        double s = 0.0;
        for (std::size_t i = 0; i < observed.size(); ++i) s += (eta[observed[i]] - value[i]) * (eta[observed[i]] - value[i]);
        return std::sqrt(s);
    }
};

inline DataSetSpec data_set(const IncompleteModel& md) { return {md.observed, md.observed_value}; }

// Right projection onto D: hidden natural coordinates kept, observed block solved by Newton.
inline Vec e_projection(const LegendreGenerator& gen, const DataSetSpec& d, const Vec& theta, const NewtonOptions& opt = {1e-12, 100, 60}) {
    require_interior(gen, theta, "e_projection");
    if (d.observed.size() != d.value.size()) throw ConfigError("data set: observed/value size mismatch");
    const std::size_t m = d.observed.size();
    if (m == 0) return theta;
    auto embed = [&](const Vec& obs) {
        Vec th(theta);
        for (std::size_t i = 0; i < m; ++i) th[d.observed[i]] = obs[i];
        return th;
    };
    auto fun = [&](const Vec& obs) {
        const Vec th = embed(obs);
        if (!gen.inside(th)) return Vec(m, kNaN);
        const Vec eta = gen.grad(th);
        Vec r(m);
        for (std::size_t i = 0; i < m; ++i) r[i] = eta[d.observed[i]] - d.value[i];
        return r;
    };
    auto jac = [&](const Vec& obs) {
        const SymMatrix h = gen.hess(embed(obs));
        Matrix j(m, m);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) j(a, b) = h(d.observed[a], d.observed[b]);
        return j;
    };
    Vec obs0(m);
    for (std::size_t i = 0; i < m; ++i) obs0[i] = theta[d.observed[i]];
    const NewtonResult r = newton_solve(fun, jac, obs0, opt);
    const double scale = std::max(1.0, norm(d.value));
    if (!(r.residual <= 1e-9 * scale)) throw InfeasibleError("e_projection: observed mean values not reachable in the interior");
    return embed(r.x);
}

inline InnerResult m_projection(const LegendreGenerator& gen, const ConstraintSet& m, const Vec& vartheta, const ProjectionOptions& opt = {}) {
    return left_projection(gen, m, vartheta, opt);
}

struct AmariResult {
    bool coincide = true;
    Vec lhs;  // E_{vartheta_e}[z | y]
    Vec rhs;  // E_{vartheta_e}[z]
    Vec vartheta_e;
};

inline AmariResult amari_check(const IncompleteModel& md, const Vec& theta, double tol = 1e-9) {
    AmariResult a;
    a.vartheta_e = e_projection(md.fam, data_set(md), theta);
    const auto hid = md.hidden();
    if (md.hidden_cond && md.hidden_marginal) {
        a.lhs = md.hidden_cond(a.vartheta_e);
        a.rhs = md.hidden_marginal(a.vartheta_e);
    } else {
        const Vec c = md.cond_expect(a.vartheta_e), e = md.fam.grad(a.vartheta_e);
        for (std::size_t i : hid) {
            a.lhs.push_back(c[i]);
            a.rhs.push_back(e[i]);
        }
    }
    a.coincide = distance(a.lhs, a.rhs) <= tol;
    return a;
}

// ---- alternating projections ----------------------------------------------------------

// right projection onto the second set (data set, curve, ...), returning the minimizer
using RightProjector = std::function<Vec(const Vec&)>;

inline RightProjector right_projector(const LegendreGenerator& gen, const DataSetSpec& d) {
    return [gen, d](const Vec& th) { return e_projection(gen, d, th); };
}

inline RightProjector right_projector(const LegendreGenerator& gen, const ConstraintSet& s, ProjectionOptions opt = {}) {
    return [gen, s, opt](const Vec& th) { return right_projection(gen, s, th, opt).x; };
}

enum class AlternatingOutcome { common_point, gap_pair, not_converged };

inline const char* to_string(AlternatingOutcome o) {
    switch (o) {
        case AlternatingOutcome::common_point: return "common-point";
        case AlternatingOutcome::gap_pair: return "gap-pair";
        case AlternatingOutcome::not_converged: return "not-converged";
    }
    return "?";
}

struct AlternatingConfig {
    int max_iter = 100000;
    double step_tol = 1e-10;
    double common_tol = 1e-12;  // divergence below which the pair is a common point
    ProjectionOptions inner;
};

struct AlternatingRecord {
    std::size_t k = 0;
    Vec theta;           // theta^(k) in M
    Vec vartheta;        // vartheta^(k+1) = right projection of theta^(k)
    double div_current = kNaN;  // D(theta^(k), vartheta^(k))
    double div_next = kNaN;     // D(theta^(k), vartheta^(k+1)) = gap estimate
    double step_norm = 0.0;     // ||theta^(k) - theta^(k-1)||
    double residual = 0.0;      // tangential residual of the left projection that produced theta^(k)
};

struct AlternatingTrace {
    std::vector<AlternatingRecord> rows;
    AlternatingOutcome outcome = AlternatingOutcome::not_converged;
    bool monotone = true;
    double gap = kNaN;

    std::vector<Vec> points() const {
        std::vector<Vec> xs;
        for (const auto& r : rows) xs.push_back(r.theta);
        return xs;
    }
};

// theta^(k) -> vartheta^(k+1) = right(theta^(k)) -> theta^(k+1) = left-projection onto M
inline AlternatingTrace alternate_run(const LegendreGenerator& gen, const RightProjector& right, const ConstraintSet& m,
                                      const Vec& theta0, const AlternatingConfig& cfg = {}) {
    require_interior(gen, theta0, "alternate_run");
    if (!m.contains(theta0)) throw InfeasibleError("alternate_run: start point not in the model set");
    AlternatingTrace tr;
    Vec th = theta0;
    double prev_value = kInf;
    double step = 0.0, res = 0.0;
    for (int k = 0; k <= cfg.max_iter; ++k) {
        AlternatingRecord r;
        r.k = static_cast<std::size_t>(k);
        r.theta = th;
        r.step_norm = step;
        r.residual = res;
        if (!tr.rows.empty()) r.div_current = bregman_div(gen, th, tr.rows.back().vartheta);
        try {
            r.vartheta = right(th);
        } catch (const Error& e) {
            throw Error(std::string("alternate_run: right projection failed at iteration ") + std::to_string(k) + ": " + e.what());
        }
        r.div_next = bregman_div(gen, th, r.vartheta);
        const double slack = 1e-12 * std::max(1.0, std::abs(prev_value));
        if (std::isfinite(r.div_current) && r.div_current > prev_value + slack) tr.monotone = false;
        if (r.div_next > (std::isfinite(r.div_current) ? r.div_current : kInf) + slack) tr.monotone = false;
        prev_value = r.div_next;
        tr.rows.push_back(r);
        if (k > 0 && step <= cfg.step_tol) break;
        if (k == cfg.max_iter) break;

        ProjectionOptions io = cfg.inner;
        io.start = th;
        InnerResult lp;
        try {
            lp = left_projection(gen, m, r.vartheta, io);
        } catch (const Error& e) {
            throw Error(std::string("alternate_run: left projection failed at iteration ") + std::to_string(k) + ": " + e.what());
        }
        step = distance(lp.x, th);
        res = lp.residual;
        th = lp.x;
    }
    const auto& last = tr.rows.back();
    tr.gap = last.div_next;
    const bool settled = tr.rows.size() > 1 && last.step_norm <= cfg.step_tol;
    if (!settled) tr.outcome = AlternatingOutcome::not_converged;
    else if (tr.gap <= cfg.common_tol) tr.outcome = AlternatingOutcome::common_point;
    else tr.outcome = AlternatingOutcome::gap_pair;
    return tr;
}

inline AlternatingTrace alternate_run(const ExpFamily& fam, const DataSetSpec& d, const ConstraintSet& m, const Vec& theta0,
                                      const AlternatingConfig& cfg = {}) {
    return alternate_run(fam, right_projector(fam, d), m, theta0, cfg);
}

struct GapPair {
    Vec theta;     // b' in M
    Vec vartheta;  // a' = right projection of b'
    double gap = kNaN;
    double residual = kInf;  // ||left(right(theta)) - theta|| + tangential stationarity
    int iterations = 0;
    bool converged = false;
};

// Newton on G(theta) = left(right(theta)) - theta, restricted to M.
inline GapPair refine_gap_pair(const LegendreGenerator& gen, const RightProjector& right, const ConstraintSet& m,
                               const Vec& guess, double tol = 1e-10, int max_iter = 50) {
    auto compose = [&](const Vec& th) {
        ProjectionOptions io;
        io.start = th;
        return left_projection(gen, m, right(th), io);
    };
    auto residual_at = [&](const Vec& th, Vec* g_out, Vec* va_out) {
        const Vec va = right(th);
        ProjectionOptions io;
        io.start = th;
        const InnerResult lp = left_projection(gen, m, va, io);
        const Vec g = lp.x - th;
        const SmoothObjective lo = left_objective(gen, va);
        const double stat = norm(tangential(m, th, lo.gradient(th)));
        if (g_out) *g_out = g;
        if (va_out) *va_out = va;
        return norm(g) + stat;
    };

    GapPair gp;
    Vec th = m.to_set(guess);
    Vec g;
    double r = residual_at(th, &g, nullptr);
    for (int it = 0; it < max_iter && r > tol; ++it) {
        auto [j, _] = fd_jacobian([&](const Vec& x) { return compose(m.to_set(x)).x - m.to_set(x); }, th, 1e-7);
        // least-squares Newton step on the tangent space
        const Matrix t = m.tangent_basis(th);
        const Matrix jt = j * t;
        const Vec dz = damped_solve(jt.transpose() * jt, (-1.0) * (jt.transpose() * g));
        double step = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40; ++h, step *= 0.5) {
            const Vec cand = m.to_set(axpy(step, t * dz, th));
            Vec gc;
            const double rc = residual_at(cand, &gc, nullptr);
            if (rc < r) {
                th = cand;
                g = gc;
                r = rc;
                accepted = true;
                break;
            }
        }
        gp.iterations = it + 1;
        if (!accepted) break;
    }
    Vec va;
    gp.residual = residual_at(th, nullptr, &va);
    gp.theta = th;
    gp.vartheta = va;
    gp.gap = bregman_div(gen, th, va);
    gp.converged = gp.residual <= std::max(tol, 1e-8);
    return gp;
}

}  // namespace emlab
