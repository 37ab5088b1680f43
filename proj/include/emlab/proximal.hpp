#pragma once

#include <functional>
#include <string>

#include "emlab/bregman.hpp"
#include "emlab/trace.hpp"

namespace emlab {

// Psi(x+, x) with first-argument gradient; P restricts its effect to a subspace.
struct RegularizerSpec {
    std::string kind = "custom";  // quadratic | bregman | kl-conditional | custom
    std::function<double(const Vec&, const Vec&)> value;
    std::function<Vec(const Vec&, const Vec&)> grad1;
    std::function<SymMatrix(const Vec&, const Vec&)> hess1;  // optional
    Matrix P;
};

// Psi = ||P (x+ - x)||^2 / 2
inline RegularizerSpec quadratic_regularizer(const Matrix& p) {
    RegularizerSpec r;
    r.kind = "quadratic";
    r.P = p;
    r.value = [p](const Vec& a, const Vec& b) {
        const Vec d = p * (a - b);
        return 0.5 * dot(d, d);
    };
    r.grad1 = [p](const Vec& a, const Vec& b) { return p * (a - b); };  // P symmetric idempotent
    r.hess1 = [p](const Vec&, const Vec&) { return SymMatrix(p); };
    return r;
}

inline RegularizerSpec quadratic_regularizer(std::size_t n) { return quadratic_regularizer(Matrix::identity(n)); }

// Psi = D_psi(x+, x)
inline RegularizerSpec bregman_regularizer(const LegendreGenerator& gen, Matrix p = {}) {
    RegularizerSpec r;
    r.kind = "bregman";
    r.P = p.empty() ? Matrix::identity(gen.dim) : std::move(p);
    r.value = [gen](const Vec& a, const Vec& b) { return bregman_div(gen, a, b); };
    r.grad1 = [gen](const Vec& a, const Vec& b) {
        if (!gen.inside(a)) return Vec(a.size(), kNaN);
        return gen.grad(a) - gen.grad(b);
    };
    r.hess1 = [gen](const Vec& a, const Vec&) { return gen.hess(a); };
    return r;
}

enum class InexactMode { exact, a, b, c };

struct ProxConfig {
    double lambda = 1.0;        // constant step when no schedule is given
    Vec lambda_schedule;        // lambda_0, lambda_1, ...; last value repeats
    double ratio_cap = kInf;    // r: lambda_k / lambda_{k-1} <= r
    double value_cap = kInf;    // R: lambda_k <= R
    double floor = 0.0;         // eta: lambda_k >= eta
    int max_iter = 1000;
    double step_tol = 1e-10;    // on ||P (x_k - x_{k-1})||; 0 disables
    InexactMode inexact = InexactMode::exact;
    double budget = kInf;       // mode a
    double m_prime = 1e3;       // mode b
    double m_second = 1e3;      // mode c
    double descent_tol = 1e-12; // relative to max(1, |f(x_k)|)
    double boundary_threshold = 1e-6;
    double escape_radius = kInf;
    std::function<double(const Vec&)> domain_margin;  // optional margin for the trace
    InnerOptions inner;

    double lambda_at(std::size_t k) const {
        if (lambda_schedule.empty()) return lambda;
        return lambda_schedule[std::min(k, lambda_schedule.size() - 1)];
    }

    void validate(std::size_t steps) const {
        for (std::size_t k = 0; k < steps; ++k) {
            const double l = lambda_at(k);
            if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("prox: lambda must be positive and finite");
            if (l < floor) throw ConfigError("prox: lambda below floor");
            if (l > value_cap) throw ConfigError("prox: lambda above value cap R");
            if (k > 0 && l / lambda_at(k - 1) > ratio_cap) throw ConfigError("prox: lambda ratio above cap r");
            if (k >= lambda_schedule.size()) break;  // constant tail
        }
    }
};

struct ProxStepResult {
    Vec x_plus;
    Vec e;                 // tangential residual of f + Psi(., x)/lambda at x_plus
    Vec g;                 // tangential gradient of f at x_plus
    double f_plus = kNaN;
    double psi_reg = 0.0;
    bool descent_ok = true;
    InnerResult inner;
};

inline ProxStepResult prox_step(const SmoothObjective& f, const ConstraintSet& m, const RegularizerSpec& reg,
                                double lambda, const Vec& x, const InnerOptions& opts = {},
                                double descent_tol = 1e-12) {
    if (!(lambda > 0.0)) throw ConfigError("prox_step: lambda must be positive");
    const double fx = f.value(x);
    if (!std::isfinite(fx)) throw DomainError("prox_step: objective not finite at the current point", kNaN);
    const double inv = 1.0 / lambda;
    SmoothObjective obj;
    obj.value = [&](const Vec& z) {
        const double fz = f.value(z);
        if (!std::isfinite(fz)) return kInf;
        const double pz = reg.value(z, x);
        return std::isfinite(pz) ? fz + inv * pz : kInf;
    };
    obj.gradient = [&](const Vec& z) { return axpy(inv, reg.grad1(z, x), f.gradient(z)); };
    if (f.hessian && reg.hess1)
        obj.hessian = [&](const Vec& z) { return SymMatrix(f.hessian(z) + inv * reg.hess1(z, x)); };

    InnerOptions io = opts;
    for (int attempt = 0; attempt < 3; ++attempt) {
        ProxStepResult r;
        r.inner = minimize_over(obj, m, x, io);
        r.x_plus = r.inner.x;
        r.f_plus = f.value(r.x_plus);
        r.psi_reg = reg.value(r.x_plus, x);
        r.e = r.inner.tangential_gradient;
        r.g = tangential(m, r.x_plus, f.gradient(r.x_plus), r.inner.u);
        r.descent_ok = r.f_plus + inv * r.psi_reg <= fx + descent_tol * std::max(1.0, std::abs(fx));
        if (r.descent_ok) return r;
        io.grad_tol *= 1e-2;
        io.max_iter *= 4;
    }
    throw ConvergenceError("prox_step: descent inequality violated after restarts");
}

inline IterateTrace prox_run(const SmoothObjective& f, const ConstraintSet& m, const RegularizerSpec& reg,
                             const ProxConfig& cfg, const Vec& x0) {
    cfg.validate(static_cast<std::size_t>(std::max(cfg.max_iter, 1)));
    if (!m.contains(x0)) throw InfeasibleError("prox_run: start point not in the constraint set");
    const Matrix p = reg.P.empty() ? Matrix::identity(x0.size()) : reg.P;
    IterateTrace tr;
    tr.P = p;
    auto margin = [&](const Vec& x) { return cfg.domain_margin ? cfg.domain_margin(x) : kInf; };

    IterateRecord r0;
    r0.x = x0;
    r0.f = f.value(x0);
    r0.domain_margin = margin(x0);
    r0.grad_norm = norm(tangential(m, x0, f.gradient(x0)));
    tr.rows.push_back(r0);
    tr.stop = StopReason::max_iter;

    Vec x = x0;
    for (int k = 1; k <= cfg.max_iter; ++k) {
        const double lam = cfg.lambda_at(static_cast<std::size_t>(k - 1));
        const ProxStepResult s = prox_step(f, m, reg, lam, x, cfg.inner, cfg.descent_tol);
        IterateRecord r;
        r.k = static_cast<std::size_t>(k);
        r.x = s.x_plus;
        r.f = s.f_plus;
        r.psi_reg = s.psi_reg;
        const Vec d = s.x_plus - x;
        r.step_norm = norm(d);
        r.proj_step_norm = norm(p * d);
        r.residual = norm(s.e);
        r.lambda = lam;
        r.domain_margin = margin(s.x_plus);
        r.grad_norm = norm(s.g);
        r.reg_grad_norm = norm(tangential(m, s.x_plus, reg.grad1(s.x_plus, x), s.inner.u));
        const double inc = r.f - tr.rows.back().f;
        if (inc > cfg.descent_tol * std::max(1.0, std::abs(tr.rows.back().f))) tr.descent_ok = false;
        tr.max_increase = std::max(tr.max_increase, inc);
        tr.rows.push_back(r);
        x = s.x_plus;
        if (r.domain_margin <= cfg.boundary_threshold) {
            tr.stop = StopReason::boundary;
            tr.boundary_flag = true;
            break;
        }
        if (norm(x) > cfg.escape_radius) {
            tr.stop = StopReason::escaping;
            break;
        }
        if (cfg.step_tol > 0.0 && r.proj_step_norm <= cfg.step_tol) {
            tr.stop = StopReason::step_tol;
            break;
        }
    }
    return tr;
}

struct InexactnessReport {
    bool ok = true;
    double worst = 0.0;  // largest ratio lhs / rhs (mode b, c) or the budget sum (mode a)
    std::string detail;
};

inline InexactnessReport check_inexactness(const IterateTrace& tr, const ProxConfig& cfg) {
    InexactnessReport rep;
    constexpr double slack = 1e-12;
    double sum = 0.0;
    for (std::size_t i = 1; i < tr.rows.size(); ++i) {
        const auto& r = tr.rows[i];
        switch (cfg.inexact) {
            case InexactMode::exact: break;
            case InexactMode::a: sum += r.lambda * r.residual; break;
            case InexactMode::b: {
                const double lhs = r.lambda * r.residual, rhs = cfg.m_prime * r.reg_grad_norm;
                if (lhs > rhs + slack) rep.ok = false;
                rep.worst = std::max(rep.worst, lhs - rhs);
                break;
            }
            case InexactMode::c: {
                const double lhs = r.residual, rhs = cfg.m_second * r.grad_norm;
                if (lhs > rhs + slack) rep.ok = false;
                rep.worst = std::max(rep.worst, lhs - rhs);
                break;
            }
        }
    }
    if (cfg.inexact == InexactMode::a) {
        rep.worst = sum;
        rep.ok = sum <= cfg.budget;
    }
    rep.detail = rep.ok ? "ok" : "inexactness condition violated";
    return rep;
}

struct NormBounds {
    double m_est = kInf;
    double M_est = 0.0;
    bool pass = false;
    std::size_t pairs = 0;
    std::size_t skipped = 0;  // pairs outside the regularizer domain
};

inline NormBounds check_norm_bounds(const RegularizerSpec& reg, const std::vector<Vec>& points, double delta) {
    NormBounds nb;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (i == j) continue;
            const Vec& y = points[i];
            const Vec& z = points[j];
            if (distance(y, z) > delta) continue;
            const Vec pd = reg.P.empty() ? y - z : reg.P * (y - z);
            const double pn = norm(pd);
            if (pn <= 1e-12) continue;
            const double v = reg.value(y, z);
            const Vec g = reg.grad1(y, z);
            if (!std::isfinite(v) || !all_finite(g)) {
                ++nb.skipped;
                continue;
            }
            nb.m_est = std::min(nb.m_est, v / (pn * pn));
            nb.M_est = std::max(nb.M_est, norm(g) / pn);
            ++nb.pairs;
        }
    }
    nb.pass = nb.pairs > 0 && nb.m_est > 0.0 && std::isfinite(nb.M_est);
    return nb;
}

}  // namespace emlab
