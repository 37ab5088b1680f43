#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>

#include "emlab/proximal.hpp"

namespace emlab {

// Incomplete-data problem: complete-data family, observed datum y, closed-form oracles.
struct IncompleteModel {
    std::string name;
    ExpFamily fam;
    Vec y;
    std::function<Vec(const Vec&)> cond_expect;        // E_theta[T | y]
    std::function<double(const Vec&)> neg_log_q;       // -log q(y, theta)
    std::function<Vec(const Vec&)> neg_log_q_grad;     // optional, finite differences otherwise
    std::function<double(const Vec&)> psi_y;           // optional conditional log-normalizer
    std::function<Vec(const Vec&)> grad_psi_y;
    std::function<SymMatrix(const Vec&)> hess_psi_y;
    ConstraintSet M;

    // data-set description in mean coordinates: eta_i = value_i for i in observed
    std::vector<std::size_t> observed;
    Vec observed_value;
    // optional override of the hidden statistic used by the Amari comparison
    std::function<Vec(const Vec&)> hidden_cond;
    std::function<Vec(const Vec&)> hidden_marginal;

    bool has_psi_y() const { return static_cast<bool>(psi_y); }

    Vec nlq_gradient(const Vec& th) const {
        if (neg_log_q_grad) return neg_log_q_grad(th);
        return fd_gradient(neg_log_q, th).value;
    }

    SmoothObjective nlq_objective() const {
        SmoothObjective o;
        const IncompleteModel self = *this;
        o.value = [self](const Vec& th) { return self.fam.inside(th) ? self.neg_log_q(th) : kInf; };
        o.gradient = [self](const Vec& th) { return self.fam.inside(th) ? self.nlq_gradient(th) : Vec(th.size(), kNaN); };
        return o;
    }

    std::vector<std::size_t> hidden() const {
        std::vector<std::size_t> h;
        for (std::size_t i = 0; i < fam.dim; ++i)
            if (std::find(observed.begin(), observed.end(), i) == observed.end()) h.push_back(i);
        return h;
    }
};

// ---- built-in models ----------------------------------------------------------

// x = (x1, x2) iid N(mu, s2), y = (x1 + x2)/2 observed; T = (mean, mean of squares)
inline IncompleteModel gaussian2_missing(double y, std::optional<ConstraintSet> m = std::nullopt) {
    IncompleteModel md;
    md.name = "gaussian2-missing";
    md.fam = gaussian_family(2);
    md.y = {y};
    md.cond_expect = [y](const Vec& t) { return Vec{y, y * y - 0.5 / t[1]}; };
    md.psi_y = [y](const Vec& t) { return y * t[0] + y * y * t[1] - 0.5 * std::log(-t[1]); };
    md.grad_psi_y = [y](const Vec& t) { return Vec{y, y * y - 0.5 / t[1]}; };
    md.hess_psi_y = [](const Vec& t) { return SymMatrix{{0.0, 0.0}, {0.0, 0.5 / (t[1] * t[1])}}; };
    const ExpFamily fam = md.fam;
    const double c = 0.5 * std::log(std::numbers::pi);
    md.neg_log_q = [fam, y, c](const Vec& t) {
        return fam.psi(t) - (y * t[0] + y * y * t[1] - 0.5 * std::log(-t[1])) + c;
    };
    md.neg_log_q_grad = [fam, y](const Vec& t) { return fam.grad(t) - Vec{y, y * y - 0.5 / t[1]}; };
    md.M = m ? *m : ConstraintSet::whole_space(2);
    md.observed = {0};
    md.observed_value = {y};
    return md;
}

// Same geometry, but the hidden statistic compared by the Amari condition is the
// sample variance (x1 - x2)^2 / 2, which is independent of the sample mean.
inline IncompleteModel gaussian2_variance_statistic(double y, std::optional<ConstraintSet> m = std::nullopt) {
    IncompleteModel md = gaussian2_missing(y, std::move(m));
    md.name = "gaussian2-missing/sample-variance";
    auto var = [](const Vec& t) { return Vec{-1.0 / t[1]}; };
    md.hidden_cond = var;
    md.hidden_marginal = var;
    return md;
}

// x = (y, z) ~ N(cov theta, cov) (location family, T = x), z missing
inline IncompleteModel gaussian_missing_component(const SymMatrix& cov, double y, std::optional<ConstraintSet> m = std::nullopt) {
    if (cov.dim() != 2) throw ModelError("missing-component model needs a 2x2 covariance");
    IncompleteModel md;
    md.name = "gaussian-missing-component";
    md.fam = gaussian_location_family(cov);
    md.y = {y};
    const double syy = cov(0, 0), syz = cov(0, 1), szz = cov(1, 1);
    const double rho = syz / syy, s2 = szz - syz * syz / syy;
    md.cond_expect = [=](const Vec& t) {
        const Vec mu = cov * t;
        return Vec{y, mu[1] + rho * (y - mu[0])};
    };
    md.psi_y = [=](const Vec& t) { return t[0] * y + rho * y * t[1] + 0.5 * s2 * t[1] * t[1]; };
    md.grad_psi_y = [=](const Vec& t) { return Vec{y, rho * y + s2 * t[1]}; };
    md.hess_psi_y = [=](const Vec&) { return SymMatrix{{0.0, 0.0}, {0.0, s2}}; };
    md.neg_log_q = [=](const Vec& t) {
        const double my = syy * t[0] + syz * t[1];
        return (y - my) * (y - my) / (2.0 * syy) + 0.5 * std::log(2.0 * std::numbers::pi * syy);
    };
    md.neg_log_q_grad = [=](const Vec& t) {
        const double my = syy * t[0] + syz * t[1];
        const double r = -(y - my) / syy;
        return Vec{r * syy, r * syz};
    };
    md.M = m ? *m : ConstraintSet::whole_space(2);
    md.observed = {0};
    md.observed_value = {y};
    return md;
}

// duplicated statistic: x1, x2 iid N(s, 1) with s = theta1 + theta2, y = x1 observed
inline IncompleteModel duplicated_model(double y, std::optional<ConstraintSet> m = std::nullopt) {
    IncompleteModel md;
    md.name = "duplicated";
    md.fam = duplicated_family();
    md.y = {y};
    md.cond_expect = [y](const Vec& t) {
        const double s = t[0] + t[1];
        return Vec{y + s, y + s};
    };
    md.psi_y = [y](const Vec& t) {
        const double s = t[0] + t[1];
        return s * y + 0.5 * s * s;
    };
    md.grad_psi_y = [y](const Vec& t) {
        const double s = t[0] + t[1];
        return Vec{y + s, y + s};
    };
    md.hess_psi_y = [](const Vec&) { return SymMatrix{{1.0, 1.0}, {1.0, 1.0}}; };
    md.neg_log_q = [y](const Vec& t) {
        const double s = t[0] + t[1];
        return 0.5 * (y - s) * (y - s) + 0.5 * std::log(2.0 * std::numbers::pi);
    };
    md.neg_log_q_grad = [y](const Vec& t) {
        const double r = -(y - (t[0] + t[1]));
        return Vec{r, r};
    };
    md.M = m ? *m : ConstraintSet::whole_space(2);
    return md;
}

// fully observed data: T(x) = t_obs, no missing information
inline IncompleteModel complete_data_model(const ExpFamily& fam, const Vec& t_obs, std::optional<ConstraintSet> m = std::nullopt) {
    IncompleteModel md;
    md.name = "complete-data";
    md.fam = fam;
    md.y = t_obs;
    const std::size_t n = fam.dim;
    md.cond_expect = [t_obs](const Vec&) { return t_obs; };
    md.psi_y = [](const Vec&) { return 0.0; };
    md.grad_psi_y = [n](const Vec&) { return Vec(n, 0.0); };
    md.hess_psi_y = [n](const Vec&) { return SymMatrix(n); };
    md.neg_log_q = [fam, t_obs](const Vec& t) { return fam.psi(t) - dot(t, t_obs); };
    md.neg_log_q_grad = [fam, t_obs](const Vec& t) { return fam.grad(t) - t_obs; };
    md.M = m ? *m : ConstraintSet::whole_space(n);
    for (std::size_t i = 0; i < n; ++i) md.observed.push_back(i);
    md.observed_value = t_obs;
    return md;
}

// ---- E and M steps --------------------------------------------------------------

inline Vec e_step(const IncompleteModel& md, const Vec& theta) {
    require_interior(md.fam, theta, "e_step");
    Vec t = md.cond_expect(theta);
    if (t.size() != md.fam.dim || !all_finite(t)) throw NumericError("e_step: conditional expectation oracle failed");
    return t;
}

// theta -> psi(theta) - theta . t  (the negative expected complete log-likelihood, up to constants)
inline SmoothObjective m_objective(const ExpFamily& fam, const Vec& t) {
    SmoothObjective o;
    o.value = [fam, t](const Vec& th) { return fam.inside(th) ? fam.psi(th) - dot(th, t) : kInf; };
    o.gradient = [fam, t](const Vec& th) { return fam.inside(th) ? fam.grad(th) - t : Vec(th.size(), kNaN); };
    o.hessian = [fam](const Vec& th) { return fam.hess(th); };
    return o;
}

inline InnerResult m_step_detail(const IncompleteModel& md, const Vec& t, const Vec& start, const InnerOptions& opt = {}) {
    if (!all_finite(t)) throw NumericError("m_step: completed statistic not finite");
    if (md.M.kind == ConstraintKind::whole && md.fam.grad_conjugate) {
        InnerResult r;
        r.x = dual_param(md.fam, t);
        r.value = md.fam.psi(r.x) - dot(r.x, t);
        r.tangential_gradient = md.fam.grad(r.x) - t;
        r.residual = norm(r.tangential_gradient);
        r.converged = true;
        return r;
    }
    return minimize_over(m_objective(md.fam, t), md.M, start, opt);
}

inline Vec m_step(const IncompleteModel& md, const Vec& t, const InnerOptions& opt = {}) {
    const Vec start = opt.start ? *opt.start : (md.fam.anchor.empty() ? Vec(md.fam.dim, 0.0) : md.fam.anchor);
    return m_step_detail(md, t, start, opt).x;
}

// ---- information and the accurate/spare split -------------------------------------

inline SymMatrix conditional_fisher(const IncompleteModel& md, const Vec& theta) {
    require_interior(md.fam, theta, "conditional_fisher");
    SymMatrix h;
    if (md.hess_psi_y) {
        h = md.hess_psi_y(theta);
    } else if (md.psi_y) {
        h = fd_hessian(md.psi_y, theta).value;
    } else {
        throw ModelError("conditional_fisher: model provides no conditional log-normalizer");
    }
    const SymEig e = sym_eig(h);
    if (e.values.back() < -1e-8 * std::max(1.0, e.values.front()))
        throw ModelError("conditional_fisher: conditional information is not positive semidefinite");
    return h;
}

struct SplitCoordinates {
    Matrix Q;           // rows: accurate directions first, then spare
    std::size_t m = 0;  // accurate dimension
    Matrix P;           // projector onto the accurate subspace V

    std::size_t n() const { return Q.rows(); }
    Vec accurate(const Vec& th) const {
        const Vec c = Q * th;
        return Vec(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(m));
    }
    Vec spare(const Vec& th) const {
        const Vec c = Q * th;
        return Vec(c.begin() + static_cast<std::ptrdiff_t>(m), c.end());
    }
    Vec compose(const Vec& acc, const Vec& sp) const {
        Vec c(acc);
        c.insert(c.end(), sp.begin(), sp.end());
        return Q.transpose() * c;
    }
    Matrix spare_projector() const {
        Matrix r = Matrix::identity(n());
        for (std::size_t i = 0; i < n(); ++i)
            for (std::size_t j = 0; j < n(); ++j) r(i, j) -= P(i, j);
        return r;
    }
    Matrix accurate_rows() const {
        Matrix r(m, n());
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n(); ++j) r(i, j) = Q(i, j);
        return r;
    }
};

inline SplitCoordinates identity_split(std::size_t n) { return {Matrix::identity(n), n, Matrix::identity(n)}; }

inline SplitCoordinates split_parameters(const IncompleteModel& md, const Vec& theta, double rel_tol = 1e-8) {
    const SymEig e = sym_eig(conditional_fisher(md, theta));
    const std::size_t m = rank_with_tol(e.values, rel_tol);
    const SplitBasis b = projection_from_eigvecs(e, m);
    return {b.Q, m, b.P};
}

// Psi(theta+, theta) = K_y(theta || theta+) = D_{psi_y}(theta+, theta)
inline RegularizerSpec kl_em_regularizer(const IncompleteModel& md, const Vec& theta_ref) {
    if (!md.has_psi_y() || !md.grad_psi_y) throw ModelError("kl_em_regularizer: model provides no conditional log-normalizer");
    RegularizerSpec r;
    r.kind = "kl-conditional";
    r.P = split_parameters(md, theta_ref).P;
    const IncompleteModel self = md;
    r.value = [self](const Vec& a, const Vec& b) {
        if (!self.fam.inside(a) || !self.fam.inside(b)) return kInf;
        return self.psi_y(a) - self.psi_y(b) - dot(self.grad_psi_y(b), a - b);
    };
    r.grad1 = [self](const Vec& a, const Vec& b) {
        if (!self.fam.inside(a)) return Vec(a.size(), kNaN);
        return self.grad_psi_y(a) - self.grad_psi_y(b);
    };
    if (md.hess_psi_y) r.hess1 = [self](const Vec& a, const Vec&) { return self.hess_psi_y(a); };
    return r;
}

// minimize psi(theta) - theta.t_k + ||theta'' - theta''_k||^2 / lambda over M
inline InnerResult regularized_em_step_detail(const IncompleteModel& md, const Vec& theta_k, double lambda,
                                              const SplitCoordinates& split, const InnerOptions& opt = {}) {
    const Vec t = e_step(md, theta_k);
    if (!(lambda > 0.0)) throw ConfigError("regularized_em_step: lambda must be positive");
    if (!std::isfinite(lambda) || split.m == split.n()) return m_step_detail(md, t, theta_k, opt);
    const Matrix s = split.spare_projector();
    const double w = 1.0 / lambda;
    SmoothObjective base = m_objective(md.fam, t);
    SmoothObjective o;
    o.value = [=](const Vec& th) {
        const double v = base.value(th);
        if (!std::isfinite(v)) return kInf;
        const Vec d = s * (th - theta_k);
        return v + w * dot(d, d);
    };
    o.gradient = [=](const Vec& th) { return axpy(2.0 * w, s * (th - theta_k), base.gradient(th)); };
    o.hessian = [=](const Vec& th) { return SymMatrix(base.hessian(th) + (2.0 * w) * s); };
    return minimize_over(o, md.M, theta_k, opt);
}

inline Vec regularized_em_step(const IncompleteModel& md, const Vec& theta_k, double lambda,
                               const SplitCoordinates& split, const InnerOptions& opt = {}) {
    return regularized_em_step_detail(md, theta_k, lambda, split, opt).x;
}

// ---- EM runs ----------------------------------------------------------------------

struct EMRecord : IterateRecord {
    Vec t;                     // completed statistic used to produce x
    double accurate_step = 0;  // ||P (theta_k - theta_{k-1})||
    double spare_step = 0;     // ||(I - P)(theta_k - theta_{k-1})||
    double neg_log_q = kNaN;
};

struct EMTrace : BasicTrace<EMRecord> {
    SplitCoordinates split;
};

struct EMConfig {
    int max_iter = 500;
    double step_tol = 1e-12;   // on the full step norm; 0 disables
    double split_rel_tol = 1e-8;
    bool recompute_split = false;
    double boundary_threshold = 1e-6;
    double escape_radius = 1e8;
    double monotone_tol = 1e-12;  // relative to max(1, |-log q|)
    std::optional<double> spare_penalty;  // lambda of the regularized variant
    InnerOptions inner;
};

inline EMTrace em_run(const IncompleteModel& md, const Vec& theta0, const EMConfig& cfg = {}) {
    require_interior(md.fam, theta0, "em_run");
    if (!md.M.contains(theta0)) throw InfeasibleError("em_run: start point not in the model set");
    EMTrace tr;
    tr.split = md.has_psi_y() ? split_parameters(md, theta0, cfg.split_rel_tol) : identity_split(md.fam.dim);
    tr.P = tr.split.P;
    tr.stop = StopReason::max_iter;
    const SmoothObjective nlq = md.nlq_objective();

    EMRecord r0;
    r0.x = theta0;
    r0.f = r0.neg_log_q = md.neg_log_q(theta0);
    r0.lambda = 1.0;
    r0.domain_margin = md.fam.domain_margin(theta0);
    r0.grad_norm = norm(tangential(md.M, theta0, nlq.gradient(theta0)));
    tr.rows.push_back(r0);

    Vec th = theta0;
    for (int k = 1; k <= cfg.max_iter; ++k) {
        if (cfg.recompute_split && md.has_psi_y()) {
            tr.split = split_parameters(md, th, cfg.split_rel_tol);
            tr.P = tr.split.P;
        }
        EMRecord r;
        r.k = static_cast<std::size_t>(k);
        InnerResult step;
        try {
            r.t = e_step(md, th);
            step = cfg.spare_penalty ? regularized_em_step_detail(md, th, *cfg.spare_penalty, tr.split, cfg.inner)
                                     : m_step_detail(md, r.t, th, cfg.inner);
        } catch (const DualDomainError& e) {
            tr.stop = StopReason::dual_domain;
            tr.boundary_flag = true;
            tr.notes.push_back(e.what());
            break;
        }
        const Vec& tn = step.x;
        const Vec d = tn - th;
        r.x = tn;
        r.f = r.neg_log_q = md.neg_log_q(tn);
        r.step_norm = norm(d);
        r.accurate_step = r.proj_step_norm = norm(tr.split.P * d);
        r.spare_step = norm(tr.split.spare_projector() * d);
        r.lambda = 1.0;
        r.domain_margin = md.fam.domain_margin(tn);
        r.residual = step.residual;
        r.grad_norm = norm(tangential(md.M, tn, nlq.gradient(tn), step.u));
        if (md.has_psi_y() && md.grad_psi_y) {
            r.psi_reg = md.psi_y(tn) - md.psi_y(th) - dot(md.grad_psi_y(th), d);
            r.reg_grad_norm = norm(tangential(md.M, tn, md.grad_psi_y(tn) - md.grad_psi_y(th), step.u));
        } else {
            r.psi_reg = kNaN;
        }
        const double prev = tr.rows.back().neg_log_q;
        const double inc = r.neg_log_q - prev;
        tr.max_increase = std::max(tr.max_increase, inc);
        if (inc > cfg.monotone_tol * std::max(1.0, std::abs(prev))) tr.descent_ok = false;
        tr.rows.push_back(r);
        th = tn;

        if (r.domain_margin <= cfg.boundary_threshold) {
            tr.stop = StopReason::boundary;
            tr.boundary_flag = true;
            break;
        }
        if (norm(th) > cfg.escape_radius) {
            tr.stop = StopReason::escaping;
            break;
        }
        if (cfg.step_tol > 0.0 && r.step_norm <= cfg.step_tol) {
            tr.stop = StopReason::step_tol;
            break;
        }
    }
    return tr;
}

// ---- split program (P_infinity) -----------------------------------------------------

struct SplitProgramResult {
    Vec theta;            // full parameter at the solution
    Vec spare;            // theta''
    double value = kNaN;  // -log q at the solution
    double hessian_min_eig = kInf;  // smallest eigenvalue of the reduced Hessian of -log q
    bool strictly_convex = true;
    std::size_t section_dim = 0;
};

inline SplitProgramResult split_program_solve(const IncompleteModel& md, const Vec& accurate_fixed,
                                              const SplitCoordinates& split, const InnerOptions& opt = {}) {
    if (accurate_fixed.size() != split.m) throw NumericError("split_program_solve: accurate coordinate size mismatch");
    const SmoothObjective nlq = md.nlq_objective();
    const std::size_t n = md.fam.dim;
    const Matrix acc_rows = split.accurate_rows();

    auto seed = [&]() {
        Vec base = opt.start ? *opt.start : md.fam.anchor;
        return split.compose(accurate_fixed, split.spare(base));
    };

    // section of an affine (or whole) set: stack Q' theta = theta' with A theta = b
    auto affine_section = [&](const ConstraintSet& c) {
        const std::size_t rows = split.m + (c.kind == ConstraintKind::affine ? c.A.rows() : 0);
        Matrix a(rows, n);
        Vec b(rows);
        for (std::size_t i = 0; i < split.m; ++i) {
            for (std::size_t j = 0; j < n; ++j) a(i, j) = acc_rows(i, j);
            b[i] = accurate_fixed[i];
        }
        if (c.kind == ConstraintKind::affine)
            for (std::size_t i = 0; i < c.A.rows(); ++i) {
                for (std::size_t j = 0; j < n; ++j) a(split.m + i, j) = c.A(i, j);
                b[split.m + i] = c.b[i];
            }
        // drop dependent rows
        const SymEig e = sym_eig(SymMatrix(a * a.transpose()));
        const std::size_t r = rank_with_tol(e.values, 1e-12);
        if (r < rows) {
            Matrix ar(r, n);
            Vec br(r);
            const Matrix rot = e.vectors.transpose();
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t k = 0; k < rows; ++k) {
                    for (std::size_t j = 0; j < n; ++j) ar(i, j) += rot(i, k) * a(k, j);
                    br[i] += rot(i, k) * b[k];
                }
            }
            // consistency of the dropped rows
            const Vec sol = least_norm_solution(ar, br);
            if (norm(a * sol - b) > 1e-8 * std::max(1.0, norm(b))) throw InfeasibleError("split program: empty section");
            return ConstraintSet::affine(ar, br);
        }
        return ConstraintSet::affine(a, b);
    };

    auto solve_on = [&](const ConstraintSet& c) -> std::pair<InnerResult, Matrix> {
        if (c.kind == ConstraintKind::whole || c.kind == ConstraintKind::affine) {
            const ConstraintSet sec = affine_section(c);
            Vec start = sec.to_set(seed());
            if (!md.fam.inside(start)) {
                // search along the section for an interior seed
                for (double s : {1.0, -1.0, 2.0, -2.0, 0.5, -0.5, 4.0, -4.0}) {
                    Vec cand = sec.to_set(axpy(s, Vec(n, 1.0), start));
                    if (md.fam.inside(cand)) {
                        start = cand;
                        break;
                    }
                }
            }
            if (!md.fam.inside(start)) throw InfeasibleError("split program: section misses the natural domain");
            return {minimize_over(nlq, sec, start, opt), sec.null_basis};
        }
        if (c.kind == ConstraintKind::curve) {
            if (split.m > 1) throw ModelError("split program: curve sections need an accurate dimension <= 1");
            if (split.m == 0) {
                InnerResult r = minimize_over(nlq, c, seed(), opt);
                return {r, c.tangent_basis(r.x, r.u)};
            }
            const Vec q = acc_rows.row(0);
            auto h = [&](double u) { return dot(q, c.curve(u)) - accurate_fixed[0]; };
            const std::size_t g = c.grid_points;
            const double du = (c.u_hi - c.u_lo) / static_cast<double>(g - 1);
            std::optional<InnerResult> best;
            double prev_u = c.u_lo, prev_h = h(c.u_lo);
            auto consider = [&](double u) {
                InnerResult r;
                r.u = u;
                r.x = c.curve(u);
                r.value = nlq.value(r.x);
                r.residual = 0.0;
                r.converged = true;
                r.tangential_gradient = Vec(n, 0.0);
                if (std::isfinite(r.value) && (!best || r.value < best->value)) best = r;
            };
            if (prev_h == 0.0) consider(prev_u);
            for (std::size_t i = 1; i < g; ++i) {
                const double u = i + 1 == g ? c.u_hi : c.u_lo + du * static_cast<double>(i);
                const double hu = h(u);
                if (hu == 0.0) consider(u);
                else if (std::isfinite(prev_h) && std::isfinite(hu) && (prev_h < 0) != (hu < 0) && prev_h != 0.0)
                    consider(bracketed_root(h, prev_u, u, prev_h, hu));
                prev_u = u;
                prev_h = hu;
            }
            if (!best) throw InfeasibleError("split program: empty section of the curve");
            return {*best, Matrix(n, 0)};
        }
        throw ModelError(std::string("split program: unsupported constraint kind ") + to_string(c.kind));
    };

    std::pair<InnerResult, Matrix> sol;
    if (md.M.kind == ConstraintKind::union_of) {
        bool found = false;
        for (const auto& br : md.M.branches) {
            try {
                auto s = solve_on(br);
                if (!found || s.first.value < sol.first.value) {
                    sol = std::move(s);
                    found = true;
                }
            } catch (const InfeasibleError&) {
            }
        }
        if (!found) throw InfeasibleError("split program: empty section");
    } else {
        sol = solve_on(md.M);
    }

    SplitProgramResult res;
    res.theta = sol.first.x;
    res.spare = split.spare(res.theta);
    res.value = sol.first.value;
    res.section_dim = sol.second.cols();
    if (res.section_dim > 0) {
        const SymMatrix h = fd_hessian(md.neg_log_q, res.theta).value;
        const Matrix nb = sol.second;
        const SymEig e = sym_eig(SymMatrix(nb.transpose() * (h * nb), 1e-6));
        res.hessian_min_eig = e.values.back();
        res.strictly_convex = res.hessian_min_eig > 1e-8 * std::max(1.0, e.values.front());
    }
    return res;
}

// ---- boundary monitoring ------------------------------------------------------------

struct BoundaryReport {
    std::vector<double> margins;
    double tail_min = kInf;
    bool approaching = false;  // false: interior-safe
};

template <class Record>
BoundaryReport boundary_monitor(const BasicTrace<Record>& tr, double threshold = 1e-6, double tail_fraction = 0.1) {
    BoundaryReport rep;
    for (const auto& r : tr.rows) rep.margins.push_back(r.domain_margin);
    if (rep.margins.empty()) return rep;
    const std::size_t n = rep.margins.size();
    const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n))));
    for (std::size_t i = n - tail; i < n; ++i) rep.tail_min = std::min(rep.tail_min, rep.margins[i]);
    rep.approaching = rep.tail_min <= threshold;
    return rep;
}

template <class Record>
BoundaryReport boundary_monitor(const IncompleteModel&, const BasicTrace<Record>& tr, double threshold = 1e-6) {
    return boundary_monitor(tr, threshold);
}

}  // namespace emlab
