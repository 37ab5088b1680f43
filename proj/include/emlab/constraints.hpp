#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "emlab/numerics.hpp"

namespace emlab {

enum class ConstraintKind { whole, affine, sublevel, curve, projection, union_of };

inline const char* to_string(ConstraintKind k) {
    switch (k) {
        case ConstraintKind::whole: return "whole";
        case ConstraintKind::affine: return "affine";
        case ConstraintKind::sublevel: return "sublevel";
        case ConstraintKind::curve: return "curve";
        case ConstraintKind::projection: return "projection";
        case ConstraintKind::union_of: return "union";
    }
    return "?";
}

// Model set M (or data set D) over which projections and M steps are solved.
struct ConstraintSet {
    ConstraintKind kind = ConstraintKind::whole;
    std::size_t dim = 0;

    // affine: {x : A x = b}, with cached null-space basis and particular point
    Matrix A;
    Vec b;
    Matrix null_basis;
    Vec particular;

    // sublevel: {x : g(x) <= 0 componentwise}
    std::function<Vec(const Vec&)> g;
    std::function<Matrix(const Vec&)> g_jac;  // optional

    // parametric curve: {curve(u) : u in [u_lo, u_hi]}
    std::function<Vec(double)> curve;
    std::function<Vec(double)> curve_d;  // optional derivative
    double u_lo = 0.0, u_hi = 1.0;
    std::size_t grid_points = 512;

    // explicit projection
    std::function<Vec(const Vec&)> project;

    // union of branches (each solved separately, best value wins)
    std::vector<ConstraintSet> branches;

    std::string label;

    static ConstraintSet whole_space(std::size_t n) {
        ConstraintSet c;
        c.kind = ConstraintKind::whole;
        c.dim = n;
        c.null_basis = Matrix::identity(n);
        c.particular = Vec(n, 0.0);
        c.label = "whole";
        return c;
    }

    static ConstraintSet affine(const Matrix& a, const Vec& b) {
        if (a.rows() != b.size()) throw NumericError("affine constraint: shape mismatch");
        if (!a.finite() || !all_finite(b)) throw NumericError("affine constraint: non-finite data");
        ConstraintSet c;
        c.kind = ConstraintKind::affine;
        c.dim = a.cols();
        c.A = a;
        c.b = b;
        c.null_basis = null_space(a);
        c.particular = least_norm_solution(a, b);
        c.label = "affine";
        return c;
    }

    static ConstraintSet sublevel(std::size_t n, std::function<Vec(const Vec&)> g,
                                  std::function<Matrix(const Vec&)> jac = nullptr) {
        ConstraintSet c;
        c.kind = ConstraintKind::sublevel;
        c.dim = n;
        c.g = std::move(g);
        c.g_jac = std::move(jac);
        c.label = "sublevel";
        return c;
    }

    static ConstraintSet parametric(std::size_t n, std::function<Vec(double)> th, double lo, double hi,
                                    std::function<Vec(double)> dth = nullptr, std::size_t grid = 512) {
        if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw NumericError("curve: bad u-range");
        if (grid < 3) throw NumericError("curve: grid too small");
        ConstraintSet c;
        c.kind = ConstraintKind::curve;
        c.dim = n;
        c.curve = std::move(th);
        c.curve_d = std::move(dth);
        c.u_lo = lo;
        c.u_hi = hi;
        c.grid_points = grid;
        c.label = "curve";
        return c;
    }

    static ConstraintSet explicit_projection(std::size_t n, std::function<Vec(const Vec&)> proj) {
        ConstraintSet c;
        c.kind = ConstraintKind::projection;
        c.dim = n;
        c.project = std::move(proj);
        c.label = "projection";
        return c;
    }

    static ConstraintSet union_of(std::vector<ConstraintSet> parts) {
        if (parts.empty()) throw NumericError("union: no branches");
        ConstraintSet c;
        c.kind = ConstraintKind::union_of;
        c.dim = parts.front().dim;
        for (const auto& p : parts)
            if (p.dim != c.dim) throw NumericError("union: dimension mismatch");
        c.branches = std::move(parts);
        c.label = "union";
        return c;
    }

    Vec tangent(double u) const {
        if (curve_d) return curve_d(u);
        const double h = 1e-6 * std::max(1.0, std::abs(u));
        return (1.0 / (2.0 * h)) * (curve(u + h) - curve(u - h));
    }

    // closest curve parameter to x (grid + Brent refinement); ties -> smallest u
    double locate(const Vec& x) const {
        double best_u = u_lo, best = kInf;
        const std::size_t n = grid_points;
        const double du = (u_hi - u_lo) / static_cast<double>(n - 1);
        std::size_t bi = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = u_lo + du * static_cast<double>(i);
            const Vec c = curve(u);
            const double d = all_finite(c) ? distance(c, x) : kInf;
            if (d < best) {
                best = d;
                best_u = u;
                bi = i;
            }
        }
        const double a = u_lo + du * static_cast<double>(bi == 0 ? 0 : bi - 1);
        const double b = std::min(u_hi, u_lo + du * static_cast<double>(bi + 1));
        // stationarity of the squared distance: (curve(u) - x) . tangent(u) = 0
        auto h = [&](double s) { return dot(curve(s) - x, tangent(s)); };
        const double ha = h(a), hb = h(b);
        if (std::isfinite(ha) && std::isfinite(hb) && ha <= 0.0 && hb >= 0.0) {
            const double u = bracketed_root(h, a, b, ha, hb);
            const Vec c = curve(u);
            if (all_finite(c) && distance(c, x) <= best) return u;
        }
        auto [u, d] = minimize_1d([&](double s) {
            const Vec c = curve(s);
            return all_finite(c) ? distance(c, x) : kInf;
        }, a, b);
        return d < best ? u : best_u;
    }

    Vec project_sublevel(const Vec& x0) const {
        Vec x(x0);
        for (int it = 0; it < 200; ++it) {
            const Vec gv = g(x);
            std::size_t worst = 0;
            for (std::size_t i = 1; i < gv.size(); ++i)
                if (gv[i] > gv[worst]) worst = i;
            if (gv.empty() || gv[worst] <= 1e-14) return x;
            const Matrix jac = g_jac ? g_jac(x) : fd_jacobian(g, x).first;
            const Vec n = jac.row(worst);
            const double nn = dot(n, n);
            if (!(nn > 0.0)) throw NumericError("sublevel projection: vanishing constraint gradient");
            x = axpy(-gv[worst] / nn, n, x);
        }
        return x;
    }

    Vec to_set(const Vec& x) const {
        switch (kind) {
            case ConstraintKind::whole: return x;
            case ConstraintKind::affine: {
                const Vec d = x - particular;
                return particular + null_basis * (null_basis.transpose() * d);
            }
            case ConstraintKind::sublevel: return project_sublevel(x);
            case ConstraintKind::curve: return curve(locate(x));
            case ConstraintKind::projection: return project(x);
            case ConstraintKind::union_of: {
                Vec best;
                double bd = kInf;
                for (const auto& br : branches) {
                    Vec p = br.to_set(x);
                    const double d = distance(p, x);
                    if (d < bd) {
                        bd = d;
                        best = std::move(p);
                    }
                }
                return best;
            }
        }
        return x;
    }

    double residual(const Vec& x) const {
        if (x.size() != dim) throw NumericError("constraint residual: dimension mismatch");
        switch (kind) {
            case ConstraintKind::whole: return 0.0;
            case ConstraintKind::affine: return norm(A * x - b);
            case ConstraintKind::sublevel: {
                double m = 0.0;
                for (double v : g(x)) m = std::max(m, v);
                return m;
            }
            case ConstraintKind::curve:
            case ConstraintKind::projection: return distance(to_set(x), x);
            case ConstraintKind::union_of: {
                double m = kInf;
                for (const auto& br : branches) m = std::min(m, br.residual(x));
                return m;
            }
        }
        return kInf;
    }

    bool contains(const Vec& x, double tol = 1e-8) const { return residual(x) <= tol * std::max(1.0, norm(x)); }

    // orthonormal basis of the tangent space at a member point (columns)
    Matrix tangent_basis(const Vec& x, std::optional<double> u = std::nullopt) const {
        switch (kind) {
            case ConstraintKind::whole: return Matrix::identity(dim);
            case ConstraintKind::affine: return null_basis;
            case ConstraintKind::curve: {
                Vec t = tangent(u ? *u : locate(x));
                const double nt = norm(t);
                Matrix m(dim, 1);
                for (std::size_t i = 0; i < dim; ++i) m(i, 0) = t[i] / nt;
                return m;
            }
            case ConstraintKind::sublevel: {
                const Vec gv = g(x);
                const Matrix jac = g_jac ? g_jac(x) : fd_jacobian(g, x).first;
                std::vector<Vec> act;
                for (std::size_t i = 0; i < gv.size(); ++i)
                    if (gv[i] > -1e-9) act.push_back(jac.row(i));
                Matrix a(act.size(), dim);
                for (std::size_t i = 0; i < act.size(); ++i)
                    for (std::size_t j = 0; j < dim; ++j) a(i, j) = act[i][j];
                return null_space(a);
            }
            case ConstraintKind::projection: return Matrix::identity(dim);
            case ConstraintKind::union_of: {
                std::size_t bi = 0;
                double bd = kInf;
                for (std::size_t i = 0; i < branches.size(); ++i) {
                    const double r = branches[i].residual(x);
                    if (r < bd) {
                        bd = r;
                        bi = i;
                    }
                }
                return branches[bi].tangent_basis(x);
            }
        }
        return Matrix::identity(dim);
    }
};

// ---- constrained minimization of a smooth objective -------------------------

struct SmoothObjective {
    std::function<double(const Vec&)> value;   // +inf outside the domain
    std::function<Vec(const Vec&)> gradient;
    std::function<SymMatrix(const Vec&)> hessian;  // optional
};

enum class TieRule {
    first,     // smallest u / lowest branch index / solver start
    farthest,  // among equal-value minimizers, the one farthest from the start
};

struct InnerOptions {
    double grad_tol = 1e-12;    // stop when the reduced gradient is this small
    double accept_tol = 1e-7;   // converged flag threshold
    int max_iter = 200;
    TieRule tie = TieRule::first;
    std::optional<Vec> start;
};

struct InnerResult {
    Vec x;
    double value = kInf;
    double residual = kInf;  // norm of the tangential gradient (KKT residual)
    Vec tangential_gradient;
    bool converged = false;
    int iterations = 0;
    std::optional<double> u;   // curve parameter, if any
    std::size_t branch = 0;    // union branch index
};

namespace detail {

inline SymMatrix objective_hessian(const SmoothObjective& obj, const Vec& x) {
    if (obj.hessian) return obj.hessian(x);
    auto [j, _] = fd_jacobian(obj.gradient, x, 1e-6);
    return SymMatrix(0.5 * (j + j.transpose()));
}

inline bool ties(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

// Damped Newton over x = x0 + N z.
inline InnerResult minimize_reduced(const SmoothObjective& obj, Vec x, const Matrix& nb, const InnerOptions& opt) {
    InnerResult r;
    double fx = obj.value(x);
    if (!std::isfinite(fx)) throw InfeasibleError("inner solver: start outside the objective domain");
    const Matrix nt = nb.transpose();
    Vec gr = nt * obj.gradient(x);
    int it = 0;
    for (; it < opt.max_iter && nb.cols() > 0; ++it) {
        if (norm(gr) <= opt.grad_tol) break;
        const SymMatrix h = objective_hessian(obj, x);
        const Vec dz = damped_solve(nt * (h * nb), (-1.0) * gr);
        const Vec dx = nb * dz;
        if (norm(dx) <= 1e-16 * (1.0 + norm(x))) break;
        const double slope = dot(gr, dz);
        bool accepted = false;
        double step = 1.0;
        for (int hlv = 0; hlv < 60; ++hlv, step *= 0.5) {
            Vec xt = axpy(step, dx, x);
            const double ft = obj.value(xt);
            if (!std::isfinite(ft)) continue;
            const bool armijo = ft <= fx + 1e-4 * step * slope;
            bool flat = false;
            if (!armijo && ft <= fx + 1e-14 * std::max(1.0, std::abs(fx))) {
                const Vec gt = nt * obj.gradient(xt);
                flat = all_finite(gt) && norm(gt) < norm(gr);
            }
            if (armijo || flat) {
                x = std::move(xt);
                fx = ft;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        gr = nt * obj.gradient(x);
        if (!all_finite(gr)) throw NumericError("inner solver: non-finite gradient");
    }
    r.x = x;
    r.value = fx;
    r.tangential_gradient = nb * gr;
    r.residual = norm(gr);
    r.iterations = it;
    r.converged = r.residual <= opt.accept_tol;
    return r;
}

inline InnerResult minimize_curve(const SmoothObjective& obj, const ConstraintSet& c, const Vec& start, const InnerOptions& opt) {
    auto phi = [&](double u) {
        const Vec th = c.curve(u);
        if (!all_finite(th)) return kInf;
        const double v = obj.value(th);
        return std::isfinite(v) ? v : kInf;
    };
    auto dphi = [&](double u) {
        const Vec th = c.curve(u);
        const Vec gv = obj.gradient(th);
        return dot(gv, c.tangent(u));
    };

    const std::size_t n = c.grid_points;
    const double du = (c.u_hi - c.u_lo) / static_cast<double>(n - 1);
    auto ugrid = [&](std::size_t i) { return i + 1 == n ? c.u_hi : c.u_lo + du * static_cast<double>(i); };
    std::vector<double> vals(n);
    double vbest = kInf;
    for (std::size_t i = 0; i < n; ++i) {
        vals[i] = phi(ugrid(i));
        vbest = std::min(vbest, vals[i]);
    }
    if (!std::isfinite(vbest)) throw InfeasibleError("curve minimization: objective infinite along the whole curve");

    // candidate grid minima: the best one, plus (for the farthest rule) every tie
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < n; ++i)
        if (vals[i] == vbest || (opt.tie == TieRule::farthest && ties(vals[i], vbest))) cand.push_back(i);
    if (opt.tie == TieRule::first) cand.resize(1);

    struct Hit { double u, v; };
    std::vector<Hit> hits;
    for (std::size_t i : cand) {
        Hit best{ugrid(i), vals[i]};
        bool rooted = false;
        for (int side : {-1, 1}) {
            if ((side < 0 && i == 0) || (side > 0 && i + 1 == n)) continue;
            const std::size_t j = side < 0 ? i - 1 : i + 1;
            double l = ugrid(std::min(i, j)), rr = ugrid(std::max(i, j));
            if (!std::isfinite(vals[std::min(i, j)]) || !std::isfinite(vals[std::max(i, j)])) {
                // pull the infinite end toward the finite one
                double& bad = std::isfinite(vals[std::min(i, j)]) ? rr : l;
                const double good = std::isfinite(vals[std::min(i, j)]) ? l : rr;
                for (int k = 0; k < 60 && !std::isfinite(phi(bad)); ++k) bad = 0.5 * (bad + good);
                if (!std::isfinite(phi(bad))) continue;
            }
            const double dl = dphi(l), dr = dphi(rr);
            if (std::isfinite(dl) && std::isfinite(dr) && dl <= 0.0 && dr >= 0.0 && (dl < 0.0 || dr > 0.0)) {
                const double u = bracketed_root(dphi, l, rr, dl, dr);
                const double v = phi(u);
                if (v <= best.v + 1e-12 * std::max(1.0, std::abs(best.v))) {
                    if (!rooted || v < best.v) best = {u, v};
                    rooted = true;
                }
            }
        }
        if (!rooted) {
            const bool lo_end = i == 0 && dphi(c.u_lo) >= 0.0;
            const bool hi_end = i + 1 == n && dphi(c.u_hi) <= 0.0;
            if (!lo_end && !hi_end) {
                const double a = ugrid(i == 0 ? 0 : i - 1), b = ugrid(std::min(n - 1, i + 1));
                auto [u, v] = minimize_1d(phi, a, b);
                if (v < best.v) best = {u, v};
            }
        }
        hits.push_back(best);
    }

    std::size_t pick = 0;
    for (std::size_t k = 1; k < hits.size(); ++k) {
        if (opt.tie == TieRule::farthest && ties(hits[k].v, hits[pick].v)) {
            if (distance(c.curve(hits[k].u), start) > distance(c.curve(hits[pick].u), start)) pick = k;
        } else if (hits[k].v < hits[pick].v) {
            pick = k;
        }
    }

    InnerResult r;
    r.u = hits[pick].u;
    r.x = c.curve(*r.u);
    r.value = hits[pick].v;
    const Vec t = c.tangent(*r.u);
    const double d = dphi(*r.u);
    const bool at_lo = *r.u <= c.u_lo && d >= 0.0, at_hi = *r.u >= c.u_hi && d <= 0.0;
    const double tt = dot(t, t);
    r.tangential_gradient = (at_lo || at_hi) ? Vec(c.dim, 0.0) : (d / tt) * t;
    r.residual = norm(r.tangential_gradient);
    r.iterations = 1;
    r.converged = r.residual <= opt.accept_tol * std::max(1.0, std::sqrt(tt));
    return r;
}

inline InnerResult minimize_projected(const SmoothObjective& obj, const ConstraintSet& c, const Vec& start, const InnerOptions& opt) {
    Vec x = c.to_set(start);
    double fx = obj.value(x);
    if (!std::isfinite(fx)) throw InfeasibleError("projected gradient: start outside the objective domain");
    double step = 1.0;
    Vec pg;
    int it = 0;
    const int max_it = std::max(opt.max_iter, 20000);
    for (; it < max_it; ++it) {
        const Vec gx = obj.gradient(x);
        pg = x - c.to_set(x - gx);
        if (norm(pg) <= std::max(opt.grad_tol, 1e-12)) break;
        bool accepted = false;
        for (int h = 0; h < 60; ++h, step *= 0.5) {
            Vec xt = c.to_set(axpy(-step, gx, x));
            const double ft = obj.value(xt);
            if (std::isfinite(ft) && ft <= fx + 1e-4 * dot(gx, xt - x)) {
                if (distance(xt, x) <= 1e-16 * (1.0 + norm(x))) break;
                x = std::move(xt);
                fx = ft;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        step = std::min(1.0, step * 2.0);
    }
    InnerResult r;
    r.x = x;
    r.value = fx;
    r.tangential_gradient = pg;
    r.residual = norm(pg);
    r.iterations = it;
    r.converged = r.residual <= opt.accept_tol;
    return r;
}

}  // namespace detail

// Local minimizer of obj over the set, started from opts.start (or the given point).
inline InnerResult minimize_over(const SmoothObjective& obj, const ConstraintSet& c, const Vec& start, const InnerOptions& opt = {}) {
    if (start.size() != c.dim) throw NumericError("minimize_over: dimension mismatch");
    switch (c.kind) {
        case ConstraintKind::whole: return detail::minimize_reduced(obj, start, c.null_basis, opt);
        case ConstraintKind::affine: return detail::minimize_reduced(obj, c.to_set(start), c.null_basis, opt);
        case ConstraintKind::curve: return detail::minimize_curve(obj, c, start, opt);
        case ConstraintKind::sublevel:
        case ConstraintKind::projection: return detail::minimize_projected(obj, c, start, opt);
        case ConstraintKind::union_of: {
            std::optional<InnerResult> best;
            for (std::size_t i = 0; i < c.branches.size(); ++i) {
                InnerResult r;
                try {
                    r = minimize_over(obj, c.branches[i], start, opt);
                } catch (const InfeasibleError&) {
                    continue;
                }
                r.branch = i;
                if (!best) {
                    best = r;
                } else if (detail::ties(r.value, best->value)) {
                    if (opt.tie == TieRule::farthest && distance(r.x, start) > distance(best->x, start)) best = r;
                } else if (r.value < best->value) {
                    best = r;
                }
            }
            if (!best) throw InfeasibleError("union: no feasible branch");
            return *best;
        }
    }
    throw NumericError("minimize_over: unknown constraint kind");
}

// tangential part of v at a member point
inline Vec tangential(const ConstraintSet& c, const Vec& x, const Vec& v, std::optional<double> u = std::nullopt) {
    const Matrix t = c.tangent_basis(x, u);
    return t * (t.transpose() * v);
}

}  // namespace emlab
