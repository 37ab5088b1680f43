#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "emlab/numerics.hpp"

namespace emlab {

// Strictly convex function of Legendre type on an open convex domain.
struct LegendreGenerator {
    std::string name;
    std::size_t dim = 0;
    std::function<double(const Vec&)> psi;
    std::function<Vec(const Vec&)> grad;
    std::function<SymMatrix(const Vec&)> hess;
    std::function<double(const Vec&)> domain_margin;  // > 0 inside the interior
    std::function<Vec(const Vec&)> grad_conjugate;    // optional closed-form inverse of grad
    std::function<double(const Vec&)> dual_margin;    // optional, > 0 inside the dual interior
    Vec anchor;                                       // interior point used to seed inversions

    bool inside(const Vec& x) const {
        if (x.size() != dim || !all_finite(x)) return false;
        return domain_margin(x) > 0.0;
    }
};

// Regular exponential family: generator is the log-normalizer psi(theta).
struct ExpFamily : LegendreGenerator {
    std::string statistic;  // description of T(x)
};

inline void require_interior(const LegendreGenerator& g, const Vec& x, const char* who) {
    if (x.size() != g.dim) throw DomainError(std::string(who) + ": dimension mismatch", kNaN);
    if (!all_finite(x)) throw NumericError(std::string(who) + ": non-finite point");
    const double m = g.domain_margin(x);
    if (!(m > 0.0)) throw DomainError(std::string(who) + ": point outside the natural domain", m);
}

// ---- built-in families ------------------------------------------------------

// N iid observations of N(mu, s2); T = (mean, mean of squares);
// theta = (N mu / s2, -N / (2 s2)); psi = -theta1^2/(4 theta2) - (N/2) log(-theta2)
inline ExpFamily gaussian_family(std::size_t n_obs = 2) {
    const double n = static_cast<double>(n_obs);
    ExpFamily f;
    f.name = n_obs == 2 ? "gaussian2" : "gaussianN:" + std::to_string(n_obs);
    f.statistic = "(mean(x), mean(x^2))";
    f.dim = 2;
    f.psi = [n](const Vec& t) {
        if (!(t[1] < 0.0)) return kInf;
        return -t[0] * t[0] / (4.0 * t[1]) - 0.5 * n * std::log(-t[1]);
    };
    f.grad = [n](const Vec& t) {
        return Vec{-t[0] / (2.0 * t[1]), t[0] * t[0] / (4.0 * t[1] * t[1]) - n / (2.0 * t[1])};
    };
    f.hess = [n](const Vec& t) {
        const double t2 = t[1];
        SymMatrix h(2);
        h(0, 0) = -1.0 / (2.0 * t2);
        h(0, 1) = h(1, 0) = t[0] / (2.0 * t2 * t2);
        h(1, 1) = -t[0] * t[0] / (2.0 * t2 * t2 * t2) + n / (2.0 * t2 * t2);
        return h;
    };
    f.domain_margin = [](const Vec& t) { return -t[1]; };
    f.dual_margin = [](const Vec& e) { return e[1] - e[0] * e[0]; };
    f.grad_conjugate = [n](const Vec& e) {
        const double s2 = e[1] - e[0] * e[0];
        return Vec{n * e[0] / s2, -n / (2.0 * s2)};
    };
    f.anchor = {0.0, -0.5 * n};
    return f;
}

struct GaussianMoments {
    double mu, s2;
};

inline GaussianMoments gaussian_moments(const Vec& theta, std::size_t n_obs = 2) {
    if (!(theta[1] < 0.0)) throw DomainError("gaussian_moments: theta2 must be negative", -theta[1]);
    return {-theta[0] / (2.0 * theta[1]), -static_cast<double>(n_obs) / (2.0 * theta[1])};
}

inline Vec gaussian_natural(double mu, double s2, std::size_t n_obs = 2) {
    if (!(s2 > 0.0)) throw DomainError("gaussian_natural: variance must be positive", s2);
    const double n = static_cast<double>(n_obs);
    return {n * mu / s2, -n / (2.0 * s2)};
}

// psi = ||theta||^2 / 2 (unit-covariance Gaussian location family)
inline ExpFamily quadratic_family(std::size_t dim) {
    ExpFamily f;
    f.name = "quadratic:" + std::to_string(dim);
    f.statistic = "x";
    f.dim = dim;
    f.psi = [](const Vec& t) { return 0.5 * dot(t, t); };
    f.grad = [](const Vec& t) { return t; };
    f.hess = [dim](const Vec&) { return SymMatrix(Matrix::identity(dim)); };
    f.domain_margin = [](const Vec&) { return kInf; };
    f.dual_margin = [](const Vec&) { return kInf; };
    f.grad_conjugate = [](const Vec& e) { return e; };
    f.anchor = Vec(dim, 0.0);
    return f;
}

// Gaussian location family with fixed covariance S: psi = theta' S theta / 2
inline ExpFamily gaussian_location_family(const SymMatrix& cov) {
    const std::size_t dim = cov.dim();
    const SymEig e = sym_eig(cov);
    if (e.values.back() <= 0.0) throw NumericError("covariance must be positive definite");
    ExpFamily f;
    f.name = "gaussian-location:" + std::to_string(dim);
    f.statistic = "x";
    f.dim = dim;
    f.psi = [cov](const Vec& t) { return 0.5 * dot(t, cov * t); };
    f.grad = [cov](const Vec& t) { return cov * t; };
    f.hess = [cov](const Vec&) { return cov; };
    f.domain_margin = [](const Vec&) { return kInf; };
    f.dual_margin = [](const Vec&) { return kInf; };
    f.grad_conjugate = [cov](const Vec& e) {
        auto x = lu_solve(cov, e);
        if (!x) throw NumericError("singular covariance");
        return *x;
    };
    f.anchor = Vec(dim, 0.0);
    return f;
}

// Negative entropy sum x log x - x on the positive orthant (conjugate of the
// Poisson log-normalizer); its Bregman divergence is the generalized KL.
inline LegendreGenerator negentropy_generator(std::size_t dim) {
    LegendreGenerator g;
    g.name = "negentropy:" + std::to_string(dim);
    g.dim = dim;
    g.psi = [](const Vec& x) {
        double s = 0.0;
        for (double v : x) {
            if (v < 0.0) return kInf;
            s += (v > 0.0 ? v * std::log(v) : 0.0) - v;
        }
        return s;
    };
    g.grad = [](const Vec& x) {
        Vec r(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) r[i] = std::log(x[i]);
        return r;
    };
    g.hess = [](const Vec& x) {
        Vec d(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) d[i] = 1.0 / x[i];
        return SymMatrix(Matrix::diag(d));
    };
    g.domain_margin = [](const Vec& x) { return *std::min_element(x.begin(), x.end()); };
    g.dual_margin = [](const Vec&) { return kInf; };
    g.grad_conjugate = [](const Vec& e) {
        Vec r(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) r[i] = std::exp(e[i]);
        return r;
    };
    g.anchor = Vec(dim, 1.0);
    return g;
}

// Non-minimal family: the statistic is duplicated, psi(theta) = psi0(theta1 + theta2)
// with psi0(s) = s^2 (two iid N(s,1) draws, T = (x1 + x2, x1 + x2)).
inline ExpFamily duplicated_family() {
    ExpFamily f;
    f.name = "duplicated";
    f.statistic = "(x1 + x2, x1 + x2)";
    f.dim = 2;
    f.psi = [](const Vec& t) {
        const double s = t[0] + t[1];
        return s * s;
    };
    f.grad = [](const Vec& t) {
        const double s = t[0] + t[1];
        return Vec{2.0 * s, 2.0 * s};
    };
    f.hess = [](const Vec&) { return SymMatrix{{2.0, 2.0}, {2.0, 2.0}}; };
    f.domain_margin = [](const Vec&) { return kInf; };
    f.anchor = {0.0, 0.0};
    return f;
}

inline ExpFamily family_by_name(const std::string& name) {
    auto suffix = [&](const std::string& prefix) -> std::optional<std::size_t> {
        if (name.rfind(prefix, 0) != 0) return std::nullopt;
        const std::string rest = name.substr(prefix.size());
        if (rest.empty() || rest.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("bad family size in '" + name + "'");
        const auto v = std::stoul(rest);
        if (v == 0) throw ConfigError("family size must be positive in '" + name + "'");
        return v;
    };
    if (name == "gaussian2") return gaussian_family(2);
    if (auto n = suffix("gaussianN:")) return gaussian_family(*n);
    if (auto n = suffix("quadratic:")) return quadratic_family(*n);
    if (name == "duplicated") return duplicated_family();
    throw ConfigError("unknown family '" + name + "'");
}

inline LegendreGenerator generator_by_name(const std::string& name) {
    if (name.rfind("negentropy:", 0) == 0) {
        const std::string rest = name.substr(11);
        if (rest.empty() || rest.find_first_not_of("0123456789") != std::string::npos || std::stoul(rest) == 0)
            throw ConfigError("bad generator size in '" + name + "'");
        return negentropy_generator(std::stoul(rest));
    }
    return family_by_name(name);
}

// ---- operations -------------------------------------------------------------

struct MinimalityReport {
    bool minimal = true;
    double min_eigenvalue = kInf;
    Vec at;  // point achieving the smallest eigenvalue
};

inline MinimalityReport check_minimality(const LegendreGenerator& g, const std::vector<Vec>& points, double rel_tol = 1e-10) {
    MinimalityReport r;
    for (const auto& p : points) {
        require_interior(g, p, "check_minimality");
        const SymEig e = sym_eig(g.hess(p));
        const double lmin = e.values.back();
        if (lmin < r.min_eigenvalue) {
            r.min_eigenvalue = lmin;
            r.at = p;
        }
        if (!(lmin > rel_tol * std::max(1.0, e.values.front()))) r.minimal = false;
    }
    return r;
}

inline double log_normalizer(const LegendreGenerator& g, const Vec& theta) {
    require_interior(g, theta, "log_normalizer");
    return g.psi(theta);
}

inline Vec mean_param(const LegendreGenerator& g, const Vec& theta) {
    require_interior(g, theta, "mean_param");
    return g.grad(theta);
}

// inverse of the mean map; closed form when available, otherwise Newton from the anchor
inline Vec dual_param(const LegendreGenerator& g, const Vec& eta, const NewtonOptions& opt = {}) {
    if (eta.size() != g.dim || !all_finite(eta)) throw DualDomainError("dual_param: malformed mean parameter");
    if (g.dual_margin && !(g.dual_margin(eta) > 0.0))
        throw DualDomainError("dual_param: mean parameter outside the interior of the dual domain");
    if (g.grad_conjugate) {
        Vec th = g.grad_conjugate(eta);
        if (!g.inside(th)) throw DualDomainError("dual_param: inverse left the natural domain");
        return th;
    }
    auto fun = [&](const Vec& th) {
        if (!g.inside(th)) return Vec(g.dim, kNaN);
        return g.grad(th) - eta;
    };
    auto jac = [&](const Vec& th) -> Matrix { return g.hess(th); };
    const NewtonResult r = newton_solve(fun, jac, g.anchor, opt);
    if (!r.converged || r.fallback_used) throw DualDomainError("dual_param: no inverse found (" + r.message + ")");
    return r.x;
}

inline double legendre_conjugate(const LegendreGenerator& g, const Vec& eta) {
    const Vec th = dual_param(g, eta);
    return dot(th, eta) - g.psi(th);
}

// Restriction of a family to theta2 = A theta1 + a (theta1 = first m coordinates).
inline ExpFamily affine_reduce(const ExpFamily& fam, const Matrix& a_mat, const Vec& a_vec) {
    const std::size_t n = fam.dim;
    const std::size_t m = a_mat.cols();
    if (m == 0 || m > n || a_mat.rows() != n - m || a_vec.size() != n - m)
        throw NumericError("affine_reduce: shape mismatch");
    if (!a_mat.finite() || !all_finite(a_vec)) throw NumericError("affine_reduce: non-finite coupling");
    if (a_mat.rows() > 0 && a_mat.max_abs() > 0.0) {
        const SymEig e = sym_eig(SymMatrix(a_mat * a_mat.transpose()));
        if (rank_with_tol(e.values, 1e-12) < std::min(n - m, m)) throw NumericError("affine_reduce: rank-deficient A");
    }
    auto embed = [=](const Vec& t1) {
        Vec full(t1);
        const Vec t2 = a_mat * t1 + a_vec;
        full.insert(full.end(), t2.begin(), t2.end());
        return full;
    };
    Matrix jac(n, m);  // d full / d t1 = [I; A]
    for (std::size_t i = 0; i < m; ++i) jac(i, i) = 1.0;
    for (std::size_t i = 0; i < n - m; ++i)
        for (std::size_t j = 0; j < m; ++j) jac(m + i, j) = a_mat(i, j);
    const Matrix jt = jac.transpose();

    ExpFamily r;
    r.name = fam.name + "|affine";
    r.statistic = fam.statistic + " reduced";
    r.dim = m;
    r.psi = [fam, embed](const Vec& t) { return fam.psi(embed(t)); };
    r.grad = [fam, embed, jt](const Vec& t) { return jt * fam.grad(embed(t)); };
    r.hess = [fam, embed, jt, jac](const Vec& t) { return SymMatrix(jt * (fam.hess(embed(t)) * jac)); };
    r.domain_margin = [fam, embed](const Vec& t) { return fam.domain_margin(embed(t)); };
    r.anchor = Vec(fam.anchor.begin(), fam.anchor.begin() + static_cast<std::ptrdiff_t>(m));
    for (double c : {1.0, -1.0, 0.5, -0.5, 2.0, -2.0}) {
        if (r.inside(r.anchor)) break;
        r.anchor = Vec(m, c);
    }
    if (!r.inside(r.anchor)) r.anchor.clear();
    return r;
}

}  // namespace emlab
