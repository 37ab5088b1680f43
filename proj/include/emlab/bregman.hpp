#pragma once

#include "emlab/constraints.hpp"
#include "emlab/expfam.hpp"

namespace emlab {

// D(x,y) = psi(x) - psi(y) - <grad psi(y), x - y>; +inf when y is not interior
// or x is outside dom psi.
inline double bregman_div(const LegendreGenerator& gen, const Vec& x, const Vec& y) {
    if (x.size() != gen.dim || y.size() != gen.dim) throw NumericError("bregman_div: dimension mismatch");
    if (!all_finite(x) || !all_finite(y)) throw NumericError("bregman_div: non-finite argument");
    if (!(gen.domain_margin(y) > 0.0)) return kInf;
    const double px = gen.psi(x);
    if (!std::isfinite(px)) return kInf;
    return px - gen.psi(y) - dot(gen.grad(y), x - y);
}

// K(theta || theta_plus) = D(theta_plus, theta)
inline double kl_divergence(const ExpFamily& fam, const Vec& theta, const Vec& theta_plus) {
    require_interior(fam, theta, "kl_divergence");
    require_interior(fam, theta_plus, "kl_divergence");
    return bregman_div(fam, theta_plus, theta);
}

using ProjectionOptions = InnerOptions;

// theta -> D(theta, target)
inline SmoothObjective left_objective(const LegendreGenerator& gen, const Vec& target) {
    const double p0 = gen.psi(target);
    const Vec g0 = gen.grad(target);
    SmoothObjective o;
    o.value = [gen, target, p0, g0](const Vec& x) {
        if (!gen.inside(x)) return kInf;
        return gen.psi(x) - p0 - dot(g0, x - target);
    };
    o.gradient = [gen, g0](const Vec& x) {
        if (!gen.inside(x)) return Vec(x.size(), kNaN);
        return gen.grad(x) - g0;
    };
    o.hessian = [gen](const Vec& x) { return gen.hess(x); };
    return o;
}

// vartheta -> D(source, vartheta); gradient -hess(vartheta)(source - vartheta)
inline SmoothObjective right_objective(const LegendreGenerator& gen, const Vec& source) {
    const double ps = gen.psi(source);
    SmoothObjective o;
    o.value = [gen, source, ps](const Vec& y) {
        if (!gen.inside(y)) return kInf;
        return ps - gen.psi(y) - dot(gen.grad(y), source - y);
    };
    o.gradient = [gen, source](const Vec& y) {
        if (!gen.inside(y)) return Vec(y.size(), kNaN);
        return (-1.0) * (gen.hess(y) * (source - y));
    };
    return o;
}

// argmin over M of theta -> D(theta, target)
inline InnerResult left_projection(const LegendreGenerator& gen, const ConstraintSet& m, const Vec& target,
                                   const ProjectionOptions& opt = {}) {
    require_interior(gen, target, "left_projection");
    const Vec start = opt.start ? *opt.start : target;
    return minimize_over(left_objective(gen, target), m, start, opt);
}

// argmin over S of vartheta -> D(source, vartheta)
inline InnerResult right_projection(const LegendreGenerator& gen, const ConstraintSet& s, const Vec& source,
                                    const ProjectionOptions& opt = {}) {
    require_interior(gen, source, "right_projection");
    const Vec start = opt.start ? *opt.start : source;
    return minimize_over(right_objective(gen, source), s, start, opt);
}

}  // namespace emlab
