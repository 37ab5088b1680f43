#pragma once

#include <cmath>
#include <string>

#include "emlab/trace.hpp"

namespace emlab {

// S_N = sum_{k >= N} ||P (x_{k+1} - x_k)||, accumulated backwards so that
// S_N = S_{N+1} + ||P (x_{N+1} - x_N)|| holds exactly.
inline Vec cauchy_sums(const std::vector<Vec>& xs, const Matrix& p) {
    if (xs.empty()) return {};
    Vec s(xs.size(), 0.0);
    for (std::size_t n = xs.size() - 1; n-- > 0;) {
        const Vec d = xs[n + 1] - xs[n];
        s[n] = s[n + 1] + norm(p.empty() ? d : p * d);
    }
    return s;
}

template <class Record>
Vec cauchy_sums(const BasicTrace<Record>& tr, const Matrix& p) {
    return cauchy_sums(tr.points(), p);
}

// share of the total path length travelled in the second half of the run
inline double tail_share(const Vec& sums) {
    if (sums.size() < 2 || sums.front() <= 0.0) return 0.0;
    return sums[sums.size() / 2] / sums.front();
}

struct LinearFit {
    double slope = kNaN, intercept = kNaN, r2 = 0.0;
};

inline LinearFit least_squares(const Vec& x, const Vec& y) {
    const std::size_t n = x.size();
    LinearFit f;
    if (n < 2) return f;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    return f;
}

enum class RateKind { none, sublinear, linear };

inline const char* to_string(RateKind k) {
    switch (k) {
        case RateKind::none: return "none";
        case RateKind::sublinear: return "sublinear";
        case RateKind::linear: return "linear";
    }
    return "?";
}

struct RateFit {
    RateKind kind = RateKind::none;
    double param = kNaN;  // rho (sublinear) or alpha (linear)
    double r2 = 0.0;
    double r2_sublinear = 0.0, r2_linear = 0.0;
    std::size_t window_begin = 0, window_end = 0;  // iterate indices [begin, end)
    std::size_t points = 0;
    bool exact = false;  // degenerate: all distances below 1e-14
};

struct RateFitOptions {
    double r2_threshold = 0.98;
    double drop_fraction = 0.1;  // final share of iterates excluded from the window
    std::size_t min_points = 20;
    double floor = 1e-14;
};

inline RateFit fit_rate(const std::vector<Vec>& xs, const Matrix& p, const Vec& x_ref, const RateFitOptions& opt = {}) {
    RateFit rf;
    const std::size_t n = xs.size();
    rf.window_end = n - static_cast<std::size_t>(std::floor(opt.drop_fraction * static_cast<double>(n)));
    rf.window_begin = 1;
    auto dist = [&](const Vec& x) {
        const Vec d = x - x_ref;
        return norm(p.empty() ? d : p * d);
    };
    bool all_tiny = true;
    for (const auto& x : xs) all_tiny = all_tiny && dist(x) < opt.floor;
    if (all_tiny) {
        rf.kind = RateKind::linear;
        rf.param = 0.0;
        rf.r2 = 1.0;
        rf.exact = true;
        return rf;
    }
    Vec lk, kk, ld;
    for (std::size_t k = rf.window_begin; k < rf.window_end; ++k) {
        const double d = dist(xs[k]);
        if (!(d > opt.floor) || !std::isfinite(d)) continue;
        lk.push_back(std::log(static_cast<double>(k)));
        kk.push_back(static_cast<double>(k));
        ld.push_back(std::log(d));
    }
    rf.points = ld.size();
    if (rf.points < opt.min_points)
        throw InsufficientDataError("fit_rate: only " + std::to_string(rf.points) + " usable points");
    const LinearFit sub = least_squares(lk, ld);
    const LinearFit lin = least_squares(kk, ld);
    rf.r2_sublinear = sub.r2;
    rf.r2_linear = lin.r2;
    const bool sub_ok = sub.slope < 0.0 && sub.r2 >= opt.r2_threshold;
    const double alpha = std::exp(lin.slope);
    const bool lin_ok = alpha > 0.0 && alpha < 1.0 && lin.r2 >= opt.r2_threshold;
    if (lin_ok && (!sub_ok || lin.r2 >= sub.r2)) {
        rf.kind = RateKind::linear;
        rf.param = alpha;
        rf.r2 = lin.r2;
    } else if (sub_ok) {
        rf.kind = RateKind::sublinear;
        rf.param = -sub.slope;
        rf.r2 = sub.r2;
    } else {
        rf.r2 = std::max(sub.r2, lin.r2);
    }
    return rf;
}

template <class Record>
RateFit fit_rate(const BasicTrace<Record>& tr, const Matrix& p, const Vec& x_ref, const RateFitOptions& opt = {}) {
    return fit_rate(tr.points(), p, x_ref, opt);
}

struct KLExponent {
    double theta = kNaN;  // clipped to [1/2, 1)
    double raw = kNaN;    // unclipped slope
    double c = kNaN;
    double r2 = 0.0;
    std::size_t points = 0;
    bool low_quality = false;
};

// fits grad ~ c (f - f*)^theta
inline KLExponent kl_exponent_estimate(const Vec& f, const Vec& grad, double f_star, std::size_t min_points = 10) {
    if (f.size() != grad.size()) throw InsufficientDataError("kl_exponent_estimate: size mismatch");
    Vec lx, ly;
    const double floor = 1e-14 * std::max(1.0, std::abs(f_star));
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double gap = f[i] - f_star;
        if (!(gap > floor) || !(grad[i] > 0.0) || !std::isfinite(gap) || !std::isfinite(grad[i])) continue;
        lx.push_back(std::log(gap));
        ly.push_back(std::log(grad[i]));
    }
    KLExponent k;
    k.points = lx.size();
    if (k.points < min_points) throw InsufficientDataError("kl_exponent_estimate: window too short");
    const LinearFit fit = least_squares(lx, ly);
    if (!std::isfinite(fit.slope)) throw InsufficientDataError("kl_exponent_estimate: degenerate window");
    k.raw = fit.slope;
    k.c = std::exp(fit.intercept);
    k.r2 = fit.r2;
    k.theta = std::clamp(fit.slope, 0.5, std::nextafter(1.0, 0.0));
    k.low_quality = fit.r2 < 0.9;
    return k;
}

enum class Verdict { converged, partial_only, cycling, escaping, boundary };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::converged: return "converged";
        case Verdict::partial_only: return "partial-only";
        case Verdict::cycling: return "cycling";
        case Verdict::escaping: return "escaping";
        case Verdict::boundary: return "boundary";
    }
    return "?";
}

struct ClassifyThresholds {
    double conv_tol = 1e-8;          // step norm relative to 1 + ||x||
    double boundary_margin = 1e-6;   // inclusive
    double escape_factor = 10.0;     // ||x_N|| >= factor * max(1, ||x_0||)
    double escape_growth = 1.5;      // and ||x_N|| >= growth * ||x_{N/2}||
    double recurrence_rel = 1e-3;    // closest return relative to the tail diameter
};

struct Classification {
    Verdict verdict = Verdict::cycling;
    bool ambiguous = false;
    double closest_return = kInf;  // relative closest-return distance (cycling detector)
    std::string reason;
};

// closest return of the trailing anchor to earlier tail points after travelling
// at least half the tail diameter, relative to that diameter
inline double closest_return(const std::vector<Vec>& xs) {
    const std::size_t n = xs.size();
    if (n < 4) return kInf;
    const std::size_t begin = n / 2;
    double diam = 0.0;
    for (std::size_t i = begin; i < n; ++i) diam = std::max(diam, distance(xs[i], xs[n - 1]));
    if (!(diam > 0.0)) return kInf;
    double path = 0.0, best = kInf;
    for (std::size_t j = n - 1; j-- > begin;) {
        path += distance(xs[j + 1], xs[j]);
        if (path >= 0.5 * diam) best = std::min(best, distance(xs[j], xs[n - 1]) / diam);
    }
    return best;
}

template <class Record>
Classification classify_run(const BasicTrace<Record>& tr, const Matrix& p = {}, const ClassifyThresholds& th = {}) {
    Classification c;
    if (tr.rows.empty()) {
        c.ambiguous = true;
        c.reason = "empty trace";
        return c;
    }
    const auto& last = tr.rows.back();
    const std::size_t n = tr.rows.size();
    const double xn = norm(last.x);

    double tail_margin = kInf;
    const std::size_t tail = std::max<std::size_t>(1, n / 10);
    for (std::size_t i = n - tail; i < n; ++i) tail_margin = std::min(tail_margin, tr.rows[i].domain_margin);
    if (tail_margin <= th.boundary_margin) {
        c.verdict = Verdict::boundary;
        c.reason = "domain margin at or below threshold";
        return c;
    }

    const double x0 = norm(tr.rows.front().x), xm = norm(tr.rows[n / 2].x);
    if (n >= 3 && xn >= th.escape_factor * std::max(1.0, x0) && xn >= th.escape_growth * xm) {
        c.verdict = Verdict::escaping;
        c.reason = "iterate norm growing";
        return c;
    }

    if (n >= 2) {
        const double tol = th.conv_tol * (1.0 + xn);
        if (last.step_norm <= tol) {
            c.verdict = Verdict::converged;
            c.reason = "final step below tolerance";
            return c;
        }
        double proj = last.proj_step_norm;
        if (!std::isfinite(proj) && !p.empty()) proj = norm(p * (last.x - tr.rows[n - 2].x));
        if (proj <= tol) {
            c.verdict = Verdict::partial_only;
            c.reason = "projected steps vanish, full steps do not";
            return c;
        }
    }

    c.verdict = Verdict::cycling;
    c.closest_return = closest_return(tr.points());
    if (c.closest_return <= th.recurrence_rel) {
        c.reason = "recurrence detected";
    } else {
        c.ambiguous = true;
        c.reason = "bounded and not converged; no recurrence detected";
    }
    return c;
}

}  // namespace emlab
