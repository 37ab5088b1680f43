#pragma once

#include <chrono>
#include <filesystem>
#include <numbers>

#include "emlab/diagnostics.hpp"
#include "emlab/geometry.hpp"
#include "emlab/io.hpp"

namespace emlab {

// ---- non-converging smooth function (polar form) --------------------------------------
//   f(r, phi) = exp(-1/(1-r^2)) (1 - W(r) sin(phi - 1/(1-r^2))),  W = 4r^4 / (4r^4 + (1-r^2)^4)
// for r < 1 and f = 0 otherwise.
struct MexicanHat {
    static double value(const Vec& x) {
        const double r2 = x[0] * x[0] + x[1] * x[1];
        if (r2 >= 1.0) return 0.0;
        const double eps = 1.0 - r2, e = std::exp(-1.0 / eps);
        const double w = 4.0 * r2 * r2 / (4.0 * r2 * r2 + std::pow(eps, 4));
        return e * (1.0 - w * std::sin(std::atan2(x[1], x[0]) - 1.0 / eps));
    }

    static Vec grad(const Vec& x) {
        const double r = std::hypot(x[0], x[1]);
        if (r >= 1.0 || r < 1e-300) return {0.0, 0.0};
        const double eps = 1.0 - r * r, e = std::exp(-1.0 / eps);
        const double e4 = std::pow(eps, 4), r4 = std::pow(r, 4), den = 4.0 * r4 + e4;
        const double w = 4.0 * r4 / den;
        const double dw = (16.0 * r * r * r * e4 + 32.0 * std::pow(r, 5) * eps * eps * eps) / (den * den);
        const double phi = std::atan2(x[1], x[0]);
        const double s = std::sin(phi - 1.0 / eps), c = std::cos(phi - 1.0 / eps);
        const double dinv = 2.0 * r / (eps * eps);  // d(1/eps)/dr
        const double de = -e * dinv;
        const double fr = de * (1.0 - w * s) - e * (dw * s - w * c * dinv);
        const double fphi = -e * w * c;
        const double cr = x[0] / r, sr = x[1] / r;
        return {fr * cr - fphi * sr / r, fr * sr + fphi * cr / r};
    }

    // valley start: sin(phi - 1/eps) = 1
    static Vec valley_point(double r) {
        const double phi = 1.0 / (1.0 - r * r) + std::numbers::pi / 2.0;
        return {r * std::cos(phi), r * std::sin(phi)};
    }
};

// One implicit alternating-projection step: solve x + f(x) grad f(x) = x_prev.
inline NewtonResult mexican_hat_ap_step(const Vec& x_prev, double tol = 1e-13) {
    auto fg = [](const Vec& x) { return MexicanHat::value(x) * MexicanHat::grad(x); };
    auto fun = [&](const Vec& x) { return x + fg(x) - x_prev; };
    auto jac = [&](const Vec& x) { return Matrix::identity(2) + fd_jacobian(fg, x, 1e-7).first; };
    return newton_solve(fun, jac, x_prev, NewtonOptions{tol, 100, 60});
}

inline double ap_residual(const std::function<double(const Vec&)>& f, const std::function<Vec(const Vec&)>& g,
                          const Vec& x, const Vec& x_prev) {
    return norm(f(x) * g(x) + x - x_prev);
}

// ---- experiment results ---------------------------------------------------------------

struct ExperimentResult {
    std::string experiment;
    IterateTrace trace;                                           // written as trace.csv
    std::vector<std::pair<std::string, IterateTrace>> side_traces;  // written as trace_<name>.csv
    Classification classification;
    std::optional<RateFit> rate;
    std::string rate_note;
    std::optional<KLExponent> kl;
    std::string kl_note;
    Vec final_point;
    double constraint_residual = 0.0;
    double wall_time_ms = 0.0;
    bool monotone = true;  // objective column non-increasing within tolerance
    Json details = Json::object();
};

// objective column non-increasing within tol * max(1, |f|)
inline bool monotone_column(const IterateTrace& tr, double tol = 1e-12, double* worst = nullptr) {
    bool ok = true;
    double w = 0.0;
    for (std::size_t i = 1; i < tr.rows.size(); ++i) {
        const double prev = tr.rows[i - 1].f, cur = tr.rows[i].f;
        if (!std::isfinite(prev) || !std::isfinite(cur)) continue;
        w = std::max(w, cur - prev);
        if (cur - prev > tol * std::max(1.0, std::abs(prev))) ok = false;
    }
    if (worst) *worst = w;
    return ok;
}

// verdict, rate fit (x* = last iterate) and KL exponent (f* = smallest value) from a trace
inline void analyze(ExperimentResult& r, const Matrix& p) {
    const IterateTrace& tr = r.trace;
    r.classification = classify_run(tr, p);
    r.final_point = tr.back().x;
    try {
        r.rate = fit_rate(tr, p, tr.back().x);
    } catch (const InsufficientDataError& e) {
        r.rate_note = e.what();
    }
    double f_star = kInf;
    for (const auto& row : tr.rows) f_star = std::min(f_star, row.f);
    Vec fv, gv;
    const std::size_t end = tr.size() - tr.size() / 10;
    for (std::size_t i = 1; i < end; ++i) {
        const auto& row = tr.rows[i];
        if (row.f - f_star > 1e-13 * std::max(1.0, std::abs(f_star))) {
            fv.push_back(row.f);
            gv.push_back(row.grad_norm);
        }
    }
    try {
        r.kl = kl_exponent_estimate(fv, gv, f_star);
    } catch (const InsufficientDataError& e) {
        r.kl_note = e.what();
    }
    r.monotone = monotone_column(tr);
}

inline Json summary_json(const ExperimentResult& r) {
    Json j;
    j["experiment"] = r.experiment;
    j["verdict"] = to_string(r.classification.verdict);
    j["verdict_ambiguous"] = r.classification.ambiguous;
    j["verdict_reason"] = r.classification.reason;
    if (r.rate) {
        j["rate_fit"] = {{"kind", to_string(r.rate->kind)},
                         {"param", json_number(r.rate->param)},
                         {"r2", json_number(r.rate->r2)},
                         {"window", {r.rate->window_begin, r.rate->window_end}},
                         {"exact", r.rate->exact}};
    } else {
        j["rate_fit"] = {{"kind", "none"}, {"param", nullptr}, {"r2", nullptr}, {"note", r.rate_note}};
    }
    if (r.kl) {
        j["kl_exponent"] = json_number(r.kl->theta);
        j["kl_exponent_fit"] = {{"raw", json_number(r.kl->raw)}, {"r2", json_number(r.kl->r2)}, {"low_quality", r.kl->low_quality}};
    } else {
        j["kl_exponent"] = nullptr;
        j["kl_exponent_fit"] = {{"note", r.kl_note}};
    }
    j["final_point"] = json_vec(r.final_point);
    j["constraint_residual"] = json_number(r.constraint_residual);
    j["wall_time_ms"] = r.wall_time_ms;
    j["iterations"] = r.trace.empty() ? 0 : r.trace.size() - 1;
    j["stop_reason"] = to_string(r.trace.stop);
    j["monotone"] = r.monotone;
    j["details"] = r.details;
    return j;
}

inline void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_trace_csv((dir / "trace.csv").string(), r.trace);
    for (const auto& [name, tr] : r.side_traces) write_trace_csv((dir / ("trace_" + name + ".csv")).string(), tr);
    std::ofstream os(dir / "summary.json");
    if (!os) throw Error("cannot write " + (dir / "summary.json").string());
    os << summary_json(r).dump(2) << '\n';
}

namespace detail {

class Stopwatch {
public:
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

inline void check_name(const Json& j, const std::string& name) {
    if (j.contains("experiment") && j.at("experiment") != name)
        throw ConfigError("config is for experiment '" + j.at("experiment").dump() + "', not '" + name + "'");
}

}  // namespace detail

// ---- curved Gaussian ----------------------------------------------------------------

// M = {theta : theta1^2 = -4 theta2}, i.e. mu = sigma, parametrized by u = theta1
inline ConstraintSet gaussian_curve(double u_lo, double u_hi, std::size_t grid = 512) {
    ConstraintSet c = ConstraintSet::parametric(
        2, [](double u) { return Vec{u, -0.25 * u * u}; }, u_lo, u_hi, [](double u) { return Vec{1.0, -0.5 * u}; }, grid);
    c.label = "theta1^2 = -4 theta2";
    return c;
}

struct GaussianCurvedConfig {
    double y = 1.0;
    Vec theta0 = {2.0, -1.0};
    double u_lo = 0.05, u_hi = 50.0;
    int grid_points = 512;
    EMConfig em = [] {
        EMConfig c;
        c.max_iter = 200;
        c.step_tol = 1e-12;
        return c;
    }();

    static GaussianCurvedConfig from_json(const Json& j) {
        reject_unknown_keys(j, {"experiment", "y", "theta0", "u_range", "grid_points", "max_iter", "step_tol"}, "gaussian-curved");
        detail::check_name(j, "gaussian-curved");
        GaussianCurvedConfig c;
        c.y = get_number(j, "y", c.y);
        c.theta0 = get_vec(j, "theta0", c.theta0);
        const Vec ur = get_vec(j, "u_range", {c.u_lo, c.u_hi});
        if (ur.size() != 2 || !(ur[0] < ur[1])) throw ConfigError("gaussian-curved: u_range must be [lo, hi] with lo < hi");
        c.u_lo = ur[0];
        c.u_hi = ur[1];
        c.grid_points = get_int(j, "grid_points", c.grid_points);
        c.em.max_iter = get_int(j, "max_iter", c.em.max_iter);
        c.em.step_tol = get_number(j, "step_tol", c.em.step_tol);
        if (c.theta0.size() != 2) throw ConfigError("gaussian-curved: theta0 must have 2 entries");
        if (c.grid_points < 3) throw ConfigError("gaussian-curved: grid_points must be >= 3");
        return c;
    }
};

inline IncompleteModel gaussian_curved_model(const GaussianCurvedConfig& c) {
    return gaussian2_missing(c.y, gaussian_curve(c.u_lo, c.u_hi, static_cast<std::size_t>(c.grid_points)));
}

inline ExperimentResult run_gaussian_curved(const GaussianCurvedConfig& c) {
    detail::Stopwatch sw;
    const IncompleteModel md = gaussian_curved_model(c);
    require_interior(md.fam, c.theta0, "gaussian-curved");
    const double off = c.theta0[0] * c.theta0[0] + 4.0 * c.theta0[1];
    if (std::abs(off) > 1e-8 * std::max(1.0, norm(c.theta0)))
        throw ConfigError("gaussian-curved: theta0 is not on the curve theta1^2 = -4 theta2");
    const EMTrace em = em_run(md, c.theta0, c.em);
    ExperimentResult r;
    r.experiment = "gaussian-curved";
    r.trace = as_iterate_trace(em);
    r.trace.extra_names = {"curve_residual"};
    double worst = 0.0;
    for (auto& row : r.trace.rows) {
        const double res = row.x[0] * row.x[0] + 4.0 * row.x[1];
        row.extra = {res};
        worst = std::max(worst, std::abs(res));
    }
    analyze(r, em.P);
    const Vec& th = r.final_point;
    r.constraint_residual = std::abs(th[0] * th[0] + 4.0 * th[1]);
    const GaussianMoments mo = gaussian_moments(th);
    r.details = {{"y", c.y},
                 {"accurate_dim", em.split.m},
                 {"max_curve_residual", worst},
                 {"limit_mu", mo.mu},
                 {"limit_sigma2", mo.s2},
                 {"max_step_last", r.trace.back().step_norm}};
    r.wall_time_ms = sw.ms();
    return r;
}

// ---- unconstrained Gaussian ---------------------------------------------------------

struct GaussianUnconstrainedConfig {
    double y = 1.0;
    Vec theta0 = {0.0, -1.0};
    EMConfig em = [] {
        EMConfig c;
        c.max_iter = 200;
        c.step_tol = 1e-12;
        c.escape_radius = 1e8;
        return c;
    }();

    static GaussianUnconstrainedConfig from_json(const Json& j) {
        reject_unknown_keys(j, {"experiment", "y", "theta0", "max_iter", "step_tol", "escape_radius"}, "gaussian-unconstrained");
        detail::check_name(j, "gaussian-unconstrained");
        GaussianUnconstrainedConfig c;
        c.y = get_number(j, "y", c.y);
        c.theta0 = get_vec(j, "theta0", c.theta0);
        c.em.max_iter = get_int(j, "max_iter", c.em.max_iter);
        c.em.step_tol = get_number(j, "step_tol", c.em.step_tol);
        c.em.escape_radius = get_number(j, "escape_radius", c.em.escape_radius);
        if (c.theta0.size() != 2) throw ConfigError("gaussian-unconstrained: theta0 must have 2 entries");
        return c;
    }
};

inline ExperimentResult run_gaussian_unconstrained(const GaussianUnconstrainedConfig& c) {
    detail::Stopwatch sw;
    const IncompleteModel md = gaussian2_missing(c.y);
    const EMTrace em = em_run(md, c.theta0, c.em);
    ExperimentResult r;
    r.experiment = "gaussian-unconstrained";
    r.trace = as_iterate_trace(em);
    r.trace.extra_names = {"mu", "sigma2", "identity_residual"};
    double mu_err = 0.0, id_err = 0.0;
    for (std::size_t i = 0; i < r.trace.rows.size(); ++i) {
        auto& row = r.trace.rows[i];
        const GaussianMoments mo = gaussian_moments(row.x);
        // theta1 = -2 y theta2, relative to the parameter scale
        const double id = std::abs(row.x[0] + 2.0 * c.y * row.x[1]) / std::max(1.0, norm(row.x));
        row.extra = {mo.mu, mo.s2, id};
        if (i > 0) {
            mu_err = std::max(mu_err, std::abs(mo.mu - c.y));
            id_err = std::max(id_err, id);
        }
    }
    analyze(r, em.P);
    r.details = {{"y", c.y}, {"max_mu_error", mu_err}, {"max_identity_residual", id_err},
                 {"final_sigma2", gaussian_moments(r.final_point).s2}};
    r.wall_time_ms = sw.ms();
    return r;
}

// ---- missing component of a bivariate Gaussian ----------------------------------------

struct MissingDataConfig {
    SymMatrix cov = SymMatrix{{1.0, 0.5}, {0.5, 2.0}};
    double y = 1.0;
    Vec theta0 = {0.0, 0.0};
    EMConfig em = [] {
        EMConfig c;
        c.max_iter = 200;
        c.step_tol = 1e-12;
        return c;
    }();

    static MissingDataConfig from_json(const Json& j) {
        reject_unknown_keys(j, {"experiment", "cov", "y", "theta0", "max_iter", "step_tol"}, "missing-data");
        detail::check_name(j, "missing-data");
        MissingDataConfig c;
        const Vec cv = get_vec(j, "cov", {c.cov(0, 0), c.cov(0, 1), c.cov(1, 1)});
        if (cv.size() != 3) throw ConfigError("missing-data: cov must be [syy, syz, szz]");
        c.cov = SymMatrix{{cv[0], cv[1]}, {cv[1], cv[2]}};
        c.y = get_number(j, "y", c.y);
        c.theta0 = get_vec(j, "theta0", c.theta0);
        c.em.max_iter = get_int(j, "max_iter", c.em.max_iter);
        c.em.step_tol = get_number(j, "step_tol", c.em.step_tol);
        if (c.theta0.size() != 2) throw ConfigError("missing-data: theta0 must have 2 entries");
        return c;
    }
};

inline ExperimentResult run_missing_data(const MissingDataConfig& c) {
    detail::Stopwatch sw;
    const IncompleteModel md = gaussian_missing_component(c.cov, c.y);
    const EMTrace em = em_run(md, c.theta0, c.em);
    ExperimentResult r;
    r.experiment = "missing-data";
    r.trace = as_iterate_trace(em);
    r.trace.extra_names = {"accurate", "spare"};
    for (auto& row : r.trace.rows) row.extra = {em.split.accurate(row.x).at(0), em.split.spare(row.x).at(0)};
    analyze(r, em.P);
    const SplitProgramResult sp = split_program_solve(md, em.split.accurate(r.final_point), em.split);
    const Vec sums = cauchy_sums(em, em.P);
    Json p = Json::array();
    for (std::size_t i = 0; i < 2; ++i) p.push_back({em.P(i, 0), em.P(i, 1)});
    r.details = {{"accurate_dim", em.split.m},
                 {"P", p},
                 {"accurate_direction", json_vec(em.split.Q.row(0))},
                 {"split_program_theta", json_vec(sp.theta)},
                 {"split_program_value", sp.value},
                 {"split_program_strictly_convex", sp.strictly_convex},
                 {"accurate_cauchy_total", sums.front()},
                 {"accurate_cauchy_tail", sums[sums.size() / 2]}};
    r.wall_time_ms = sw.ms();
    return r;
}

// ---- KL arc: alternating projections between a curve and a segment ------------------------

struct KLArcConfig {
    Vec p = {-1.0, -2.0}, q = {-2.0, -1.0};
    Vec starts = {0.1, 0.9};  // positions b_s = (1-s) a + s b on the segment
    bool locate_gap = true;
    int grid_points = 512;
    AlternatingConfig alt = [] {
        AlternatingConfig c;
        c.max_iter = 10000;
        c.step_tol = 1e-10;
        return c;
    }();

    static KLArcConfig from_json(const Json& j) {
        reject_unknown_keys(j, {"experiment", "p", "q", "starts", "locate_gap", "grid_points", "max_iter", "step_tol"}, "kl-arc");
        detail::check_name(j, "kl-arc");
        KLArcConfig c;
        c.p = get_vec(j, "p", c.p);
        c.q = get_vec(j, "q", c.q);
        c.starts = get_vec(j, "starts", c.starts);
        if (j.contains("locate_gap")) {
            if (!j.at("locate_gap").is_boolean()) throw ConfigError("kl-arc: locate_gap must be a boolean");
            c.locate_gap = j.at("locate_gap").get<bool>();
        }
        c.grid_points = get_int(j, "grid_points", c.grid_points);
        c.alt.max_iter = get_int(j, "max_iter", c.alt.max_iter);
        c.alt.step_tol = get_number(j, "step_tol", c.alt.step_tol);
        if (c.p.size() != c.q.size() || c.p.empty()) throw ConfigError("kl-arc: p and q must have equal, positive length");
        for (double v : c.p)
            if (!(v < 0.0)) throw ConfigError("kl-arc: p must lie in the negative orthant");
        for (double v : c.q)
            if (!(v < 0.0)) throw ConfigError("kl-arc: q must lie in the negative orthant");
        for (double s : c.starts)
            if (s < 0.0 || s > 1.0) throw ConfigError("kl-arc: starts must lie in [0, 1]");
        if (c.starts.empty()) throw ConfigError("kl-arc: at least one start is required");
        return c;
    }
};

struct KLArcSetup {
    LegendreGenerator gen;
    Vec a, b;
    ConstraintSet arc;      // {exp(t p + (1-t) q)}: right projections
    ConstraintSet segment;  // [a, b]: left projections (the model set)
    RightProjector right;

    Vec segment_point(double s) const { return axpy(s, b - a, a); }
};

inline KLArcSetup kl_arc_setup(const KLArcConfig& c) {
    KLArcSetup s;
    const std::size_t n = c.p.size();
    s.gen = negentropy_generator(n);
    auto ex = [](const Vec& v) {
        Vec r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) r[i] = std::exp(v[i]);
        return r;
    };
    s.a = ex(c.p);
    s.b = ex(c.q);
    const Vec p = c.p, q = c.q, a = s.a, b = s.b;
    const std::size_t g = static_cast<std::size_t>(c.grid_points);
    s.arc = ConstraintSet::parametric(
        n, [p, q, ex](double t) { return ex(axpy(t, p - q, q)); }, 0.0, 1.0,
        [p, q, ex](double t) {
            Vec e = ex(axpy(t, p - q, q));
            for (std::size_t i = 0; i < e.size(); ++i) e[i] *= p[i] - q[i];
            return e;
        },
        g);
    s.arc.label = "arc";
    s.segment = ConstraintSet::parametric(
        n, [a, b](double u) { return axpy(u, b - a, a); }, 0.0, 1.0, [a, b](double) { return b - a; }, g);
    s.segment.label = "segment";
    s.right = right_projector(s.gen, s.arc);
    return s;
}

inline IterateTrace alternating_iterate_trace(const LegendreGenerator& gen, const AlternatingTrace& at) {
    IterateTrace tr;
    if (at.rows.empty()) return tr;
    const std::size_t n = at.rows.front().theta.size();
    tr.P = Matrix::identity(n);
    for (std::size_t i = 0; i < n; ++i) tr.extra_names.push_back("vartheta" + std::to_string(i));
    tr.extra_names.push_back("div_current");
    for (const auto& r : at.rows) {
        IterateRecord ir;
        ir.k = r.k;
        ir.x = r.theta;
        ir.f = r.div_next;
        ir.step_norm = ir.proj_step_norm = r.step_norm;
        ir.residual = r.residual;
        ir.domain_margin = gen.domain_margin(r.theta);
        ir.extra = r.vartheta;
        ir.extra.push_back(r.div_current);
        tr.rows.push_back(std::move(ir));
    }
    tr.stop = at.outcome == AlternatingOutcome::not_converged ? StopReason::max_iter : StopReason::step_tol;
    tr.descent_ok = at.monotone;
    return tr;
}

inline std::string kl_arc_limit(const KLArcSetup& s, const AlternatingTrace& at) {
    const Vec& th = at.rows.back().theta;
    if (distance(th, s.a) < 1e-6) return "a";
    if (distance(th, s.b) < 1e-6) return "b";
    return to_string(at.outcome);
}

// segment position of the basin boundary between two starts with different limits
inline double kl_arc_basin_boundary(const KLArcSetup& s, double lo, double hi, const AlternatingConfig& cfg, int probes = 20) {
    AlternatingConfig pc = cfg;
    pc.max_iter = std::min(cfg.max_iter, 2000);
    auto side = [&](double u) {
        const Vec th = alternate_run(s.gen, s.right, s.segment, s.segment_point(u), pc).rows.back().theta;
        return distance(th, s.a) < distance(th, s.b);  // true: drifting toward a
    };
    const bool lo_side = side(lo);
    for (int i = 0; i < probes; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (side(mid) == lo_side) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline ExperimentResult run_kl_arc(const KLArcConfig& c) {
    detail::Stopwatch sw;
    ExperimentResult r;
    r.experiment = "kl-arc";
    const KLArcSetup s = kl_arc_setup(c);
    Json per_start = Json::array();

    if (distance(s.a, s.b) == 0.0) {
        // both sets collapse to one point: immediate fixed point
        AlternatingTrace at;
        AlternatingRecord rec;
        rec.theta = rec.vartheta = s.a;
        rec.div_next = 0.0;
        at.rows.push_back(rec);
        at.outcome = AlternatingOutcome::common_point;
        at.gap = 0.0;
        r.trace = alternating_iterate_trace(s.gen, at);
        r.trace.stop = StopReason::step_tol;
        for (double st : c.starts) per_start.push_back({{"start", st}, {"limit", "a"}, {"iterations", 0}, {"final_step", 0.0}});
        analyze(r, r.trace.P);
        r.details = {{"starts", per_start}, {"degenerate", true}};
        r.wall_time_ms = sw.ms();
        return r;
    }

    std::vector<std::pair<double, std::string>> limits;
    for (std::size_t i = 0; i < c.starts.size(); ++i) {
        const double st = c.starts[i];
        const AlternatingTrace at = alternate_run(s.gen, s.right, s.segment, s.segment_point(st), c.alt);
        const std::string lim = kl_arc_limit(s, at);
        limits.emplace_back(st, lim);
        per_start.push_back({{"start", st},
                             {"limit", lim},
                             {"outcome", to_string(at.outcome)},
                             {"iterations", at.rows.size() - 1},
                             {"final_step", at.rows.back().step_norm},
                             {"final_point", json_vec(at.rows.back().theta)},
                             {"monotone", at.monotone}});
        IterateTrace it = alternating_iterate_trace(s.gen, at);
        if (i == 0) r.trace = std::move(it);
        else r.side_traces.emplace_back("start" + std::to_string(i), std::move(it));
    }
    r.details["starts"] = per_start;
    r.details["a"] = json_vec(s.a);
    r.details["b"] = json_vec(s.b);

    if (c.locate_gap) {
        std::optional<std::pair<double, double>> bracket;
        for (std::size_t i = 0; i < limits.size() && !bracket; ++i)
            for (std::size_t k = i + 1; k < limits.size() && !bracket; ++k)
                if ((limits[i].second == "a" && limits[k].second == "b") || (limits[i].second == "b" && limits[k].second == "a"))
                    bracket = std::minmax(limits[i].first, limits[k].first);
        if (bracket) {
            const double guess = kl_arc_basin_boundary(s, bracket->first, bracket->second, c.alt);
            const GapPair gp = refine_gap_pair(s.gen, s.right, s.segment, s.segment_point(guess));
            r.details["gap_pair"] = {{"theta", json_vec(gp.theta)},
                                     {"vartheta", json_vec(gp.vartheta)},
                                     {"gap", gp.gap},
                                     {"residual", gp.residual},
                                     {"newton_iterations", gp.iterations},
                                     {"converged", gp.converged},
                                     {"basin_boundary", guess}};
        } else {
            r.details["gap_pair"] = {{"note", "no pair of starts with different limits"}};
        }
    }
    analyze(r, r.trace.P);
    r.constraint_residual = s.segment.residual(r.final_point);
    r.wall_time_ms = sw.ms();
    return r;
}

// ---- forward alternating projections on the non-converging hat ---------------------------

struct MexicanHatConfig {
    double r0 = 0.5;
    std::optional<double> phi0;  // default: valley angle 1/(1-r0^2) + pi/2
    int steps = 10000;
    double newton_tol = 1e-13;

    static MexicanHatConfig from_json(const Json& j) {
        reject_unknown_keys(j, {"experiment", "r0", "phi0", "steps", "newton_tol"}, "mexican-hat");
        detail::check_name(j, "mexican-hat");
        MexicanHatConfig c;
        c.r0 = get_number(j, "r0", c.r0);
        if (j.contains("phi0")) c.phi0 = get_number(j, "phi0", 0.0);
        c.steps = get_int(j, "steps", c.steps);
        c.newton_tol = get_number(j, "newton_tol", c.newton_tol);
        if (!(c.r0 >= 0.0 && c.r0 < 1.0)) throw ConfigError("mexican-hat: r0 must lie in [0, 1)");
        if (c.steps < 1) throw ConfigError("mexican-hat: steps must be positive");
        return c;
    }

    Vec start() const {
        if (!phi0) return MexicanHat::valley_point(r0);
        return {r0 * std::cos(*phi0), r0 * std::sin(*phi0)};
    }
};

inline ExperimentResult run_mexican_hat(const MexicanHatConfig& c) {
    detail::Stopwatch sw;
    ExperimentResult r;
    r.experiment = "mexican-hat";
    IterateTrace& tr = r.trace;
    tr.P = Matrix::identity(2);
    tr.extra_names = {"radius", "winding"};
    tr.stop = StopReason::max_iter;

    Vec x = c.start();
    double wind = 0.0, ang = std::atan2(x[1], x[0]);
    bool strict = true;
    double worst_res = 0.0;
    auto record = [&](std::size_t k, const Vec& xk, double step, double res) {
        IterateRecord row;
        row.k = k;
        row.x = xk;
        row.f = MexicanHat::value(xk);
        row.step_norm = row.proj_step_norm = step;
        row.residual = res;
        row.lambda = 1.0;
        row.grad_norm = norm(MexicanHat::grad(xk));
        row.extra = {norm(xk), wind};
        tr.rows.push_back(std::move(row));
    };
    record(0, x, 0.0, 0.0);
    for (int k = 1; k <= c.steps; ++k) {
        const NewtonResult nr = mexican_hat_ap_step(x, c.newton_tol);
        if (!nr.converged && nr.residual > 1e-10)
            throw ConvergenceError("mexican-hat: implicit step did not converge at step " + std::to_string(k));
        const Vec xn = nr.x;
        const double a = std::atan2(xn[1], xn[0]);
        double da = a - ang;
        da -= 2.0 * std::numbers::pi * std::round(da / (2.0 * std::numbers::pi));
        wind += da;
        ang = a;
        const double res = ap_residual(MexicanHat::value, MexicanHat::grad, xn, x);
        worst_res = std::max(worst_res, res);
        const double fprev = tr.rows.back().f;
        record(static_cast<std::size_t>(k), xn, distance(xn, x), res);
        if (!(tr.rows.back().f < fprev)) strict = false;
        const bool stationary = distance(xn, x) == 0.0;
        x = xn;
        if (stationary) {
            tr.stop = StopReason::step_tol;
            break;
        }
    }
    analyze(r, tr.P);
    const Vec sums = cauchy_sums(tr, tr.P);
    r.details = {{"start", json_vec(tr.rows.front().x)},
                 {"f_strictly_decreasing", strict},
                 {"final_radius", norm(x)},
                 {"winding", std::abs(wind)},
                 {"cauchy_total", sums.front()},
                 {"cauchy_tail_share", tail_share(sums)},
                 {"max_ap_residual", worst_res},
                 {"closest_return", json_number(r.classification.closest_return)}};
    r.wall_time_ms = sw.ms();
    return r;
}

// ---- proximal point on f^2/2 versus the alternating-projection identity --------------------

struct TestFunction {
    std::string name;
    std::function<double(const Vec&)> f;
    std::function<Vec(const Vec&)> grad;
};

inline TestFunction test_function(const std::string& name) {
    if (name == "norm")
        return {name, [](const Vec& x) { return norm(x); },
                [](const Vec& x) {
                    const double n = norm(x);
                    return n > 0.0 ? (1.0 / n) * x : Vec(x.size(), 0.0);
                }};
    if (name == "mexican-hat") return {name, MexicanHat::value, MexicanHat::grad};
    if (name == "zero") return {name, [](const Vec&) { return 0.0; }, [](const Vec& x) { return Vec(x.size(), 0.0); }};
    throw ConfigError("unknown test function '" + name + "'");
}

struct PpmEmConfig {
    std::vector<std::string> functions = {"mexican-hat", "norm"};
    Vec x0;  // default: valley point at r = 0.5
    int steps = 200;
    ProxConfig prox = [] {
        ProxConfig p;
        p.lambda = 1.0;
        p.step_tol = 0.0;
        p.max_iter = 200;
        return p;
    }();

    static PpmEmConfig from_json(const Json& j) {
        reject_unknown_keys(j, {"experiment", "functions", "x0", "steps", "lambda"}, "ppm-em");
        detail::check_name(j, "ppm-em");
        PpmEmConfig c;
        if (j.contains("functions")) {
            if (!j.at("functions").is_array() || j.at("functions").empty()) throw ConfigError("ppm-em: functions must be a non-empty array");
            c.functions.clear();
            for (const auto& f : j.at("functions")) {
                if (!f.is_string()) throw ConfigError("ppm-em: functions must be strings");
                c.functions.push_back(f.get<std::string>());
                test_function(c.functions.back());
            }
        }
        c.x0 = get_vec(j, "x0", c.x0);
        c.steps = get_int(j, "steps", c.steps);
        c.prox.max_iter = c.steps;
        c.prox.lambda = get_number(j, "lambda", c.prox.lambda);
        if (!c.x0.empty() && c.x0.size() != 2) throw ConfigError("ppm-em: x0 must have 2 entries");
        if (c.steps < 1) throw ConfigError("ppm-em: steps must be positive");
        return c;
    }
};

// prox steps on f^2/2 with Psi = ||x+ - x||^2/2; extra column ap_residual = ||lambda f grad f + x_k - x_{k-1}||
inline IterateTrace ppm_em_run(const TestFunction& tf, const Vec& x0, const ProxConfig& cfg) {
    SmoothObjective half_sq;
    half_sq.value = [tf](const Vec& x) {
        const double v = tf.f(x);
        return 0.5 * v * v;
    };
    half_sq.gradient = [tf](const Vec& x) { return tf.f(x) * tf.grad(x); };
    IterateTrace tr = prox_run(half_sq, ConstraintSet::whole_space(x0.size()), quadratic_regularizer(x0.size()), cfg, x0);
    tr.extra_names = {"ap_residual"};
    tr.rows.front().extra = {0.0};
    for (std::size_t i = 1; i < tr.rows.size(); ++i) {
        const Vec& xk = tr.rows[i].x;
        const Vec& xp = tr.rows[i - 1].x;
        tr.rows[i].extra = {norm(cfg.lambda_at(i - 1) * half_sq.gradient(xk) + xk - xp)};
    }
    return tr;
}

inline ExperimentResult run_ppm_em(const PpmEmConfig& c) {
    detail::Stopwatch sw;
    ExperimentResult r;
    r.experiment = "ppm-em";
    const Vec x0 = c.x0.empty() ? MexicanHat::valley_point(0.5) : c.x0;
    Json per = Json::object();
    for (std::size_t i = 0; i < c.functions.size(); ++i) {
        const TestFunction tf = test_function(c.functions[i]);
        IterateTrace tr = ppm_em_run(tf, x0, c.prox);
        double worst = 0.0;
        for (const auto& row : tr.rows) worst = std::max(worst, row.extra.at(0));
        Json d = {{"max_ap_residual", worst}, {"steps", tr.size() - 1}, {"final_point", json_vec(tr.back().x)},
                  {"monotone", monotone_column(tr)}};
        if (tf.name == "norm") {
            // linear resolvent: x_k = x_{k-1} / (1 + lambda)
            double err = 0.0;
            for (std::size_t k = 1; k < tr.rows.size(); ++k)
                err = std::max(err, distance(tr.rows[k].x, (1.0 / (1.0 + c.prox.lambda_at(k - 1))) * tr.rows[k - 1].x));
            d["max_resolvent_error"] = err;
        }
        per[tf.name] = d;
        if (i == 0) r.trace = std::move(tr);
        else r.side_traces.emplace_back(tf.name, std::move(tr));
    }
    analyze(r, r.trace.P);
    for (const auto& [name, tr] : r.side_traces) r.monotone = r.monotone && monotone_column(tr);
    r.details = {{"x0", json_vec(x0)}, {"functions", per}};
    r.wall_time_ms = sw.ms();
    return r;
}

// ---- duplicated statistic: plain versus spare-regularized EM ------------------------------

struct DuplicatedConfig {
    double y = 1.0;
    double c = 1.0;  // branches theta1 - theta2 = +c and -c
    Vec theta0 = {1.0, 0.0};
    double lambda = 1.0;
    EMConfig em = [] {
        EMConfig e;
        e.max_iter = 200;
        e.step_tol = 1e-12;
        e.inner.tie = TieRule::farthest;
        return e;
    }();

    static DuplicatedConfig from_json(const Json& j) {
        reject_unknown_keys(j, {"experiment", "y", "c", "theta0", "lambda", "max_iter", "step_tol"}, "duplicated-statistic");
        detail::check_name(j, "duplicated-statistic");
        DuplicatedConfig d;
        d.y = get_number(j, "y", d.y);
        d.c = get_number(j, "c", d.c);
        d.theta0 = get_vec(j, "theta0", d.theta0);
        d.lambda = get_number(j, "lambda", d.lambda);
        d.em.max_iter = get_int(j, "max_iter", d.em.max_iter);
        d.em.step_tol = get_number(j, "step_tol", d.em.step_tol);
        if (d.theta0.size() != 2) throw ConfigError("duplicated-statistic: theta0 must have 2 entries");
        if (!(d.c > 0.0)) throw ConfigError("duplicated-statistic: c must be positive");
        if (!(d.lambda > 0.0)) throw ConfigError("duplicated-statistic: lambda must be positive");
        return d;
    }
};

inline ConstraintSet duplicated_branches(double c) {
    const Matrix a{{1.0, -1.0}};
    ConstraintSet m = ConstraintSet::union_of({ConstraintSet::affine(a, {c}), ConstraintSet::affine(a, {-c})});
    m.label = "theta1 - theta2 = +-c";
    return m;
}

struct DuplicatedRuns {
    EMTrace plain, regularized;
    Vec plain_sums, regularized_sums;  // spare-coordinate Cauchy sums
};

inline DuplicatedRuns duplicated_runs(const DuplicatedConfig& d) {
    const IncompleteModel md = duplicated_model(d.y, duplicated_branches(d.c));
    DuplicatedRuns out;
    out.plain = em_run(md, d.theta0, d.em);
    EMConfig rc = d.em;
    rc.spare_penalty = d.lambda;
    out.regularized = em_run(md, d.theta0, rc);
    out.plain_sums = cauchy_sums(out.plain, out.plain.split.spare_projector());
    out.regularized_sums = cauchy_sums(out.regularized, out.regularized.split.spare_projector());
    return out;
}

inline ExperimentResult run_duplicated(const DuplicatedConfig& d) {
    detail::Stopwatch sw;
    const DuplicatedRuns runs = duplicated_runs(d);
    ExperimentResult r;
    r.experiment = "duplicated-statistic";
    auto with_spare = [](const EMTrace& em) {
        IterateTrace t = as_iterate_trace(em);
        t.extra_names = {"accurate", "spare", "spare_step"};
        for (std::size_t i = 0; i < t.rows.size(); ++i)
            t.rows[i].extra = {em.split.accurate(t.rows[i].x).at(0), em.split.spare(t.rows[i].x).at(0), em.rows[i].spare_step};
        return t;
    };
    r.trace = with_spare(runs.plain);
    r.side_traces.emplace_back("regularized", with_spare(runs.regularized));
    analyze(r, runs.plain.P);
    const Classification reg_cls = classify_run(r.side_traces.front().second);
    r.monotone = r.monotone && monotone_column(r.side_traces.front().second);
    const auto& ps = runs.plain_sums;
    const auto& rs = runs.regularized_sums;
    r.constraint_residual = duplicated_branches(d.c).residual(r.final_point);
    r.details = {{"accurate_dim", runs.plain.split.m},
                 {"lambda", d.lambda},
                 {"plain", {{"spare_cauchy_total", ps.front()}, {"spare_cauchy_tail", ps[ps.size() / 2]},
                            {"verdict", to_string(r.classification.verdict)}, {"final_point", json_vec(runs.plain.back().x)}}},
                 {"regularized", {{"spare_cauchy_total", rs.front()}, {"spare_cauchy_tail", rs[rs.size() / 2]},
                                  {"verdict", to_string(reg_cls.verdict)}, {"final_point", json_vec(runs.regularized.back().x)},
                                  {"final_neg_log_q", runs.regularized.back().neg_log_q}}},
                 {"note", "stand-in cycling exhibit: non-minimal family on a two-branch model set, worst-case tie rule"}};
    r.wall_time_ms = sw.ms();
    return r;
}

// ---- registry ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"gaussian-curved", "gaussian-unconstrained", "missing-data", "kl-arc",
                                                   "mexican-hat", "ppm-em", "duplicated-statistic"};
    return names;
}

inline ExperimentResult run_experiment(const std::string& name, const Json& cfg = Json::object()) {
    if (name == "gaussian-curved") return run_gaussian_curved(GaussianCurvedConfig::from_json(cfg));
    if (name == "gaussian-unconstrained") return run_gaussian_unconstrained(GaussianUnconstrainedConfig::from_json(cfg));
    if (name == "missing-data") return run_missing_data(MissingDataConfig::from_json(cfg));
    if (name == "kl-arc") return run_kl_arc(KLArcConfig::from_json(cfg));
    if (name == "mexican-hat") return run_mexican_hat(MexicanHatConfig::from_json(cfg));
    if (name == "ppm-em") return run_ppm_em(PpmEmConfig::from_json(cfg));
    if (name == "duplicated-statistic") return run_duplicated(DuplicatedConfig::from_json(cfg));
    throw ConfigError("unknown experiment '" + name + "'");
}

inline Json load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path);
    try {
        return Json::parse(is);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

}  // namespace emlab
