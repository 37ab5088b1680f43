// One PASS/FAIL line per acceptance criterion; exit status 1 if any line fails.
#include <cstdio>
#include <random>

#include "emlab/experiments.hpp"

using namespace emlab;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
    std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

template <class F>
void guarded(const char* name, F&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

double gaussian2_kl_oracle(const Vec& th, const Vec& thp) {
    const GaussianMoments a = gaussian_moments(th), b = gaussian_moments(thp);
    return 2.0 * (0.5 * std::log(b.s2 / a.s2) + (a.s2 + (a.mu - b.mu) * (a.mu - b.mu)) / (2.0 * b.s2) - 0.5);
}

void legendre_duality() {
    const ExpFamily g = gaussian_family(2);
    double worst = 0.0;
    for (double t1 : {-3.0, -1.0, 0.0, 0.5, 2.0})
        for (double t2 : {-4.0, -2.0, -1.0, -0.5, -0.3}) {
            const Vec th{t1, t2};
            worst = std::max(worst, distance(dual_param(g, mean_param(g, th)), th));
        }
    const double conj = legendre_conjugate(g, {1.0, 2.0});
    const Vec d = dual_param(g, {1.0, 2.0});
    const double dev = std::max({std::abs(conj + 1.0), std::abs(d[0] - 2.0), std::abs(d[1] + 1.0)});
    report("legendre-duality", worst <= 1e-8 && dev <= 1e-10,
           fmt("grid round-trip max %.3g (<=1e-8); psi*(1,2) and grad deviation %.3g (<=1e-10)", worst, dev));
}

void kl_identity() {
    const ExpFamily g = gaussian_family(2);
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> mu(-2.0, 2.0), s2(0.2, 3.0);
    double worst = 0.0;
    for (int i = 0; i < 25; ++i) {
        const Vec a = gaussian_natural(mu(rng), s2(rng)), b = gaussian_natural(mu(rng), s2(rng));
        worst = std::max(worst, std::abs(kl_divergence(g, a, b) - gaussian2_kl_oracle(a, b)));
    }
    const double ex = kl_divergence(g, {0.0, -1.0}, {2.0, -1.0});
    report("kl-closed-form", worst <= 1e-9 && std::abs(ex - 1.0) <= 1e-9,
           fmt("25 pairs max error %.3g; K((0,-1)||(2,-1)) = %.12g", worst, ex));
}

void em_is_prox() {
    const GaussianCurvedConfig c;
    const IncompleteModel md = gaussian_curved_model(c);
    EMConfig ec;
    ec.max_iter = 50;
    ec.step_tol = 0.0;
    ProxConfig pc;
    pc.max_iter = 50;
    pc.step_tol = 0.0;
    const EMTrace em = em_run(md, c.theta0, ec);
    const IterateTrace px = prox_run(md.nlq_objective(), md.M, kl_em_regularizer(md, c.theta0), pc, c.theta0);
    const std::size_t n = std::min(em.size(), px.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, distance(em.rows[k].x, px.rows[k].x));
    report("em-equals-kl-prox", n == 51 && worst <= 1e-8, fmt("%zu iterates compared, max distance %.3g (<=1e-8)", n - 1, worst));
}

void monotone_everywhere() {
    std::string bad;
    double worst_all = 0.0;
    for (const auto& name : experiment_names()) {
        const ExperimentResult r = run_experiment(name);
        std::vector<const IterateTrace*> traces{&r.trace};
        for (const auto& s : r.side_traces) traces.push_back(&s.second);
        for (const IterateTrace* t : traces) {
            double w = 0.0;
            if (!monotone_column(*t, 1e-12, &w)) bad += " " + name;
            worst_all = std::max(worst_all, w);
        }
    }
    report("monotone-descent", bad.empty(), fmt("largest relative increase %.3g over all runs%s", worst_all, bad.empty() ? "" : (" ; violated:" + bad).c_str()));
}

void unconstrained() {
    const ExperimentResult r = run_gaussian_unconstrained(GaussianUnconstrainedConfig{});
    const double mu = r.details["max_mu_error"], id = r.details["max_identity_residual"];
    report("unconstrained-gaussian", mu <= 1e-10 && id <= 1e-9,
           fmt("max |mu - y| %.3g (<=1e-10); max identity residual %.3g (<=1e-9); verdict %s", mu, id,
               to_string(r.classification.verdict)));
}

void curved() {
    const GaussianCurvedConfig c;
    const EMTrace em = em_run(gaussian_curved_model(c), c.theta0, c.em);
    std::size_t hit = 0;
    for (std::size_t k = 1; k < em.size() && !hit; ++k)
        if (em.rows[k].step_norm < 1e-8) hit = k;
    const Vec& th = em.back().x;
    const double res = std::abs(th[0] * th[0] + 4.0 * th[1]);
    report("curved-gaussian", hit > 0 && hit <= 200 && res <= 1e-8,
           fmt("step < 1e-8 at iteration %zu (<=200); limit (%.10g, %.10g), curve residual %.3g", hit, th[0], th[1], res));
}

void split_detection() {
    const IncompleteModel md = gaussian2_missing(0.0);
    const SymMatrix im = conditional_fisher(md, {0.0, -1.0});
    const SplitCoordinates s = split_parameters(md, {0.0, -1.0});
    const double ei = std::max({std::abs(im(0, 0)), std::abs(im(0, 1)), std::abs(im(1, 1) - 0.5)});
    const double ep = std::max({std::abs(s.P(0, 0)), std::abs(s.P(0, 1)), std::abs(s.P(1, 1) - 1.0)});
    report("split-detection", ei <= 1e-9 && ep <= 1e-9 && s.m == 1,
           fmt("I_m error %.3g; m = %zu; P error %.3g", ei, s.m, ep));
}

void information_split() {
    const std::vector<Vec> pts = {{0.0, -1.0}, {2.0, -1.0}, {-1.0, -0.5}, {0.5, -3.0}, {3.0, -2.0}};
    const IncompleteModel md = gaussian2_missing(1.0);
    double worst = 0.0;
    for (const Vec& th : pts) {
        const SymMatrix obs = fd_hessian(md.neg_log_q, th).value;
        const SymMatrix miss = conditional_fisher(md, th);
        const SymMatrix full = md.fam.hess(th);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) worst = std::max(worst, std::abs(full(i, j) - obs(i, j) - miss(i, j)));
    }
    report("information-split", worst <= 1e-5, fmt("max |hess psi - I - I_m| %.3g over 5 points (<=1e-5)", worst));
}

void amari() {
    const AmariResult a = amari_check(gaussian2_missing(1.0), {2.0, -1.0});
    const AmariResult b = amari_check(gaussian2_variance_statistic(1.0), {2.0, -1.0});
    const bool ok = !a.coincide && std::abs(a.lhs[0] - 1.5) <= 1e-9 && std::abs(a.rhs[0] - 2.0) <= 1e-9 && b.coincide;
    report("amari-check", ok,
           fmt("mean-of-squares lhs %.12g rhs %.12g coincide=%d; sample-variance coincide=%d", a.lhs[0], a.rhs[0], a.coincide, b.coincide));
}

void kl_arc() {
    const ExperimentResult r = run_kl_arc(KLArcConfig{});
    const Json& st = r.details["starts"];
    bool ok = true;
    std::string d;
    const char* expect[] = {"a", "b"};
    for (std::size_t i = 0; i < 2; ++i) {
        const double step = st[i]["final_step"];
        const std::size_t it = st[i]["iterations"];
        const std::string lim = st[i]["limit"];
        ok = ok && lim == expect[i] && step < 1e-10 && it <= 10000;
        d += fmt("start %.1f -> %s in %zu its (step %.2g); ", static_cast<double>(st[i]["start"]), lim.c_str(), it, step);
    }
    const Json& gp = r.details["gap_pair"];
    const bool has = gp.contains("residual");
    const double res = has ? static_cast<double>(gp["residual"]) : kInf;
    ok = ok && has && res <= 1e-8;
    report("kl-arc", ok, d + fmt("gap pair residual %.3g (<=1e-8)", res));
}

void mexican_hat() {
    const ExperimentResult r = run_mexican_hat(MexicanHatConfig{});
    const bool strict = r.details["f_strictly_decreasing"];
    const double rad = r.details["final_radius"], wind = r.details["winding"], share = r.details["cauchy_tail_share"];
    const bool cyc = r.classification.verdict == Verdict::cycling;
    const bool ok = strict && std::abs(rad - 1.0) <= 0.01 && wind > 4.0 * std::numbers::pi && share > 0.1 && cyc;
    report("mexican-hat-cycling", ok,
           fmt("%zu steps: strict decrease=%d, final radius %.6g (|r-1|<=0.01), winding %.4g rad (>4pi=%.4g), tail share %.4g (>0.1), verdict %s",
               r.trace.size() - 1, strict, rad, wind, 4.0 * std::numbers::pi, share, to_string(r.classification.verdict)));
}

void ppm_em() {
    const ExperimentResult r = run_ppm_em(PpmEmConfig{});
    bool ok = true;
    std::string d;
    for (const auto& [name, v] : r.details["functions"].items()) {
        const double w = v["max_ap_residual"];
        ok = ok && w <= 1e-8;
        d += fmt("%s max residual %.3g; ", name.c_str(), w);
    }
    report("ppm-em-equivalence", ok && r.details["functions"].size() == 2, d + "(<=1e-8)");
}

std::vector<Vec> scalar_sequence(std::size_t n, const std::function<double(std::size_t)>& e) {
    std::vector<Vec> xs;
    for (std::size_t k = 0; k < n; ++k) xs.push_back({e(k)});
    return xs;
}

void rate_machinery() {
    const RateFit sub = fit_rate(scalar_sequence(1000, [](std::size_t k) { return k ? 1.0 / static_cast<double>(k) : 1.0; }),
                                 Matrix::identity(1), {0.0});
    const RateFit lin = fit_rate(scalar_sequence(60, [](std::size_t k) { return std::pow(0.5, static_cast<double>(k)); }),
                                 Matrix::identity(1), {0.0});
    Vec f2, g2, f4, g4;
    for (int i = 0; i < 40; ++i) {
        const double a = std::exp(-0.2 * i), b = 1.0 / (1.0 + i);
        f2.push_back(a * a);
        g2.push_back(2.0 * a);
        f4.push_back(std::pow(b, 4));
        g4.push_back(4.0 * std::pow(b, 3));
    }
    const double k2 = kl_exponent_estimate(f2, g2, 0.0).theta, k4 = kl_exponent_estimate(f4, g4, 0.0).theta;
    const bool ok = sub.kind == RateKind::sublinear && std::abs(sub.param - 1.0) <= 0.05 && lin.kind == RateKind::linear &&
                    std::abs(lin.param - 0.5) <= 0.025 && std::abs(k2 - 0.5) <= 0.05 && std::abs(k4 - 0.75) <= 0.05;
    report("rate-machinery", ok,
           fmt("k^-1 -> %s p=%.4g; 0.5^k -> %s alpha=%.4g; KL exponents %.4g, %.4g", to_string(sub.kind), sub.param,
               to_string(lin.kind), lin.param, k2, k4));
}

void regularization_contrast() {
    const DuplicatedRuns runs = duplicated_runs(DuplicatedConfig{});
    const double reg = runs.regularized_sums[runs.regularized_sums.size() / 2];
    const double plain = runs.plain_sums[runs.plain_sums.size() / 2];
    report("regularized-em-contrast", reg < 1e-6 && plain > 1e-5,
           fmt("spare-part tail sum: regularized %.3g (<1e-6), plain %.4g (>1e-5)", reg, plain));
}

}  // namespace

int main() {
    guarded("legendre-duality", legendre_duality);
    guarded("kl-closed-form", kl_identity);
    guarded("em-equals-kl-prox", em_is_prox);
    guarded("monotone-descent", monotone_everywhere);
    guarded("unconstrained-gaussian", unconstrained);
    guarded("curved-gaussian", curved);
    guarded("split-detection", split_detection);
    guarded("information-split", information_split);
    guarded("amari-check", amari);
    guarded("kl-arc", kl_arc);
    guarded("mexican-hat-cycling", mexican_hat);
    guarded("ppm-em-equivalence", ppm_em);
    guarded("rate-machinery", rate_machinery);
    guarded("regularized-em-contrast", regularization_contrast);
    std::printf("%d criteria failed\n", failures);
    return failures ? 1 : 0;
}
