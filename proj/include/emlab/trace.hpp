#pragma once

#include <string>
#include <vector>

#include "emlab/numerics.hpp"

namespace emlab {

enum class StopReason { none, step_tol, max_iter, boundary, escaping, dual_domain };

inline const char* to_string(StopReason s) {
    switch (s) {
        case StopReason::none: return "none";
        case StopReason::step_tol: return "step_tol";
        case StopReason::max_iter: return "max_iter";
        case StopReason::boundary: return "boundary";
        case StopReason::escaping: return "escaping";
        case StopReason::dual_domain: return "dual_domain";
    }
    return "?";
}

struct IterateRecord {
    std::size_t k = 0;
    Vec x;
    double f = kNaN;
    double psi_reg = 0.0;         // Psi(x_k, x_{k-1})
    double step_norm = 0.0;       // ||x_k - x_{k-1}||
    double proj_step_norm = 0.0;  // ||P (x_k - x_{k-1})||
    double residual = 0.0;        // ||e_k||
    double lambda = kNaN;         // lambda_{k-1}
    double domain_margin = kInf;
    double grad_norm = kNaN;      // ||g_k||, tangential gradient of f at x_k
    double reg_grad_norm = kNaN;  // ||grad_1 Psi(x_k, x_{k-1})||
    Vec extra;                    // experiment-specific columns (names live on the trace)
};

template <class Record>
struct BasicTrace {
    std::vector<Record> rows;
    Matrix P;                              // projection used for proj_step_norm
    StopReason stop = StopReason::none;
    bool boundary_flag = false;
    bool descent_ok = true;                // monotone objective within tolerance
    double max_increase = 0.0;             // largest observed objective increase
    std::vector<std::string> extra_names;  // labels of Record::extra
    std::vector<std::string> notes;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
    const Record& back() const { return rows.back(); }

    std::vector<Vec> points() const {
        std::vector<Vec> xs;
        xs.reserve(rows.size());
        for (const auto& r : rows) xs.push_back(r.x);
        return xs;
    }
};

using IterateTrace = BasicTrace<IterateRecord>;

// trace from a bare point sequence (steps and norms filled in, P = identity)
inline IterateTrace trace_from_points(const std::vector<Vec>& xs, const std::vector<double>& f = {}) {
    IterateTrace t;
    if (xs.empty()) return t;
    t.P = Matrix::identity(xs.front().size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
        IterateRecord r;
        r.k = k;
        r.x = xs[k];
        r.f = k < f.size() ? f[k] : kNaN;
        if (k > 0) r.step_norm = r.proj_step_norm = distance(xs[k], xs[k - 1]);
        t.rows.push_back(std::move(r));
    }
    return t;
}

// slice any derived trace down to the generic record type
template <class Record>
IterateTrace as_iterate_trace(const BasicTrace<Record>& t) {
    IterateTrace out;
    out.P = t.P;
    out.stop = t.stop;
    out.boundary_flag = t.boundary_flag;
    out.descent_ok = t.descent_ok;
    out.max_increase = t.max_increase;
    out.extra_names = t.extra_names;
    out.notes = t.notes;
    for (const auto& r : t.rows) out.rows.push_back(static_cast<const IterateRecord&>(r));
    return out;
}

}  // namespace emlab
