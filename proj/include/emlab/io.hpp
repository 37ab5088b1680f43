#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "emlab/error.hpp"
#include "emlab/trace.hpp"

namespace emlab {

using Json = nlohmann::json;

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return kNaN;
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("trace csv: bad number '" + s + "'");
    }
    if (pos != s.size()) throw ConfigError("trace csv: bad number '" + s + "'");
    return v;
}

// k, x0..x{n-1}, f, psi_reg, step_norm, proj_step_norm, residual, lambda,
// domain_margin, grad_norm, reg_grad_norm, then the trace's extra columns
inline void write_trace_csv(std::ostream& os, const IterateTrace& tr) {
    const std::size_t n = tr.empty() ? 0 : tr.rows.front().x.size();
    os << "k";
    for (std::size_t i = 0; i < n; ++i) os << ",x" << i;
    os << ",f,psi_reg,step_norm,proj_step_norm,residual,lambda,domain_margin,grad_norm,reg_grad_norm";
    for (const auto& e : tr.extra_names) os << ',' << e;
    os << '\n';
    for (const auto& r : tr.rows) {
        os << r.k;
        for (double v : r.x) os << ',' << format_double(v);
        for (double v : {r.f, r.psi_reg, r.step_norm, r.proj_step_norm, r.residual, r.lambda, r.domain_margin, r.grad_norm,
                         r.reg_grad_norm})
            os << ',' << format_double(v);
        for (std::size_t i = 0; i < tr.extra_names.size(); ++i) os << ',' << format_double(i < r.extra.size() ? r.extra[i] : kNaN);
        os << '\n';
    }
}

inline void write_trace_csv(const std::string& path, const IterateTrace& tr) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path);
    write_trace_csv(os, tr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline IterateTrace read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("trace csv: empty input");
    const auto head = split_csv_line(line);
    if (head.empty() || head[0] != "k") throw ConfigError("trace csv: first column must be k");
    std::size_t n = 0;
    while (1 + n < head.size() && head[1 + n] == "x" + std::to_string(n)) ++n;
    static const char* fixed[] = {"f", "psi_reg", "step_norm", "proj_step_norm", "residual",
                                  "lambda", "domain_margin", "grad_norm", "reg_grad_norm"};
    const std::size_t base = 1 + n;
    for (std::size_t i = 0; i < 9; ++i)
        if (base + i >= head.size() || head[base + i] != fixed[i])
            throw ConfigError(std::string("trace csv: missing column ") + fixed[i]);
    IterateTrace tr;
    tr.extra_names.assign(head.begin() + static_cast<std::ptrdiff_t>(base + 9), head.end());
    tr.P = Matrix::identity(n);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        if (c.size() != head.size()) throw ConfigError("trace csv: ragged row");
        IterateRecord r;
        r.k = static_cast<std::size_t>(std::stoull(c[0]));
        for (std::size_t i = 0; i < n; ++i) r.x.push_back(parse_double(c[1 + i]));
        double* dst[] = {&r.f, &r.psi_reg, &r.step_norm, &r.proj_step_norm, &r.residual,
                         &r.lambda, &r.domain_margin, &r.grad_norm, &r.reg_grad_norm};
        for (std::size_t i = 0; i < 9; ++i) *dst[i] = parse_double(c[base + i]);
        for (std::size_t i = base + 9; i < c.size(); ++i) r.extra.push_back(parse_double(c[i]));
        tr.rows.push_back(std::move(r));
    }
    return tr;
}

inline IterateTrace read_trace_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read " + path);
    return read_trace_csv(is);
}

// JSON cannot carry inf/nan; they are written as strings
inline Json json_number(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

inline Json json_vec(const Vec& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(json_number(x));
    return a;
}

// ---- config helpers ----------------------------------------------------------------

inline void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline double get_number(const Json& j, const std::string& key, double def) {
    if (!j.contains(key)) return def;
    const Json& v = j.at(key);
    if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError("config: '" + key + "' must be finite");
    return x;
}

inline int get_int(const Json& j, const std::string& key, int def) {
    if (!j.contains(key)) return def;
    const Json& v = j.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("config: '" + key + "' must be an integer");
    return v.get<int>();
}

inline Vec get_vec(const Json& j, const std::string& key, const Vec& def) {
    if (!j.contains(key)) return def;
    const Json& v = j.at(key);
    if (!v.is_array()) throw ConfigError("config: '" + key + "' must be an array of numbers");
    Vec out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError("config: '" + key + "' must be an array of numbers");
        const double x = e.get<double>();
        if (!std::isfinite(x)) throw ConfigError("config: '" + key + "' entries must be finite");
        out.push_back(x);
    }
    return out;
}

}  // namespace emlab
