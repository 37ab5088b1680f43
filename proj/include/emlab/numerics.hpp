#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "emlab/error.hpp"

namespace emlab {

using Vec = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---- vector helpers ---------------------------------------------------------

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec operator+(const Vec& a, const Vec& b) {
    Vec r(a);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
    return r;
}

inline Vec operator-(const Vec& a, const Vec& b) {
    Vec r(a);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return r;
}

inline Vec operator*(double s, const Vec& a) {
    Vec r(a);
    for (auto& v : r) v *= s;
    return r;
}

inline Vec axpy(double a, const Vec& x, const Vec& y) {  // a*x + y
    Vec r(y);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += a * x[i];
    return r;
}

inline bool all_finite(const Vec& a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

inline double distance(const Vec& a, const Vec& b) { return norm(a - b); }

// ---- dense matrices ---------------------------------------------------------

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : r_(r), c_(c), a_(r * c, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        r_ = rows.size();
        c_ = r_ ? rows.begin()->size() : 0;
        a_.reserve(r_ * c_);
        for (const auto& row : rows) {
            if (row.size() != c_) throw NumericError("ragged matrix literal");
            a_.insert(a_.end(), row.begin(), row.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Matrix diag(const Vec& d) {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const { return r_; }
    std::size_t cols() const { return c_; }
    bool empty() const { return a_.empty(); }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }

    Vec row(std::size_t i) const { return Vec(a_.begin() + i * c_, a_.begin() + (i + 1) * c_); }
    Vec col(std::size_t j) const {
        Vec v(r_);
        for (std::size_t i = 0; i < r_; ++i) v[i] = (*this)(i, j);
        return v;
    }

    Matrix transpose() const {
        Matrix t(c_, r_);
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t j = 0; j < c_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    double frobenius() const {
        double s = 0.0;
        for (double v : a_) s += v * v;
        return std::sqrt(s);
    }
    double max_abs() const {
        double s = 0.0;
        for (double v : a_) s = std::max(s, std::abs(v));
        return s;
    }
    bool finite() const { return all_finite(a_); }

    const std::vector<double>& data() const { return a_; }

private:
    std::size_t r_ = 0, c_ = 0;
    std::vector<double> a_;
};

inline Vec operator*(const Matrix& m, const Vec& x) {
    if (m.cols() != x.size()) throw NumericError("matrix-vector dimension mismatch");
    Vec y(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) y[i] += m(i, j) * x[j];
    return y;
}

inline Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw NumericError("matrix product dimension mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
    Matrix c(a);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) += b(i, j);
    return c;
}

inline Matrix operator*(double s, const Matrix& a) {
    Matrix c(a);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) *= s;
    return c;
}

inline Matrix outer(const Vec& a, const Vec& b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

// Square symmetric matrix. Construction from a general matrix checks symmetry
// up to a relative tolerance and then symmetrizes exactly.
class SymMatrix : public Matrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t n) : Matrix(n, n) {}
    SymMatrix(std::initializer_list<std::initializer_list<double>> rows) : SymMatrix(Matrix(rows)) {}
    explicit SymMatrix(const Matrix& m, double rel_tol = 1e-8) : Matrix(m) {
        if (m.rows() != m.cols()) throw NumericError("symmetric matrix must be square");
        if (!m.finite()) throw NumericError("non-finite matrix entry");
        const double scale = std::max(1.0, m.max_abs());
        for (std::size_t i = 0; i < rows(); ++i)
            for (std::size_t j = i + 1; j < cols(); ++j) {
                const double a = (*this)(i, j), b = (*this)(j, i);
                if (std::abs(a - b) > rel_tol * scale) throw NumericError("matrix is not symmetric");
                (*this)(i, j) = (*this)(j, i) = 0.5 * (a + b);
            }
    }
    std::size_t dim() const { return rows(); }
};

// ---- symmetric eigendecomposition (cyclic Jacobi) ---------------------------

struct SymEig {
    Vec values;      // non-increasing
    Matrix vectors;  // column j is the eigenvector of values[j]
};

inline SymEig sym_eig(const SymMatrix& s, double tol = 1e-15, int max_sweeps = 100) {
    const std::size_t n = s.dim();
    if (!s.finite()) throw NumericError("sym_eig: non-finite input");
    Matrix a = s;
    Matrix v = Matrix::identity(n);
    const double fro = std::max(s.frobenius(), std::numeric_limits<double>::min());

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(2.0 * off) <= tol * fro) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    SymEig out{Vec(n), Matrix(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        // sign convention: largest-magnitude component positive
        std::size_t imax = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(v(i, order[j])) > std::abs(v(imax, order[j])) + 1e-14) imax = i;
        const double sgn = v(imax, order[j]) < 0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = sgn * v(i, order[j]);
    }
    return out;
}

// number of eigenvalues above rel_tol * max(lambda_max, 1); values must be sorted non-increasing
inline std::size_t rank_with_tol(const Vec& values, double rel_tol = 1e-8) {
    if (values.empty()) return 0;
    const double thr = rel_tol * std::max(values.front(), 1.0);
    if (values.back() < -10.0 * thr) throw NumericError("rank_with_tol: input is not positive semidefinite");
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [&](double l) { return l > thr; }));
}

struct SplitBasis {
    Matrix Q;  // orthogonal; rows are eigenvectors, leading m rows span the retained subspace
    Matrix P;  // orthogonal projector onto that subspace
};

inline SplitBasis projection_from_eigvecs(const SymEig& e, std::size_t m) {
    const std::size_t n = e.vectors.rows();
    if (m > n) throw NumericError("projection_from_eigvecs: m exceeds dimension");
    SplitBasis s{e.vectors.transpose(), Matrix(n, n)};
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) s.P(i, j) += e.vectors(i, k) * e.vectors(j, k);
    return s;
}

// ---- linear solves ----------------------------------------------------------

// LU with partial pivoting; nullopt when the matrix is numerically singular
inline std::optional<Vec> lu_solve(Matrix a, Vec b, double pivot_tol = 1e-14) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw NumericError("lu_solve: dimension mismatch");
    const double scale = std::max(a.max_abs(), std::numeric_limits<double>::min());
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (!(std::abs(a(piv, k)) > pivot_tol * scale)) return std::nullopt;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            b[i] -= f * b[k];
        }
    }
    Vec x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    if (!all_finite(x)) return std::nullopt;
    return x;
}

// Cholesky solve; nullopt unless the matrix is positive definite
inline std::optional<Vec> cholesky_solve(const Matrix& a, const Vec& b) {
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) return std::nullopt;
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    Vec y(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = y[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

// Newton-type solve of A x = b for symmetric A. Positive definite: Cholesky.
// Otherwise spectral: near-null directions are dropped (pseudo-inverse) and
// negative curvature is replaced by its magnitude, so -A^+ g stays a descent
// direction and never moves along exact kernel directions.
inline Vec damped_solve(const Matrix& a, const Vec& b) {
    const std::size_t n = a.rows();
    if (n == 0) return {};
    if (auto x = cholesky_solve(a, b)) return *x;
    const SymEig e = sym_eig(SymMatrix(a, 1e-6));
    const double scale = std::max({std::abs(e.values.front()), std::abs(e.values.back()), 1e-300});
    Vec x(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double l = std::abs(e.values[k]);
        if (l <= 1e-12 * scale) continue;
        const Vec v = e.vectors.col(k);
        const double c = dot(v, b) / l;
        for (std::size_t i = 0; i < n; ++i) x[i] += c * v[i];
    }
    return x;
}

// orthonormal basis of the null space of A (rows = constraints)
inline Matrix null_space(const Matrix& a, double rel_tol = 1e-10) {
    const std::size_t n = a.cols();
    if (a.rows() == 0) return Matrix::identity(n);
    const SymEig e = sym_eig(SymMatrix(a.transpose() * a));
    const std::size_t r = rank_with_tol(e.values, rel_tol);
    Matrix ns(n, n - r);
    for (std::size_t j = r; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) ns(i, j - r) = e.vectors(i, j);
    return ns;
}

// minimum-norm solution of A x = b (A has full row rank after rank filtering)
inline Vec least_norm_solution(const Matrix& a, const Vec& b) {
    if (a.rows() == 0) return Vec(a.cols(), 0.0);
    const Matrix aat = a * a.transpose();
    auto y = lu_solve(aat, b);
    if (!y) throw NumericError("least_norm_solution: rank-deficient constraint rows");
    return a.transpose() * *y;
}

// ---- Newton for square systems ----------------------------------------------

struct NewtonOptions {
    double tol = 1e-10;   // on ||F||
    int max_iter = 100;
    int max_halvings = 50;
};

struct NewtonResult {
    Vec x;
    bool converged = false;
    int iterations = 0;
    double residual = kInf;
    bool slow = false;          // observed contraction of ||F|| stayed linear
    bool fallback_used = false; // singular Jacobian or failed line search at some step
    std::string message;
};

template <class F, class J>
NewtonResult newton_solve(F&& fun, J&& jac, Vec x, const NewtonOptions& opt = {}) {
    NewtonResult res;
    Vec fx = fun(x);
    if (!all_finite(fx)) throw NumericError("newton_solve: F not finite at start");
    double r = norm(fx);
    std::vector<double> hist{r};
    for (int it = 0; it < opt.max_iter && r > opt.tol; ++it) {
        const Matrix jx = jac(x);
        Vec dir;
        if (auto d = lu_solve(jx, (-1.0) * fx)) {
            dir = *d;
        } else {
            res.fallback_used = true;
            dir = (-1.0) * (jx.transpose() * fx);  // steepest descent on ||F||^2/2
        }
        double step = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h, step *= 0.5) {
            Vec xt = axpy(step, dir, x);
            Vec ft = fun(xt);
            if (!all_finite(ft)) continue;
            const double rt = norm(ft);
            if (rt < r) {
                x = std::move(xt);
                fx = std::move(ft);
                r = rt;
                accepted = true;
                break;
            }
        }
        res.iterations = it + 1;
        if (!accepted) {
            res.fallback_used = true;
            res.message = "line search failed";
            break;
        }
        hist.push_back(r);
    }
    res.x = x;
    res.residual = r;
    res.converged = r <= opt.tol;
    if (hist.size() >= 4) {
        const std::size_t k = hist.size() - 1;
        const double q1 = hist[k] / hist[k - 1], q2 = hist[k - 1] / hist[k - 2];
        res.slow = q1 > 0.1 && q2 > 0.1;
    }
    if (!res.converged && res.message.empty()) res.message = "max_iter reached";
    return res;
}

// ---- finite differences -----------------------------------------------------

struct FdGradient {
    Vec value;
    bool one_sided = false;
};

struct FdHessian {
    SymMatrix value;
    bool one_sided = false;
};

template <class F>
FdGradient fd_gradient(F&& f, const Vec& x, double h = 1e-6) {
    FdGradient out{Vec(x.size()), false};
    const double f0 = f(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double hi = h * std::max(1.0, std::abs(x[i]));
        Vec xp(x), xm(x);
        xp[i] += hi;
        xm[i] -= hi;
        const double fp = f(xp), fm = f(xm);
        if (std::isfinite(fp) && std::isfinite(fm)) {
            out.value[i] = (fp - fm) / (2.0 * hi);
            continue;
        }
        out.one_sided = true;
        const double s = std::isfinite(fp) ? 1.0 : -1.0;
        Vec x2(x);
        x2[i] += 2.0 * s * hi;
        const double f1 = std::isfinite(fp) ? fp : fm, f2 = f(x2);
        if (!std::isfinite(f1) || !std::isfinite(f2) || !std::isfinite(f0))
            throw NumericError("fd_gradient: no finite stencil");
        out.value[i] = s * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * hi);
    }
    return out;
}

// Jacobian of a vector-valued map by central differences (one-sided fallback)
template <class G>
std::pair<Matrix, bool> fd_jacobian(G&& g, const Vec& x, double h = 1e-6) {
    const Vec g0 = g(x);
    Matrix jac(g0.size(), x.size());
    bool one_sided = false;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double hj = h * std::max(1.0, std::abs(x[j]));
        Vec xp(x), xm(x);
        xp[j] += hj;
        xm[j] -= hj;
        Vec gp = g(xp), gm = g(xm);
        if (all_finite(gp) && all_finite(gm)) {
            for (std::size_t i = 0; i < g0.size(); ++i) jac(i, j) = (gp[i] - gm[i]) / (2.0 * hj);
            continue;
        }
        one_sided = true;
        const double s = all_finite(gp) ? 1.0 : -1.0;
        Vec x2(x);
        x2[j] += 2.0 * s * hj;
        const Vec g1 = all_finite(gp) ? gp : gm, g2 = g(x2);
        if (!all_finite(g1) || !all_finite(g2)) throw NumericError("fd_jacobian: no finite stencil");
        for (std::size_t i = 0; i < g0.size(); ++i) jac(i, j) = s * (-3.0 * g0[i] + 4.0 * g1[i] - g2[i]) / (2.0 * hj);
    }
    return {jac, one_sided};
}

template <class F>
FdHessian fd_hessian(F&& f, const Vec& x, double h = 1e-4) {
    const std::size_t n = x.size();
    Matrix hm(n, n);
    const double f0 = f(x);
    bool ok = std::isfinite(f0);
    auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
        Vec y(x);
        y[i] += di;
        y[j] += dj;
        return f(y);
    };
    for (std::size_t i = 0; i < n && ok; ++i) {
        const double hi = h * std::max(1.0, std::abs(x[i]));
        for (std::size_t j = i; j < n && ok; ++j) {
            const double hj = h * std::max(1.0, std::abs(x[j]));
            double v;
            if (i == j) {
                const double fp = at(i, hi, i, 0.0), fm = at(i, -hi, i, 0.0);
                v = (fp - 2.0 * f0 + fm) / (hi * hi);
            } else {
                const double fpp = at(i, hi, j, hj), fpm = at(i, hi, j, -hj);
                const double fmp = at(i, -hi, j, hj), fmm = at(i, -hi, j, -hj);
                v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            }
            if (!std::isfinite(v)) ok = false;
            hm(i, j) = hm(j, i) = v;
        }
    }
    if (ok) return {SymMatrix(hm), false};
    // near a domain edge: differentiate a one-sided gradient instead
    auto grad = [&](const Vec& y) {
        try {
            return fd_gradient(f, y, std::sqrt(h) * 1e-2).value;
        } catch (const NumericError&) {
            return Vec(n, kNaN);
        }
    };
    auto [jac, _] = fd_jacobian(grad, x, h);
    return {SymMatrix(jac, 1e-3), true};
}

// ---- scalar kernels ---------------------------------------------------------

// root of g on [a,b] given a sign change (TOMS 748)
template <class G>
double bracketed_root(G&& g, double a, double b, double ga, double gb) {
    if (ga == 0.0) return a;
    if (gb == 0.0) return b;
    if ((ga > 0) == (gb > 0)) throw NumericError("bracketed_root: no sign change");
    std::uintmax_t iters = 200;
    auto tol = [](double l, double u) { return std::abs(u - l) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(l)); };
    const auto r = boost::math::tools::toms748_solve(g, a, b, ga, gb, tol, iters);
    return 0.5 * (r.first + r.second);
}

// local minimizer of f on [a,b] (Brent); returns {u, f(u)}
template <class F>
std::pair<double, double> minimize_1d(F&& f, double a, double b) {
    auto r = boost::math::tools::brent_find_minima(f, a, b, std::numeric_limits<double>::digits / 2);
    return {r.first, r.second};
}

}  // namespace emlab
