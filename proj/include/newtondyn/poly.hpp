#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"

namespace newtondyn {

// ---------------------------------------------------------------------------
// Interval arithmetic (round-to-nearest; callers add their own slack)
// ---------------------------------------------------------------------------

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double v) : lo(v), hi(v) {}
    Interval(double l, double h) : lo(l), hi(h) {}

    bool contains_zero() const { return lo <= 0.0 && hi >= 0.0; }
    double magnitude() const { return std::max(std::abs(lo), std::abs(hi)); }

    friend Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }
    friend Interval operator-(Interval a, Interval b) { return {a.lo - b.hi, a.hi - b.lo}; }
    friend Interval operator*(Interval a, Interval b)
    {
        const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
        return {std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4})};
    }
};

inline Interval ipow(Interval a, int n)
{
    if (n == 0) return {1.0, 1.0};
    const double l = std::pow(a.lo, n), h = std::pow(a.hi, n);
    if (n % 2 == 1) return {l, h};
    if (a.lo >= 0.0) return {l, h};
    if (a.hi <= 0.0) return {h, l};
    return {0.0, std::max(l, h)};
}

namespace detail {

template <class T>
void fill_powers(std::span<T> out, const T& v)
{
    if (out.empty()) return;
    out[0] = T(1.0);
    for (std::size_t i = 1; i < out.size(); ++i) out[i] = out[i - 1] * v;
}

inline void fill_powers(std::span<Interval> out, const Interval& v)
{
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ipow(v, static_cast<int>(i));
}

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

// ---------------------------------------------------------------------------
// MultiPoly: bivariate real polynomial in canonical sparse form
// ---------------------------------------------------------------------------

/// Sparse bivariate polynomial sum c * x^ex * y^ey. Terms are kept sorted by
/// (ex, ey), with no repeated exponent pair and no zero coefficient.
class MultiPoly {
public:
    struct Term {
        int ex = 0;
        int ey = 0;
        double coeff = 0.0;
    };

    MultiPoly() = default;
    explicit MultiPoly(std::vector<Term> terms) : terms_(std::move(terms)) { canonicalize(); }

    static MultiPoly constant(double c) { return MultiPoly({{0, 0, c}}); }
    static MultiPoly monomial(double c, int ex, int ey) { return MultiPoly({{ex, ey, c}}); }
    static MultiPoly x() { return monomial(1.0, 1, 0); }
    static MultiPoly y() { return monomial(1.0, 0, 1); }

    std::span<const Term> terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    /// Total degree; -1 for the zero polynomial.
    int degree() const
    {
        int d = -1;
        for (const auto& t : terms_) d = std::max(d, t.ex + t.ey);
        return d;
    }

    int degree_in(int var) const
    {
        int d = -1;
        for (const auto& t : terms_) d = std::max(d, var == 0 ? t.ex : t.ey);
        return d;
    }

    double coefficient(int ex, int ey) const
    {
        for (const auto& t : terms_)
            if (t.ex == ex && t.ey == ey) return t.coeff;
        return 0.0;
    }

    double max_abs_coeff() const
    {
        double m = 0.0;
        for (const auto& t : terms_) m = std::max(m, std::abs(t.coeff));
        return m;
    }

    template <class T>
    T operator()(const T& x, const T& y) const
    {
        const int mx = std::max(degree_in(0), 0) + 1;
        const int my = std::max(degree_in(1), 0) + 1;
        constexpr int kStack = 24;
        if (mx <= kStack && my <= kStack) {
            std::array<T, kStack> xp{}, yp{};
            return sum_terms(std::span<T>(xp.data(), mx), std::span<T>(yp.data(), my), x, y);
        }
        std::vector<T> xp(mx), yp(my);
        return sum_terms(std::span<T>(xp), std::span<T>(yp), x, y);
    }

    double operator()(Vec2 p) const { return (*this)(p.x, p.y); }

    /// Sum of |c| |x|^i |y|^j; the scale against which rounding error is judged.
    double magnitude_at(Vec2 p) const { return abs_poly()(std::abs(p.x), std::abs(p.y)); }

    MultiPoly abs_poly() const
    {
        auto t = terms_;
        for (auto& term : t) term.coeff = std::abs(term.coeff);
        MultiPoly r;
        r.terms_ = std::move(t);
        return r;
    }

    friend MultiPoly operator+(const MultiPoly& a, const MultiPoly& b)
    {
        auto t = a.terms_;
        t.insert(t.end(), b.terms_.begin(), b.terms_.end());
        return MultiPoly(std::move(t));
    }
    friend MultiPoly operator-(const MultiPoly& a) { return a * -1.0; }
    friend MultiPoly operator-(const MultiPoly& a, const MultiPoly& b) { return a + (-b); }
    friend MultiPoly operator*(const MultiPoly& a, double s)
    {
        auto t = a.terms_;
        for (auto& term : t) term.coeff *= s;
        return MultiPoly(std::move(t));
    }
    friend MultiPoly operator*(double s, const MultiPoly& a) { return a * s; }
    friend MultiPoly operator*(const MultiPoly& a, const MultiPoly& b)
    {
        std::vector<Term> t;
        t.reserve(a.terms_.size() * b.terms_.size());
        for (const auto& u : a.terms_)
            for (const auto& v : b.terms_) t.push_back({u.ex + v.ex, u.ey + v.ey, u.coeff * v.coeff});
        return MultiPoly(std::move(t));
    }
    MultiPoly& operator+=(const MultiPoly& o) { return *this = *this + o; }
    MultiPoly& operator-=(const MultiPoly& o) { return *this = *this - o; }
    MultiPoly& operator*=(const MultiPoly& o) { return *this = *this * o; }

    friend bool operator==(const MultiPoly& a, const MultiPoly& b)
    {
        if (a.terms_.size() != b.terms_.size()) return false;
        for (std::size_t i = 0; i < a.terms_.size(); ++i) {
            const auto &u = a.terms_[i], &v = b.terms_[i];
            if (u.ex != v.ex || u.ey != v.ey || u.coeff != v.coeff) return false;
        }
        return true;
    }

    std::string to_string() const
    {
        if (terms_.empty()) return "0";
        std::string out;
        // highest degree first reads naturally
        for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
            double c = it->coeff;
            if (out.empty()) {
                if (c < 0) {
                    out += "-";
                    c = -c;
                }
            } else {
                out += c < 0 ? " - " : " + ";
                c = std::abs(c);
            }
            const bool has_var = it->ex > 0 || it->ey > 0;
            std::string body;
            if (!has_var || c != 1.0) body = detail::format_double(c);
            auto append_var = [&](const char* name, int e) {
                if (e == 0) return;
                if (!body.empty()) body += "*";
                body += name;
                if (e > 1) body += "^" + std::to_string(e);
            };
            append_var("x", it->ex);
            append_var("y", it->ey);
            out += body;
        }
        return out;
    }

private:
    template <class T>
    T sum_terms(std::span<T> xp, std::span<T> yp, const T& x, const T& y) const
    {
        detail::fill_powers(xp, x);
        detail::fill_powers(yp, y);
        T acc = T(0.0);
        for (const auto& t : terms_) acc = acc + T(t.coeff) * xp[t.ex] * yp[t.ey];
        return acc;
    }

    void canonicalize()
    {
        std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) {
            return a.ex < b.ex || (a.ex == b.ex && a.ey < b.ey);
        });
        std::vector<Term> merged;
        merged.reserve(terms_.size());
        for (const auto& t : terms_) {
            if (t.ex < 0 || t.ey < 0) throw InvalidInput("negative exponent in polynomial term");
            if (!merged.empty() && merged.back().ex == t.ex && merged.back().ey == t.ey)
                merged.back().coeff += t.coeff;
            else
                merged.push_back(t);
        }
        std::erase_if(merged, [](const Term& t) { return t.coeff == 0.0; });
        terms_ = std::move(merged);
    }

    std::vector<Term> terms_;
};

inline MultiPoly pow(const MultiPoly& p, int n)
{
    if (n < 0) throw InvalidInput("negative polynomial power");
    MultiPoly result = MultiPoly::constant(1.0), base = p;
    while (n > 0) {
        if (n & 1) result *= base;
        n >>= 1;
        if (n > 0) base *= base;
    }
    return result;
}

/// Partial derivative with respect to x (var = 0) or y (var = 1).
inline MultiPoly diff(const MultiPoly& p, int var)
{
    std::vector<MultiPoly::Term> out;
    for (const auto& t : p.terms()) {
        const int e = var == 0 ? t.ex : t.ey;
        if (e == 0) continue;
        if (var == 0)
            out.push_back({t.ex - 1, t.ey, t.coeff * e});
        else
            out.push_back({t.ex, t.ey - 1, t.coeff * e});
    }
    return MultiPoly(std::move(out));
}

/// p(gx(x,y), gy(x,y)).
inline MultiPoly compose(const MultiPoly& p, const MultiPoly& gx, const MultiPoly& gy)
{
    const int mx = std::max(p.degree_in(0), 0), my = std::max(p.degree_in(1), 0);
    std::vector<MultiPoly> xp(mx + 1), yp(my + 1);
    xp[0] = yp[0] = MultiPoly::constant(1.0);
    for (int i = 1; i <= mx; ++i) xp[i] = xp[i - 1] * gx;
    for (int i = 1; i <= my; ++i) yp[i] = yp[i - 1] * gy;
    MultiPoly acc;
    for (const auto& t : p.terms()) acc += t.coeff * (xp[t.ex] * yp[t.ey]);
    return acc;
}

/// Coefficientwise comparison relative to the larger coefficient scale.
inline bool approx_equal(const MultiPoly& a, const MultiPoly& b, double rel_tol = 1e-12)
{
    const MultiPoly d = a - b;
    const double scale = std::max({1.0, a.max_abs_coeff(), b.max_abs_coeff()});
    return d.max_abs_coeff() <= rel_tol * scale;
}

// ---------------------------------------------------------------------------
// PlaneMap
// ---------------------------------------------------------------------------

/// Polynomial map of the real plane, (x,y) -> (first(x,y), second(x,y)).
class PlaneMap {
public:
    PlaneMap(MultiPoly first, MultiPoly second) : first_(std::move(first)), second_(std::move(second))
    {
        if (first_.is_zero() && second_.is_zero()) throw InvalidInput("plane map with both components zero");
    }

    const MultiPoly& first() const { return first_; }
    const MultiPoly& second() const { return second_; }
    const MultiPoly& component(int i) const { return i == 0 ? first_ : second_; }

    Vec2 operator()(Vec2 p) const { return {first_(p.x, p.y), second_(p.x, p.y)}; }

    template <class T>
    std::pair<T, T> operator()(const T& x, const T& y) const
    {
        return {first_(x, y), second_(x, y)};
    }

    int degree() const { return std::max(first_.degree(), second_.degree()); }

    /// self o (gx, gy)
    PlaneMap compose_with(const PlaneMap& g) const
    {
        return {compose(first_, g.first_, g.second_), compose(second_, g.first_, g.second_)};
    }

    friend bool operator==(const PlaneMap&, const PlaneMap&) = default;

private:
    MultiPoly first_;
    MultiPoly second_;
};

inline PlaneMap identity_map() { return {MultiPoly::x(), MultiPoly::y()}; }

inline bool approx_equal(const PlaneMap& a, const PlaneMap& b, double rel_tol = 1e-12)
{
    return approx_equal(a.first(), b.first(), rel_tol) && approx_equal(a.second(), b.second(), rel_tol);
}

// ---------------------------------------------------------------------------
// UniComplexPoly
// ---------------------------------------------------------------------------

using cplx = std::complex<double>;

/// Dense univariate polynomial with complex coefficients, ascending degree.
class UniComplexPoly {
public:
    UniComplexPoly() = default;
    explicit UniComplexPoly(std::vector<cplx> coeffs) : c_(std::move(coeffs)) { trim(); }
    UniComplexPoly(std::initializer_list<cplx> coeffs) : c_(coeffs) { trim(); }

    static UniComplexPoly constant(cplx v) { return UniComplexPoly({v}); }
    static UniComplexPoly z() { return UniComplexPoly({0.0, 1.0}); }

    /// Real univariate polynomial taken from the x-only terms of a MultiPoly.
    static UniComplexPoly from_real(const MultiPoly& p)
    {
        if (p.degree_in(1) > 0) throw InvalidInput("expected a polynomial in one variable");
        std::vector<cplx> c(std::max(p.degree(), 0) + 1, 0.0);
        for (const auto& t : p.terms()) c[t.ex] += t.coeff;
        return UniComplexPoly(std::move(c));
    }

    std::span<const cplx> coeffs() const { return c_; }
    int degree() const { return static_cast<int>(c_.size()) - 1; }
    bool is_zero() const { return c_.empty(); }
    cplx leading() const { return c_.empty() ? cplx{} : c_.back(); }
    cplx coefficient(int k) const { return k >= 0 && k < static_cast<int>(c_.size()) ? c_[k] : cplx{}; }

    bool is_real(double tol = 0.0) const
    {
        return std::all_of(c_.begin(), c_.end(), [&](cplx v) { return std::abs(v.imag()) <= tol; });
    }

    double max_abs_coeff() const
    {
        double m = 0.0;
        for (auto v : c_) m = std::max(m, std::abs(v));
        return m;
    }

    template <class T>
    T operator()(const T& z) const
    {
        T acc = T(0.0);
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + T(*it);
        return acc;
    }

    /// Real evaluation; imaginary parts of the coefficients are ignored.
    double eval_real(double x) const
    {
        double acc = 0.0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + it->real();
        return acc;
    }

    UniComplexPoly derivative() const
    {
        if (c_.size() <= 1) return {};
        std::vector<cplx> d(c_.size() - 1);
        for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = c_[k] * static_cast<double>(k);
        return UniComplexPoly(std::move(d));
    }

    friend UniComplexPoly operator+(const UniComplexPoly& a, const UniComplexPoly& b)
    {
        std::vector<cplx> r(std::max(a.c_.size(), b.c_.size()), 0.0);
        for (std::size_t i = 0; i < a.c_.size(); ++i) r[i] += a.c_[i];
        for (std::size_t i = 0; i < b.c_.size(); ++i) r[i] += b.c_[i];
        return UniComplexPoly(std::move(r));
    }
    friend UniComplexPoly operator-(const UniComplexPoly& a) { return a * cplx(-1.0); }
    friend UniComplexPoly operator-(const UniComplexPoly& a, const UniComplexPoly& b) { return a + (-b); }
    friend UniComplexPoly operator*(const UniComplexPoly& a, cplx s)
    {
        auto r = a.c_;
        for (auto& v : r) v *= s;
        return UniComplexPoly(std::move(r));
    }
    friend UniComplexPoly operator*(cplx s, const UniComplexPoly& a) { return a * s; }
    friend UniComplexPoly operator*(const UniComplexPoly& a, const UniComplexPoly& b)
    {
        if (a.is_zero() || b.is_zero()) return {};
        std::vector<cplx> r(a.c_.size() + b.c_.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.c_.size(); ++i)
            for (std::size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
        return UniComplexPoly(std::move(r));
    }
    UniComplexPoly& operator+=(const UniComplexPoly& o) { return *this = *this + o; }
    UniComplexPoly& operator*=(const UniComplexPoly& o) { return *this = *this * o; }

    friend bool operator==(const UniComplexPoly&, const UniComplexPoly&) = default;

private:
    void trim()
    {
        while (!c_.empty() && c_.back() == cplx(0.0)) c_.pop_back();
    }

    std::vector<cplx> c_;
};

inline UniComplexPoly pow(const UniComplexPoly& p, int n)
{
    if (n < 0) throw InvalidInput("negative polynomial power");
    UniComplexPoly r = UniComplexPoly::constant(1.0);
    for (int i = 0; i < n; ++i) r *= p;
    return r;
}

// ---------------------------------------------------------------------------
// Univariate complex roots (Aberth-Ehrlich + Newton polish)
// ---------------------------------------------------------------------------

struct ComplexRoot {
    cplx value;
    int multiplicity = 1;
};

/// Residual bound a computed root must meet: tol (1+|r|)^deg max|coeff|.
inline double root_residual_bound(const UniComplexPoly& p, cplx r, double tol)
{
    return tol * std::pow(1.0 + std::abs(r), p.degree()) * p.max_abs_coeff();
}

namespace detail {

inline std::vector<cplx> aberth(const std::vector<cplx>& monic)
{
    const int n = static_cast<int>(monic.size()) - 1;
    // Fujiwara-style radius for the initial circle
    double radius = 0.0;
    for (int k = 1; k <= n; ++k) radius = std::max(radius, std::pow(std::abs(monic[n - k]), 1.0 / k));
    radius = std::max(radius, 1e-3);

    std::vector<cplx> z(n);
    for (int j = 0; j < n; ++j)
        z[j] = std::polar(radius, 2.0 * std::numbers::pi * j / n + 0.4);

    auto eval = [&](cplx x, cplx& pv, cplx& dv) {
        pv = monic[n];
        dv = 0.0;
        for (int k = n - 1; k >= 0; --k) {
            dv = dv * x + pv;
            pv = pv * x + monic[k];
        }
    };

    for (int iter = 0; iter < 800; ++iter) {
        bool done = true;
        for (int i = 0; i < n; ++i) {
            cplx pv, dv;
            eval(z[i], pv, dv);
            if (pv == cplx(0.0)) continue;
            auto inv = [](cplx a) { return std::conj(a) / std::norm(a); };
            cplx s = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i) s += inv(z[i] - z[j]);
            const cplx w = inv(dv * inv(pv) - s);
            if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) continue;
            z[i] -= w;
            if (std::norm(w) > 16e-32 * std::norm(z[i])) done = false;
        }
        if (done) break;
    }
    return z;
}

} // namespace detail

/// All deg(p) complex roots, grouped into clusters with multiplicity.
/// Clusters are merged only when their centroid still meets the residual
/// bound, so nearby simple roots are kept apart.
inline std::vector<ComplexRoot> univariate_complex_roots(const UniComplexPoly& p, double tol = 1e-10)
{
    if (p.degree() < 1) throw InvalidInput("root finding needs a polynomial of degree >= 1");

    std::vector<ComplexRoot> out;
    auto c = std::vector<cplx>(p.coeffs().begin(), p.coeffs().end());
    int zeros = 0;
    while (c[zeros] == cplx(0.0)) ++zeros;
    if (zeros > 0) {
        out.push_back({0.0, zeros});
        c.erase(c.begin(), c.begin() + zeros);
    }

    std::vector<cplx> roots;
    const int n = static_cast<int>(c.size()) - 1;
    if (n == 1) {
        roots.push_back(-c[0] / c[1]);
    } else if (n > 1) {
        std::vector<cplx> monic(c.size());
        for (std::size_t k = 0; k < c.size(); ++k) monic[k] = c[k] / c.back();
        roots = detail::aberth(monic);
        const UniComplexPoly q(c);
        const UniComplexPoly dq = q.derivative();
        for (auto& r : roots) {
            for (int k = 0; k < 3; ++k) {
                const cplx pv = q(r), dv = dq(r);
                if (dv == cplx(0.0)) break;
                const cplx cand = r - pv / dv;
                if (std::abs(q(cand)) < std::abs(pv))
                    r = cand;
                else
                    break;
            }
        }
    }

    std::vector<bool> used(roots.size(), false);
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (used[i]) continue;
        std::vector<std::size_t> cluster{i};
        const double radius = 1e-4 * (1.0 + std::abs(roots[i]));
        for (std::size_t j = i + 1; j < roots.size(); ++j)
            if (!used[j] && std::abs(roots[j] - roots[i]) <= radius) cluster.push_back(j);
        if (cluster.size() > 1) {
            cplx centroid = 0.0;
            for (auto k : cluster) centroid += roots[k];
            centroid /= static_cast<double>(cluster.size());
            if (std::abs(p(centroid)) <= root_residual_bound(p, centroid, tol)) {
                for (auto k : cluster) used[k] = true;
                out.push_back({centroid, static_cast<int>(cluster.size())});
                continue;
            }
        }
        used[i] = true;
        out.push_back({roots[i], 1});
    }

    std::sort(out.begin(), out.end(), [](const ComplexRoot& a, const ComplexRoot& b) {
        return a.value.real() < b.value.real() ||
               (a.value.real() == b.value.real() && a.value.imag() < b.value.imag());
    });
    return out;
}

/// Roots repeated according to multiplicity.
inline std::vector<cplx> expand_roots(std::span<const ComplexRoot> roots)
{
    std::vector<cplx> out;
    for (const auto& r : roots) out.insert(out.end(), r.multiplicity, r.value);
    return out;
}

/// Real roots (|Im| <= imag_tol) of a polynomial, sorted ascending, with multiplicity.
inline std::vector<ComplexRoot> real_roots(const UniComplexPoly& p, double imag_tol = 1e-8)
{
    std::vector<ComplexRoot> out;
    for (const auto& r : univariate_complex_roots(p))
        if (std::abs(r.value.imag()) <= imag_tol * (1.0 + std::abs(r.value)))
            out.push_back({cplx(r.value.real(), 0.0), r.multiplicity});
    return out;
}

// ---------------------------------------------------------------------------
// Real solutions of a polynomial system by box subdivision
// ---------------------------------------------------------------------------

/// Solves J s = r with partial pivoting; nullopt when the pivot vanishes.
inline std::optional<Vec2> solve2(const Mat2& m, Vec2 r)
{
    double a = m.a, b = m.b, c = m.c, d = m.d, r0 = r.x, r1 = r.y;
    if (std::abs(c) > std::abs(a)) {
        std::swap(a, c);
        std::swap(b, d);
        std::swap(r0, r1);
    }
    if (a == 0.0) return std::nullopt;
    const double l = c / a;
    const double d2 = d - l * b;
    const double s1r = r1 - l * r0;
    if (d2 == 0.0) return std::nullopt;
    const double y = s1r / d2;
    const double x = (r0 - b * y) / a;
    if (!std::isfinite(x) || !std::isfinite(y)) return std::nullopt;
    return Vec2{x, y};
}

struct SystemRoots {
    std::vector<Vec2> roots;    ///< sorted lexicographically
    std::vector<Box> unresolved; ///< leaf boxes neither excluded nor explained by a root
};

namespace detail {

/// abs_p is p.abs_poly(); it bounds rounding error of the interval image.
inline bool excludes_zero(const MultiPoly& p, const MultiPoly& abs_p, const Box& b)
{
    const Interval ix{b.xmin, b.xmax}, iy{b.ymin, b.ymax};
    const Interval v = p(ix, iy);
    const double slack =
        1e-14 * abs_p(std::max(std::abs(b.xmin), std::abs(b.xmax)), std::max(std::abs(b.ymin), std::abs(b.ymax)));
    return v.lo > slack || v.hi < -slack;
}

struct PolishResult {
    Vec2 point;
    double residual = 0.0;
    bool converged = false;
};

inline double residual_scale(const PlaneMap& f, Vec2 p)
{
    return std::max({1.0, f.first().magnitude_at(p), f.second().magnitude_at(p)});
}

/// Damped Newton on f starting at seed; Armijo-style halving of the step.
inline PolishResult damped_newton(const PlaneMap& f, const std::array<MultiPoly, 4>& jac, Vec2 seed, double tol)
{
    auto resid = [&](Vec2 p) {
        const Vec2 v = f(p);
        return std::max(std::abs(v.x), std::abs(v.y));
    };
    Vec2 x = seed;
    double r = resid(x);
    for (int it = 0; it < 100 && r > 0.0; ++it) {
        const Mat2 j{jac[0](x), jac[1](x), jac[2](x), jac[3](x)};
        const auto s = solve2(j, f(x));
        if (!s) break;
        double t = 1.0;
        Vec2 xn = x - *s;
        double rn = resid(xn);
        while (!(rn < r) && t > 1.0 / 1024.0) {
            t *= 0.5;
            xn = x - t * *s;
            rn = resid(xn);
        }
        if (!(rn < r)) break;
        const double step = t * norm(*s);
        x = xn;
        r = rn;
        if (step <= 1e-15 * (1.0 + norm(x))) break;
    }
    return {x, r, is_finite(x) && r <= tol * residual_scale(f, x)};
}

} // namespace detail

/// All real solutions of f = 0 in box. Boxes are quadrisected down to
/// max_depth; a box is discarded once either component's interval image
/// excludes zero. Surviving leaves seed damped Newton; converged points within
/// 10 tol of each other, or clustered around a multiple root, are merged.
inline SystemRoots system_real_roots(const PlaneMap& f, const Box& box, double tol = 1e-10, int max_depth = 12)
{
    if (!box.valid()) throw InvalidInput("system_real_roots: degenerate box");
    if (max_depth < 1) throw InvalidInput("system_real_roots: max_depth must be >= 1");

    const std::array<MultiPoly, 4> jac{diff(f.first(), 0), diff(f.first(), 1), diff(f.second(), 0),
                                      diff(f.second(), 1)};
    const MultiPoly abs1 = f.first().abs_poly(), abs2 = f.second().abs_poly();

    std::vector<Box> leaves;
    std::vector<std::pair<Box, int>> stack{{box, 0}};
    while (!stack.empty()) {
        auto [b, depth] = stack.back();
        stack.pop_back();
        if (detail::excludes_zero(f.first(), abs1, b) || detail::excludes_zero(f.second(), abs2, b)) continue;
        if (depth == max_depth) {
            leaves.push_back(b);
            continue;
        }
        const Vec2 c = b.center();
        stack.push_back({{b.xmin, c.x, b.ymin, c.y}, depth + 1});
        stack.push_back({{c.x, b.xmax, b.ymin, c.y}, depth + 1});
        stack.push_back({{b.xmin, c.x, c.y, b.ymax}, depth + 1});
        stack.push_back({{c.x, b.xmax, c.y, b.ymax}, depth + 1});
    }

    struct Found {
        Vec2 p;
        double residual;
    };
    std::vector<Found> found;
    std::vector<Box> failed;
    const double slack = 1e-12 * (1.0 + std::max(box.width(), box.height()));
    for (const auto& leaf : leaves) {
        const auto res = detail::damped_newton(f, jac, leaf.center(), tol);
        if (res.converged && box.contains(res.point, slack))
            found.push_back({res.point, res.residual});
        else
            failed.push_back(leaf);
    }

    // Near a multiple root Newton converges slowly and leaves a cloud of
    // points. Two points join when they are within 10 tol, or within two leaf
    // diagonals with f still small at their midpoint.
    const double leaf_diag = std::hypot(box.width(), box.height()) / std::ldexp(1.0, max_depth);
    auto same_root = [&](Vec2 a, Vec2 b) {
        const double d = distance(a, b);
        if (d <= 10.0 * tol) return true;
        if (d > 2.0 * leaf_diag) return false;
        const Vec2 m = 0.5 * (a + b);
        const Vec2 v = f(m);
        return std::max(std::abs(v.x), std::abs(v.y)) <= 100.0 * tol * detail::residual_scale(f, m);
    };
    std::vector<std::size_t> parent(found.size());
    for (std::size_t i = 0; i < found.size(); ++i) parent[i] = i;
    auto root_of = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < found.size(); ++i)
        for (std::size_t j = i + 1; j < found.size(); ++j)
            if (root_of(i) != root_of(j) && same_root(found[i].p, found[j].p)) parent[root_of(j)] = root_of(i);
    std::vector<std::size_t> best(found.size(), found.size());
    for (std::size_t i = 0; i < found.size(); ++i) {
        std::size_t& b = best[root_of(i)];
        if (b == found.size() || found[i].residual < found[b].residual ||
            (found[i].residual == found[b].residual && found[i].p < found[b].p))
            b = i;
    }
    SystemRoots out;
    for (std::size_t i = 0; i < found.size(); ++i)
        if (root_of(i) == i) out.roots.push_back(found[best[i]].p);
    std::sort(out.roots.begin(), out.roots.end());

    for (const auto& leaf : failed) {
        const Box grown = leaf.inflated(0.5 * std::max(leaf.width(), leaf.height()));
        const bool explained = std::any_of(out.roots.begin(), out.roots.end(),
                                           [&](Vec2 r) { return grown.contains(r); });
        if (!explained) out.unresolved.push_back(leaf);
    }
    return out;
}

} // namespace newtondyn
