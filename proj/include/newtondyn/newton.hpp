#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "poly.hpp"

namespace newtondyn {

/// The Newton step is undefined at `point` (Jacobian or derivative vanishes).
class SingularJacobian : public std::runtime_error {
public:
    explicit SingularJacobian(Vec2 p)
        : std::runtime_error("singular Jacobian at (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")"),
          point_(p)
    {
    }
    Vec2 point() const { return point_; }

private:
    Vec2 point_;
};

// ---------------------------------------------------------------------------
// Complex rational maps and complex Newton maps
// ---------------------------------------------------------------------------

namespace detail {

inline double abs_eval(const UniComplexPoly& p, double r)
{
    double acc = 0.0;
    const auto c = p.coeffs();
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * r + std::abs(*it);
    return acc;
}

} // namespace detail

/// z -> num(z) / den(z) on the complex plane.
class RationalMap {
public:
    RationalMap(UniComplexPoly num, UniComplexPoly den) : num_(std::move(num)), den_(std::move(den))
    {
        if (den_.is_zero()) throw InvalidInput("rational map with zero denominator");
    }

    const UniComplexPoly& numerator() const { return num_; }
    const UniComplexPoly& denominator() const { return den_; }
    int degree() const { return std::max(num_.degree(), den_.degree()); }

    /// Value at z, or nullopt at a pole. Common zeros of numerator and
    /// denominator are resolved by l'Hopital.
    std::optional<cplx> try_eval(cplx z) const
    {
        UniComplexPoly n = num_, d = den_;
        for (int k = 0; k <= degree(); ++k) {
            const cplx dv = d(z), nv = n(z);
            const double r = std::abs(z);
            const bool d_zero = std::abs(dv) <= 1e-14 * std::max(detail::abs_eval(d, r), 1e-300);
            if (!d_zero) return nv / dv;
            const bool n_zero = n.is_zero() || std::abs(nv) <= 1e-14 * std::max(detail::abs_eval(n, r), 1e-300);
            if (!n_zero) return std::nullopt;
            n = n.derivative();
            d = d.derivative();
            if (d.is_zero()) return std::nullopt;
        }
        return std::nullopt;
    }

    cplx operator()(cplx z) const
    {
        auto v = try_eval(z);
        if (!v) throw SingularJacobian(to_vec(z));
        return *v;
    }

    Vec2 step(Vec2 p) const { return to_vec((*this)(to_complex(p))); }

private:
    UniComplexPoly num_;
    UniComplexPoly den_;
};

/// N(z) = z - p(z)/p'(z) = (z p'(z) - p(z)) / p'(z).
struct NewtonComplexMap {
    UniComplexPoly source;
    RationalMap map;
    int degree = 0;

    cplx operator()(cplx z) const { return map(z); }
    Vec2 step(Vec2 p) const { return map.step(p); }
    const UniComplexPoly& numerator() const { return map.numerator(); }
    const UniComplexPoly& denominator() const { return map.denominator(); }
};

inline NewtonComplexMap build_newton_complex(const UniComplexPoly& p)
{
    if (p.degree() < 1) throw InvalidInput("Newton map needs a polynomial of degree >= 1");
    const UniComplexPoly dp = p.derivative();
    UniComplexPoly num = UniComplexPoly::z() * dp - p;
    const int degree = std::max(num.degree(), dp.degree());
    return {p, RationalMap(std::move(num), dp), degree};
}

/// Real form (Re p(x+iy), Im p(x+iy)) of a complex polynomial.
inline PlaneMap real_form(const UniComplexPoly& p)
{
    MultiPoly re, im;
    MultiPoly pr = MultiPoly::constant(1.0), pi; // (x+iy)^k
    for (int k = 0; k <= p.degree(); ++k) {
        const cplx c = p.coefficient(k);
        re += c.real() * pr - c.imag() * pi;
        im += c.real() * pi + c.imag() * pr;
        const MultiPoly nr = pr * MultiPoly::x() - pi * MultiPoly::y();
        const MultiPoly ni = pr * MultiPoly::y() + pi * MultiPoly::x();
        pr = nr;
        pi = ni;
    }
    return {re, im};
}

// ---------------------------------------------------------------------------
// Planar Newton maps
// ---------------------------------------------------------------------------

/// N(x) = x - (D_x f)^{-1} f(x) for a polynomial map of the plane.
class NewtonPlaneMap {
public:
    explicit NewtonPlaneMap(PlaneMap f)
        : f_(std::move(f)),
          jac_{diff(f_.first(), 0), diff(f_.first(), 1), diff(f_.second(), 0), diff(f_.second(), 1)},
          det_(jac_[0] * jac_[3] - jac_[1] * jac_[2])
    {
    }

    const PlaneMap& source() const { return f_; }
    /// Entries of D_x f, row major: df1/dx, df1/dy, df2/dx, df2/dy.
    const std::array<MultiPoly, 4>& jacobian() const { return jac_; }
    const MultiPoly& det() const { return det_; }

    Mat2 jacobian_at(Vec2 p) const { return {jac_[0](p), jac_[1](p), jac_[2](p), jac_[3](p)}; }

    static bool is_singular(const Mat2& j) { return std::abs(j.det()) < 1e-12 * (1.0 + j.norm_inf()); }

    std::optional<Vec2> try_step(Vec2 p) const
    {
        const Mat2 j = jacobian_at(p);
        if (is_singular(j)) return std::nullopt;
        const auto s = solve2(j, f_(p));
        if (!s) return std::nullopt;
        return p - *s;
    }

    Vec2 step(Vec2 p) const
    {
        auto r = try_step(p);
        if (!r) throw SingularJacobian(p);
        return *r;
    }

    Vec2 operator()(Vec2 p) const { return step(p); }

private:
    PlaneMap f_;
    std::array<MultiPoly, 4> jac_;
    MultiPoly det_;
};

inline NewtonPlaneMap build_newton_plane(const PlaneMap& f)
{
    if (f.degree() < 1) throw InvalidInput("Newton map of a constant map");
    return NewtonPlaneMap(f);
}

inline Vec2 newton_step_plane(const NewtonPlaneMap& n, Vec2 p) { return n.step(p); }

// ---------------------------------------------------------------------------
// Projective form
// ---------------------------------------------------------------------------

enum class Chart { Z, Y, X }; ///< affine chart z=1, y=1 or x=1

/// Rational map of RP^2 given by three homogeneous polynomials of a common
/// degree. Each component is stored dehomogenized at z=1; the z power of a
/// term x^i y^j is degree - i - j.
class ProjectivePlaneMap {
public:
    ProjectivePlaneMap(std::array<MultiPoly, 3> comps, int degree) : comps_(std::move(comps)), degree_(degree)
    {
        for (const auto& c : comps_)
            if (c.degree() > degree_) throw InvalidInput("component degree exceeds homogeneous degree");
    }

    int degree() const { return degree_; }
    const MultiPoly& affine_component(int k) const { return comps_[k]; }

    std::array<double, 3> operator()(double x, double y, double z) const
    {
        std::array<double, 3> out{};
        for (int k = 0; k < 3; ++k) {
            double acc = 0.0;
            for (const auto& t : comps_[k].terms())
                acc += t.coeff * std::pow(x, t.ex) * std::pow(y, t.ey) * std::pow(z, degree_ - t.ex - t.ey);
            out[k] = acc;
        }
        return out;
    }

    /// Component k restricted to a chart, as a polynomial in the two free
    /// coordinates: (x,y) for Z, (x,z) for Y, (y,z) for X.
    MultiPoly chart_component(int k, Chart chart) const
    {
        std::vector<MultiPoly::Term> t;
        for (const auto& term : comps_[k].terms()) {
            const int ez = degree_ - term.ex - term.ey;
            switch (chart) {
            case Chart::Z: t.push_back(term); break;
            case Chart::Y: t.push_back({term.ex, ez, term.coeff}); break;
            case Chart::X: t.push_back({term.ey, ez, term.coeff}); break;
            }
        }
        return MultiPoly(std::move(t));
    }

    /// The map read in a chart: (u,v) -> chart coordinates of the image.
    /// nullopt when the image leaves the chart or the point is indeterminate.
    std::optional<Vec2> in_chart(Chart chart, Vec2 uv) const
    {
        const auto h = lift(chart, uv);
        const auto img = (*this)(h[0], h[1], h[2]);
        return project(chart, img);
    }

    static std::array<double, 3> lift(Chart chart, Vec2 uv)
    {
        switch (chart) {
        case Chart::Z: return {uv.x, uv.y, 1.0};
        case Chart::Y: return {uv.x, 1.0, uv.y};
        case Chart::X: return {1.0, uv.x, uv.y};
        }
        return {};
    }

    static std::optional<Vec2> project(Chart chart, const std::array<double, 3>& h)
    {
        const int k = chart == Chart::Z ? 2 : chart == Chart::Y ? 1 : 0;
        const double s = h[k];
        const double scale = std::max({std::abs(h[0]), std::abs(h[1]), std::abs(h[2])});
        if (scale == 0.0 || std::abs(s) <= 1e-14 * scale) return std::nullopt;
        switch (chart) {
        case Chart::Z: return Vec2{h[0] / s, h[1] / s};
        case Chart::Y: return Vec2{h[0] / s, h[2] / s};
        case Chart::X: return Vec2{h[1] / s, h[2] / s};
        }
        return std::nullopt;
    }

private:
    std::array<MultiPoly, 3> comps_;
    int degree_;
};

/// Homogeneous point normalized to unit length with its first nonzero
/// coordinate positive.
struct ProjectivePoint {
    double x = 0.0, y = 0.0, z = 0.0;
};

inline ProjectivePoint normalize_projective(std::array<double, 3> h)
{
    const double n = std::sqrt(h[0] * h[0] + h[1] * h[1] + h[2] * h[2]);
    if (n == 0.0) throw InvalidInput("the origin is not a projective point");
    for (auto& v : h) v /= n;
    for (double v : h) {
        if (std::abs(v) > 1e-12) {
            if (v < 0)
                for (auto& w : h) w = -w;
            break;
        }
    }
    return {h[0], h[1], h[2]};
}

struct HomogenizedNewton {
    ProjectivePlaneMap map;
    std::vector<ProjectivePoint> indeterminacy;
};

namespace detail {

inline std::vector<ProjectivePoint> indeterminacy_points(const ProjectivePlaneMap& P, double box_half_width)
{
    std::vector<ProjectivePoint> out;
    const Box box = square(box_half_width);
    for (Chart chart : {Chart::Z, Chart::Y, Chart::X}) {
        const std::array<MultiPoly, 3> g{P.chart_component(0, chart), P.chart_component(1, chart),
                                         P.chart_component(2, chart)};
        if (std::count_if(g.begin(), g.end(), [](const MultiPoly& p) { return p.is_zero(); }) >= 2) continue;
        const std::array<std::array<int, 3>, 3> pairs{{{0, 2, 1}, {1, 2, 0}, {0, 1, 2}}};
        for (const auto& [a, b, c] : pairs) {
            if (g[a].is_zero() || g[b].is_zero()) continue;
            const auto sol = system_real_roots(PlaneMap(g[a], g[b]), box, 1e-10, 10);
            for (Vec2 p : sol.roots) {
                const double scale = std::max(1.0, g[c].magnitude_at(p));
                if (std::abs(g[c](p)) > 1e-8 * scale) continue;
                const auto h = ProjectivePlaneMap::lift(chart, p);
                const ProjectivePoint q = normalize_projective(h);
                const bool dup = std::any_of(out.begin(), out.end(), [&](const ProjectivePoint& o) {
                    return std::abs(o.x - q.x) + std::abs(o.y - q.y) + std::abs(o.z - q.z) < 1e-6;
                });
                if (!dup) out.push_back(q);
            }
        }
    }
    return out;
}

} // namespace detail

/// Clears denominators of the affine Newton map:
/// N = (det x - adj(D f) f) / det, written as the triple
/// [det x - adj f : det y - adj f : det z] homogenized to a common degree,
/// with common monomial content removed. Indeterminacy points are common
/// real zeros found on the three affine charts inside [-b,b]^2.
inline HomogenizedNewton homogenize_newton(const NewtonPlaneMap& N, double chart_box_half_width = 10.0)
{
    const auto& j = N.jacobian();
    const MultiPoly& f1 = N.source().first();
    const MultiPoly& f2 = N.source().second();
    const MultiPoly& det = N.det();
    // adj(D f) = [[j3, -j1], [-j2, j0]]
    const MultiPoly c1 = det * MultiPoly::x() - (j[3] * f1 - j[1] * f2);
    const MultiPoly c2 = det * MultiPoly::y() - (j[0] * f2 - j[2] * f1);
    std::array<MultiPoly, 3> comps{c1, c2, det};

    int degree = std::max({c1.degree(), c2.degree(), det.degree()});
    if (degree < 0) throw InvalidInput("homogenize_newton: degenerate Newton map");

    // common monomial content x^a y^b z^c
    int cx = degree, cy = degree, cz = degree;
    for (const auto& comp : comps) {
        for (const auto& t : comp.terms()) {
            cx = std::min(cx, t.ex);
            cy = std::min(cy, t.ey);
            cz = std::min(cz, degree - t.ex - t.ey);
        }
    }
    if (cx > 0 || cy > 0 || cz > 0) {
        for (auto& comp : comps) {
            std::vector<MultiPoly::Term> t(comp.terms().begin(), comp.terms().end());
            for (auto& term : t) {
                term.ex -= cx;
                term.ey -= cy;
            }
            comp = MultiPoly(std::move(t));
        }
        degree -= cx + cy + cz;
    }
    ProjectivePlaneMap P(std::move(comps), degree);
    auto indeterminacy = detail::indeterminacy_points(P, chart_box_half_width);
    return {std::move(P), std::move(indeterminacy)};
}

/// Central-difference Jacobian (step 1e-6) of P read in the chart y=1 at the
/// point (x, 0) of the line at infinity z=0. Coordinates are (x, z).
inline Mat2 jacobian_at_infinity(const ProjectivePlaneMap& P, double x, double step = 1e-6)
{
    const auto at = P(x, 1.0, 0.0);
    const double scale = std::max(1.0, std::abs(x));
    if (std::max({std::abs(at[0]), std::abs(at[1]), std::abs(at[2])}) <= 1e-12 * std::pow(scale, P.degree()))
        throw InvalidInput("jacobian_at_infinity: indeterminacy point");
    auto eval = [&](Vec2 uv) {
        auto v = P.in_chart(Chart::Y, uv);
        if (!v) throw InvalidInput("jacobian_at_infinity: image leaves the chart y=1");
        return *v;
    };
    const Vec2 dx = (eval({x + step, 0.0}) - eval({x - step, 0.0})) * (0.5 / step);
    const Vec2 dz = (eval({x, step}) - eval({x, -step})) * (0.5 / step);
    return {dx.x, dz.x, dx.y, dz.y};
}

// ---------------------------------------------------------------------------
// Ghost lines
// ---------------------------------------------------------------------------

/// Real trace base + t direction of the complex line through a conjugate
/// pair of complex solutions (z, w), (conj z, conj w).
struct GhostLine {
    Vec2 base;
    Vec2 direction; ///< unit length
    std::array<cplx, 2> solution; ///< representative with positive imaginary part

    double distance_to(Vec2 p) const
    {
        const Vec2 d = p - base;
        return std::abs(d.x * direction.y - d.y * direction.x);
    }
    Vec2 at(double t) const { return base + t * direction; }
};

inline GhostLine ghost_line_from_solution(cplx z, cplx w)
{
    Vec2 dir{z.imag(), w.imag()};
    const double n = norm(dir);
    if (!(n > 0.0)) throw InvalidInput("ghost line needs a strictly complex solution");
    dir = dir * (1.0 / n);
    if (dir.x < 0.0 || (dir.x == 0.0 && dir.y < 0.0)) {
        dir = dir * -1.0;
        z = std::conj(z);
        w = std::conj(w);
    }
    return {{z.real(), w.real()}, dir, {z, w}};
}

struct GhostSearchOptions {
    int seeds_per_axis = 32;
    double dedup_radius = 1e-6;
    double imag_tol = 1e-8;
};

/// Complex solutions of f = 0 in C^2, from Newton runs seeded on a
/// seeds_per_axis^4 grid over the complexified box.
inline std::vector<std::array<cplx, 2>> complex_solutions(const PlaneMap& f, const Box& box,
                                                           const GhostSearchOptions& opt = {})
{
    const std::array<MultiPoly, 4> jac{diff(f.first(), 0), diff(f.first(), 1), diff(f.second(), 0),
                                      diff(f.second(), 1)};
    const MultiPoly abs1 = f.first().abs_poly(), abs2 = f.second().abs_poly();
    std::vector<std::array<cplx, 2>> found;
    const int n = opt.seeds_per_axis;
    const double wx = box.width(), wy = box.height();
    const double blowup = 1e6 * (1.0 + std::max(wx, wy));

    auto near_known = [&](cplx z, cplx w, double r) {
        return std::any_of(found.begin(), found.end(),
                           [&](const auto& s) { return std::abs(s[0] - z) + std::abs(s[1] - w) < r; });
    };

    auto coord = [n](double lo, double width, int k) { return lo + (k + 0.5) * width / n; };
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) {
                    cplx z{coord(box.xmin, wx, a), coord(-0.5 * wx, wx, b)};
                    cplx w{coord(box.ymin, wy, c), coord(-0.5 * wy, wy, d)};
                    bool ok = false;
                    for (int it = 0; it < 60; ++it) {
                        const cplx F1 = f.first()(z, w), F2 = f.second()(z, w);
                        const cplx a11 = jac[0](z, w), a12 = jac[1](z, w), a21 = jac[2](z, w), a22 = jac[3](z, w);
                        const cplx dt = a11 * a22 - a12 * a21;
                        if (dt == cplx(0.0)) break;
                        const cplx sz = (a22 * F1 - a12 * F2) / dt;
                        const cplx sw = (a11 * F2 - a21 * F1) / dt;
                        z -= sz;
                        w -= sw;
                        if (!(std::abs(z) + std::abs(w) < blowup)) break;
                        const double step = std::abs(sz) + std::abs(sw);
                        if (step < 1e-3 && near_known(z, w, 1e-4)) break;
                        if (step <= 1e-14 * (1.0 + std::abs(z) + std::abs(w))) {
                            const double rz = std::abs(z), rw = std::abs(w);
                            const double r1 = std::abs(f.first()(z, w)), r2 = std::abs(f.second()(z, w));
                            ok = r1 <= 1e-9 * std::max(1.0, abs1(rz, rw)) && r2 <= 1e-9 * std::max(1.0, abs2(rz, rw));
                            break;
                        }
                    }
                    if (ok && !near_known(z, w, opt.dedup_radius)) found.push_back({z, w});
                }

    std::sort(found.begin(), found.end(), [](const auto& s, const auto& t) {
        for (int k = 0; k < 2; ++k) {
            if (s[k].real() != t[k].real()) return s[k].real() < t[k].real();
            if (s[k].imag() != t[k].imag()) return s[k].imag() < t[k].imag();
        }
        return false;
    });
    return found;
}

/// One ghost line per conjugate pair of strictly complex solutions.
inline std::vector<GhostLine> ghost_lines(const PlaneMap& f, const Box& box, const GhostSearchOptions& opt = {})
{
    std::vector<GhostLine> lines;
    for (const auto& s : complex_solutions(f, box, opt)) {
        const double im = std::max(std::abs(s[0].imag()), std::abs(s[1].imag()));
        if (im <= opt.imag_tol * (1.0 + std::abs(s[0]) + std::abs(s[1]))) continue;
        const GhostLine l = ghost_line_from_solution(s[0], s[1]);
        const bool dup = std::any_of(lines.begin(), lines.end(), [&](const GhostLine& o) {
            return distance(o.base, l.base) < 1e-6 && distance(o.direction, l.direction) < 1e-6;
        });
        if (!dup) lines.push_back(l);
    }
    std::sort(lines.begin(), lines.end(), [](const GhostLine& a, const GhostLine& b) { return a.base < b.base; });
    return lines;
}

/// Largest distance from the line of N(line point), over `samples` points
/// with parameter in [-half_length, half_length]; singular points are skipped.
inline double ghost_line_invariance_defect(const NewtonPlaneMap& N, const GhostLine& line, int samples = 50,
                                           double half_length = 5.0)
{
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double t = -half_length + (k + 0.5) * 2.0 * half_length / samples;
        const auto img = N.try_step(line.at(t));
        if (!img) continue;
        worst = std::max(worst, line.distance_to(*img));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Pullback by a polynomial diffeomorphism
// ---------------------------------------------------------------------------

/// psi^* f = psi^{-1} o f o psi, after checking psi o psi^{-1} = id symbolically.
inline PlaneMap pullback_map(const PlaneMap& f, const PlaneMap& psi, const PlaneMap& psi_inv)
{
    if (!approx_equal(psi.compose_with(psi_inv), identity_map()))
        throw InvalidInput("pullback_map: psi o psi_inv is not the identity");
    return psi_inv.compose_with(f.compose_with(psi));
}

/// psi^* N_f evaluated pointwise: psi^{-1}(N_f(psi(p))).
inline Vec2 pullback_newton_step(const NewtonPlaneMap& N, const PlaneMap& psi, const PlaneMap& psi_inv, Vec2 p)
{
    return psi_inv(N.step(psi(p)));
}

} // namespace newtondyn
