#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace newtondyn {

/// Thrown for malformed arguments: bad polynomials, mismatched rasters,
/// violated preconditions.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an iteration produces nothing to continue with (empty
/// backward orbit, empty Hutchinson iterate).
class EmptyResult : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
    friend constexpr bool operator<(Vec2 a, Vec2 b)
    {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline bool is_finite(Vec2 a) { return std::isfinite(a.x) && std::isfinite(a.y); }

inline std::complex<double> to_complex(Vec2 v) { return {v.x, v.y}; }
inline Vec2 to_vec(std::complex<double> z) { return {z.real(), z.imag()}; }

/// Axis-aligned closed rectangle [xmin,xmax] x [ymin,ymax].
struct Box {
    double xmin = 0.0;
    double xmax = 0.0;
    double ymin = 0.0;
    double ymax = 0.0;

    constexpr double width() const { return xmax - xmin; }
    constexpr double height() const { return ymax - ymin; }
    constexpr Vec2 center() const { return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)}; }
    constexpr bool contains(Vec2 p, double slack = 0.0) const
    {
        return p.x >= xmin - slack && p.x <= xmax + slack && p.y >= ymin - slack &&
               p.y <= ymax + slack;
    }
    bool valid() const
    {
        return std::isfinite(xmin) && std::isfinite(xmax) && std::isfinite(ymin) &&
               std::isfinite(ymax) && xmax > xmin && ymax > ymin;
    }
    Box inflated(double r) const { return {xmin - r, xmax + r, ymin - r, ymax + r}; }

    friend constexpr bool operator==(const Box&, const Box&) = default;
};

inline Box square(double half_width) { return {-half_width, half_width, -half_width, half_width}; }

/// 2x2 real matrix, row major.
struct Mat2 {
    double a = 0.0, b = 0.0;
    double c = 0.0, d = 0.0;

    double det() const { return a * d - b * c; }
    double norm_inf() const { return std::max(std::abs(a) + std::abs(b), std::abs(c) + std::abs(d)); }
    Vec2 operator*(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    Mat2 operator*(const Mat2& o) const
    {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
};

inline Mat2 identity2() { return {1.0, 0.0, 0.0, 1.0}; }

/// Largest eigenvalue modulus of a real 2x2 matrix.
inline double spectral_radius(const Mat2& m)
{
    const double tr = m.a + m.d;
    const double disc = tr * tr / 4.0 - m.det();
    if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        return std::max(std::abs(tr / 2.0 + s), std::abs(tr / 2.0 - s));
    }
    // complex pair: |lambda|^2 = det
    return std::sqrt(std::abs(m.det()));
}

} // namespace newtondyn
