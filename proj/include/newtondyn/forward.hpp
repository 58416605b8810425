#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "newton.hpp"
#include "parallel.hpp"
#include "poly.hpp"
#include "raster.hpp"

namespace newtondyn {

struct ScanConfig {
    double root_tol = 1e-8;
    double escape_radius = 1e8;
    int max_iter = 200;
    int cycle_window = 64;
    double cycle_tol = 1e-9;
    double multiplier_step = 1e-6;

    void validate() const
    {
        if (!(root_tol > 0) || !(escape_radius > 0) || !(cycle_tol > 0) || !(multiplier_step > 0))
            throw InvalidInput("scan tolerances must be positive");
        if (max_iter < 1 || cycle_window < 2) throw InvalidInput("max_iter must be >= 1 and cycle_window >= 2");
        if (cycle_window > max_iter) throw InvalidInput("cycle_window must not exceed max_iter");
    }
};

struct OrbitOutcome {
    enum class Kind { Root, Cycle, Escaped, SingularHit, Undecided };
    Kind kind = Kind::Undecided;
    int root_index = -1;
    int iterations = 0;
    int period = 0;
    Vec2 point;               ///< cycle representative
    double multiplier = 0.0;  ///< cycle multiplier magnitude

    int code() const
    {
        switch (kind) {
        case Kind::Root: return root_index;
        case Kind::Cycle: return kCycleCode;
        case Kind::Escaped: return kEscapedCode;
        case Kind::SingularHit: return kSingularCode;
        case Kind::Undecided: return kUndecidedCode;
        }
        return kUndecidedCode;
    }
};

/// Central-difference Jacobian of a map at p. Throws SingularJacobian when
/// the map is undefined at a stencil point.
template <class Map>
Mat2 finite_difference_jacobian(const Map& N, Vec2 p, double h)
{
    const Vec2 dx = (N.step(p + Vec2{h, 0.0}) - N.step(p - Vec2{h, 0.0})) * (0.5 / h);
    const Vec2 dy = (N.step(p + Vec2{0.0, h}) - N.step(p - Vec2{0.0, h})) * (0.5 / h);
    return {dx.x, dy.x, dx.y, dy.y};
}

/// Spectral radius of D(N^q) along the cycle through `points`, as the
/// product of per-point finite-difference Jacobians. Infinity when a stencil
/// hits the singular set.
template <class Map>
double cycle_multiplier(const Map& N, const std::vector<Vec2>& points, double h)
{
    Mat2 m = identity2();
    try {
        for (Vec2 p : points) m = finite_difference_jacobian(N, p, h) * m;
    } catch (const SingularJacobian&) {
        return std::numeric_limits<double>::infinity();
    }
    const double r = spectral_radius(m);
    return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
}

/// Forward orbit of x0 under N. `Map` provides step(Vec2) -> Vec2 and throws
/// SingularJacobian where undefined.
template <class Map>
OrbitOutcome classify_orbit(const Map& N, Vec2 x0, const std::vector<Vec2>& roots, const ScanConfig& cfg)
{
    using Kind = OrbitOutcome::Kind;
    auto nearest_root = [&](Vec2 p) {
        for (std::size_t i = 0; i < roots.size(); ++i)
            if (distance(p, roots[i]) <= cfg.root_tol) return static_cast<int>(i);
        return -1;
    };

    const int window = cfg.cycle_window;
    std::vector<Vec2> ring(static_cast<std::size_t>(window));
    Vec2 x = x0;
    int prev_root = nearest_root(x);
    ring[0] = x;
    for (int k = 1; k <= cfg.max_iter; ++k) {
        try {
            x = N.step(x);
        } catch (const SingularJacobian&) {
            OrbitOutcome o;
            o.kind = Kind::SingularHit;
            o.iterations = k - 1;
            return o;
        }
        if (!is_finite(x) || norm(x) > cfg.escape_radius) {
            OrbitOutcome o;
            o.kind = Kind::Escaped;
            o.iterations = k;
            return o;
        }
        const int r = nearest_root(x);
        if (r >= 0 && r == prev_root) {
            OrbitOutcome o;
            o.kind = Kind::Root;
            o.root_index = r;
            o.iterations = k - 1;
            return o;
        }
        prev_root = r;
        ring[static_cast<std::size_t>(k % window)] = x;
    }

    // recurrence among the last cycle_window iterates
    const int last = cfg.max_iter;
    auto at = [&](int k) { return ring[static_cast<std::size_t>(k % window)]; };
    const int available = std::min(window, last + 1);
    for (int q = 1; q < available; ++q) {
        if (distance(at(last), at(last - q)) > cfg.cycle_tol) continue;
        bool stable = true;
        for (int j = 1; j < q && last - q - j >= last - available + 1; ++j)
            if (distance(at(last - j), at(last - q - j)) > cfg.cycle_tol) stable = false;
        if (!stable) continue;
        std::vector<Vec2> pts;
        for (int j = q - 1; j >= 0; --j) pts.push_back(at(last - j));
        const double mult = cycle_multiplier(N, pts, cfg.multiplier_step);
        OrbitOutcome o;
        o.iterations = cfg.max_iter;
        if (!(mult < 1.0)) return o; // Undecided
        o.kind = Kind::Cycle;
        o.period = q;
        o.point = at(last);
        o.multiplier = mult;
        return o;
    }
    OrbitOutcome o;
    o.iterations = cfg.max_iter;
    return o;
}

inline std::map<int, std::string> default_legend(const std::vector<Vec2>& roots)
{
    std::map<int, std::string> legend;
    for (std::size_t i = 0; i < roots.size(); ++i)
        legend[static_cast<int>(i)] =
            "root (" + detail::format_double(roots[i].x) + ", " + detail::format_double(roots[i].y) + ")";
    legend[kCycleCode] = "attracting cycle";
    legend[kEscapedCode] = "escaped";
    legend[kSingularCode] = "singular";
    legend[kUndecidedCode] = "undecided";
    return legend;
}

/// A pixel whose orbit ended on an attracting cycle.
struct CycleHit {
    std::size_t pixel = 0;
    OrbitOutcome outcome;
};

struct BasinScan {
    BasinRaster raster;
    std::vector<CycleHit> cycles; ///< in pixel order
};

template <class Map>
BasinScan render_basins(const Map& N, const std::vector<Vec2>& roots, const Box& window, int width, int height,
                        const ScanConfig& cfg, unsigned threads = 0)
{
    cfg.validate();
    BasinScan out{BasinRaster(window, width, height), {}};
    BasinRaster& r = out.raster;
    r.legend = default_legend(roots);
    std::vector<OrbitOutcome> outcomes(r.grid.size());
    parallel_for(static_cast<std::size_t>(height), threads, [&](std::size_t row) {
        for (int col = 0; col < width; ++col) {
            const std::size_t idx = r.grid.index(col, static_cast<int>(row));
            outcomes[idx] = classify_orbit(N, r.grid.center(idx), roots, cfg);
        }
    });
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        r.codes[i] = outcomes[i].code();
        r.iterations[i] = outcomes[i].iterations;
        if (outcomes[i].kind == OrbitOutcome::Kind::Cycle) out.cycles.push_back({i, outcomes[i]});
    }
    return out;
}

/// Distinct roots of p as plane points, sorted by (re, im).
inline std::vector<Vec2> complex_root_points(const UniComplexPoly& p)
{
    std::vector<Vec2> out;
    for (const auto& r : univariate_complex_roots(p)) out.push_back(to_vec(r.value));
    return out;
}

using PolyFamily = std::function<UniComplexPoly(cplx)>;

/// For each parameter pixel A, classifies the orbit of `seed` under the
/// Newton map of family(A).
inline BasinScan parameter_scan(const PolyFamily& family, cplx seed, const Box& window, int width, int height,
                                const ScanConfig& cfg, unsigned threads = 0)
{
    cfg.validate();
    BasinScan out{BasinRaster(window, width, height), {}};
    BasinRaster& r = out.raster;
    r.legend[0] = "root";
    r.legend[kCycleCode] = "attracting cycle";
    r.legend[kEscapedCode] = "escaped";
    r.legend[kSingularCode] = "singular";
    r.legend[kUndecidedCode] = "undecided";
    std::vector<OrbitOutcome> outcomes(r.grid.size());
    parallel_for(static_cast<std::size_t>(height), threads, [&](std::size_t row) {
        for (int col = 0; col < width; ++col) {
            const std::size_t idx = r.grid.index(col, static_cast<int>(row));
            const UniComplexPoly p = family(to_complex(r.grid.center(idx)));
            if (p.degree() < 1) continue; // stays Undecided
            const NewtonComplexMap N = build_newton_complex(p);
            outcomes[idx] = classify_orbit(N, to_vec(seed), complex_root_points(p), cfg);
        }
    });
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        // all roots share one color in the parameter plane
        r.codes[i] = o.kind == OrbitOutcome::Kind::Root ? 0 : o.code();
        r.iterations[i] = o.iterations;
        if (o.kind == OrbitOutcome::Kind::Cycle) out.cycles.push_back({i, o});
    }
    return out;
}

/// f_A(z) = z^3 + (A-1) z - A.
inline UniComplexPoly cubic_family(cplx A)
{
    return UniComplexPoly({-A, A - 1.0, 0.0, 1.0});
}

} // namespace newtondyn
