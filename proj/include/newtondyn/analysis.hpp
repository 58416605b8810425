#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "backward.hpp"
#include "forward.hpp"
#include "geometry.hpp"
#include "newton.hpp"
#include "parallel.hpp"
#include "poly.hpp"
#include "raster.hpp"

namespace newtondyn {

// ---------------------------------------------------------------------------
// Real univariate Newton maps
// ---------------------------------------------------------------------------

/// N(x) = x - p(x)/p'(x) for a real polynomial p.
class RealNewton1D {
public:
    explicit RealNewton1D(const UniComplexPoly& p) : p_(p), dp_(p.derivative())
    {
        if (!p.is_real()) throw InvalidInput("expected a polynomial with real coefficients");
        if (p.degree() < 1) throw InvalidInput("Newton map needs a polynomial of degree >= 1");
    }

    const UniComplexPoly& poly() const { return p_; }
    const UniComplexPoly& derivative() const { return dp_; }

    /// NaN at a pole.
    double operator()(double x) const
    {
        const double d = dp_.eval_real(x);
        if (d == 0.0) return std::numeric_limits<double>::quiet_NaN();
        return x - p_.eval_real(x) / d;
    }

    /// N^k(x); NaN when the orbit hits a pole or overflows.
    double iterate(double x, int k) const
    {
        for (int i = 0; i < k && std::isfinite(x); ++i) x = (*this)(x);
        return std::isfinite(x) ? x : std::numeric_limits<double>::quiet_NaN();
    }

    /// Central difference of N at x.
    double derivative_fd(double x, double h) const
    {
        const double s = h * (1.0 + std::abs(x));
        return ((*this)(x + s) - (*this)(x - s)) / (2.0 * s);
    }

    /// Real solutions of N(x) = c (roots of x p' - p - c p' with p' != 0).
    std::vector<double> preimages(double c) const
    {
        const UniComplexPoly g = UniComplexPoly::z() * dp_ - p_ - cplx(c) * dp_;
        std::vector<double> out;
        if (g.degree() < 1) return out;
        for (const auto& r : real_roots(g)) {
            const double x = r.value.real();
            if (dp_.eval_real(x) != 0.0 && std::isfinite((*this)(x))) out.push_back(x);
        }
        return out;
    }

private:
    UniComplexPoly p_;
    UniComplexPoly dp_;
};

enum class Stability { Attracting, Repelling, Neutral };

inline const char* to_string(Stability s)
{
    switch (s) {
    case Stability::Attracting: return "attracting";
    case Stability::Repelling: return "repelling";
    case Stability::Neutral: return "neutral";
    }
    return "neutral";
}

inline Stability classify_multiplier(double m)
{
    if (m < 1.0 - 1e-6) return Stability::Attracting;
    if (m > 1.0 + 1e-6) return Stability::Repelling;
    return Stability::Neutral;
}

struct CycleRecord {
    int period = 0;
    std::vector<double> points; ///< starts at the smallest point, in orbit order
    double multiplier = 0.0;
    Stability stability = Stability::Neutral;
};

struct CycleScanOptions {
    int brackets = 10000;          ///< initial brackets per subinterval
    double multiplier_step = 1e-6;
};

struct CycleScan {
    int period = 0;
    std::vector<CycleRecord> cycles;  ///< minimal period == period
    std::vector<double> periodic_points; ///< all solutions of N^k(x) = x, any minimal period dividing k
};

namespace detail {

/// Sorted, deduplicated breakpoints of N^k on [a,b]: poles of N and their
/// real preimages up to depth k-1, critical points of N (roots of p and p'')
/// and their preimages up to depth k-1.
inline std::vector<double> cycle_breakpoints(const RealNewton1D& N, int k, double a, double b)
{
    std::vector<double> pts{a, b};
    auto add_tree = [&](std::vector<double> level, int depth) {
        for (int d = 0; d <= depth; ++d) {
            std::vector<double> next;
            for (double c : level) {
                if (c >= a && c <= b) pts.push_back(c);
                if (d < depth)
                    for (double w : N.preimages(c)) next.push_back(w);
            }
            std::sort(next.begin(), next.end());
            next.erase(std::unique(next.begin(), next.end(),
                                   [](double u, double v) { return std::abs(u - v) <= 1e-13 * (1.0 + std::abs(u)); }),
                       next.end());
            level = std::move(next);
        }
    };
    auto real_zeros = [](const UniComplexPoly& q) {
        std::vector<double> z;
        if (q.degree() >= 1)
            for (const auto& r : real_roots(q)) z.push_back(r.value.real());
        return z;
    };
    add_tree(real_zeros(N.derivative()), k - 1);
    if (k >= 2) {
        auto crit = real_zeros(N.poly());
        const auto d2 = real_zeros(N.derivative().derivative());
        crit.insert(crit.end(), d2.begin(), d2.end());
        add_tree(crit, k - 1);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

inline double periodic_residual(const RealNewton1D& N, double x, int k) { return N.iterate(x, k) - x; }

/// Bisection on a sign change of N^k(x) - x; NaN when the endpoint values are
/// not finite or do not change sign.
inline double bisect_periodic(const RealNewton1D& N, int k, double lo, double hi, double flo)
{
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = periodic_residual(N, mid, k);
        if (!std::isfinite(fm)) return std::numeric_limits<double>::quiet_NaN();
        if (fm == 0.0) return mid;
        if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Solution of N^k(y) = y nearest to an approximate point x, by bisection on
/// the smallest sign-change bracket around x; x itself if none is found.
inline double refine_periodic(const RealNewton1D& N, int k, double x)
{
    const double fx = periodic_residual(N, x, k);
    if (fx == 0.0) return x;
    for (double d = 1e-14 * (1.0 + std::abs(x)); d < 1e-4 * (1.0 + std::abs(x)); d *= 4.0) {
        for (double s : {-1.0, 1.0}) {
            const double y = x + s * d;
            const double fy = periodic_residual(N, y, k);
            if (std::isfinite(fx) && std::isfinite(fy) && (fy < 0) != (fx < 0)) {
                const double lo = std::min(x, y), hi = std::max(x, y);
                const double r = bisect_periodic(N, k, lo, hi, lo == x ? fx : fy);
                if (std::isfinite(r)) return r;
            }
        }
    }
    return x;
}

} // namespace detail

/// Cycles of minimal period k of the real Newton map of p meeting [a,b].
/// Sign changes of N^k(x) - x are bracketed on each piece between
/// breakpoints of N^k and bisected; pole jumps fail the residual test.
inline CycleScan enumerate_cycles_1d(const UniComplexPoly& p, int k, double a, double b,
                                     const CycleScanOptions& opt = {}, unsigned threads = 0)
{
    if (k < 1) throw InvalidInput("period must be >= 1");
    if (!(std::isfinite(a) && std::isfinite(b) && a < b)) throw InvalidInput("invalid scan interval");
    if (opt.brackets < 1) throw InvalidInput("brackets must be >= 1");
    const RealNewton1D N(p);
    const auto bp = detail::cycle_breakpoints(N, k, a, b);

    std::vector<std::vector<double>> found(bp.size() - 1);
    parallel_for(bp.size() - 1, threads, [&](std::size_t piece) {
        const double u = bp[piece], v = bp[piece + 1];
        const double len = v - u;
        if (!(len > 0)) return;
        std::vector<double> xs{u, v};
        for (int m = 14; m >= 5; --m) xs.push_back(u + len * std::pow(10.0, -m));
        for (int i = 1; i < opt.brackets; ++i) xs.push_back(u + len * i / opt.brackets);
        for (int m = 5; m <= 14; ++m) xs.push_back(v - len * std::pow(10.0, -m));
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        double xprev = std::numeric_limits<double>::quiet_NaN(), fprev = xprev;
        for (double x : xs) {
            if (!(x >= u && x <= v)) continue;
            const double fx = detail::periodic_residual(N, x, k);
            if (fx == 0.0) found[piece].push_back(x);
            if (std::isfinite(fx) && std::isfinite(fprev) && fx != 0.0 && fprev != 0.0 && (fx < 0) != (fprev < 0)) {
                const double r = detail::bisect_periodic(N, k, xprev, x, fprev);
                if (std::isfinite(r)) found[piece].push_back(r);
            }
            xprev = x;
            fprev = fx;
        }
    });

    std::vector<double> pts;
    for (const auto& f : found)
        for (double x : f) {
            const double res = detail::periodic_residual(N, x, k);
            if (std::isfinite(res) && std::abs(res) <= 1e-6 * (1.0 + std::abs(x))) pts.push_back(x);
        }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](double u, double v) { return std::abs(u - v) <= 1e-9 * (1.0 + std::abs(u)); }),
              pts.end());

    CycleScan scan;
    scan.period = k;
    scan.periodic_points = pts;

    auto same = [](double u, double v) { return std::abs(u - v) <= 1e-7 * (1.0 + std::abs(u)); };
    std::vector<bool> used(pts.size(), false);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (used[i]) continue;
        const double x = pts[i];
        bool lower = false;
        for (int j = 1; j < k && !lower; ++j)
            if (k % j == 0) {
                const double y = N.iterate(x, j);
                lower = std::isfinite(y) && same(x, y);
            }
        if (lower) {
            used[i] = true;
            continue;
        }
        CycleRecord rec;
        rec.period = k;
        double y = x;
        for (int j = 0; j < k; ++j) {
            auto it = std::find_if(pts.begin(), pts.end(), [&](double q) { return same(q, y); });
            double point = y;
            if (it != pts.end()) {
                used[static_cast<std::size_t>(it - pts.begin())] = true;
                point = *it;
            } else {
                point = detail::refine_periodic(N, k, y);
            }
            rec.points.push_back(point);
            y = N(point);
        }
        const auto first = std::min_element(rec.points.begin(), rec.points.end());
        std::rotate(rec.points.begin(), first, rec.points.end());
        rec.multiplier = 1.0;
        for (double q : rec.points) rec.multiplier *= std::abs(N.derivative_fd(q, opt.multiplier_step));
        rec.stability = classify_multiplier(rec.multiplier);
        scan.cycles.push_back(std::move(rec));
    }
    std::sort(scan.cycles.begin(), scan.cycles.end(),
              [](const CycleRecord& s, const CycleRecord& t) { return s.points.front() < t.points.front(); });
    return scan;
}

// ---------------------------------------------------------------------------
// Barna checks
// ---------------------------------------------------------------------------

struct BarnaConfig {
    int max_period = 5;
    std::size_t samples = 1000000;
    double sample_lo = -10.0;
    double sample_hi = 10.0;
    int max_iter = 500;
    double root_tol = 1e-8;
    std::uint64_t prng_seed = 1;
    CycleScanOptions scan;
};

struct PeriodFindings {
    int period = 0;
    std::vector<CycleRecord> cycles;
    std::size_t periodic_points = 0; ///< solutions of N^k(x) = x
    double bound = 0.0;              ///< (n-2)^k
    bool bound_ok = false;
};

struct BarnaReport {
    std::string polynomial;
    int degree = 0;
    std::vector<ComplexRoot> roots;
    bool all_roots_real = false;
    bool simple_roots = false;
    bool hypotheses_met = false;
    std::vector<std::string> notes;
    double scan_lo = 0.0, scan_hi = 0.0;
    std::vector<PeriodFindings> periods;
    bool attracting_cycle_period_ge_2 = false;
    double nonconvergent_fraction = 0.0;
    std::size_t sample_count = 0;
    BarnaConfig config;
};

/// Fraction of uniform samples in [lo, hi] whose real Newton orbit does not
/// settle on a real root within max_iter steps. Samples come in chunks of
/// 4096, chunk c drawing from make_stream(seed, c).
inline double nonconvergent_fraction(const UniComplexPoly& p, const BarnaConfig& cfg, unsigned threads = 0)
{
    const RealNewton1D N(p);
    std::vector<double> roots;
    for (const auto& r : real_roots(p)) roots.push_back(r.value.real());
    constexpr std::size_t chunk = 4096;
    const std::size_t chunks = (cfg.samples + chunk - 1) / chunk;
    std::vector<std::size_t> failures(chunks, 0);
    parallel_for(chunks, threads, [&](std::size_t c) {
        auto rng = make_stream(cfg.prng_seed, c);
        const std::size_t n = std::min(chunk, cfg.samples - c * chunk);
        for (std::size_t s = 0; s < n; ++s) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            double x = cfg.sample_lo + (cfg.sample_hi - cfg.sample_lo) * u;
            int prev = -1;
            bool ok = false;
            for (int it = 0; it < cfg.max_iter && std::isfinite(x); ++it) {
                x = N(x);
                int near = -1;
                for (std::size_t i = 0; i < roots.size(); ++i)
                    if (std::abs(x - roots[i]) <= cfg.root_tol) near = static_cast<int>(i);
                if (near >= 0 && near == prev) {
                    ok = true;
                    break;
                }
                prev = near;
            }
            if (!ok) ++failures[c];
        }
    });
    const std::size_t total = std::accumulate(failures.begin(), failures.end(), std::size_t{0});
    return cfg.samples == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(cfg.samples);
}

inline BarnaReport barna_check(const UniComplexPoly& p, const BarnaConfig& cfg = {}, unsigned threads = 0)
{
    if (!p.is_real()) throw InvalidInput("barna_check needs real coefficients");
    if (cfg.max_period < 1 || cfg.max_iter < 1 || !(cfg.sample_lo < cfg.sample_hi))
        throw InvalidInput("invalid Barna configuration");
    BarnaReport rep;
    rep.config = cfg;
    rep.degree = p.degree();
    {
        std::vector<double> c;
        for (cplx v : p.coeffs()) c.push_back(v.real());
        MultiPoly mp;
        for (std::size_t i = 0; i < c.size(); ++i) mp += MultiPoly::monomial(c[i], static_cast<int>(i), 0);
        rep.polynomial = mp.to_string();
    }
    if (rep.degree < 1) throw InvalidInput("barna_check needs a nonconstant polynomial");
    rep.roots = univariate_complex_roots(p);
    rep.all_roots_real = std::all_of(rep.roots.begin(), rep.roots.end(),
                                     [](const ComplexRoot& r) { return std::abs(r.value.imag()) < 1e-8; });
    rep.simple_roots =
        std::all_of(rep.roots.begin(), rep.roots.end(), [](const ComplexRoot& r) { return r.multiplicity == 1; });
    if (rep.degree < 4) rep.notes.push_back("degree below 4");
    if (!rep.all_roots_real) rep.notes.push_back("polynomial has non-real roots");
    if (!rep.simple_roots) rep.notes.push_back("polynomial has multiple roots");
    rep.hypotheses_met = rep.degree >= 4 && rep.all_roots_real && rep.simple_roots;

    // interval holding all real roots of p, p' and p''
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const UniComplexPoly& q : {p, p.derivative(), p.derivative().derivative()}) {
        if (q.degree() < 1) continue;
        for (const auto& r : real_roots(q)) {
            lo = std::min(lo, r.value.real());
            hi = std::max(hi, r.value.real());
        }
    }
    if (!(lo <= hi)) lo = hi = 0.0;
    const double margin = 1.0 + 0.1 * (hi - lo);
    rep.scan_lo = lo - margin;
    rep.scan_hi = hi + margin;

    const double base = static_cast<double>(rep.degree - 2);
    for (int k = 1; k <= cfg.max_period; ++k) {
        auto scan = enumerate_cycles_1d(p, k, rep.scan_lo, rep.scan_hi, cfg.scan, threads);
        PeriodFindings f;
        f.period = k;
        f.periodic_points = scan.periodic_points.size();
        f.bound = std::pow(std::max(base, 0.0), k);
        f.bound_ok = static_cast<double>(f.periodic_points) >= f.bound;
        f.cycles = std::move(scan.cycles);
        if (k >= 2)
            for (const auto& c : f.cycles)
                if (c.stability == Stability::Attracting) rep.attracting_cycle_period_ge_2 = true;
        rep.periods.push_back(std::move(f));
    }
    rep.sample_count = cfg.samples;
    rep.nonconvergent_fraction = nonconvergent_fraction(p, cfg, threads);
    return rep;
}

// ---------------------------------------------------------------------------
// Basin boundaries
// ---------------------------------------------------------------------------

struct BoundaryRaster {
    OccupancyRaster boundary;
    OccupancyRaster nonregular;        ///< diversity >= 3
    std::vector<std::uint8_t> diversity; ///< distinct attractor codes in the 3x3 block
    double nonregular_fraction = 0.0;  ///< nonregular / boundary pixels
};

/// A pixel is on the boundary when its 3x3 block holds at least two distinct
/// attractor codes (roots, cycle, escape); singular and undecided pixels do
/// not count.
inline BoundaryRaster extract_boundary(const BasinRaster& basins)
{
    std::vector<int> attractors;
    for (int c : basins.codes)
        if (is_attractor_code(c) && std::find(attractors.begin(), attractors.end(), c) == attractors.end()) {
            attractors.push_back(c);
            if (attractors.size() >= 2) break;
        }
    if (attractors.size() < 2) throw InvalidInput("extract_boundary needs at least two attractor codes");

    const int w = basins.width(), h = basins.height();
    BoundaryRaster out{OccupancyRaster(basins.grid.window, w, h), OccupancyRaster(basins.grid.window, w, h),
                       std::vector<std::uint8_t>(basins.codes.size(), 0), 0.0};
    for (int row = 0; row < h; ++row)
        for (int col = 0; col < w; ++col) {
            int seen[9];
            int n = 0;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const int r = row + dr, c = col + dc;
                    if (r < 0 || r >= h || c < 0 || c >= w) continue;
                    const int code = basins.code(c, r);
                    if (!is_attractor_code(code)) continue;
                    if (std::find(seen, seen + n, code) == seen + n) seen[n++] = code;
                }
            const std::size_t idx = basins.grid.index(col, row);
            out.diversity[idx] = static_cast<std::uint8_t>(n);
            if (n >= 2) out.boundary.set(idx);
            if (n >= 3) out.nonregular.set(idx);
        }
    out.nonregular_fraction = out.boundary.empty() ? 0.0
                                                   : static_cast<double>(out.nonregular.count()) /
                                                         static_cast<double>(out.boundary.count());
    return out;
}

struct BoundaryComparison {
    double hausdorff_pixels = 0.0;
    double alpha_to_boundary = 0.0; ///< directed: worst alpha pixel
    double boundary_to_alpha = 0.0; ///< directed: worst boundary pixel
    std::size_t boundary_pixel_count = 0;
    std::size_t alpha_pixel_count = 0;
    double nonregular_fraction = 0.0;
    bool nonregular_only = false;
};

inline BoundaryComparison compare_alpha_boundary(const OccupancyRaster& alpha, const BoundaryRaster& boundary,
                                                 bool nonregular_only = false)
{
    const OccupancyRaster& target = nonregular_only ? boundary.nonregular : boundary.boundary;
    if (!alpha.grid().same_geometry(target.grid())) throw InvalidInput("compare_alpha_boundary: geometry mismatch");
    BoundaryComparison c;
    c.hausdorff_pixels = hausdorff_pixel_distance(alpha, target);
    c.alpha_to_boundary = directed_hausdorff_pixels(alpha, target);
    c.boundary_to_alpha = directed_hausdorff_pixels(target, alpha);
    c.boundary_pixel_count = target.count();
    c.alpha_pixel_count = alpha.count();
    c.nonregular_fraction = boundary.nonregular_fraction;
    c.nonregular_only = nonregular_only;
    return c;
}

// ---------------------------------------------------------------------------
// Ghost-line attractors
// ---------------------------------------------------------------------------

struct GhostProbeConfig {
    int seeds = 200;
    double half_length = 5.0;   ///< seeds are drawn with line parameter in [-L, L]
    double delta = 0.1;         ///< seeds start within delta/2 of the line
    int steps = 500;
    int divergence_steps = 30;
    double separation = 1e-9;
    double invariance_tol = 1e-6;
    std::uint64_t prng_seed = 1;
};

struct GhostProbe {
    GhostLine line;
    double invariance_defect = 0.0;
    bool line_invariant = false;
    int seeds = 0;
    int stayed = 0;           ///< within delta for all steps
    double fraction_within = 0.0;
    int singular_hits = 0;
    double divergence_rate = 0.0; ///< mean log(separation growth) per step
    int divergence_pairs = 0;
    std::vector<Vec2> sample_orbit; ///< orbit of the first seed that stayed
};

inline GhostProbe probe_ghost_attractor(const NewtonPlaneMap& N, const GhostLine& line,
                                        const GhostProbeConfig& cfg = {})
{
    GhostProbe out;
    out.line = line;
    out.invariance_defect = ghost_line_invariance_defect(N, line, 50, cfg.half_length);
    out.line_invariant = out.invariance_defect <= cfg.invariance_tol;
    out.seeds = cfg.seeds;
    const Vec2 normal{-line.direction.y, line.direction.x};
    auto rng = make_stream(cfg.prng_seed, 0);
    auto uniform = [&](double lo, double hi) {
        return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };
    double rate_sum = 0.0;
    for (int s = 0; s < cfg.seeds; ++s) {
        const Vec2 seed = line.at(uniform(-cfg.half_length, cfg.half_length)) +
                          uniform(-0.5 * cfg.delta, 0.5 * cfg.delta) * normal;
        std::vector<Vec2> orbit{seed};
        bool stayed = true;
        Vec2 x = seed;
        for (int t = 0; t < cfg.steps && stayed; ++t) {
            const auto nx = N.try_step(x);
            if (!nx) {
                ++out.singular_hits;
                stayed = false;
                break;
            }
            x = *nx;
            if (!is_finite(x) || line.distance_to(x) > cfg.delta) stayed = false;
            if (out.sample_orbit.empty()) orbit.push_back(x);
        }
        if (stayed) {
            ++out.stayed;
            if (out.sample_orbit.empty()) out.sample_orbit = std::move(orbit);
        }

        // two-trajectory divergence
        Vec2 a = seed, b = seed + cfg.separation * line.direction;
        bool ok = true;
        for (int t = 0; t < cfg.divergence_steps && ok; ++t) {
            const auto na = N.try_step(a), nb = N.try_step(b);
            ok = na && nb && is_finite(*na) && is_finite(*nb);
            if (ok) {
                a = *na;
                b = *nb;
            }
        }
        const double sep = distance(a, b);
        if (ok && sep > 0.0) {
            rate_sum += std::log(sep / cfg.separation) / cfg.divergence_steps;
            ++out.divergence_pairs;
        }
    }
    out.fraction_within = cfg.seeds > 0 ? static_cast<double>(out.stayed) / cfg.seeds : 0.0;
    out.divergence_rate = out.divergence_pairs > 0 ? rate_sum / out.divergence_pairs : 0.0;
    return out;
}

/// One probe per ghost line of f found in `box`; empty when f has none.
inline std::vector<GhostProbe> probe_ghost_attractors(const PlaneMap& f, const Box& box,
                                                      const GhostProbeConfig& cfg = {},
                                                      const GhostSearchOptions& search = {})
{
    const NewtonPlaneMap N(f);
    std::vector<GhostProbe> out;
    for (const auto& line : ghost_lines(f, box, search)) out.push_back(probe_ghost_attractor(N, line, cfg));
    return out;
}

} // namespace newtondyn
