#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "geometry.hpp"
#include "newton.hpp"
#include "parallel.hpp"
#include "poly.hpp"
#include "raster.hpp"

namespace newtondyn {

struct Disk {
    Vec2 center;
    double radius = 0.0;
    bool contains(Vec2 p) const { return distance(p, center) < radius; }
};

/// Counterimages of z under R = num/den: roots of num(w) - z den(w), repeated
/// by multiplicity. Roots shared with the denominator and roots failing
/// |R(w) - z| <= 1e-8 (1 + |z|) are dropped.
inline std::vector<cplx> complex_counterimages(const RationalMap& R, cplx z)
{
    const UniComplexPoly g = R.numerator() - z * R.denominator();
    if (g.degree() < 1) return {};
    std::vector<cplx> out;
    const double tol = 1e-8 * (1.0 + std::abs(z));
    for (const auto& r : univariate_complex_roots(g)) {
        cplx w = r.value;
        auto v = R.try_eval(w);
        if (v && std::abs(*v - z) > tol && r.multiplicity == 1) {
            // polish once more on g
            const UniComplexPoly dg = g.derivative();
            for (int k = 0; k < 3; ++k) {
                const cplx d = dg(w);
                if (d == cplx(0.0)) break;
                w -= g(w) / d;
            }
            v = R.try_eval(w);
        }
        if (!v || std::abs(*v - z) > tol) continue;
        for (int m = 0; m < r.multiplicity; ++m) out.push_back(w);
    }
    return out;
}

/// Real counterimages of z under a planar Newton map inside `domain`: real
/// solutions of D_w f (w - z) = f(w) with nonsingular Jacobian.
inline std::vector<Vec2> planar_counterimages(const NewtonPlaneMap& N, Vec2 z, const Box& domain, int max_depth = 12)
{
    const auto& j = N.jacobian();
    const MultiPoly dx = MultiPoly::x() - MultiPoly::constant(z.x);
    const MultiPoly dy = MultiPoly::y() - MultiPoly::constant(z.y);
    const PlaneMap g(j[0] * dx + j[1] * dy - N.source().first(), j[2] * dx + j[3] * dy - N.source().second());
    std::vector<Vec2> out;
    if (g.first().is_zero() && g.second().is_zero()) return out;
    const double tol = 1e-8 * (1.0 + norm(z));
    for (Vec2 w : system_real_roots(g, domain, 1e-10, max_depth).roots) {
        const auto img = N.try_step(w);
        if (!img || distance(*img, z) > tol) continue;
        out.push_back(w);
    }
    return out;
}

inline std::vector<Vec2> planar_counterimages(const NewtonPlaneMap& N, Vec2 z, const std::optional<Box>& domain)
{
    if (!domain) throw InvalidInput("planar counterimages need a bounded search domain");
    return planar_counterimages(N, z, *domain);
}

/// A map together with the means to invert it: a complex rational map, or a
/// planar Newton map restricted to a search domain.
class InverseMap {
public:
    static InverseMap complex(RationalMap R) { return InverseMap(std::move(R)); }
    static InverseMap complex(const NewtonComplexMap& N) { return InverseMap(N.map); }
    static InverseMap planar(NewtonPlaneMap N, const Box& domain)
    {
        if (!domain.valid()) throw InvalidInput("invalid counterimage search domain");
        InverseMap m(std::move(N));
        m.domain_ = domain;
        return m;
    }

    bool is_complex() const { return std::holds_alternative<RationalMap>(map_); }
    const std::optional<Box>& domain() const { return domain_; }

    std::vector<Vec2> counterimages(Vec2 z) const
    {
        if (const auto* R = std::get_if<RationalMap>(&map_)) {
            std::vector<Vec2> out;
            for (cplx w : complex_counterimages(*R, to_complex(z))) out.push_back(to_vec(w));
            return out;
        }
        return planar_counterimages(std::get<NewtonPlaneMap>(map_), z, domain_);
    }

    Vec2 forward(Vec2 w) const
    {
        if (const auto* R = std::get_if<RationalMap>(&map_)) return R->step(w);
        return std::get<NewtonPlaneMap>(map_).step(w);
    }

private:
    explicit InverseMap(RationalMap R) : map_(std::move(R)) {}
    explicit InverseMap(NewtonPlaneMap N) : map_(std::move(N)) {}

    std::variant<RationalMap, NewtonPlaneMap> map_;
    std::optional<Box> domain_;
};

// ---------------------------------------------------------------------------
// Random backward orbits
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// mt19937_64 seeded with splitmix64(splitmix64(seed) ^ stream).
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream)
{
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ stream));
}

struct BackwardOrbit {
    Vec2 seed;
    std::vector<Vec2> points; ///< z_{burn_in+1}, ..., recorded in order
    std::uint64_t prng_seed = 0;
    int burn_in = 0;
    bool truncated = false;
    int backtracks = 0;
};

/// z_i drawn uniformly (with multiplicity) among the counterimages of
/// z_{i-1}. A point without counterimages is a dead end: the walk steps back
/// to its parent and redraws among the parent's untried counterimages,
/// stepping back further when those run out. After 100 such redraws without
/// reaching a new depth the orbit is truncated.
inline BackwardOrbit random_backward_orbit(const InverseMap& M, Vec2 z0, int length, int burn_in,
                                           std::uint64_t prng_seed, std::uint64_t stream = 0)
{
    if (burn_in < 0 || length <= burn_in) throw InvalidInput("random_backward_orbit needs length > burn_in >= 0");
    auto rng = make_stream(prng_seed, stream);
    struct Frame {
        Vec2 point;
        std::vector<Vec2> untried;
    };
    std::vector<Frame> path{{z0, M.counterimages(z0)}};
    BackwardOrbit orbit;
    orbit.seed = z0;
    orbit.prng_seed = prng_seed;
    orbit.burn_in = burn_in;
    int retries = 0;
    std::size_t deepest = 1;
    while (static_cast<int>(path.size()) <= length) {
        auto& top = path.back();
        if (top.untried.empty()) {
            if (path.size() < 2 || retries >= 100) {
                orbit.truncated = true;
                break;
            }
            ++retries;
            ++orbit.backtracks;
            path.pop_back();
            continue;
        }
        const std::size_t k = static_cast<std::size_t>(rng() % top.untried.size());
        const Vec2 w = top.untried[k];
        top.untried.erase(top.untried.begin() + static_cast<std::ptrdiff_t>(k));
        path.push_back({w, M.counterimages(w)});
        if (path.size() > deepest) {
            deepest = path.size();
            retries = 0;
        }
    }
    if (static_cast<int>(path.size()) <= burn_in + 1) throw EmptyResult("backward orbit truncated before burn-in");
    for (std::size_t i = static_cast<std::size_t>(burn_in) + 1; i < path.size(); ++i) orbit.points.push_back(path[i].point);
    return orbit;
}

inline OccupancyRaster rasterize(const std::vector<Vec2>& points, const Box& window, int width, int height)
{
    OccupancyRaster r(window, width, height);
    for (Vec2 p : points) r.mark(p);
    return r;
}

// ---------------------------------------------------------------------------
// Backward trees
// ---------------------------------------------------------------------------

struct BackwardTree {
    OccupancyRaster raster;     ///< deepest completed level
    int completed_depth = 0;
    std::size_t nodes = 0;      ///< counterimages generated, all levels
    std::size_t level_size = 0; ///< points in the rasterized level
};

/// Breadth-first expansion of counterimages of z0. Stops at `depth` or when
/// the next level would push the node count past `cap`; the raster is
/// flagged partial in the latter case.
inline BackwardTree backward_tree(const InverseMap& M, Vec2 z0, int depth, std::size_t cap, const Box& window,
                                  int width, int height, unsigned threads = 0)
{
    if (depth < 1) throw InvalidInput("backward_tree depth must be >= 1");
    if (threads == 0) threads = default_threads();
    // parents are expanded in fixed blocks; a round of blocks runs in
    // parallel, then its output is appended (or rasterized) in block order
    constexpr std::size_t block = 2048;
    const std::size_t round = static_cast<std::size_t>(threads) * 4;

    std::vector<Vec2> level{z0};
    BackwardTree t;
    t.raster = rasterize(level, window, width, height);
    t.level_size = 1;
    for (int d = 1; d <= depth; ++d) {
        const bool last = d == depth;
        std::vector<Vec2> next;
        OccupancyRaster final_raster(window, width, height);
        std::size_t total = 0;
        bool over = false;
        const std::size_t blocks = (level.size() + block - 1) / block;
        std::vector<std::vector<Vec2>> out(round);
        for (std::size_t b0 = 0; b0 < blocks && !over; b0 += round) {
            const std::size_t nb = std::min(round, blocks - b0);
            parallel_for(nb, threads, [&](std::size_t i) {
                out[i].clear();
                const std::size_t lo = (b0 + i) * block, hi = std::min(lo + block, level.size());
                for (std::size_t k = lo; k < hi; ++k)
                    for (Vec2 w : M.counterimages(level[k])) out[i].push_back(w);
            });
            for (std::size_t i = 0; i < nb; ++i) {
                total += out[i].size();
                if (last)
                    for (Vec2 w : out[i]) final_raster.mark(w);
                else
                    next.insert(next.end(), out[i].begin(), out[i].end());
            }
            over = t.nodes + total > cap;
        }
        if (over) break;
        t.nodes += total;
        t.completed_depth = d;
        t.level_size = total;
        if (last) {
            t.raster = std::move(final_raster);
        } else {
            level = std::move(next);
            t.raster = rasterize(level, window, width, height);
            if (level.empty()) break;
        }
    }
    t.raster.set_partial(t.completed_depth < depth);
    return t;
}

// ---------------------------------------------------------------------------
// Hutchinson iteration
// ---------------------------------------------------------------------------

struct HutchinsonRun {
    std::vector<OccupancyRaster> iterates; ///< K_1, ..., K_steps
    std::vector<double> gaps;              ///< gaps[n] = h(K_n, K_{n+1}) with K_0 the initial raster
};

/// One application of the restricted inverse-branch operator to a raster.
inline OccupancyRaster hutchinson_step(const InverseMap& M, const OccupancyRaster& K, const std::vector<Disk>& excluded,
                                       unsigned threads = 0)
{
    const auto centers = K.set_centers();
    std::vector<std::vector<Vec2>> images(centers.size());
    parallel_for(centers.size(), threads, [&](std::size_t i) {
        for (Vec2 w : M.counterimages(centers[i])) {
            bool skip = false;
            for (const auto& d : excluded) skip = skip || d.contains(w);
            if (!skip) images[i].push_back(w);
        }
    });
    OccupancyRaster next(K.window(), K.width(), K.height());
    for (const auto& im : images)
        for (Vec2 w : im) next.mark(w);
    if (next.empty()) throw EmptyResult("Hutchinson iterate is empty");
    return next;
}

inline HutchinsonRun hutchinson_iterate(const InverseMap& M, const OccupancyRaster& initial,
                                        const std::vector<Disk>& excluded, int steps, unsigned threads = 0)
{
    if (initial.empty()) throw InvalidInput("Hutchinson iteration needs a nonempty initial raster");
    if (steps < 1) throw InvalidInput("Hutchinson iteration needs steps >= 1");
    HutchinsonRun run;
    run.iterates.reserve(static_cast<std::size_t>(steps));
    const OccupancyRaster* prev = &initial;
    for (int n = 0; n < steps; ++n) {
        run.iterates.push_back(hutchinson_step(M, *prev, excluded, threads));
        run.gaps.push_back(hausdorff_pixel_distance(*prev, run.iterates.back()));
        prev = &run.iterates.back();
    }
    return run;
}

} // namespace newtondyn
