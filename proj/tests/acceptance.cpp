// Acceptance suite: one [PASS]/[FAIL] line per criterion, nonzero exit if any
// criterion fails. Runs single-threaded unless a criterion is about threads.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "newtondyn/job.hpp"
#include "newtondyn/newtondyn.hpp"

using namespace newtondyn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what)
    {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::vector<Vec2> cube_root_points() { return complex_root_points(parse_complex_poly("z^3 - 1")); }

BasinRaster cube_basins(int n)
{
    const auto p = parse_complex_poly("z^3 - 1");
    return render_basins(build_newton_complex(p), complex_root_points(p), square(2.0), n, n, ScanConfig{}, 1).raster;
}

Verdict ac1()
{
    Verdict v;
    const auto t0 = Clock::now();
    const auto r = cube_basins(300);
    const double secs = seconds_since(t0);
    v.check(secs < 10.0, "time " + fmt("%.2f s", secs));
    std::vector<double> f;
    for (int k = 0; k < 3; ++k) f.push_back(r.fraction(k));
    const double spread = *std::max_element(f.begin(), f.end()) - *std::min_element(f.begin(), f.end());
    v.check(spread <= 0.01, "fractions " + fmt("%.4f", f[0]) + "/" + fmt("%.4f", f[1]) + "/" + fmt("%.4f", f[2]) +
                                " spread " + fmt("%.4f", spread));
    const double rest = r.fraction(kUndecidedCode) + r.fraction(kCycleCode);
    v.check(rest < 0.001, "undecided+cycle " + fmt("%.2e", rest));
    return v;
}

Verdict ac2()
{
    Verdict v;
    const auto p = parse_complex_poly("z^3 - 2z + 2");
    const auto N = build_newton_complex(p);
    const cplx n0 = N(cplx(0.0)), n1 = N(cplx(1.0));
    v.check(std::abs(n0 - 1.0) <= 1e-15 && std::abs(n1) <= 1e-15,
            "N(0)=" + fmt("%.17g", n0.real()) + " N(1)=" + fmt("%.3g", std::abs(n1)));
    const auto o = classify_orbit(N, {0.0, 0.0}, complex_root_points(p), ScanConfig{});
    v.check(o.kind == OrbitOutcome::Kind::Cycle && o.period == 2 && o.multiplier < 1e-6,
            "period " + std::to_string(o.period) + " multiplier " + fmt("%.2e", o.multiplier));
    const auto s = render_basins(N, complex_root_points(p), square(1.5), 300, 300, ScanConfig{}, 1);
    v.check(s.raster.fraction(kCycleCode) > 0.01, "cycle fraction " + fmt("%.4f", s.raster.fraction(kCycleCode)));
    return v;
}

Verdict ac3()
{
    Verdict v;
    {
        const auto M = InverseMap::complex(build_newton_complex(parse_complex_poly("z^3 - 1")));
        const auto t = backward_tree(M, {5.0, 1.0}, 10, 10000000, square(2.0), 256, 256, 1);
        const auto c = compare_alpha_boundary(t.raster, extract_boundary(cube_basins(256)));
        v.check(c.hausdorff_pixels <= 3.0, "z^3-1 depth 10 at 256^2: " + fmt("%.2f px", c.hausdorff_pixels) + " (alpha->bd " +
                                               fmt("%.2f", c.alpha_to_boundary) + ", bd->alpha " +
                                               fmt("%.2f", c.boundary_to_alpha) + ")");
    }
    {
        const auto f = parse_plane_map("y - x^2", "x + 2 - (y-2)^2");
        const auto N = build_newton_plane(f);
        const Box window{-3.0, 3.0, -1.0, 5.0};
        const auto basins = render_basins(N, system_real_roots(f, window).roots, window, 512, 512, ScanConfig{}, 1);
        const auto M = InverseMap::planar(N, Box{-1000.0, 1000.0, -998.0, 1002.0});
        const auto t = backward_tree(M, {-1.25, 0.75}, 12, 2000000, window, 512, 512, 1);
        const auto c = compare_alpha_boundary(t.raster, extract_boundary(basins.raster));
        v.check(c.hausdorff_pixels <= 5.0, "planar depth 12 at 512^2: " + fmt("%.2f px", c.hausdorff_pixels) +
                                               " (alpha->bd " + fmt("%.2f", c.alpha_to_boundary) + ", bd->alpha " +
                                               fmt("%.2f", c.boundary_to_alpha) + ")");
    }
    return v;
}

Verdict ac4()
{
    Verdict v;
    const auto M = InverseMap::complex(build_newton_complex(parse_complex_poly("z^3 - 1")));
    const auto tree = backward_tree(M, {5.0, 1.0}, 10, 10000000, square(2.0), 256, 256, 1).raster;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto o = random_backward_orbit(M, {5.0, 1.0}, 2000, 100, seed);
        const double h = hausdorff_pixel_distance(rasterize(o.points, square(2.0), 256, 256), tree);
        v.check(h <= 3.0, "seed " + std::to_string(seed) + " " + fmt("%.2f px", h));
    }
    return v;
}

Verdict ac5()
{
    Verdict v;
    const auto M = InverseMap::complex(build_newton_complex(parse_complex_poly("z^3 - 1")));
    std::vector<Disk> disks;
    for (Vec2 r : cube_root_points()) disks.push_back({r, 0.3});
    const auto run = hutchinson_iterate(M, OccupancyRaster::full(square(2.0), 256, 256), disks, 12, 1);
    int first = -1;
    for (std::size_t i = 0; i < run.gaps.size() && first < 0; ++i)
        if (run.gaps[i] <= 2.0) first = static_cast<int>(i) + 1;
    v.check(first > 0, first > 0 ? "gap <= 2 px after " + std::to_string(first) + " iterations (last " +
                                       fmt("%.2f", run.gaps.back()) + ")"
                                 : "smallest gap " + fmt("%.2f", *std::min_element(run.gaps.begin(), run.gaps.end())));
    return v;
}

Verdict ac6()
{
    Verdict v;
    const auto t0 = Clock::now();
    const auto rep = barna_check(parse_complex_poly("(x^2 - 1)(x^2 - 4)", "x"), BarnaConfig{}, 1);
    const double secs = seconds_since(t0);
    v.check(rep.all_roots_real, "all roots real");
    bool repelling = true, counts = rep.periods.size() == 5;
    std::string per;
    for (const auto& f : rep.periods) {
        if (f.period >= 2)
            for (const auto& c : f.cycles) repelling = repelling && c.stability == Stability::Repelling;
        counts = counts && f.periodic_points >= std::pow(2.0, f.period);
        per += (per.empty() ? "" : ",") + std::to_string(f.periodic_points);
    }
    v.check(repelling, "cycles of period 2..5 repelling");
    v.check(counts, "periodic points k=1..5: " + per);
    v.check(rep.sample_count == 1000000 && rep.nonconvergent_fraction < 1e-3,
            "nonconvergent " + fmt("%.2e", rep.nonconvergent_fraction) + " of " + std::to_string(rep.sample_count));
    v.check(secs < 120.0, "time " + fmt("%.1f s", secs));
    return v;
}

// closed-form homogeneous Newton map of the real form of z^2 - 1
std::array<double, 3> reference_triple(double x, double y, double z)
{
    const double r = x * x + y * y;
    return {x * (r + z * z), y * (r - z * z), 2.0 * z * r};
}

Verdict ac7()
{
    Verdict v;
    const auto H = homogenize_newton(build_newton_plane(real_form(parse_complex_poly("z^2 - 1"))));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const double x = u(rng), y = u(rng), z = u(rng);
        const auto a = H.map(x, y, z), b = reference_triple(x, y, z);
        // relative error after scaling a onto b
        const double s = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
        double num = 0.0, den = 0.0;
        for (int i = 0; i < 3; ++i) {
            num += (s * a[i] - b[i]) * (s * a[i] - b[i]);
            den += b[i] * b[i];
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    v.check(worst < 1e-9, "triple rel. error " + fmt("%.2e", worst));
    double dev = 0.0;
    for (int k = 0; k < 10; ++k) {
        const Mat2 J = jacobian_at_infinity(H.map, -3.0 + 0.6 * k + 0.05);
        dev = std::max({dev, std::abs(J.a - 1.0), std::abs(J.b), std::abs(J.c), std::abs(J.d - 2.0)});
    }
    v.check(dev < 1e-4, "diag(1, 2) at infinity, max deviation " + fmt("%.2e", dev));
    return v;
}

Verdict ac8()
{
    Verdict v;
    const PlaneMap f = real_form(parse_complex_poly("z^2 - 1"));
    const PlaneMap psi = parse_plane_map("x", "y + x^2"), psi_inv = parse_plane_map("x", "y - x^2");
    const PlaneMap g = pullback_map(f, psi, psi_inv);
    const auto Nf = build_newton_plane(f), Ng = build_newton_plane(g);
    const double gap = distance(Ng.step({1.0, 1.0}), pullback_newton_step(Nf, psi, psi_inv, {1.0, 1.0}));
    v.check(gap > 1e-3, "|N_psi*f - psi*N_f| at (1,1) = " + fmt("%.4g", gap));
    const auto sg = render_basins(Ng, system_real_roots(g, square(3.0)).roots, square(2.0), 200, 200, ScanConfig{}, 1);
    const auto sf = render_basins(Nf, system_real_roots(f, square(3.0)).roots, square(2.0), 200, 200, ScanConfig{}, 1);
    const double eg = sg.raster.fraction(kEscapedCode), ef = sf.raster.fraction(kEscapedCode);
    v.check(eg > 0.0 && ef == 0.0, "escaped fraction " + fmt("%.4f", eg) + " vs " + fmt("%.4f", ef));
    return v;
}

Verdict ac9()
{
    Verdict v;
    const ScanConfig cfg;
    const auto s = parameter_scan(cubic_family, 0.0, Box{-2.3, 1.7, -2.0, 2.0}, 200, 200, cfg, 1);
    v.check(!s.cycles.empty(), std::to_string(s.cycles.size()) + " cycle pixels");
    std::size_t verified = 0;
    for (const auto& h : s.cycles) {
        const auto p = cubic_family(to_complex(s.raster.grid.center(h.pixel)));
        const auto N = build_newton_complex(p);
        const auto o = classify_orbit(N, {0.0, 0.0}, complex_root_points(p), cfg);
        bool ok = o.kind == OrbitOutcome::Kind::Cycle && o.multiplier < 1.0 && h.outcome.multiplier < 1.0;
        // the representative returns to itself after one period
        Vec2 x = o.point;
        for (int k = 0; k < o.period && ok; ++k) x = N.step(x);
        ok = ok && distance(x, o.point) <= 1e-6 * (1.0 + norm(o.point));
        verified += ok;
    }
    v.check(verified == s.cycles.size(), std::to_string(verified) + " re-verified");
    return v;
}

Verdict ac10()
{
    Verdict v;
    const PlaneMap f = parse_plane_map("x^2(x-1) + y", "x + 0.5 - y^2");
    const auto N = build_newton_plane(f);
    const auto lines = ghost_lines(f, square(5.0));
    v.check(!lines.empty(), std::to_string(lines.size()) + " ghost lines");
    double best_defect = INFINITY, best_fraction = 0.0;
    bool both = false;
    GhostProbeConfig cfg;
    cfg.delta = 0.1;
    cfg.steps = 500;
    for (const auto& l : lines) {
        const auto p = probe_ghost_attractor(N, l, cfg);
        best_defect = std::min(best_defect, p.invariance_defect);
        best_fraction = std::max(best_fraction, p.fraction_within);
        both = both || (p.invariance_defect <= 1e-6 && p.fraction_within > 0.0);
    }
    v.check(best_defect <= 1e-6, "smallest invariance defect " + fmt("%.3g", best_defect));
    v.check(best_fraction > 0.0, "largest fraction within 0.1 for 500 steps " + fmt("%.3f", best_fraction));
    v.check(both, "one line meets both");
    return v;
}

Verdict ac11()
{
    Verdict v;
    const RationalMap L(parse_complex_poly("(z^2 + 1)^2"), parse_complex_poly("4z(z^2 - 1)"));
    const auto t = backward_tree(InverseMap::complex(L), {0.3, 0.7}, 12, 30000000, square(3.0), 128, 128, 1);
    const double cover = static_cast<double>(t.raster.count()) / (128.0 * 128.0);
    v.check(t.completed_depth == 12, "depth " + std::to_string(t.completed_depth) + ", " + std::to_string(t.nodes) +
                                         " nodes");
    v.check(cover > 0.9, "coverage " + fmt("%.4f", cover));
    return v;
}

Verdict ac12()
{
    Verdict v;
    const std::vector<json> jobs{
        {{"mode", "basins"}, {"poly", "z^3 - 2z + 2"}, {"window", {-1.5, 1.5, -1.5, 1.5}}, {"resolution", {96, 96}}},
        {{"mode", "alpha-tree"}, {"poly", "z^3 - 1"}, {"seed_point", {5.0, 1.0}}, {"depth", 7}, {"resolution", {96, 96}}},
        {{"mode", "alpha-random"},
         {"poly", "z^3 - 1"},
         {"seed_point", {5.0, 1.0}},
         {"length", 500},
         {"burn_in", 50},
         {"orbits", 4},
         {"prng_seed", 5},
         {"resolution", {96, 96}}},
        {{"mode", "ifs"}, {"poly", "z^3 - 1"}, {"exclusion_radius", 0.3}, {"steps", 4}, {"resolution", {64, 64}}},
        {{"mode", "param-scan"}, {"family", "z^3 + (A-1)z - A"}, {"window", {-2.3, 1.7, -2.0, 2.0}}, {"resolution", {48, 48}}},
        {{"mode", "barna"}, {"poly", "(x^2-1)(x^2-4)"}, {"variable", "x"}, {"max_period", 3}, {"samples", 20000}},
        {{"mode", "ghost"},
         {"map_kind", "planar"},
         {"f1", "y - x^2"},
         {"f2", "x + 1 - (y-2)^2"},
         {"window", {-3.0, 3.0, -3.0, 3.0}},
         {"ghost_seeds_per_axis", 8},
         {"probe_seeds", 20},
         {"probe_steps", 50}},
        {{"mode", "compare"},
         {"map_kind", "planar"},
         {"f1", "x(x^2-1)"},
         {"f2", "y(y^2-1)"},
         {"seed_point", {0.3, 0.4}},
         {"alpha_source", "random"},
         {"length", 300},
         {"burn_in", 10},
         {"resolution", {64, 64}}},
    };
    auto strip = [](json r) {
        r.erase("timings");
        return r;
    };
    int same = 0;
    std::string bad;
    for (json j : jobs) {
        j["threads"] = 1;
        const auto a = run_job(parse_job_config(j));
        const auto b = run_job(parse_job_config(j));
        j["threads"] = 4;
        const auto c = run_job(parse_job_config(j));
        const bool ok = a.artifacts == b.artifacts && a.artifacts == c.artifacts &&
                        strip(a.report).dump() == strip(b.report).dump() &&
                        strip(a.report).dump() == strip(c.report).dump();
        same += ok;
        if (!ok) bad += " " + j.at("mode").get<std::string>();
    }
    v.check(bad.empty(), std::to_string(same) + "/" + std::to_string(jobs.size()) +
                             " modes byte-identical over reruns and 1 vs 4 threads" + (bad.empty() ? "" : ":" + bad));
    return v;
}

} // namespace

int main()
{
    std::setvbuf(stdout, nullptr, _IONBF, 0);
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"AC1  z^3-1 basin benchmark", ac1},
        {"AC2  q superattracting 2-cycle", ac2},
        {"AC3  alpha-limit vs basin boundary", ac3},
        {"AC4  random backward orbits vs tree", ac4},
        {"AC5  Hutchinson iteration settles", ac5},
        {"AC6  Barna suite", ac6},
        {"AC7  projective z^2-1 example", ac7},
        {"AC8  pullback non-naturality", ac8},
        {"AC9  cubic family parameter scan", ac9},
        {"AC10 ghost lines of f_alpha", ac10},
        {"AC11 Lattes coverage", ac11},
        {"AC12 determinism", ac12},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        failed += !v.pass;
        std::printf("[%s] %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str(), seconds_since(t0));
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
