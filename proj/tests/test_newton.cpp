#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "newtondyn/newton.hpp"
#include "newtondyn/parse.hpp"

using namespace newtondyn;

namespace {

PlaneMap z2_minus_1() { return parse_plane_map("x^2 - y^2 - 1", "2x*y"); }

// forward-mode dual number with a two-component tangent
struct Dual {
    double v = 0.0, dx = 0.0, dy = 0.0;
    Dual() = default;
    Dual(double c) : v(c) {}
    Dual(double c, double a, double b) : v(c), dx(a), dy(b) {}
    friend Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.dx + b.dx, a.dy + b.dy}; }
    friend Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.dx - b.dx, a.dy - b.dy}; }
    friend Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.dx * b.v + a.v * b.dx, a.dy * b.v + a.v * b.dy}; }
    friend Dual operator/(Dual a, Dual b)
    {
        const double q = a.v / b.v;
        return {q, (a.dx - q * b.dx) / b.v, (a.dy - q * b.dy) / b.v};
    }
};

// exact derivative of N = x - (Df)^{-1} f by automatic differentiation
Mat2 newton_jacobian_ad(const NewtonPlaneMap& N, Vec2 p)
{
    const Dual x(p.x, 1.0, 0.0), y(p.y, 0.0, 1.0);
    const auto& j = N.jacobian();
    const Dual a = j[0](x, y), b = j[1](x, y), c = j[2](x, y), d = j[3](x, y);
    const auto [f1, f2] = N.source()(x, y);
    const Dual det = a * d - b * c;
    const Dual nx = x - (d * f1 - b * f2) / det;
    const Dual ny = y - (a * f2 - c * f1) / det;
    return {nx.dx, nx.dy, ny.dx, ny.dy};
}

// closed-form homogeneous Newton map of the real form of z^2 - 1
std::array<double, 3> reference_triple(double x, double y, double z)
{
    const double r = x * x + y * y;
    return {x * (r + z * z), y * (r - z * z), 2.0 * z * r};
}

double proportionality_error(const std::array<double, 3>& a, const std::array<double, 3>& b)
{
    // |a x b| / (|a||b|)
    const double cx = a[1] * b[2] - a[2] * b[1], cy = a[2] * b[0] - a[0] * b[2], cz = a[0] * b[1] - a[1] * b[0];
    const double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    const double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
    return std::sqrt(cx * cx + cy * cy + cz * cz) / (na * nb);
}

} // namespace

TEST(NewtonComplex, CubeRootsOfUnity)
{
    const auto N = build_newton_complex(parse_complex_poly("z^3 - 1"));
    EXPECT_EQ(N.map.numerator(), parse_complex_poly("2z^3 + 1"));
    EXPECT_EQ(N.map.denominator(), parse_complex_poly("3z^2"));
    EXPECT_EQ(N.degree, 3);
    for (int k = 0; k < 3; ++k) {
        const cplx r = std::polar(1.0, 2.0 * M_PI * k / 3.0);
        EXPECT_LT(std::abs(N(r) - r), 1e-14);
    }
}

TEST(NewtonComplex, SquareHalves)
{
    const auto N = build_newton_complex(parse_complex_poly("z^2"));
    for (cplx z : {cplx(1.0, 0.0), cplx(-0.3, 2.0), cplx(1e-3, 1e-3)}) EXPECT_LT(std::abs(N(z) - z / 2.0), 1e-15);
    const auto at0 = N.map.try_eval(0.0);
    ASSERT_TRUE(at0);
    EXPECT_EQ(*at0, cplx(0.0));
}

TEST(NewtonComplex, SuperattractingTwoCycle)
{
    const auto N = build_newton_complex(parse_complex_poly("z^3 - 2z + 2"));
    EXPECT_EQ(N(0.0), cplx(1.0));
    EXPECT_EQ(N(1.0), cplx(0.0));
}

TEST(NewtonComplex, ConstantRejected)
{
    EXPECT_THROW(build_newton_complex(UniComplexPoly::constant(2.0)), InvalidInput);
}

TEST(NewtonComplex, MatchesDefinitionOnRandomCubics)
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> c(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        const UniComplexPoly p({{c(rng), c(rng)}, {c(rng), c(rng)}, {c(rng), c(rng)}, {1.0 + c(rng), c(rng)}});
        const auto N = build_newton_complex(p);
        const UniComplexPoly dp = p.derivative();
        for (int k = 0; k < 100; ++k) {
            const cplx z(c(rng), c(rng));
            if (std::abs(dp(z)) <= 1e-6) continue;
            const cplx expected = z - p(z) / dp(z);
            EXPECT_LE(std::abs(N(z) - expected), 1e-12 * std::max(1.0, std::abs(expected)));
        }
    }
}

TEST(NewtonPlane, RealFormAgreesWithComplexMap)
{
    const auto N = build_newton_plane(z2_minus_1());
    const Vec2 q = N.step({2.0, 0.0});
    EXPECT_NEAR(q.x, 1.25, 1e-15);
    EXPECT_NEAR(q.y, 0.0, 1e-15);
    const auto Nc = build_newton_complex(parse_complex_poly("z^2 - 1"));
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 100; ++k) {
        const Vec2 p{u(rng), u(rng)};
        if (norm(p) < 1e-3) continue;
        EXPECT_LT(distance(N.step(p), to_vec(Nc(to_complex(p)))), 1e-12 * (1.0 + norm(p) + 1.0 / norm(p)));
    }
    EXPECT_EQ(real_form(parse_complex_poly("z^2 - 1")), z2_minus_1());
}

TEST(NewtonPlane, DecouplesForProductMaps)
{
    const auto N = build_newton_plane(parse_plane_map("x(x^2-1)", "y(y^2-1)"));
    auto n1 = [](double t) { return t - (t * t * t - t) / (3.0 * t * t - 1.0); };
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 100; ++k) {
        const Vec2 p{u(rng), u(rng)};
        if (std::abs(3 * p.x * p.x - 1) < 1e-3 || std::abs(3 * p.y * p.y - 1) < 1e-3) continue;
        const Vec2 q = N.step(p);
        EXPECT_NEAR(q.x, n1(p.x), 1e-12 * (1.0 + std::abs(q.x)));
        EXPECT_NEAR(q.y, n1(p.y), 1e-12 * (1.0 + std::abs(q.y)));
    }
    EXPECT_EQ(N.step({0.0, 0.0}), (Vec2{0.0, 0.0}));
}

TEST(NewtonPlane, LinearMapConvergesInOneStep)
{
    const auto N = build_newton_plane(parse_plane_map("x", "y"));
    for (Vec2 p : {Vec2{3.0, -1.0}, Vec2{1e6, 2.0}, Vec2{0.0, 0.0}}) EXPECT_LT(norm(N.step(p)), 1e-9);
}

TEST(NewtonPlane, RootIsFixed)
{
    const auto N = build_newton_plane(z2_minus_1());
    EXPECT_EQ(N.step({1.0, 0.0}), (Vec2{1.0, 0.0}));
}

TEST(NewtonPlane, SingularJacobianCarriesPoint)
{
    const auto N = build_newton_plane(parse_plane_map("x(x^2-1)", "y(y^2-1)"));
    const Vec2 p{1.0 / std::sqrt(3.0), 0.3};
    try {
        N.step(p);
        FAIL() << "expected SingularJacobian";
    } catch (const SingularJacobian& e) {
        EXPECT_EQ(e.point(), p);
    }
    EXPECT_FALSE(N.try_step(p));
}

TEST(NewtonPlane, StepSolvesLinearSystem)
{
    const auto N = build_newton_plane(parse_plane_map("y - x^2", "x + 2 - (y-2)^2"));
    std::mt19937_64 rng(34);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 0; k < 200; ++k) {
        const Vec2 p{u(rng), u(rng)};
        const auto q = N.try_step(p);
        if (!q) continue;
        const Vec2 lhs = N.jacobian_at(p) * (p - *q);
        const Vec2 rhs = N.source()(p);
        EXPECT_LT(distance(lhs, rhs), 1e-9 * (1.0 + norm(rhs)));
    }
}

TEST(NewtonPlane, SystemRootsAreFixedPoints)
{
    for (auto f : {parse_plane_map("y - x^2", "x + 2 - (y-2)^2"), parse_plane_map("x(x^2-1)", "y(y^2-1)"),
                   parse_plane_map("y - x^2", "x + 1 - (y-2)^2")}) {
        const auto N = build_newton_plane(f);
        for (Vec2 r : system_real_roots(f, square(5.0)).roots) {
            const auto q = N.try_step(r);
            if (!q) continue;
            EXPECT_LT(distance(*q, r), 1e-9);
        }
    }
}

TEST(NewtonPlane, HolomorphicJacobianCommutesWithJ)
{
    const UniComplexPoly p = parse_complex_poly("z^3 - 2z + 2");
    const auto N = build_newton_plane(real_form(p));
    const Mat2 J{0.0, 1.0, -1.0, 0.0};
    std::mt19937_64 rng(35);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    int checked = 0;
    while (checked < 100) {
        const Vec2 x{u(rng), u(rng)};
        if (std::abs(p.derivative()(to_complex(x))) < 0.2) continue;
        const Mat2 D = newton_jacobian_ad(N, x);
        const Mat2 a = D * J, b = J * D;
        const double err = std::max({std::abs(a.a - b.a), std::abs(a.b - b.b), std::abs(a.c - b.c), std::abs(a.d - b.d)});
        EXPECT_LT(err, 1e-9 * std::max(1.0, D.norm_inf())) << x.x << "," << x.y;
        ++checked;
    }
}

TEST(Projective, ReproducesReferenceTriple)
{
    const auto H = homogenize_newton(build_newton_plane(z2_minus_1()));
    EXPECT_EQ(H.map.degree(), 3);
    std::mt19937_64 rng(36);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 20; ++k) {
        const double x = u(rng), y = u(rng), z = u(rng);
        EXPECT_LT(proportionality_error(H.map(x, y, z), reference_triple(x, y, z)), 1e-9);
    }
}

TEST(Projective, FixedPointAndIndeterminacy)
{
    const auto H = homogenize_newton(build_newton_plane(z2_minus_1()));
    const auto at = H.map(1.0, 0.0, 0.0);
    EXPECT_NE(at[0], 0.0);
    EXPECT_EQ(at[1], 0.0);
    EXPECT_EQ(at[2], 0.0);
    const auto origin = H.map(0.0, 0.0, 1.0);
    for (double v : origin) EXPECT_EQ(v, 0.0);
    const auto ref = reference_triple(0.0, 0.0, 1.0);
    for (double v : ref) EXPECT_EQ(v, 0.0);
    bool found = false;
    for (const auto& q : H.indeterminacy)
        found = found || (std::abs(q.x) < 1e-9 && std::abs(q.y) < 1e-9 && std::abs(q.z - 1.0) < 1e-9);
    EXPECT_TRUE(found);
}

TEST(Projective, AffineChartReproducesNewtonStep)
{
    for (auto f : {z2_minus_1(), parse_plane_map("y - x^2", "x + 2 - (y-2)^2"), parse_plane_map("x(x^2-1)", "y(y^2-1)")}) {
        const auto N = build_newton_plane(f);
        const auto H = homogenize_newton(N);
        std::mt19937_64 rng(37);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (int k = 0; k < 100; ++k) {
            const Vec2 p{u(rng), u(rng)};
            const auto q = N.try_step(p);
            if (!q) continue;
            const auto c = H.map.in_chart(Chart::Z, p);
            ASSERT_TRUE(c);
            EXPECT_LT(distance(*c, *q), 1e-9 * (1.0 + norm(*q)));
        }
    }
}

TEST(Projective, EigenvalueTwoAtInfinity)
{
    const auto H = homogenize_newton(build_newton_plane(z2_minus_1()));
    for (double x : {-3.0, -1.5, -0.7, -0.2, 0.0, 0.1, 0.5, 1.0, 2.2, 4.0}) {
        const Mat2 J = jacobian_at_infinity(H.map, x);
        EXPECT_NEAR(J.a, 1.0, 1e-4);
        EXPECT_NEAR(J.b, 0.0, 1e-4);
        EXPECT_NEAR(J.c, 0.0, 1e-4);
        EXPECT_NEAR(J.d, 2.0, 1e-4);
        // the line at infinity maps to itself by the identity
        const auto img = H.map.in_chart(Chart::Y, {x, 0.0});
        ASSERT_TRUE(img);
        EXPECT_NEAR(img->x, x, 1e-12 * (1.0 + std::abs(x)));
        EXPECT_EQ(img->y, 0.0);
    }
}

TEST(Projective, JacobianAtInfinityMatchesSymbolicChart)
{
    const auto H = homogenize_newton(build_newton_plane(parse_plane_map("y - x^2", "x + 2 - (y-2)^2")));
    const MultiPoly g0 = H.map.chart_component(0, Chart::Y), g1 = H.map.chart_component(1, Chart::Y),
                    g2 = H.map.chart_component(2, Chart::Y);
    std::mt19937_64 rng(38);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    int checked = 0;
    while (checked < 10) {
        const Vec2 p{u(rng), 0.0};
        const double d = g1(p);
        if (std::abs(d) < 0.1) continue;
        // quotient rule for (g0/g1, g2/g1)
        auto q = [&](const MultiPoly& g, int v) { return (diff(g, v)(p) * d - g(p) * diff(g1, v)(p)) / (d * d); };
        const Mat2 J = jacobian_at_infinity(H.map, p.x);
        const Mat2 S{q(g0, 0), q(g0, 1), q(g2, 0), q(g2, 1)};
        const double scale = std::max(1.0, S.norm_inf());
        EXPECT_NEAR(J.a, S.a, 1e-5 * scale);
        EXPECT_NEAR(J.b, S.b, 1e-5 * scale);
        EXPECT_NEAR(J.c, S.c, 1e-5 * scale);
        EXPECT_NEAR(J.d, S.d, 1e-5 * scale);
        ++checked;
    }
}

TEST(GhostLines, LineThroughSyntheticPair)
{
    const GhostLine l = ghost_line_from_solution(cplx(0.0, 1.0), cplx(0.0, 2.0));
    EXPECT_EQ(l.base, (Vec2{0.0, 0.0}));
    EXPECT_NEAR(l.direction.x, 1.0 / std::sqrt(5.0), 1e-15);
    EXPECT_NEAR(l.direction.y, 2.0 / std::sqrt(5.0), 1e-15);
    const GhostLine m = ghost_line_from_solution(cplx(0.0, -1.0), cplx(0.0, -2.0));
    EXPECT_EQ(m.direction, l.direction);
    EXPECT_THROW(ghost_line_from_solution(1.0, 2.0), InvalidInput);
}

TEST(GhostLines, NoneForRealProductRoots)
{
    GhostSearchOptions opt;
    opt.seeds_per_axis = 8;
    EXPECT_TRUE(ghost_lines(parse_plane_map("x(x^2-1)", "y(y^2-1)"), square(2.0), opt).empty());
}

TEST(GhostLines, QuadraticSystemLineIsInvariant)
{
    // y = x^2, x + 1 = (x^2 - 2)^2 has two real and two complex solutions
    const PlaneMap g = parse_plane_map("y - x^2", "x + 1 - (y-2)^2");
    GhostSearchOptions opt;
    opt.seeds_per_axis = 10;
    const auto lines = ghost_lines(g, square(3.0), opt);
    ASSERT_EQ(lines.size(), 1u);
    const auto& l = lines[0];
    EXPECT_NEAR(norm(l.direction), 1.0, 1e-12);
    EXPECT_LT(ghost_line_invariance_defect(build_newton_plane(g), l), 1e-6);
    // the pair really solves g
    EXPECT_LT(std::abs(g.first()(l.solution[0], l.solution[1])), 1e-9);
    EXPECT_LT(std::abs(g.second()(l.solution[0], l.solution[1])), 1e-9);
}

TEST(Pullback, FirstComponentMatchesReference)
{
    const PlaneMap psi = parse_plane_map("x", "y + x^2"), psi_inv = parse_plane_map("x", "y - x^2");
    const PlaneMap f = z2_minus_1();
    const PlaneMap g = pullback_map(f, psi, psi_inv);
    EXPECT_TRUE(approx_equal(g.first(), parse_plane_poly("x^2 - (y + x^2)^2 - 1")));
    EXPECT_TRUE(approx_equal(g.second(), parse_plane_poly("2x(y + x^2) - (x^2 - (y + x^2)^2 - 1)^2")));
}

TEST(Pullback, IdentityLeavesMapUnchanged)
{
    const PlaneMap f = parse_plane_map("y - x^2", "x + 2 - (y-2)^2");
    const PlaneMap g = pullback_map(f, identity_map(), identity_map());
    EXPECT_TRUE(approx_equal(g.first(), f.first()));
    EXPECT_TRUE(approx_equal(g.second(), f.second()));
}

TEST(Pullback, RejectsNonInverse)
{
    EXPECT_THROW(pullback_map(z2_minus_1(), parse_plane_map("x", "y + x^2"), parse_plane_map("x", "y + x^2")),
                 InvalidInput);
}

TEST(Pullback, NewtonIsNotNatural)
{
    const PlaneMap psi = parse_plane_map("x", "y + x^2"), psi_inv = parse_plane_map("x", "y - x^2");
    const PlaneMap f = z2_minus_1();
    const auto Npull = build_newton_plane(pullback_map(f, psi, psi_inv));
    const Vec2 a = Npull.step({1.0, 1.0});
    const Vec2 b = pullback_newton_step(build_newton_plane(f), psi, psi_inv, {1.0, 1.0});
    EXPECT_GT(distance(a, b), 1e-3);
}
