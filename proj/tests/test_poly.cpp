#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "newtondyn/parse.hpp"
#include "newtondyn/poly.hpp"

using namespace newtondyn;

namespace {

MultiPoly P(const char* s) { return parse_plane_poly(s); }

MultiPoly random_poly(std::mt19937_64& rng, int max_deg, int terms)
{
    std::uniform_int_distribution<int> e(0, max_deg);
    std::uniform_real_distribution<double> c(-3.0, 3.0);
    std::vector<MultiPoly::Term> t;
    for (int i = 0; i < terms; ++i) t.push_back({e(rng), e(rng), c(rng)});
    return MultiPoly(t);
}

bool contains_point(const std::vector<Vec2>& pts, Vec2 q, double tol)
{
    return std::any_of(pts.begin(), pts.end(), [&](Vec2 p) { return distance(p, q) <= tol; });
}

} // namespace

TEST(MultiPoly, EvalExamples)
{
    EXPECT_EQ(P("x^2 + y^2")({0.0, 0.0}), 0.0);
    EXPECT_EQ(P("y - x^2")({1.0, 1.0}), 0.0);
    EXPECT_EQ(P("x(x^2 - 1)")({2.0, 0.0}), 6.0);
}

TEST(MultiPoly, CanonicalForm)
{
    const MultiPoly p({{1, 0, 2.0}, {0, 1, 1.0}, {1, 0, -2.0}, {2, 2, 0.0}, {0, 1, 3.0}});
    ASSERT_EQ(p.terms().size(), 1u);
    EXPECT_EQ(p.coefficient(0, 1), 4.0);
    EXPECT_EQ(p.degree(), 1);
    for (std::size_t i = 0; i < p.terms().size(); ++i) EXPECT_NE(p.terms()[i].coeff, 0.0);
}

TEST(MultiPoly, ZeroPolynomialDegree)
{
    EXPECT_EQ(MultiPoly().degree(), -1);
    EXPECT_EQ((P("x*y") - P("y*x")).degree(), -1);
    EXPECT_TRUE((P("x*y") - P("y*x")).is_zero());
}

TEST(MultiPoly, DiffExamples)
{
    EXPECT_EQ(diff(P("x^3 - 1"), 0), P("3x^2"));
    EXPECT_EQ(diff(P("y - x^2"), 1), MultiPoly::constant(1.0));
    EXPECT_EQ(diff(P("x^2*y + y^3"), 0), P("2*x*y"));
    EXPECT_TRUE(diff(MultiPoly::constant(5.0), 0).is_zero());
}

TEST(MultiPoly, DiffIsLinearAndObeysProductRule)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const MultiPoly a = random_poly(rng, 4, 5), b = random_poly(rng, 4, 5);
        for (int v = 0; v < 2; ++v) {
            EXPECT_TRUE(approx_equal(diff(a + b, v), diff(a, v) + diff(b, v)));
            EXPECT_TRUE(approx_equal(diff(a * b, v), diff(a, v) * b + a * diff(b, v)));
        }
    }
}

TEST(MultiPoly, CanonicalEvaluationMatchesRawSum)
{
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> e(0, 5);
    std::uniform_real_distribution<double> c(-2.0, 2.0), u(-1.5, 1.5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<MultiPoly::Term> raw;
        for (int i = 0; i < 12; ++i) raw.push_back({e(rng), e(rng), c(rng)});
        const MultiPoly p(raw);
        for (int k = 0; k < 100; ++k) {
            const double x = u(rng), y = u(rng);
            double direct = 0.0, scale = 0.0;
            for (const auto& t : raw) {
                direct += t.coeff * std::pow(x, t.ex) * std::pow(y, t.ey);
                scale += std::abs(t.coeff * std::pow(x, t.ex) * std::pow(y, t.ey));
            }
            EXPECT_NEAR(p(x, y), direct, 1e-12 * std::max(1.0, scale));
        }
    }
}

TEST(MultiPoly, ComposeSubstitutes)
{
    const MultiPoly p = P("x^2 - y");
    const MultiPoly q = compose(p, P("x + y"), P("x*y"));
    EXPECT_TRUE(approx_equal(q, P("x^2 + y^2 + x*y")));
}

TEST(PlaneMap, BothComponentsZeroRejected)
{
    EXPECT_THROW(PlaneMap(MultiPoly(), MultiPoly()), InvalidInput);
    EXPECT_NO_THROW(PlaneMap(MultiPoly(), P("x")));
}

TEST(UnivariateRoots, CubeRootsOfUnity)
{
    const auto roots = univariate_complex_roots(parse_complex_poly("z^3 - 1"));
    ASSERT_EQ(roots.size(), 3u);
    for (int k = 0; k < 3; ++k) {
        const cplx expected = std::polar(1.0, 2.0 * std::numbers::pi * k / 3.0);
        const bool found = std::any_of(roots.begin(), roots.end(), [&](const ComplexRoot& r) {
            return std::abs(r.value - expected) < 1e-12 && r.multiplicity == 1;
        });
        EXPECT_TRUE(found) << "missing " << expected;
    }
}

TEST(UnivariateRoots, CounterimagePolynomialOfZero)
{
    // 2w^3 + 1 = 0: w = (1/2)^{1/3} exp(i pi (2k+1)/3)
    const auto roots = univariate_complex_roots(parse_complex_poly("2w^3 + 1", "w"));
    ASSERT_EQ(roots.size(), 3u);
    const double r = std::cbrt(0.5);
    for (int k = 0; k < 3; ++k) {
        const cplx expected = std::polar(r, std::numbers::pi * (2 * k + 1) / 3.0);
        EXPECT_TRUE(std::any_of(roots.begin(), roots.end(),
                                [&](const ComplexRoot& q) { return std::abs(q.value - expected) < 1e-12; }));
    }
}

TEST(UnivariateRoots, DoubleRoot)
{
    const auto roots = univariate_complex_roots(parse_complex_poly("(z - 1)^2"));
    ASSERT_EQ(roots.size(), 1u);
    EXPECT_EQ(roots[0].multiplicity, 2);
    EXPECT_NEAR(std::abs(roots[0].value - cplx(1.0)), 0.0, 1e-7);
}

TEST(UnivariateRoots, ConstantRejected)
{
    EXPECT_THROW(univariate_complex_roots(UniComplexPoly::constant(3.0)), InvalidInput);
    EXPECT_THROW(univariate_complex_roots(UniComplexPoly()), InvalidInput);
}

TEST(UnivariateRoots, ResidualBoundAndCountOnRandomPolynomials)
{
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> c(-5.0, 5.0);
    std::uniform_int_distribution<int> deg(1, 12);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = deg(rng);
        std::vector<cplx> coeffs;
        for (int k = 0; k <= n; ++k) coeffs.emplace_back(c(rng), c(rng));
        const UniComplexPoly p(coeffs);
        const auto roots = univariate_complex_roots(p);
        int total = 0;
        for (const auto& r : roots) {
            total += r.multiplicity;
            EXPECT_LE(std::abs(p(r.value)), root_residual_bound(p, r.value, 1e-10));
        }
        EXPECT_EQ(total, p.degree());
    }
}

TEST(UnivariateRoots, ExpandRealRoots)
{
    const auto p = parse_complex_poly("(z^2 - 1)(z^2 - 4)(z^2 + 1)");
    const auto real = real_roots(p);
    ASSERT_EQ(real.size(), 4u);
    const double expected[] = {-2.0, -1.0, 1.0, 2.0};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(real[static_cast<std::size_t>(i)].value.real(), expected[i], 1e-12);
    EXPECT_EQ(expand_roots(univariate_complex_roots(p)).size(), 6u);
}

TEST(SystemRoots, ProductOfCubics)
{
    const auto res = system_real_roots(parse_plane_map("x(x^2-1)", "y(y^2-1)"), square(2.0));
    ASSERT_EQ(res.roots.size(), 9u);
    for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j) EXPECT_TRUE(contains_point(res.roots, {double(i), double(j)}, 1e-10));
    EXPECT_TRUE(std::is_sorted(res.roots.begin(), res.roots.end()));
}

TEST(SystemRoots, ParabolaSystemHasFourRealRoots)
{
    // y = x^2 and x^4 - 4x^2 - x + 2 = (x - 2)(x + 1)(x^2 + x - 1) = 0
    const auto res = system_real_roots(parse_plane_map("y - x^2", "x + 2 - (y-2)^2"), square(5.0));
    ASSERT_EQ(res.roots.size(), 4u);
    const double s5 = std::sqrt(5.0);
    for (double x : {2.0, -1.0, (-1.0 + s5) / 2.0, (-1.0 - s5) / 2.0})
        EXPECT_TRUE(contains_point(res.roots, {x, x * x}, 1e-9)) << x;
    EXPECT_TRUE(res.unresolved.empty());
}

TEST(SystemRoots, ParabolaSystemCountAgreesWithDenseGridOracle)
{
    // independent count: sign changes of x^4 - 4x^2 - x + 2 on a fine grid,
    // keeping those with y = x^2 inside the box
    int count = 0;
    auto q = [](double x) { return ((x * x - 4.0) * x - 1.0) * x + 2.0; };
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double a = -5.0 + 10.0 * i / n, b = -5.0 + 10.0 * (i + 1) / n;
        if ((q(a) < 0) != (q(b) < 0) && a * a <= 5.0) ++count;
    }
    const auto res = system_real_roots(parse_plane_map("y - x^2", "x + 2 - (y-2)^2"), square(5.0));
    EXPECT_EQ(static_cast<int>(res.roots.size()), count);
}

TEST(SystemRoots, LinearSystem)
{
    const auto res = system_real_roots(parse_plane_map("x", "y"), Box{-1.0, 3.0, -2.0, 0.5});
    ASSERT_EQ(res.roots.size(), 1u);
    EXPECT_NEAR(norm(res.roots[0]), 0.0, 1e-12);
}

TEST(SystemRoots, SeparableProductsGiveCartesianProduct)
{
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> r(-1.8, 1.8);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> xs{r(rng), r(rng)}, ys{r(rng), r(rng), r(rng)};
        MultiPoly g = MultiPoly::constant(1.0), h = MultiPoly::constant(1.0);
        for (double a : xs) g *= MultiPoly::x() - MultiPoly::constant(a);
        for (double b : ys) h *= MultiPoly::y() - MultiPoly::constant(b);
        const auto res = system_real_roots(PlaneMap(g, h), square(2.0));
        bool separated = true;
        for (auto* v : {&xs, &ys})
            for (std::size_t i = 0; i < v->size(); ++i)
                for (std::size_t j = i + 1; j < v->size(); ++j) separated = separated && std::abs((*v)[i] - (*v)[j]) > 1e-3;
        if (!separated) continue;
        EXPECT_EQ(res.roots.size(), xs.size() * ys.size());
        for (double a : xs)
            for (double b : ys) EXPECT_TRUE(contains_point(res.roots, {a, b}, 1e-8));
    }
}

TEST(SystemRoots, InvalidArguments)
{
    const auto f = parse_plane_map("x", "y");
    EXPECT_THROW(system_real_roots(f, Box{1.0, 1.0, 0.0, 1.0}), InvalidInput);
    EXPECT_THROW(system_real_roots(f, square(1.0), 1e-10, 0), InvalidInput);
}
