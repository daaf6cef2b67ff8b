#include "vph/quadrature.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vph;

TEST_CASE("lp_norm_1d on closed forms") {
    const Interval I(0, 1);
    const Exponent half(0.5);

    SECTION("constant one") {
        const LpResult r = lp_norm_1d([](double) { return 1.0; }, I, half);
        CHECK(r.value == Catch::Approx(1.0).margin(1e-10));
    }
    SECTION("f(x) = x, p = 1/2: value (2/3)^2") {
        // oracle: integral of x^{1/2} over (0,1) is 2/3, value = (2/3)^{1/p}
        const LpResult r = lp_norm_1d([](double x) { return x; }, I, half);
        CHECK(r.value == Catch::Approx(4.0 / 9.0).margin(1e-8));
        CHECK(r.quad_error_estimate < 1e-6);
    }
    SECTION("empty interval rejected") {
        CHECK_THROWS_AS(Interval(1.0, 1.0), std::domain_error);
    }
    SECTION("non-finite integrand reported") {
        CHECK_THROWS_AS(
            lp_norm_1d([](double) { return std::numeric_limits<double>::quiet_NaN(); }, I, half),
            std::runtime_error);
    }
}

TEST_CASE("lp_norm_1d honors breakpoints and refinement") {
    const Interval I(0, 1);
    const Exponent p(0.5);
    // |x - 1/3|: kink at 1/3; oracle by splitting the integral,
    // int |x-1/3|^{1/2} = (2/3)((1/3)^{3/2} + (2/3)^{3/2})
    const double pp = 2.0 / 3.0 * (std::pow(1.0 / 3.0, 1.5) + std::pow(2.0 / 3.0, 1.5));
    const auto f = [](double x) { return std::abs(x - 1.0 / 3.0); };
    const LpResult r = lp_norm_1d(f, I, p, {1.0 / 3.0});
    CHECK(r.value == Catch::Approx(std::pow(pp, 2.0)).margin(1e-8));

    // doubling base resolution moves the value by less than the estimate
    QuadOptions fine;
    fine.base_splits = 16;
    const LpResult r2 = lp_norm_1d(f, I, p, {1.0 / 3.0}, fine);
    CHECK(std::abs(r2.value - r.value) <= r.quad_error_estimate + 1e-12);
}

TEST_CASE("lp_norm monotone under integrand domination") {
    const Interval I(0, 1);
    const Exponent p(0.3);
    Rng rng(7);
    for (int k = 0; k < 20; ++k) {
        const double a = rng.uniform(0.1, 2.0), b = rng.uniform(0.0, 1.0);
        const auto g1 = [&](double x) { return a * x * x; };
        const auto g2 = [&](double x) { return a * x * x + b; };  // dominates g1
        CHECK(lp_norm_1d(g1, I, p).value <= lp_norm_1d(g2, I, p).value + 1e-9);
    }
}

TEST_CASE("lp_norm_nd basics") {
    const BoxDomain om = BoxDomain::unit_square();
    const Exponent p(0.5);
    SECTION("identity matrix integrand") {
        const LpResult r =
            lp_norm_nd([](const Vec&) { return Mat::Identity(2, 2); }, om, p, {}, 32);
        CHECK(r.value == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("zero map") {
        const LpResult r = lp_norm_nd([](const Vec&) { return Mat::Zero(2, 2); }, om, p, {}, 16);
        CHECK(r.value == 0.0);
    }
    SECTION("separable oracle: |x1|^p integrates like 1d") {
        const auto g = [](const Vec& x) { return Mat::Constant(1, 1, x[0]); };
        const LpResult r = lp_norm_nd(g, om, p, {}, 128);
        CHECK(r.value == Catch::Approx(4.0 / 9.0).margin(1e-4));
    }
}

TEST_CASE("annulus quadrature matches closed form") {
    // integrand 1 over annulus: area pi (r^2 - s^2)
    Vec a = Vec::Zero(2);
    const double s = 0.1, r = 0.3;
    const LpResult res = lp_norm_annulus2([](const Vec&) { return Mat::Constant(1, 1, 1.0); }, a,
                                          s, r, Exponent(0.5));
    CHECK(res.value == Catch::Approx(std::pow(M_PI * (r * r - s * s), 2.0)).margin(1e-10));
}

TEST_CASE("fd_jacobian") {
    SECTION("identity") {
        const Mat J = fd_jacobian([](const Vec& x) { return x; }, Vec::Zero(3));
        CHECK((J - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("linear maps reproduced to rounding level") {
        // central differences are exact for linear maps up to cancellation:
        // eps * |Ax| / h with h = 1e-5 sits near 1e-11
        Rng rng(11);
        for (int k = 0; k < 10; ++k) {
            const Mat A = rng.random_sod(3);
            Vec x(3);
            for (int i = 0; i < 3; ++i) x[i] = rng.uniform(-1, 1);
            const Mat J = fd_jacobian([&](const Vec& y) { return Vec(A * y); }, x);
            CHECK((J - A).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("sup_distance") {
    const BoxDomain om = BoxDomain::unit_square();
    const auto id = [](const Vec& x) { return x; };
    CHECK(sup_distance(id, id, om, 64) == 0.0);
    const auto shift = [](const Vec& x) { return Vec(x + Vec::Constant(2, 0.25)); };
    CHECK(sup_distance(id, shift, om, 64) == Catch::Approx(0.25));
}

TEST_CASE("quasi-norm inequalities") {
    const Interval I(0, 1);
    SECTION("constants, p = 1/2") {
        const auto one = [](double) { return 1.0; };
        const QuasinormReport rep =
            check_quasinorm_inequalities(one, one, I, Exponent(0.5), Exponent(1.0));
        CHECK(rep.triangle_lhs_pp == Catch::Approx(std::sqrt(2.0)).margin(1e-9));
        CHECK(rep.triangle_rhs_pp == Catch::Approx(2.0).margin(1e-9));
        CHECK(rep.embed_slack() == Catch::Approx(0.0).margin(1e-9));  // equality case
        CHECK(rep.pass());
    }
    SECTION("x and 1-x") {
        const QuasinormReport rep = check_quasinorm_inequalities(
            [](double x) { return x; }, [](double x) { return 1.0 - x; }, I, Exponent(0.5),
            Exponent(1.0));
        CHECK(rep.triangle_slack() > 0.0);
        CHECK(rep.embed_slack() > 0.0);
    }
    SECTION("q <= p rejected") {
        CHECK_THROWS_AS(check_quasinorm_inequalities([](double) { return 1.0; },
                                                     [](double) { return 1.0; }, I, Exponent(0.5),
                                                     Exponent(0.4)),
                        std::domain_error);
    }
    SECTION("100 randomized piecewise-polynomial pairs") {
        Rng rng(2026);
        for (int k = 0; k < 100; ++k) {
            const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2), c = rng.uniform(-2, 2);
            const double d = rng.uniform(-2, 2), e = rng.uniform(-2, 2);
            const double knot = rng.uniform(0.2, 0.8);
            const auto f = [=](double x) { return x < knot ? a + b * x : c + d * x * x; };
            const auto g = [=](double x) { return e * x * (1.0 - x); };
            const QuasinormReport rep = check_quasinorm_inequalities(
                f, g, Interval(0, 1), Exponent(rng.uniform(0.2, 0.9)),
                Exponent(rng.uniform(1.0, 2.0)), {knot});
            CHECK(rep.pass());
        }
    }
}
