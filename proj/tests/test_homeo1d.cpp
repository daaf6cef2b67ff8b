#include "vph/homeo1d.hpp"
#include "vph/verify.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vph;

TEST_CASE("polynomial ramp matches the explicit cubic at a=1/9, b=2/9") {
    const Ramp g = make_ramp({RampSpec::Kind::Polynomial, 1.0 / 9.0, 2.0 / 9.0});
    // 54 x^2 (1 - 6x) = 54 x^2 - 324 x^3
    for (int k = 0; k <= 64; ++k) {
        const double x = k / (64.0 * 9.0);
        CHECK_THAT(g.value(x), Catch::Matchers::WithinAbs(54.0 * x * x * (1.0 - 6.0 * x), 1e-14));
        CHECK_THAT(g.deriv(x), Catch::Matchers::WithinAbs(108.0 * x - 972.0 * x * x, 1e-12));
    }
    CHECK_THAT(g.deriv(0.0), Catch::Matchers::WithinAbs(0.0, 1e-14));
    CHECK_THAT(g.deriv(1.0 / 9.0), Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(g.value(1.0 / 9.0), Catch::Matchers::WithinAbs(2.0 / 9.0, 1e-14));
}

TEST_CASE("smooth-jump ramp hits b/2 at midpoint and pins the endpoints") {
    for (auto [a, b] : {std::pair{0.1, 0.3}, {1.0, 1.0}, {0.02, 0.9}}) {
        const Ramp g = make_ramp({RampSpec::Kind::SmoothJump, a, b});
        CHECK_THAT(g.value(a / 2.0), Catch::Matchers::WithinAbs(b / 2.0, 1e-13));
        CHECK_THAT(g.value(0.0), Catch::Matchers::WithinAbs(0.0, 1e-300));
        CHECK_THAT(g.value(a), Catch::Matchers::WithinAbs(b, 1e-13));
        CHECK(g.deriv(a / 4.0) > 0.0);
    }
}

TEST_CASE("ramp construction rejects nonpositive width or height") {
    CHECK_THROWS_AS(make_ramp({RampSpec::Kind::Polynomial, 0.0, 1.0}), std::domain_error);
    CHECK_THROWS_AS(make_ramp({RampSpec::Kind::SmoothJump, 0.1, -1.0}), std::domain_error);
}

TEST_CASE("staircase reproduces the n=3 cell values") {
    StaircaseParams params;
    params.n = 3;
    params.a_n = 1.0 / 9.0;
    params.ramp = RampSpec::Kind::Polynomial;
    const Homeo1D f = make_staircase(params);
    CHECK_THAT(f(1.0 / 9.0), Catch::Matchers::WithinAbs(2.0 / 9.0, 1e-13));
    CHECK_THAT(f(1.0 / 3.0), Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-13));
    CHECK_THAT(f(2.0 / 3.0), Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-13));
    CHECK(f.validate());
}

TEST_CASE("staircase stays within 1/n of the identity") {
    for (int n : {2, 5, 16, 50}) {
        const Homeo1D f = make_staircase(StaircaseParams::with_default_width(n));
        const double sup =
            sup_distance_1d([&](double x) { return f(x); }, [](double x) { return x; },
                            f.domain());
        CHECK(sup <= 1.0 / n + 1e-12);
        CHECK(sup > 0.04 / n);  // the bound is tight up to a small factor
    }
}

TEST_CASE("staircase derivative quasi-norm obeys the closed-form bound at n=16") {
    const Exponent p(0.5);
    const Homeo1D f = make_staircase(StaircaseParams::with_default_width(16));
    const LpResult lp =
        lp_norm_1d([&](double x) { return f.deriv(x); }, f.domain(), p, f.breakpoints());
    const double na = 1.0 / 16.0, nb = 15.0 / 16.0;
    const double bound = std::pow(na, 0.5) * std::pow(nb, 0.5) * 2.0;
    CHECK(lp.value_p_power() <= bound + 1e-6);
    CHECK(lp.value_p_power() > 0.05);  // not trivially small
    CHECK_THAT(bound, Catch::Matchers::WithinAbs(0.484, 5e-3));
}

TEST_CASE("constant blends: endpoints of the parameter line are exact") {
    const Homeo1D f = make_staircase(StaircaseParams::with_default_width(4));
    const Homeo1D h1 = blend_constant(1.0, f);
    const Homeo1D h0 = blend_constant(0.0, f);
    for (int k = 0; k <= 32; ++k) {
        const double x = k / 32.0;
        CHECK_THAT(h1(x), Catch::Matchers::WithinAbs(x, 1e-14));
        CHECK_THAT(h0(x), Catch::Matchers::WithinAbs(f(x), 1e-14));
    }
    CHECK_THROWS_AS(blend_constant(1.5, f), std::domain_error);
    CHECK_THROWS_AS(blend_constant(-0.1, f), std::domain_error);
}

TEST_CASE("half blend derivative converges to the constant 1/2 in L^p") {
    const Exponent p(0.5);
    double prev = std::numeric_limits<double>::infinity();
    for (int n : {4, 16, 64}) {
        const Homeo1D h =
            blend_constant(0.5, make_staircase(StaircaseParams::with_default_width(n)));
        const LpResult lp = lp_norm_1d([&](double x) { return h.deriv(x) - 0.5; }, h.domain(),
                                       p, h.breakpoints());
        CHECK(lp.value < prev);
        prev = lp.value;
    }
    CHECK(prev < 0.05);
}

static StepFunction1D figure_step() {
    StepFunction1D H;
    H.partition = {0.0, 0.4, 0.6, 1.0};
    H.values = {0.25, 0.5, 1.0 / 6.0};
    return H;
}

TEST_CASE("step homeomorphism: constant one gives the identity") {
    StepFunction1D H;
    H.partition = {0.0, 1.0};
    H.values = {1.0};
    const Homeo1D phi = make_step_homeo(H, 7);
    for (int k = 0; k <= 50; ++k)
        CHECK_THAT(phi(k / 50.0), Catch::Matchers::WithinAbs(k / 50.0, 1e-13));
}

TEST_CASE("step homeomorphism fixes every partition point") {
    const StepFunction1D H = figure_step();
    const Homeo1D phi = make_step_homeo(H, 5);
    for (double a : H.partition) CHECK_THAT(phi(a), Catch::Matchers::WithinAbs(a, 1e-12));
    CHECK(phi.validate());
}

TEST_CASE("step homeomorphism derivative plateaus near the step values") {
    const StepFunction1D H = figure_step();
    const Homeo1D phi = make_step_homeo(H, 5);
    // phi' = c_i + (1 - c_i) * (inner staircase derivative), which touches
    // c_i wherever the smooth-jump ramp derivative vanishes; it also has to
    // overshoot well above c_i on the ramps to make up the rise
    const StepFunction1D H2 = figure_step();
    for (int i = 0; i < 3; ++i) {
        const double lo = H2.partition[i], hi = H2.partition[i + 1], c = H2.values[i];
        double best = 1e9, peak = 0.0;
        for (int k = 1; k < 600; ++k) {
            const double d = phi.deriv(lo + (hi - lo) * k / 600.0);
            best = std::min(best, std::abs(d - c));
            peak = std::max(peak, d);
        }
        CHECK(best < 0.02);
        CHECK(peak > 1.0);
    }
}

TEST_CASE("step approximation error decreases with the staircase index") {
    const StepFunction1D H = figure_step();
    const Exponent p(0.5);
    const int N = static_cast<int>(H.values.size());
    double prev = std::numeric_limits<double>::infinity();
    for (int n : {5, 20, 80}) {
        const Homeo1D phi = make_step_homeo(H, n);
        const LpResult lp = lp_norm_1d([&](double x) { return phi.deriv(x) - H(x); },
                                       phi.domain(), p, phi.breakpoints());
        CHECK(lp.value < prev);
        prev = lp.value;

        // per-cell envelope: pp <= sum of per-cell pp, so N * max-cell pp works
        double max_cell_pp = 0.0;
        for (int i = 0; i < N; ++i) {
            const Interval cell(H.partition[i], H.partition[i + 1]);
            const LpResult c = lp_norm_1d([&](double x) { return phi.deriv(x) - H(x); }, cell,
                                          p, phi.breakpoints());
            max_cell_pp = std::max(max_cell_pp, c.value_p_power());
        }
        CHECK(lp.value_p_power() <= N * max_cell_pp + 1e-9);
    }
    CHECK(prev < 0.2);
}

TEST_CASE("step homeomorphism rejects values outside the unit interval") {
    StepFunction1D H;
    H.partition = {0.0, 0.5, 1.0};
    H.values = {0.5, 2.0};
    CHECK_THROWS_AS(make_step_homeo(H, 5), infeasibility_error);
}

TEST_CASE("composition transfer: identity chart leaves the map unchanged") {
    const Homeo1D g = make_staircase(StaircaseParams::with_default_width(4));
    const Homeo1D h = transfer_compose(g, Homeo1D::identity(g.domain()));
    for (int k = 0; k <= 64; ++k) {
        const double x = k / 64.0;
        CHECK_THAT(h(x), Catch::Matchers::WithinAbs(g(x), 1e-10));
    }
}

TEST_CASE("composition transfer: a map against its own chart is the identity") {
    const Homeo1D g = make_staircase(StaircaseParams::with_default_width(4));
    const Homeo1D h = transfer_compose(g, g);
    for (int k = 1; k < 64; ++k) {
        const double x = k / 64.0;
        CHECK_THAT(h(x), Catch::Matchers::WithinAbs(x, 1e-9));
    }
}

TEST_CASE("composition transfer preserves the uniform distance") {
    // ||g_n o phi^{-1} - g o phi^{-1}||_inf = ||g_n - g||_inf
    const Homeo1D g4 = make_staircase(StaircaseParams::with_default_width(4));
    const Homeo1D g8 = make_staircase(StaircaseParams::with_default_width(8));
    const Homeo1D phi(Interval(0, 1), [](double x) { return x * x; },
                      [](double x) { return 2.0 * x; }, {}, Smoothness::C1);
    const Homeo1D h4 = transfer_compose(g4, phi);
    const Homeo1D h8 = transfer_compose(g8, phi);
    const double lhs = sup_distance_1d([&](double x) { return h4(x); },
                                       [&](double x) { return h8(x); }, Interval(0, 1), 8192);
    const double rhs = sup_distance_1d([&](double x) { return g4(x); },
                                       [&](double x) { return g8(x); }, Interval(0, 1), 8192);
    CHECK_THAT(lhs, Catch::Matchers::WithinAbs(rhs, 1e-4));
}

TEST_CASE("composition transfer detects a plateau chart") {
    const Homeo1D flat(Interval(0, 1), [](double x) { return x < 0.5 ? 0.25 : x * x; },
                       [](double x) { return x < 0.5 ? 0.0 : 2.0 * x; }, {0.5},
                       Smoothness::C1Plus);
    const Homeo1D g = Homeo1D::identity(Interval(0, 1));
    CHECK_THROWS(transfer_compose(g, flat));
}

TEST_CASE("feasibility predicate accepts (x^2, x) and rejects (Id, 2)") {
    const Homeo1D sq(Interval(0, 1), [](double x) { return x * x; },
                     [](double x) { return 2.0 * x; }, {}, Smoothness::C1);
    const FeasibilityReport ok = feasible_pair({sq, [](double x) { return x; },
                                                Exponent(0.5), Exponent(2.0)});
    CHECK(ok.feasible);

    const FeasibilityReport bad = feasible_pair({Homeo1D::identity(Interval(0, 1)),
                                                 [](double) { return 2.0; }, Exponent(0.5),
                                                 Exponent(2.0)});
    CHECK_FALSE(bad.feasible);
    CHECK_THAT(bad.witness_ratio, Catch::Matchers::WithinAbs(2.0, 1e-12));
    CHECK(bad.witness >= 0.0);
    CHECK(bad.witness <= 1.0);
}

TEST_CASE("end-to-end approximation realizes (x^2, x)") {
    const Homeo1D sq(Interval(0, 1), [](double x) { return x * x; },
                     [](double x) { return 2.0 * x; }, {}, Smoothness::C1);
    const PairCandidate1D cand{sq, [](double x) { return x; }, Exponent(0.5), Exponent(2.0)};
    const auto [h, rep] = approximate_pair(cand, 0.05);
    CHECK(rep.converged);
    CHECK(rep.sup_error <= 0.05);
    CHECK(rep.lp_error <= 0.05);
    CHECK(h.validate(2000, 1e-9));
}

TEST_CASE("end-to-end approximation throws on an infeasible pair") {
    const PairCandidate1D cand{Homeo1D::identity(Interval(0, 1)), [](double) { return 2.0; },
                               Exponent(0.5), Exponent(2.0)};
    CHECK_THROWS_AS(approximate_pair(cand, 0.05), infeasibility_error);
}

TEST_CASE("coordinatewise staircase matches its one-dimensional factors") {
    const StaircaseParams params = StaircaseParams::with_default_width(8);
    const Homeo1D f1 = make_staircase(params);
    const DiffeoNd f = tensor_staircase(params, 2);
    Rng rng(11);
    const BoxDomain om = BoxDomain::unit_square();
    for (int k = 0; k < 50; ++k) {
        const Vec x = rng.point_in(om);
        const Vec y = f.value(x);
        CHECK_THAT(y[0], Catch::Matchers::WithinAbs(f1(x[0]), 1e-13));
        CHECK_THAT(y[1], Catch::Matchers::WithinAbs(f1(x[1]), 1e-13));
        const Mat J = f.jacobian(x);
        CHECK_THAT(J(0, 0), Catch::Matchers::WithinAbs(f1.deriv(x[0]), 1e-12));
        CHECK_THAT(J(0, 1), Catch::Matchers::WithinAbs(0.0, 1e-300));
        // x-space round trips are ill-conditioned where the smooth-jump
        // derivative underflows, so verify the inverse in y-space
        CHECK((f.value(f.inverse(y)) - y).cwiseAbs().maxCoeff() <= 1e-12);
    }
}
