#include "vph/io.hpp"
#include "vph/verify.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace vph;

TEST_CASE("volume census: identity passes, a scaling map fails") {
    const BoxDomain om = BoxDomain::unit_square();
    const VolumeCensus ok = volume_census(DiffeoNd::identity(2), om, 1);
    CHECK(ok.pass());
    CHECK(ok.max_det_deviation == 0.0);

    DiffeoNd shrink = DiffeoNd::identity(2);
    shrink.value = [](const Vec& x) { return Vec(0.5 * x); };
    shrink.jacobian = [](const Vec&) { return Mat(0.5 * Mat::Identity(2, 2)); };
    const VolumeCensus bad = volume_census(shrink, om, 1);
    CHECK_FALSE(bad.pass());
    CHECK(bad.max_det_deviation > 0.5);
}

TEST_CASE("volume census flags the coordinatewise staircase") {
    // uniform convergence to the identity does not protect the volume:
    // the determinant collapses on most of the square
    const DiffeoNd f = tensor_staircase(StaircaseParams::with_default_width(64), 2);
    const BoxDomain om = BoxDomain::unit_square();
    Rng rng(17);
    int far = 0;
    const int total = 2000;
    for (int k = 0; k < total; ++k) {
        const Vec x = rng.point_in(om);
        if (std::abs(det(f.jacobian(x)) - 1.0) > 0.5) ++far;
    }
    CHECK(far >= total / 2);
    CHECK_FALSE(volume_census(f, om, 17).pass());
}

TEST_CASE("census is deterministic in the seed") {
    const DiffeoNd f = tensor_staircase(StaircaseParams::with_default_width(8), 2);
    const BoxDomain om = BoxDomain::unit_square();
    const VolumeCensus a = volume_census(f, om, 42);
    const VolumeCensus b = volume_census(f, om, 42);
    CHECK(a.max_det_deviation == b.max_det_deviation);
    CHECK(a.pushforward_rel_err == b.pushforward_rel_err);
}

TEST_CASE("staircase convergence table passes and decays") {
    const ConvergenceTable t = convergence_table_1d({4, 16, 64}, Exponent(0.5));
    REQUIRE(t.rows.size() == 3);
    CHECK(t.all_pass());
    CHECK(t.rows[2].sup_err < t.rows[0].sup_err);
    CHECK(t.rows[2].lp_pp < t.rows[0].lp_pp);
    CHECK(!t.format().empty());
}

TEST_CASE("power-law fit recovers exact exponents") {
    std::vector<double> xs = {0.05, 0.1, 0.2, 0.4}, ys;
    for (double x : xs) ys.push_back(3.7 * std::pow(x, 2.5));
    const FitResult r = fit_power_law(xs, ys, 2.5);
    CHECK_THAT(r.exponent, Catch::Matchers::WithinAbs(2.5, 1e-12));
    CHECK_THAT(r.constant, Catch::Matchers::WithinRel(3.7, 1e-10));
    CHECK(r.slope_ok());
    CHECK(r.max_rel_resid <= 1e-10);
    CHECK_THROWS_AS(fit_power_law({1.0}, {1.0}, 1.0), std::domain_error);
}

TEST_CASE("localization scaling exponents match the model") {
    const LocalizationScalingReport rep = localization_scaling(Exponent(0.5), M_PI / 2.0);
    CHECK(rep.pass());
    CHECK_THAT(rep.radius_fit.exponent, Catch::Matchers::WithinAbs(4.0, 0.4));
    CHECK_THAT(rep.shell_fit.exponent, Catch::Matchers::WithinAbs(1.0, 0.2));
}

TEST_CASE("sampled-map CSV round-trips to the bit") {
    SampledMap m;
    m.dim_in = m.dim_out = 2;
    Rng rng(5);
    const BoxDomain om = BoxDomain::unit_square();
    for (int k = 0; k < 20; ++k) {
        m.points.push_back(rng.point_in(om));
        m.values.push_back(rng.point_in(om));
        Mat J(2, 2);
        J << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1);
        m.jacobians.push_back(J);
    }
    std::stringstream ss;
    write_sampled_map_csv(m, ss);
    CHECK(ss.str().rfind("x1,x2,f1,f2,J11,J12,J21,J22\n", 0) == 0);
    const SampledMap back = read_sampled_map_csv(ss);
    REQUIRE(back.points.size() == m.points.size());
    for (size_t k = 0; k < m.points.size(); ++k) {
        CHECK(back.points[k] == m.points[k]);
        CHECK(back.values[k] == m.values[k]);
        CHECK(back.jacobians[k] == m.jacobians[k]);
    }
}

TEST_CASE("sampled-map CSV without jacobians") {
    SampledMap m;
    m.dim_in = m.dim_out = 1;
    m.points.push_back(Vec::Constant(1, 0.125));
    m.values.push_back(Vec::Constant(1, 0.25));
    std::stringstream ss;
    write_sampled_map_csv(m, ss);
    CHECK(ss.str() == "x1,f1\n0.125,0.25\n");
    const SampledMap back = read_sampled_map_csv(ss);
    CHECK(back.jacobians.empty());
    CHECK(back.points[0][0] == 0.125);
}

TEST_CASE("CSV reader rejects malformed input") {
    std::stringstream empty;
    CHECK_THROWS(read_sampled_map_csv(empty));
    std::stringstream badcol("x1,g1\n0,0\n");
    CHECK_THROWS(read_sampled_map_csv(badcol));
    std::stringstream shortrow("x1,f1\n0.5\n");
    CHECK_THROWS(read_sampled_map_csv(shortrow));
}

TEST_CASE("JSON specs: parsing, defaults, and unknown-key rejection") {
    const StaircaseParams p = parse_staircase_spec(json{{"n", 8}});
    CHECK(p.n == 8);
    CHECK_THAT(p.a_n, Catch::Matchers::WithinAbs(1.0 / 64.0, 1e-15));
    CHECK(p.ramp == RampSpec::Kind::SmoothJump);

    const StaircaseParams q =
        parse_staircase_spec(json{{"n", 3}, {"a_n", 1.0 / 9.0}, {"ramp", "poly"}});
    CHECK(q.ramp == RampSpec::Kind::Polynomial);

    CHECK_THROWS(parse_staircase_spec(json{{"n", 4}, {"stray", 1}}));
    CHECK_THROWS(parse_staircase_spec(json{{"a_n", 0.1}}));
    CHECK_THROWS(parse_staircase_spec(json{{"n", 4}, {"ramp", "cubic"}}));

    const StepFunction1D s =
        parse_step_spec(json{{"partition", {0.0, 0.4, 1.0}}, {"values", {0.25, 0.5}}});
    CHECK(s.values.size() == 2);
    CHECK_THROWS(parse_step_spec(json{{"partition", {0.0, 1.0}}, {"values", {0.5}}, {"x", 1}}));
}

TEST_CASE("sampled homeomorphism export matches the map") {
    const Homeo1D f = make_staircase(StaircaseParams::with_default_width(4));
    const SampledMap m = sample_map_1d(f, 64);
    REQUIRE(m.points.size() == 65);
    for (size_t k = 0; k < m.points.size(); ++k) {
        CHECK(m.values[k][0] == f(m.points[k][0]));
        CHECK(m.jacobians[k](0, 0) == f.deriv(m.points[k][0]));
    }
}
