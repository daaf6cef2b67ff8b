#pragma once

#include "vph/homeo1d.hpp"
#include "vph/packing.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>

namespace vph {

struct VolumeCensus {
    double max_det_deviation = 0.0;    // max |det Df(x) - 1| over the sample
    double pushforward_rel_err = 0.0;  // Monte-Carlo image-measure discrepancy
    int points = 0;
    bool pass(double tol = 1e-9, double mc_tol = 0.05) const {
        return max_det_deviation <= tol && pushforward_rel_err <= mc_tol;
    }
};

/// Two independent volume checks: a pointwise Jacobian-determinant census
/// and a Monte-Carlo comparison of lambda(f^{-1}(B)) with lambda(B) for a
/// few sampled boxes B.
inline VolumeCensus volume_census(const DiffeoNd& f, const BoxDomain& om, uint64_t seed,
                                  int det_points = 4096, int mc_points = 20000) {
    VolumeCensus c;
    c.points = det_points;
    Rng rng(seed);
    for (int k = 0; k < det_points; ++k) {
        const Vec x = rng.point_in(om);
        c.max_det_deviation = std::max(c.max_det_deviation, std::abs(det(f.jacobian(x)) - 1.0));
    }
    const int d = om.dim();
    const Box bb = om.bounding_box();
    for (int trial = 0; trial < 4; ++trial) {
        // a random sub-box of the bounding box, side fractions in [0.2, 0.6]
        Box b = bb;
        for (int ax = 0; ax < d; ++ax) {
            const double len = bb.sides[ax].length();
            const double w = len * rng.uniform(0.2, 0.6);
            const double lo = bb.sides[ax].lo + rng.uniform(0.0, len - w);
            b.sides[ax] = Interval{lo, lo + w};
        }
        int hit_pre = 0, base = 0;
        for (int k = 0; k < mc_points; ++k) {
            const Vec x = rng.point_in(om);
            ++base;
            if (b.contains(f.value(x))) ++hit_pre;
        }
        const double pre = om.measure() * hit_pre / base;  // lambda(f^{-1}(B) cap om)
        double direct = 0.0;                               // lambda(B cap om)
        int hit_b = 0;
        for (int k = 0; k < mc_points; ++k)
            if (b.contains(rng.point_in(om))) ++hit_b;
        direct = om.measure() * hit_b / mc_points;
        if (direct > 1e-3)
            c.pushforward_rel_err =
                std::max(c.pushforward_rel_err, std::abs(pre - direct) / direct);
    }
    return c;
}

struct ConvergenceRow {
    int n = 0;
    double sup_err = 0.0;
    double sup_bound = 0.0;  // 1/n
    double lp_pp = 0.0;      // ||f_n'||_p^p
    double lp_pp_bound = 0.0;
    bool pass = false;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool all_pass() const {
        return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
    }
    std::string format() const {
        std::ostringstream os;
        os << std::setw(6) << "n" << std::setw(16) << "sup_err" << std::setw(16) << "sup_bound"
           << std::setw(16) << "lp_pp" << std::setw(16) << "lp_pp_bound" << std::setw(8)
           << "pass\n";
        for (const auto& r : rows)
            os << std::setw(6) << r.n << std::setw(16) << std::setprecision(6) << r.sup_err
               << std::setw(16) << r.sup_bound << std::setw(16) << r.lp_pp << std::setw(16)
               << r.lp_pp_bound << std::setw(8) << (r.pass ? "yes" : "no") << "\n";
        return os.str();
    }
};

/// Convergence table for the stepped identity-approximants: measured
/// uniform distance and derivative quasi-norm against the closed-form
/// bounds, for each requested index.
inline ConvergenceTable convergence_table_1d(const std::vector<int>& ns, const Exponent& p,
                                             RampSpec::Kind ramp = RampSpec::Kind::SmoothJump,
                                             bool default_width = true, double a_n = 0.0) {
    ConvergenceTable t;
    for (int n : ns) {
        StaircaseParams params = StaircaseParams::with_default_width(n, ramp);
        if (!default_width) params.a_n = a_n;
        const Homeo1D f = make_staircase(params);
        ConvergenceRow row;
        row.n = n;
        row.sup_bound = 1.0 / n;
        row.sup_err = sup_distance_1d([&](double x) { return f(x); },
                                      [](double x) { return x; }, f.domain());
        const double na = n * params.a_n;
        const double nb = n * params.b_n();
        // valid for any monotone ramp: x^p is concave, so Jensen bounds each
        // ramp piece by width^{1-p} rise^p
        row.lp_pp_bound = std::pow(na, 1.0 - p.p) * std::pow(nb, p.p) +
                          std::pow(nb, 1.0 - p.p) * std::pow(na, p.p);
        const LpResult lp =
            lp_norm_1d([&](double x) { return f.deriv(x); }, f.domain(), p, f.breakpoints());
        row.lp_pp = lp.value_p_power();
        row.pass = row.sup_err <= row.sup_bound + 1e-12 &&
                   row.lp_pp <= row.lp_pp_bound + lp.quad_error_estimate + 1e-9;
        t.rows.push_back(row);
    }
    return t;
}

struct FitResult {
    double constant = 0.0;    // fitted prefactor
    double exponent = 0.0;    // fitted log-log slope
    double expected = 0.0;    // model exponent
    double max_rel_resid = 0.0;
    bool slope_ok(double tol = 0.15) const {
        return std::abs(exponent - expected) <= tol * std::max(1.0, std::abs(expected));
    }
};

/// Least-squares fit of log y = log C + s log x; used to confirm the
/// r^{d/p} and (1 - s/r)^{(1-p)/p} scalings of the localization error.
inline FitResult fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys,
                               double expected) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::domain_error("fit_power_law: need matched samples, at least two");
    const int n = static_cast<int>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::vector<double> lx(n), ly(n);
    for (int i = 0; i < n; ++i) {
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    FitResult r;
    r.expected = expected;
    r.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double b = (sy - r.exponent * sx) / n;
    r.constant = std::exp(b);
    for (int i = 0; i < n; ++i) {
        const double model = b + r.exponent * lx[i];
        r.max_rel_resid = std::max(r.max_rel_resid, std::abs(ly[i] - model));
    }
    return r;
}

struct LocalizationScalingReport {
    FitResult radius_fit;  // slope d/p in r
    FitResult shell_fit;   // slope (1-p)/p in (1 - s/r)
    double C1 = 0.0;
    bool pass() const { return radius_fit.slope_ok() && shell_fit.slope_ok(); }
};

/// Measure the localized-rotation error over grids in r and in s/r and fit
/// both scaling exponents; d = 2.
inline LocalizationScalingReport localization_scaling(const Exponent& p, double theta = M_PI,
                                                      uint64_t seed = 3) {
    const int d = 2;
    Rng rng(seed);
    const Mat H = rng.random_sod(d);
    const Vec a = Vec::Zero(d);
    Mat Hrot = H;
    {   // use a pure rotation by theta so the angle is controlled
        BlockDecomposition bd = sod_block_decompose(H);
        if (!bd.angles.empty()) bd.angles[0] = theta;
        Hrot = bd.reconstruct();
    }
    LocalizationScalingReport rep;
    rep.C1 = fit_C1(d, p);
    std::vector<double> rs = {0.05, 0.1, 0.2, 0.4}, err_r;
    for (double r : rs)
        err_r.push_back(localization_error_measured2(a, Hrot, r, 0.5 * r, p).value);
    rep.radius_fit = fit_power_law(rs, err_r, d / p.p);
    std::vector<double> gaps = {0.5, 0.25, 0.125, 0.0625}, err_g;
    for (double g : gaps)
        err_g.push_back(localization_error_measured2(a, Hrot, 0.25, 0.25 * (1.0 - g), p).value);
    rep.shell_fit = fit_power_law(gaps, err_g, (1.0 - p.p) / p.p);
    return rep;
}

}  // namespace vph
