#pragma once

#include "vph/core.hpp"

#include <algorithm>
#include <limits>

namespace vph {

using ScalarFun = std::function<double(double)>;
using VectorFun = std::function<Vec(const Vec&)>;
using MatrixFun = std::function<Mat(const Vec&)>;

namespace detail {

struct AdaptState {
    double abs_tol;
    int max_depth;
    double err_accum = 0.0;
};

/// Adaptive composite midpoint with Richardson extrapolation between
/// two dyadic levels. Midpoint avoids endpoint singularities, which is
/// what |f|^p with p < 1 produces at zeros of f.
inline double adapt_midpoint(const ScalarFun& f, double lo, double hi, double coarse,
                             int depth, AdaptState& st) {
    const double mid = 0.5 * (lo + hi);
    const double left = f(0.5 * (lo + mid)) * (mid - lo);
    const double right = f(0.5 * (mid + hi)) * (hi - mid);
    const double fine = left + right;
    const double diff = fine - coarse;
    if (std::abs(diff) <= st.abs_tol || depth >= st.max_depth) {
        st.err_accum += std::abs(diff) / 3.0;
        return fine + diff / 3.0;
    }
    AdaptState sub = st;
    sub.abs_tol = 0.5 * st.abs_tol;
    sub.err_accum = 0.0;
    const double a = adapt_midpoint(f, lo, mid, left, depth + 1, sub);
    const double b = adapt_midpoint(f, mid, hi, right, depth + 1, sub);
    st.err_accum += sub.err_accum;
    return a + b;
}

inline void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite evaluation in ") + what);
}

}  // namespace detail

struct QuadOptions {
    double abs_tol = 1e-11;
    int max_depth = 44;
    int base_splits = 8;  // initial dyadic splits per smooth piece
};

/// Integral of f over (lo,hi) with an a-posteriori error estimate.
inline double integrate_1d(const ScalarFun& f, double lo, double hi, double* err_est = nullptr,
                           const QuadOptions& opt = {}) {
    if (!(lo < hi)) throw std::domain_error("integrate_1d: empty interval");
    detail::AdaptState st{opt.abs_tol, opt.max_depth};
    const int n0 = std::max(1, opt.base_splits);
    double total = 0.0;
    for (int i = 0; i < n0; ++i) {
        const double a = lo + (hi - lo) * i / n0;
        const double b = lo + (hi - lo) * (i + 1) / n0;
        const double coarse = f(0.5 * (a + b)) * (b - a);
        detail::check_finite(coarse, "integrate_1d");
        detail::AdaptState piece{opt.abs_tol / n0, opt.max_depth};
        total += detail::adapt_midpoint(f, a, b, coarse, 0, piece);
        st.err_accum += piece.err_accum;
    }
    if (err_est) *err_est = st.err_accum;
    return total;
}

/// (integral_I |f|^p)^(1/p), integrated piecewise between breakpoints so the
/// integrand is smooth on every subinterval handed to the adaptive rule.
inline LpResult lp_norm_1d(const ScalarFun& f, const Interval& I, const Exponent& p,
                           const std::vector<double>& breakpoints = {},
                           const QuadOptions& opt = {}) {
    std::vector<double> cuts{I.lo};
    for (double b : breakpoints)
        if (b > I.lo && b < I.hi) cuts.push_back(b);
    cuts.push_back(I.hi);
    std::sort(cuts.begin(), cuts.end());

    const auto integrand = [&](double x) { return std::pow(std::abs(f(x)), p.p); };
    double pp = 0.0, err_pp = 0.0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] - cuts[i] < 1e-15) continue;
        double e = 0.0;
        pp += integrate_1d(integrand, cuts[i], cuts[i + 1], &e, opt);
        err_pp += e;
    }
    LpResult r;
    r.p = p.p;
    r.value = std::pow(std::max(0.0, pp), 1.0 / p.p);
    r.quad_error_estimate =
        std::pow(pp + err_pp, 1.0 / p.p) - std::pow(std::max(0.0, pp - err_pp), 1.0 / p.p);
    r.breakpoints_honored = true;
    return r;
}

/// Geometry the n-d quadrature must honor: per-axis breakpoint planes
/// (tensor grid is aligned to them) and spheres whose shells trigger
/// dyadic refinement of the cells they cross.
struct HintGeometry {
    std::vector<std::vector<double>> axis_planes;     // one list per axis, may be empty
    std::vector<std::pair<Vec, double>> spheres;      // (center, radius)
    int sphere_refine_levels = 4;

    bool cell_crossed(const Vec& lo, const Vec& hi) const {
        for (const auto& [c, rad] : spheres) {
            double dmin2 = 0.0, dmax2 = 0.0;
            for (int i = 0; i < lo.size(); ++i) {
                const double a = lo[i] - c[i], b = hi[i] - c[i];
                const double lo_d = (a > 0) ? a : (b < 0 ? -b : 0.0);
                const double hi_d = std::max(std::abs(a), std::abs(b));
                dmin2 += lo_d * lo_d;
                dmax2 += hi_d * hi_d;
            }
            if (dmin2 < rad * rad && dmax2 > rad * rad) return true;
        }
        return false;
    }
};

namespace detail {

/// Midpoint-sample a cell of a matrix integrand into per-entry |.|^p sums,
/// recursing where hint spheres cross.
inline void cell_pp(const MatrixFun& g, const Vec& lo, const Vec& hi, const Exponent& p,
                    const HintGeometry& hints, int levels_left, Mat& acc) {
    if (levels_left > 0 && hints.cell_crossed(lo, hi)) {
        const int d = static_cast<int>(lo.size());
        const long corners = 1L << d;
        Vec clo(d), chi(d);
        for (long c = 0; c < corners; ++c) {
            for (int i = 0; i < d; ++i) {
                const double mid = 0.5 * (lo[i] + hi[i]);
                if (c & (1L << i)) { clo[i] = mid; chi[i] = hi[i]; }
                else { clo[i] = lo[i]; chi[i] = mid; }
            }
            cell_pp(g, clo, chi, p, hints, levels_left - 1, acc);
        }
        return;
    }
    Vec mid = 0.5 * (lo + hi);
    double w = 1.0;
    for (int i = 0; i < lo.size(); ++i) w *= hi[i] - lo[i];
    const Mat val = g(mid);
    for (int i = 0; i < val.rows(); ++i)
        for (int j = 0; j < val.cols(); ++j) {
            detail::check_finite(val(i, j), "lp_norm_nd");
            acc(i, j) += w * std::pow(std::abs(val(i, j)), p.p);
        }
}

inline Mat box_pp(const MatrixFun& g, const Box& box, const Exponent& p,
                  const HintGeometry& hints, int res, int rows, int cols) {
    const int d = box.dim();
    // per-axis grids aligned to the hint planes
    std::vector<std::vector<double>> grid(d);
    for (int ax = 0; ax < d; ++ax) {
        std::vector<double> cuts{box.sides[ax].lo, box.sides[ax].hi};
        if (ax < static_cast<int>(hints.axis_planes.size()))
            for (double t : hints.axis_planes[ax])
                if (t > box.sides[ax].lo && t < box.sides[ax].hi) cuts.push_back(t);
        std::sort(cuts.begin(), cuts.end());
        // subdivide each gap so the whole axis has >= res intervals spread by length
        std::vector<double>& out = grid[ax];
        for (size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double a = cuts[i], b = cuts[i + 1];
            if (b - a < 1e-15) continue;
            const int n = std::max(1, static_cast<int>(std::ceil((b - a) / box.sides[ax].length() * res)));
            for (int k = 0; k < n; ++k) out.push_back(a + (b - a) * k / n);
        }
        out.push_back(box.sides[ax].hi);
    }
    Mat acc = Mat::Zero(rows, cols);
    // odometer over the tensor grid of cells
    std::vector<size_t> idx(d, 0);
    Vec lo(d), hi(d);
    while (true) {
        for (int ax = 0; ax < d; ++ax) {
            lo[ax] = grid[ax][idx[ax]];
            hi[ax] = grid[ax][idx[ax] + 1];
        }
        cell_pp(g, lo, hi, p, hints, hints.sphere_refine_levels, acc);
        int ax = 0;
        while (ax < d) {
            if (++idx[ax] + 1 < grid[ax].size()) break;
            idx[ax] = 0;
            ++ax;
        }
        if (ax == d) break;
    }
    return acc;
}

}  // namespace detail

/// max_{i,j} (integral_Omega |g_ij|^p)^(1/p), tensor-product midpoint rule.
/// The error estimate compares the requested resolution with its half.
inline LpResult lp_norm_nd(const MatrixFun& g, const BoxDomain& om, const Exponent& p,
                           const HintGeometry& hints = {}, int res = 64,
                           bool with_error_estimate = true) {
    const Vec probe = om.boxes.front().center();
    const Mat sample = g(probe);
    const int rows = static_cast<int>(sample.rows());
    const int cols = static_cast<int>(sample.cols());

    Mat fine = Mat::Zero(rows, cols);
    Mat coarse = Mat::Zero(rows, cols);
    for (const auto& box : om.boxes) {
        if (box.dim() != om.dim()) throw std::domain_error("lp_norm_nd: dimension mismatch");
        fine += detail::box_pp(g, box, p, hints, res, rows, cols);
        if (with_error_estimate)
            coarse += detail::box_pp(g, box, p, hints, std::max(1, res / 2), rows, cols);
    }
    LpResult r;
    r.p = p.p;
    double pp = 0.0, pp_coarse = 0.0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            pp = std::max(pp, fine(i, j));
            pp_coarse = std::max(pp_coarse, coarse(i, j));
        }
    r.value = std::pow(pp, 1.0 / p.p);
    if (with_error_estimate) {
        const double err_pp = std::abs(pp - pp_coarse) / 3.0;
        r.quad_error_estimate =
            std::pow(pp + err_pp, 1.0 / p.p) - std::pow(std::max(0.0, pp - err_pp), 1.0 / p.p);
    }
    return r;
}

/// Per-entry p-power masses of a smooth matrix integrand over one box.
inline Mat box_ppow_matrix(const MatrixFun& g, const Box& box, const Exponent& p, int res,
                           const HintGeometry& hints = {}) {
    const Mat sample = g(box.center());
    return detail::box_pp(g, box, p, hints, res, static_cast<int>(sample.rows()),
                          static_cast<int>(sample.cols()));
}

/// (integral over the planar annulus s <= |x-a| <= r of |g_ij|^p)^(1/p), max over
/// entries, in polar coordinates. Exact geometry, smooth integrand: this is the
/// route used wherever ball shells would defeat a Cartesian grid.
inline Mat annulus_ppow_matrix2(const MatrixFun& g, const Vec& a, double r_in, double r_out,
                                const Exponent& p, int n_rho, int n_phi) {
    const Mat sample = g(a + Vec::Constant(2, 0.5 * (r_in + r_out) / std::sqrt(2.0)));
    Mat acc = Mat::Zero(sample.rows(), sample.cols());
    Vec x(2);
    for (int i = 0; i < n_rho; ++i) {
        const double rho = r_in + (r_out - r_in) * (i + 0.5) / n_rho;
        const double w_rho = (r_out - r_in) / n_rho * rho;
        for (int j = 0; j < n_phi; ++j) {
            const double phi = 2.0 * M_PI * (j + 0.5) / n_phi;
            x[0] = a[0] + rho * std::cos(phi);
            x[1] = a[1] + rho * std::sin(phi);
            const Mat val = g(x);
            const double w = w_rho * 2.0 * M_PI / n_phi;
            for (int ii = 0; ii < acc.rows(); ++ii)
                for (int jj = 0; jj < acc.cols(); ++jj)
                    acc(ii, jj) += w * std::pow(std::abs(val(ii, jj)), p.p);
        }
    }
    return acc;
}

inline LpResult lp_norm_annulus2(const MatrixFun& g, const Vec& a, double r_in, double r_out,
                                 const Exponent& p, int n_rho = 96, int n_phi = 128) {
    if (a.size() != 2) throw std::domain_error("lp_norm_annulus2: d = 2 only");
    if (!(r_out > r_in) || r_in < 0) throw std::domain_error("lp_norm_annulus2: bad radii");
    const Mat fine = annulus_ppow_matrix2(g, a, r_in, r_out, p, n_rho, n_phi);
    const Mat coarse = annulus_ppow_matrix2(g, a, r_in, r_out, p, std::max(1, n_rho / 2),
                                            std::max(4, n_phi / 2));
    const int rows = static_cast<int>(fine.rows());
    const int cols = static_cast<int>(fine.cols());
    double pp = 0.0, ppc = 0.0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            pp = std::max(pp, fine(i, j));
            ppc = std::max(ppc, coarse(i, j));
        }
    LpResult r;
    r.p = p.p;
    r.value = std::pow(pp, 1.0 / p.p);
    const double err_pp = std::abs(pp - ppc) / 3.0;
    r.quad_error_estimate =
        std::pow(pp + err_pp, 1.0 / p.p) - std::pow(std::max(0.0, pp - err_pp), 1.0 / p.p);
    return r;
}

/// Grid sup of the componentwise distance between two maps. An optional
/// Lipschitz bound of f - g turns the estimate into a certified upper bound.
inline double sup_distance(const VectorFun& f, const VectorFun& g, const BoxDomain& om,
                           int res_per_axis = 512, double lipschitz_bound = 0.0) {
    double sup = 0.0;
    const int d = om.dim();
    double h_max = 0.0;
    for (const auto& box : om.boxes) {
        std::vector<int> idx(d, 0);
        Vec x(d);
        bool done = false;
        while (!done) {
            for (int ax = 0; ax < d; ++ax) {
                const auto& s = box.sides[ax];
                x[ax] = s.lo + s.length() * (idx[ax] + 0.5) / res_per_axis;
            }
            if (!om.member || om.member(x))
                sup = std::max(sup, (f(x) - g(x)).cwiseAbs().maxCoeff());
            int ax = 0;
            while (ax < d) {
                if (++idx[ax] < res_per_axis) break;
                idx[ax] = 0;
                ++ax;
            }
            done = (ax == d);
        }
        for (int ax = 0; ax < d; ++ax)
            h_max = std::max(h_max, box.sides[ax].length() / res_per_axis);
    }
    return sup + lipschitz_bound * 0.5 * h_max * std::sqrt(static_cast<double>(d));
}

inline double sup_distance_1d(const ScalarFun& f, const ScalarFun& g, const Interval& I,
                              int res = 4096) {
    double sup = 0.0;
    for (int i = 0; i <= res; ++i) {
        const double x = I.lo + I.length() * i / res;
        sup = std::max(sup, std::abs(f(x) - g(x)));
    }
    return sup;
}

/// Central-difference Jacobian, O(h^2) entrywise for C^3 maps.
inline Mat fd_jacobian(const VectorFun& F, const Vec& x, double h = 1e-5) {
    const int d = static_cast<int>(x.size());
    const int m = static_cast<int>(F(x).size());
    Mat J(m, d);
    for (int j = 0; j < d; ++j) {
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        J.col(j) = (F(xp) - F(xm)) / (2.0 * h);
    }
    return J;
}

/// Slack report for the p-power triangle inequality and the p<q embedding.
struct QuasinormReport {
    double triangle_lhs_pp = 0.0;   // ||f+g||_p^p
    double triangle_rhs_pp = 0.0;   // ||f||_p^p + ||g||_p^p
    double embed_lhs = 0.0;         // ||f||_p
    double embed_rhs = 0.0;         // lambda(Om)^((q-p)/(pq)) ||f||_q
    double quad_tolerance = 0.0;
    double triangle_slack() const { return triangle_rhs_pp - triangle_lhs_pp; }
    double embed_slack() const { return embed_rhs - embed_lhs; }
    bool pass() const {
        return triangle_slack() >= -quad_tolerance && embed_slack() >= -quad_tolerance;
    }
};

inline QuasinormReport check_quasinorm_inequalities(const ScalarFun& f, const ScalarFun& g,
                                                    const Interval& I, const Exponent& p,
                                                    const Exponent& q,
                                                    const std::vector<double>& breakpoints = {}) {
    if (!(q.p > p.p)) throw std::domain_error("check_quasinorm_inequalities: need p < q");
    const auto fg = [&](double x) { return f(x) + g(x); };
    const LpResult nf = lp_norm_1d(f, I, p, breakpoints);
    const LpResult ng = lp_norm_1d(g, I, p, breakpoints);
    const LpResult nfg = lp_norm_1d(fg, I, p, breakpoints);
    const LpResult nfq = lp_norm_1d(f, I, q, breakpoints);
    QuasinormReport rep;
    rep.triangle_lhs_pp = nfg.value_p_power();
    rep.triangle_rhs_pp = nf.value_p_power() + ng.value_p_power();
    rep.embed_lhs = nf.value;
    rep.embed_rhs = std::pow(I.length(), (q.p - p.p) / (p.p * q.p)) * nfq.value;
    rep.quad_tolerance =
        2.0 * (nf.quad_error_estimate + ng.quad_error_estimate + nfg.quad_error_estimate +
               nfq.quad_error_estimate) + 1e-12;
    return rep;
}

}  // namespace vph
