#pragma once

#include "vph/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <memory>

namespace vph {

/// C-infinity transition from 1 to 0 across [0,1]. Outside (0,1) the exact
/// branch values are returned; the cutoff keeps e^{-1/t} from overflowing.
struct Jump {
    static constexpr double kBranchCut = 1e-12;

    static double value(double t) {
        if (t <= kBranchCut) return 1.0;
        if (t >= 1.0 - kBranchCut) return 0.0;
        const double a = std::exp(1.0 / (t - 1.0));
        const double b = std::exp(-1.0 / t);
        return a / (a + b);
    }
    static double deriv(double t) {
        if (t <= kBranchCut || t >= 1.0 - kBranchCut) return 0.0;
        const double a = std::exp(1.0 / (t - 1.0));
        const double b = std::exp(-1.0 / t);
        const double da = -a / ((t - 1.0) * (t - 1.0));
        const double db = b / (t * t);
        const double s = a + b;
        return (da * b - a * db) / (s * s);
    }
};

inline std::pair<double, double> jump_eval(double t) { return {Jump::value(t), Jump::deriv(t)}; }

/// Per-plane twist angles as functions of t = |x|_2^2.
struct TwistProfile {
    std::vector<ScalarFun> h;   // angle of plane j
    std::vector<ScalarFun> dh;  // its derivative in t

    int planes() const { return static_cast<int>(h.size()); }

    TwistProfile negated() const {
        TwistProfile out;
        for (const auto& f : h) out.h.push_back([f](double t) { return -f(t); });
        for (const auto& f : dh) out.dh.push_back([f](double t) { return -f(t); });
        return out;
    }

    /// Constant angle per plane.
    static TwistProfile constant(const std::vector<double>& angles) {
        TwistProfile out;
        for (double th : angles) {
            out.h.push_back([th](double) { return th; });
            out.dh.push_back([](double) { return 0.0; });
        }
        return out;
    }
    /// theta_j * J((t - s^2)/(r^2 - s^2)): full angle inside |x| <= s,
    /// zero outside |x| >= r.
    static TwistProfile localized(const std::vector<double>& angles, double r, double s) {
        if (!(r > s && s > 0.0)) throw std::domain_error("TwistProfile::localized: need r > s > 0");
        const double denom = r * r - s * s;
        const double s2 = s * s;
        TwistProfile out;
        for (double th : angles) {
            out.h.push_back([=](double t) { return th * Jump::value((t - s2) / denom); });
            out.dh.push_back([=](double t) { return th * Jump::deriv((t - s2) / denom) / denom; });
        }
        return out;
    }
};

/// Rotates the j-th coordinate plane of R^d by an angle depending only on
/// |x|_2^2. Norm-preserving by construction; det of the analytic Jacobian
/// is identically 1; the inverse is the twist with negated profile.
inline DiffeoNd twist_map(const TwistProfile& profile, int d) {
    const int m = profile.planes();
    if (2 * m > d) throw std::domain_error("twist_map: 2m <= d required");
    auto prof = std::make_shared<TwistProfile>(profile);
    auto neg = std::make_shared<TwistProfile>(profile.negated());

    const auto eval = [m](const TwistProfile& pr, const Vec& x) {
        const double t = x.squaredNorm();
        Vec y = x;
        for (int j = 0; j < m; ++j) {
            const double a = pr.h[j](t);
            const double c = std::cos(a), s = std::sin(a);
            const double u = x[2 * j], v = x[2 * j + 1];
            y[2 * j] = u * c - v * s;
            y[2 * j + 1] = u * s + v * c;
        }
        return y;
    };

    DiffeoNd f;
    f.dim = d;
    f.value = [prof, eval](const Vec& x) { return eval(*prof, x); };
    f.inverse = [neg, eval](const Vec& x) { return eval(*neg, x); };
    f.jacobian = [prof, m, d](const Vec& x) {
        const double t = x.squaredNorm();
        Mat J = Mat::Identity(d, d);
        for (int j = 0; j < m; ++j) {
            const double a = prof->h[j](t);
            const double da = prof->dh[j](t);
            const double c = std::cos(a), s = std::sin(a);
            const int i0 = 2 * j, i1 = 2 * j + 1;
            const double u = x[i0], v = x[i1];
            // rotation part
            J(i0, i0) = c;
            J(i0, i1) = -s;
            J(i1, i0) = s;
            J(i1, i1) = c;
            // angle-gradient part: dF/dalpha * dalpha/dx_k, dalpha/dx_k = 2 x_k h'
            const double g0 = -u * s - v * c;  // dF_{i0}/dalpha
            const double g1 = u * c - v * s;   // dF_{i1}/dalpha
            for (int k = 0; k < d; ++k) {
                const double w = 2.0 * x[k] * da;
                J(i0, k) += g0 * w;
                J(i1, k) += g1 * w;
            }
        }
        return J;
    };
    return f;
}

inline bool is_special_orthogonal(const Mat& H, double tol = 1e-10) {
    if (H.rows() != H.cols()) return false;
    const int d = static_cast<int>(H.rows());
    if ((H.transpose() * H - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(det(H) - 1.0) <= tol;
}

/// H = Q blockdiag(R(theta_1),...,R(theta_m), I) Q^T with Q orthogonal and
/// R the planar rotation [[cos, sin], [-sin, cos]].
struct BlockDecomposition {
    Mat Q;
    std::vector<double> angles;  // in [0, 2 pi)
    int identity_size = 0;

    // counter-clockwise, matching the twist-map convention
    static Mat planar_rotation(double theta) {
        Mat r(2, 2);
        r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
        return r;
    }
    Mat block_matrix() const {
        const int d = static_cast<int>(Q.rows());
        Mat B = Mat::Identity(d, d);
        for (size_t j = 0; j < angles.size(); ++j)
            B.block<2, 2>(2 * static_cast<int>(j), 2 * static_cast<int>(j)) =
                planar_rotation(angles[j]);
        return B;
    }
    Mat reconstruct() const { return Q * block_matrix() * Q.transpose(); }
};

/// Orthogonal reduction of H in SO(d) to rotation planes. Real Schur form of
/// a normal matrix is quasi-diagonal: 2x2 blocks carry the complex rotation
/// pairs, the real eigenvalues +-1 land on the diagonal; -1s come in pairs
/// (det = +1) and are regrouped as theta = pi planes.
inline BlockDecomposition sod_block_decompose(const Mat& H, double tol = 1e-8) {
    const int d = static_cast<int>(H.rows());
    if (!is_special_orthogonal(H, 1e-8))
        throw std::domain_error("sod_block_decompose: input is not in SO(d)");

    if (d == 2 && std::abs(H(1, 0)) > 1e-12) {
        // read the plane's angle directly so it round-trips exactly
        BlockDecomposition out;
        out.Q = Mat::Identity(2, 2);
        double theta = std::atan2(H(1, 0), H(0, 0));
        if (theta < 0) theta += 2.0 * M_PI;
        out.angles.push_back(theta);
        if ((out.reconstruct() - H).cwiseAbs().maxCoeff() > tol)
            throw std::runtime_error("sod_block_decompose: reconstruction residual above tolerance");
        return out;
    }

    Eigen::RealSchur<Mat> schur(H);
    const Mat& T = schur.matrixT();
    const Mat& U = schur.matrixU();

    std::vector<std::pair<int, double>> rot_blocks;  // (column index of block start, angle)
    std::vector<int> plus_ones, minus_ones;
    for (int i = 0; i < d;) {
        if (i + 1 < d && std::abs(T(i + 1, i)) > 1e-10) {
            rot_blocks.emplace_back(i, std::atan2(T(i + 1, i), T(i, i)));
            i += 2;
        } else {
            (T(i, i) > 0 ? plus_ones : minus_ones).push_back(i);
            ++i;
        }
    }
    if (minus_ones.size() % 2 != 0)
        throw std::domain_error("sod_block_decompose: odd count of -1 eigenvalues");

    BlockDecomposition out;
    out.Q = Mat(d, d);
    int col = 0;
    for (auto [i, theta] : rot_blocks) {
        out.Q.col(col) = U.col(i);
        out.Q.col(col + 1) = U.col(i + 1);
        if (theta < 0) theta += 2.0 * M_PI;
        out.angles.push_back(theta);
        col += 2;
    }
    for (size_t k = 0; k + 1 < minus_ones.size(); k += 2) {
        out.Q.col(col) = U.col(minus_ones[k]);
        out.Q.col(col + 1) = U.col(minus_ones[k + 1]);
        out.angles.push_back(M_PI);
        col += 2;
    }
    for (int i : plus_ones) out.Q.col(col++) = U.col(i);
    out.identity_size = static_cast<int>(plus_ones.size());

    if ((out.reconstruct() - H).cwiseAbs().maxCoeff() > tol)
        throw std::runtime_error("sod_block_decompose: reconstruction residual above tolerance");
    return out;
}

/// Smooth volume-preserving map equal to the rigid rotation H about a on
/// D(a,s) and to the identity outside D(a,r): the conjugated localized twist
/// G(x) = a + Q F^h(Q^T (x - a)).
inline DiffeoNd localized_rotation(const Vec& a, const Mat& H, double r, double s) {
    if (!(r > s && s > 0.0)) throw std::domain_error("localized_rotation: need r > s > 0");
    const int d = static_cast<int>(H.rows());
    const BlockDecomposition dec = sod_block_decompose(H);
    const DiffeoNd tw = twist_map(TwistProfile::localized(dec.angles, r, s), d);
    auto Q = std::make_shared<Mat>(dec.Q);
    auto center = std::make_shared<Vec>(a);

    DiffeoNd g;
    g.dim = d;
    // explicit return types force evaluation inside the lambda; returning the
    // raw Eigen expression would reference the destroyed tw.* temporary
    g.value = [Q, center, tw](const Vec& x) -> Vec {
        return *center + *Q * tw.value(Q->transpose() * (x - *center));
    };
    g.jacobian = [Q, center, tw](const Vec& x) -> Mat {
        return *Q * tw.jacobian(Q->transpose() * (x - *center)) * Q->transpose();
    };
    g.inverse = [Q, center, tw](const Vec& x) -> Vec {
        return *center + *Q * tw.inverse(Q->transpose() * (x - *center));
    };
    return g;
}

/// C1 r^(d/p) (1 - s/r)^((1-p)/p), the localization error envelope.
inline double localization_error_bound(int d, const Exponent& p, double r, double s, double C1) {
    if (!(p.p < 1.0)) throw std::domain_error("localization_error_bound: p < 1 required");
    if (!(r > s && s > 0.0)) throw std::domain_error("localization_error_bound: need r > s > 0");
    if (!(C1 > 0.0)) throw std::domain_error("localization_error_bound: C1 > 0");
    return C1 * std::pow(r, d / p.p) * std::pow(1.0 - s / r, (1.0 - p.p) / p.p);
}

/// Measured ||DG - H||_{L^p(B(a,r))} for the planar localized rotation.
/// DG == H inside s, so the integral lives on the annulus; polar quadrature
/// resolves the thin shell exactly.
inline LpResult localization_error_measured2(const Vec& a, const Mat& H, double r, double s,
                                             const Exponent& p, int n_rho = 128, int n_phi = 128) {
    const DiffeoNd g = localized_rotation(a, H, r, s);
    const auto integrand = [&](const Vec& x) -> Mat { return g.jacobian(x) - H; };
    return lp_norm_annulus2(integrand, a, s, r, p, n_rho, n_phi);
}

/// C1 estimated from the measured-over-shape ratio at one reference
/// configuration, inflated so the result is an envelope: the ratio grows
/// toward thin shells and saturates about 1.32x above its value at
/// s/r = 1/2 (p = 1/2, d = 2), so 1.5x headroom dominates every shell.
inline constexpr double kC1Headroom = 1.5;

inline double fit_C1(int d, const Exponent& p, double r_ref = 0.25, double sr_ref = 0.5,
                     double theta = M_PI) {
    if (d != 2) throw std::domain_error("fit_C1: implemented for d = 2");
    Vec a = Vec::Zero(2);
    Mat H = BlockDecomposition::planar_rotation(theta);
    const double s = sr_ref * r_ref;
    const double measured = localization_error_measured2(a, H, r_ref, s, p).value;
    const double shape = std::pow(r_ref, d / p.p) * std::pow(1.0 - sr_ref, (1.0 - p.p) / p.p);
    return kC1Headroom * measured / shape;
}

}  // namespace vph
