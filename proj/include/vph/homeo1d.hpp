#pragma once

#include "vph/quadrature.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <optional>

namespace vph {

enum class Smoothness { C1, C1Plus, SmoothPerPiece };

/// Strictly increasing piecewise-smooth map of an interval onto itself.
/// Breakpoints are the finitely many kink locations; between them value
/// and derivative are smooth. Immutable after construction.
class Homeo1D {
  public:
    Homeo1D(Interval domain, ScalarFun value, ScalarFun deriv, std::vector<double> breakpoints,
            Smoothness smooth)
        : domain_(domain),
          value_(std::move(value)),
          deriv_(std::move(deriv)),
          breakpoints_(std::move(breakpoints)),
          smoothness_(smooth) {
        std::sort(breakpoints_.begin(), breakpoints_.end());
        breakpoints_.erase(std::unique(breakpoints_.begin(), breakpoints_.end()),
                           breakpoints_.end());
    }

    static Homeo1D identity(Interval I) {
        return Homeo1D(I, [](double x) { return x; }, [](double) { return 1.0; }, {},
                       Smoothness::C1);
    }

    double operator()(double x) const { return value_(x); }
    double deriv(double x) const { return deriv_(x); }
    const Interval& domain() const { return domain_; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    Smoothness smoothness() const { return smoothness_; }

    /// Monotone inverse: bracketing bisection polished by Newton.
    // the bracket tolerance is in x; the y-residual is at most the local
    // slope times tol, so leave headroom below the 1e-12 checks downstream
    double inverse(double y, double tol = 1e-14) const {
        if (exact_inverse_) return exact_inverse_(y);
        double lo = domain_.lo, hi = domain_.hi;
        y = std::min(std::max(y, value_(lo)), value_(hi));
        bool force_bisect = false;
        for (int it = 0; it < 200 && hi - lo > tol; ++it) {
            const double width = hi - lo;
            double mid = 0.5 * (lo + hi);
            if (!force_bisect) {
                // Newton step when it stays bracketed
                const double d = deriv_(mid);
                if (d > 1e-14) {
                    const double newton = mid - (value_(mid) - y) / d;
                    if (newton > lo && newton < hi) mid = newton;
                }
            }
            if (value_(mid) < y) lo = mid;
            else hi = mid;
            // a Newton step that barely moved an endpoint must not repeat
            force_bisect = (hi - lo) > 0.75 * width;
        }
        return 0.5 * (lo + hi);
    }

    /// The inverse as a Homeo1D; its breakpoints are the images of ours
    /// and its own inverse is this map, evaluated exactly.
    Homeo1D inverse_homeo() const {
        auto self = std::make_shared<Homeo1D>(*this);
        std::vector<double> bks;
        for (double b : breakpoints_) bks.push_back(self->value_(b));
        Homeo1D inv(
            Interval(value_(domain_.lo), value_(domain_.hi)),
            [self](double y) { return self->inverse(y); },
            [self](double y) {
                const double x = self->inverse(y);
                const double d = self->deriv(x);
                // only a vanishing derivative is fatal; steep-but-finite values
                // (boundary singularities of the inverse) stay integrable for p < 1
                if (d < std::numeric_limits<double>::min())
                    throw std::domain_error("inverse_homeo: derivative degenerate");
                return 1.0 / d;
            },
            std::move(bks), smoothness_);
        inv.exact_inverse_ = [self](double x) { return (*self)(x); };
        return inv;
    }

    /// Grid check of the class invariants: strict monotonicity, endpoint fixing.
    bool validate(int grid = 10000, double tol = 1e-12) const {
        if (std::abs(value_(domain_.lo) - domain_.lo) > tol) return false;
        if (std::abs(value_(domain_.hi) - domain_.hi) > tol) return false;
        double prev = value_(domain_.lo);
        for (int i = 1; i <= grid; ++i) {
            const double x = domain_.lo + domain_.length() * i / grid;
            const double v = value_(x);
            if (!(v > prev)) return false;
            prev = v;
        }
        return true;
    }

    std::function<double(double)> exact_inverse_;  // optional fast path

  private:
    Interval domain_;
    ScalarFun value_;
    ScalarFun deriv_;
    std::vector<double> breakpoints_;
    Smoothness smoothness_;
};

/// One ramp cell g : [0,a] -> [0,b], strictly increasing, g(0)=0, g(a)=b.
struct RampSpec {
    enum class Kind { Polynomial, SmoothJump };
    Kind kind = Kind::SmoothJump;
    double a = 0.0;
    double b = 0.0;
};

struct Ramp {
    RampSpec spec;
    double value(double x) const {
        const double a = spec.a, b = spec.b;
        if (x <= 0.0) return 0.0;
        if (x >= a) return b;
        if (spec.kind == RampSpec::Kind::Polynomial) {
            const double t = x / a;
            return b * t * t * (3.0 - 2.0 * t);
        }
        const double u = std::exp(-a / x);
        const double v = std::exp(-a / (a - x));
        return b * u / (u + v);
    }
    double deriv(double x) const {
        const double a = spec.a, b = spec.b;
        if (x <= 0.0 || x >= a) return 0.0;
        if (spec.kind == RampSpec::Kind::Polynomial) {
            const double t = x / a;
            return b / a * 6.0 * t * (1.0 - t);
        }
        const double u = std::exp(-a / x);
        const double v = std::exp(-a / (a - x));
        const double du = u * a / (x * x);
        const double dv = -v * a / ((a - x) * (a - x));
        const double s = u + v;
        return b * (du * v - u * dv) / (s * s);
    }
};

inline Ramp make_ramp(const RampSpec& spec) {
    if (!(spec.a > 0.0) || !(spec.b > 0.0)) throw std::domain_error("make_ramp: a, b > 0 required");
    return Ramp{spec};
}

/// Staircase cell data: a steep ramp of width a_n followed by a flat ramp,
/// repeated n times across (0,1).
struct StaircaseParams {
    int n = 1;
    double a_n = 0.0;  // 0 < a_n < 1/n
    RampSpec::Kind ramp = RampSpec::Kind::SmoothJump;

    static StaircaseParams with_default_width(int n, RampSpec::Kind kind = RampSpec::Kind::SmoothJump) {
        StaircaseParams p;
        p.n = n;
        p.a_n = 1.0 / (static_cast<double>(n) * n);  // n a_n = 1/n -> 0
        p.ramp = kind;
        return p;
    }
    double b_n() const { return 1.0 / n - a_n; }
    void validate() const {
        if (n < 1) throw std::domain_error("StaircaseParams: n >= 1");
        if (!(a_n > 0.0 && a_n < 1.0 / n)) throw std::domain_error("StaircaseParams: 0 < a_n < 1/n");
    }
};

/// The staircase homeomorphism of (0,1): on each cell [k/n,(k+1)/n] it climbs
/// b_n over the first a_n, then a_n over the remaining b_n, fixing every k/n.
inline Homeo1D make_staircase(const StaircaseParams& params) {
    params.validate();
    const int n = params.n;
    const double a = params.a_n;
    const double b = params.b_n();
    const Ramp g = make_ramp({params.ramp, a, b});
    const double ab = a / b;

    const auto cell_of = [n](double x) {
        int k = static_cast<int>(std::floor(x * n));
        return std::min(std::max(k, 0), n - 1);
    };
    const auto value = [=](double x) {
        const int k = cell_of(x);
        const double base = static_cast<double>(k) / n;
        const double u = x - base;
        if (u <= a) return base + g.value(u);
        return base + ab * g.value(ab * (u - a)) + b;
    };
    const auto deriv = [=](double x) {
        const int k = cell_of(x);
        const double u = x - static_cast<double>(k) / n;
        if (u <= a) return g.deriv(u);
        return ab * ab * g.deriv(ab * (u - a));
    };
    std::vector<double> bks;
    for (int k = 0; k < n; ++k) {
        bks.push_back(static_cast<double>(k) / n);
        bks.push_back(static_cast<double>(k) / n + a);
    }
    bks.push_back(1.0);
    const Smoothness sm = params.ramp == RampSpec::Kind::SmoothJump ? Smoothness::SmoothPerPiece
                                                                    : Smoothness::C1;
    return Homeo1D(Interval(0, 1), value, deriv, std::move(bks), sm);
}

/// h = c Id + (1-c) f. Increasing because h' = c + (1-c) f' >= 0.
inline Homeo1D blend_constant(double c, const Homeo1D& f) {
    if (!(c >= 0.0 && c <= 1.0)) throw std::domain_error("blend_constant: c in [0,1]");
    auto base = std::make_shared<Homeo1D>(f);
    return Homeo1D(
        f.domain(), [base, c](double x) { return c * x + (1.0 - c) * (*base)(x); },
        [base, c](double x) { return c + (1.0 - c) * base->deriv(x); }, f.breakpoints(),
        f.smoothness());
}

/// Step function on a partition of an interval, constant on each cell.
struct StepFunction1D {
    std::vector<double> partition;  // a_0 < a_1 < ... < a_N
    std::vector<double> values;     // c_1 ... c_N

    void validate() const {
        if (partition.size() < 2 || values.size() + 1 != partition.size())
            throw std::domain_error("StepFunction1D: inconsistent sizes");
        for (size_t i = 0; i + 1 < partition.size(); ++i)
            if (!(partition[i] < partition[i + 1]))
                throw std::domain_error("StepFunction1D: partition must increase");
    }
    double operator()(double x) const {
        auto it = std::upper_bound(partition.begin(), partition.end(), x);
        size_t i = static_cast<size_t>(std::distance(partition.begin(), it));
        if (i == 0) i = 1;
        if (i > values.size()) i = values.size();
        return values[i - 1];
    }
};

class infeasibility_error : public std::runtime_error {
  public:
    explicit infeasibility_error(const std::string& what) : std::runtime_error(what) {}
};

/// The per-cell rescaled blend: on cell [a_{i-1}, a_i] the map is the affine
/// conjugate of c_i Id + (1-c_i) f_n, so its derivative hovers around c_i
/// away from the ramps. Requires 0 <= c_i <= 1.
inline Homeo1D make_step_homeo(const StepFunction1D& H, int n,
                               RampSpec::Kind ramp = RampSpec::Kind::SmoothJump) {
    H.validate();
    for (double c : H.values)
        if (c < 0.0 || c > 1.0)
            throw infeasibility_error("make_step_homeo: step values must lie in [0,1]");

    const Homeo1D f_n = make_staircase(StaircaseParams::with_default_width(n, ramp));
    auto blends = std::make_shared<std::vector<Homeo1D>>();
    for (double c : H.values) blends->push_back(blend_constant(c, f_n));
    auto part = std::make_shared<std::vector<double>>(H.partition);

    const auto locate = [part](double x) {
        auto it = std::upper_bound(part->begin(), part->end(), x);
        size_t i = static_cast<size_t>(std::distance(part->begin(), it));
        if (i == 0) i = 1;
        if (i + 1 > part->size()) i = part->size() - 1;
        return i - 1;  // cell index
    };
    const auto value = [=](double x) {
        const size_t i = locate(x);
        const double lo = (*part)[i], hi = (*part)[i + 1], w = hi - lo;
        return w * (*blends)[i]((x - lo) / w) + lo;
    };
    const auto deriv = [=](double x) {
        const size_t i = locate(x);
        const double lo = (*part)[i], hi = (*part)[i + 1], w = hi - lo;
        return (*blends)[i].deriv((x - lo) / w);
    };
    std::vector<double> bks = H.partition;
    for (size_t i = 0; i + 1 < H.partition.size(); ++i) {
        const double lo = H.partition[i], w = H.partition[i + 1] - lo;
        for (double b : f_n.breakpoints()) bks.push_back(lo + w * b);
    }
    return Homeo1D(Interval(H.partition.front(), H.partition.back()), value, deriv,
                   std::move(bks), Smoothness::C1Plus);
}

/// g composed with the inverse of phi; the transfer step of the 1-d theory.
inline Homeo1D transfer_compose(const Homeo1D& g, const Homeo1D& phi, int degeneracy_grid = 2048) {
    int flat_run = 0;
    for (int i = 0; i <= degeneracy_grid; ++i) {
        const double x =
            phi.domain().lo + phi.domain().length() * (i + 0.5) / (degeneracy_grid + 1);
        const double d = phi.deriv(x);
        if (d < 0.0)
            throw std::domain_error("transfer_compose: phi has a negative-derivative point");
        flat_run = (d == 0.0) ? flat_run + 1 : 0;
        if (flat_run >= 2)
            throw std::domain_error("transfer_compose: phi has a zero-derivative plateau");
    }
    auto gp = std::make_shared<Homeo1D>(g);
    auto pp = std::make_shared<Homeo1D>(phi);
    // kinks of g at y = b and kinks of (phi^{-1})' at phi's own kinks both
    // land at x = phi(b)
    std::vector<double> bks;
    for (double b : g.breakpoints()) bks.push_back(phi(b));
    for (double b : phi.breakpoints()) bks.push_back(phi(b));
    const auto value = [gp, pp](double x) { return (*gp)(pp->inverse(x)); };
    const auto deriv = [gp, pp](double x) {
        const double y = pp->inverse(x);
        const double d = pp->deriv(y);
        if (d <= 1e-14) throw std::domain_error("transfer_compose: phi derivative degenerate");
        return gp->deriv(y) / d;
    };
    const Smoothness sm =
        (g.smoothness() == Smoothness::C1 && phi.smoothness() == Smoothness::C1)
            ? Smoothness::C1
            : Smoothness::C1Plus;
    return Homeo1D(g.domain(), value, deriv, std::move(bks), sm);
}

/// A pair (f, F) to be realized as a limit of homeomorphism derivatives.
struct PairCandidate1D {
    Homeo1D f;
    ScalarFun F;
    Exponent p;
    Exponent r;  // integrability exponent for f' and (f^{-1})', must be > 1
};

struct FeasibilityReport {
    bool feasible = true;
    double witness = 0.0;       // sample point violating 0 <= F/f' <= 1
    double witness_ratio = 0.0;
};

/// The realizability criterion: 0 <= F/f' <= 1 on a sample grid.
inline FeasibilityReport feasible_pair(const PairCandidate1D& cand, int samples = 4096,
                                       double tol = 1e-12) {
    const Interval I = cand.f.domain();
    FeasibilityReport rep;
    for (int i = 0; i < samples; ++i) {
        const double x = I.lo + I.length() * (i + 0.5) / samples;
        const double d = cand.f.deriv(x);
        if (d <= 0.0) throw std::domain_error("feasible_pair: f' vanishes at a sample");
        const double ratio = cand.F(x) / d;
        if (ratio < -tol || ratio > 1.0 + tol) {
            rep.feasible = false;
            rep.witness = x;
            rep.witness_ratio = ratio;
            return rep;
        }
    }
    return rep;
}

struct ApproxReport {
    bool converged = false;
    double sup_error = std::numeric_limits<double>::infinity();
    double lp_error = std::numeric_limits<double>::infinity();
    int staircase_index = 0;
    int partition_cells = 0;
    int iterations = 0;
};

struct ApproxBudget {
    int max_iterations = 8;
    int initial_staircase_index = 8;
    int initial_partition_cells = 4;
};

/// End-to-end 1-d pipeline: push (f, F) to the identity chart, realize the
/// transported target by a step-homeomorphism, and transfer back with
/// phi = f^{-1}. Iterates the staircase index and step partition until both
/// error norms drop below eps.
inline std::pair<Homeo1D, ApproxReport> approximate_pair(const PairCandidate1D& cand, double eps,
                                                         const ApproxBudget& budget = {}) {
    const FeasibilityReport feas = feasible_pair(cand);
    if (!feas.feasible)
        throw infeasibility_error("approximate_pair: F/f' leaves [0,1] at x = " +
                                  std::to_string(feas.witness));
    const Interval I = cand.f.domain();
    auto f = std::make_shared<Homeo1D>(cand.f);
    const Homeo1D finv = f->inverse_homeo();

    // transported target T = (F o f^{-1}) (f^{-1})' = (F/f') o f^{-1}, valued in [0,1]
    const auto target = [f, F = cand.F](double y) {
        const double x = f->inverse(y);
        const double t = F(x) / f->deriv(x);
        if (t < -1e-9 || t > 1.0 + 1e-9)
            throw infeasibility_error("approximate_pair: transported target leaves [0,1]");
        return std::min(1.0, std::max(0.0, t));
    };

    ApproxReport rep;
    int n = budget.initial_staircase_index;
    int cells = budget.initial_partition_cells;
    Homeo1D best = cand.f;
    for (int it = 0; it < budget.max_iterations; ++it) {
        rep.iterations = it + 1;
        // dyadic step approximation of the target, refined until the L1
        // error estimate is within eps/4
        StepFunction1D step;
        for (;;) {
            step.partition.clear();
            step.values.clear();
            double l1 = 0.0;
            for (int i = 0; i < cells; ++i) {
                const double lo = I.lo + I.length() * i / cells;
                const double hi = I.lo + I.length() * (i + 1) / cells;
                const double avg = integrate_1d(target, lo, hi) / (hi - lo);
                step.partition.push_back(lo);
                step.values.push_back(std::min(1.0, std::max(0.0, avg)));
                l1 += integrate_1d([&](double y) { return std::abs(target(y) - avg); }, lo, hi);
            }
            step.partition.push_back(I.hi);
            if (l1 <= eps / 4.0 || cells >= 4096) break;
            cells *= 2;
        }

        const Homeo1D phi_n = make_step_homeo(step, n);
        Homeo1D h = transfer_compose(phi_n, finv);
        rep.sup_error = sup_distance_1d([&](double x) { return h(x); },
                                        [&](double x) { return (*f)(x); }, I);
        std::vector<double> bks = h.breakpoints();
        const LpResult lp = lp_norm_1d(
            [&](double x) { return h.deriv(x) - cand.F(x); }, I, cand.p, bks,
            QuadOptions{1e-9, 34, 8});
        rep.lp_error = lp.value;
        rep.staircase_index = n;
        rep.partition_cells = cells;
        best = h;
        if (rep.sup_error <= eps && rep.lp_error <= eps) {
            rep.converged = true;
            break;
        }
        n *= 2;
    }
    return {best, rep};
}

/// Coordinatewise staircase on (0,1)^d. Converges uniformly to the identity
/// while its Jacobian determinant collapses almost everywhere, so it is the
/// canonical counterexample for the volume-preserving closure.
inline DiffeoNd tensor_staircase(const StaircaseParams& params, int d) {
    if (d < 1) throw std::domain_error("tensor_staircase: d >= 1");
    auto f = std::make_shared<Homeo1D>(make_staircase(params));
    DiffeoNd F;
    F.dim = d;
    F.value = [f, d](const Vec& x) {
        Vec y(d);
        for (int i = 0; i < d; ++i) y[i] = (*f)(x[i]);
        return y;
    };
    F.jacobian = [f, d](const Vec& x) {
        Mat J = Mat::Zero(d, d);
        for (int i = 0; i < d; ++i) J(i, i) = f->deriv(x[i]);
        return J;
    };
    F.inverse = [f, d](const Vec& y) {
        Vec x(d);
        for (int i = 0; i < d; ++i) x[i] = f->inverse(y[i]);
        return x;
    };
    F.smoothness = params.ramp == RampSpec::Kind::SmoothJump ? DiffeoNd::Smoothness::Smooth
                                                             : DiffeoNd::Smoothness::C1;
    return F;
}

}  // namespace vph
