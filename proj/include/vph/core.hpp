#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vph {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Integrability exponent. Valid for any p > 0; the interesting regime
/// here is the sub-unit one, where ||.||_p is only a quasi-norm.
struct Exponent {
    double p;

    explicit Exponent(double p_) : p(p_) {
        if (!(p > 0.0)) throw std::domain_error("Exponent: p must be positive");
    }
    bool is_subunit() const { return p < 1.0; }
};

struct Interval {
    double lo;
    double hi;

    Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
        if (!(lo < hi)) throw std::domain_error("Interval: lo < hi required");
    }
    double length() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
    double clamp(double x) const { return std::min(hi, std::max(lo, x)); }
};

/// Axis-aligned box in R^d.
struct Box {
    std::vector<Interval> sides;

    int dim() const { return static_cast<int>(sides.size()); }
    double volume() const {
        double v = 1.0;
        for (const auto& s : sides) v *= s.length();
        return v;
    }
    bool contains(const Vec& x) const {
        if (x.size() != dim()) return false;
        for (int i = 0; i < dim(); ++i)
            if (!sides[i].contains(x[i])) return false;
        return true;
    }
    Vec center() const {
        Vec c(dim());
        for (int i = 0; i < dim(); ++i) c[i] = 0.5 * (sides[i].lo + sides[i].hi);
        return c;
    }
    /// Distance from x to the complement of the (open) box, 0 if outside.
    double interior_margin(const Vec& x) const {
        double m = std::numeric_limits<double>::infinity();
        for (int i = 0; i < dim(); ++i) {
            m = std::min(m, x[i] - sides[i].lo);
            m = std::min(m, sides[i].hi - x[i]);
        }
        return std::max(0.0, m);
    }
};

/// Finite union of pairwise interior-disjoint axis-aligned boxes,
/// optionally trimmed by a membership predicate.
struct BoxDomain {
    std::vector<Box> boxes;
    std::function<bool(const Vec&)> member;  // optional refinement of the box union

    BoxDomain() = default;
    explicit BoxDomain(std::vector<Box> bs) : boxes(std::move(bs)) {
        if (boxes.empty()) throw std::domain_error("BoxDomain: needs at least one box");
        const int d = boxes.front().dim();
        for (const auto& b : boxes)
            if (b.dim() != d) throw std::domain_error("BoxDomain: dimension mismatch");
    }
    static BoxDomain unit_square() {
        return BoxDomain({Box{{Interval(0, 1), Interval(0, 1)}}});
    }
    static BoxDomain cube(int d, double lo = 0.0, double hi = 1.0) {
        Box b;
        for (int i = 0; i < d; ++i) b.sides.push_back(Interval(lo, hi));
        return BoxDomain({b});
    }

    int dim() const { return boxes.front().dim(); }
    double measure() const {
        double v = 0.0;
        for (const auto& b : boxes) v += b.volume();
        return v;
    }
    bool contains(const Vec& x) const {
        for (const auto& b : boxes)
            if (b.contains(x)) return !member || member(x);
        return false;
    }
    /// Box-union bounding box.
    Box bounding_box() const {
        Box out = boxes.front();
        for (const auto& b : boxes)
            for (int i = 0; i < dim(); ++i) {
                out.sides[i].lo = std::min(out.sides[i].lo, b.sides[i].lo);
                out.sides[i].hi = std::max(out.sides[i].hi, b.sides[i].hi);
            }
        return out;
    }
};

/// Result of an L^p quasi-norm quadrature.
struct LpResult {
    double value = 0.0;              // (integral of |.|^p)^(1/p)
    double p = 1.0;
    double quad_error_estimate = 0.0;  // estimate on `value`
    bool breakpoints_honored = true;

    double value_p_power() const { return std::pow(value, p); }
};

/// Tabulated map samples, the CSV exchange payload.
struct SampledMap {
    int dim_in = 0;
    int dim_out = 0;
    std::vector<Vec> points;
    std::vector<Vec> values;
    std::vector<Mat> jacobians;  // empty or one per point, d x d row-major on disk
};

/// Deterministic RNG used by every randomized check. One seed, one stream.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(eng_);
    }
    double gaussian() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }

    Vec point_in(const Box& b) {
        Vec x(b.dim());
        for (int i = 0; i < b.dim(); ++i) x[i] = uniform(b.sides[i].lo, b.sides[i].hi);
        return x;
    }
    Vec point_in(const BoxDomain& om) {
        // boxes weighted by volume
        double total = om.measure();
        double u = uniform(0.0, total);
        for (const auto& b : om.boxes) {
            u -= b.volume();
            if (u <= 0.0) return point_in(b);
        }
        return point_in(om.boxes.back());
    }

    /// Haar-ish random SO(d): QR of a Gaussian matrix, sign-fixed, det corrected.
    Mat random_sod(int d) {
        Mat a(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) a(i, j) = gaussian();
        Eigen::HouseholderQR<Mat> qr(a);
        Mat q = qr.householderQ();
        Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int i = 0; i < d; ++i)
            if (r(i, i) < 0) q.col(i) *= -1.0;
        if (q.determinant() < 0) q.col(0) *= -1.0;
        return q;
    }

    std::mt19937_64& engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
};

inline double det(const Mat& m) { return Eigen::PartialPivLU<Mat>(m).determinant(); }

/// A smooth map of R^d with analytic Jacobian and (when available) inverse.
/// Volume-preserving constructions fill all three; diagnostic maps may
/// leave the inverse empty.
struct DiffeoNd {
    enum class Smoothness { C1, C1PerPiece, Smooth };

    int dim = 0;
    std::function<Vec(const Vec&)> value;
    std::function<Mat(const Vec&)> jacobian;
    std::function<Vec(const Vec&)> inverse;
    Smoothness smoothness = Smoothness::Smooth;

    static DiffeoNd identity(int d) {
        DiffeoNd f;
        f.dim = d;
        f.value = [](const Vec& x) { return x; };
        f.jacobian = [d](const Vec&) { return Mat::Identity(d, d); };
        f.inverse = [](const Vec& x) { return x; };
        return f;
    }
};

}  // namespace vph
