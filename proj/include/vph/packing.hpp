#pragma once

#include "vph/twist.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <queue>
#include <unordered_map>

namespace vph {

struct Ball {
    Vec center;
    double radius = 0.0;
};

struct BallPacking {
    std::vector<Ball> balls;
    double residual_measure_estimate = 0.0;
    int grid_resolution = 0;
    bool target_met = true;

    double covered_measure() const {
        double v = 0.0;
        for (const auto& b : balls) {
            const int d = static_cast<int>(b.center.size());
            // only d = 2 used at scale; generic d via the gamma-function ball volume
            const double wd = std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
            v += wd * std::pow(b.radius, d);
        }
        return v;
    }
};

namespace detail {

/// Uniform spatial hash over ball centers; query window covers the largest
/// placed radius so disjointness tests stay local.
class BallGrid {
  public:
    BallGrid(const Box& bounds, double cell) : bounds_(bounds), cell_(cell) {}

    void insert(const std::vector<Ball>& balls, size_t index) {
        const Ball& b = balls[index];
        max_radius_ = std::max(max_radius_, b.radius);
        grid_[key(b.center)].push_back(index);
    }

    /// min over balls of (|x - a_k| - rho_k); +inf when no ball is near.
    double clearance(const Vec& x, const std::vector<Ball>& balls, double window) const {
        const double reach = window + max_radius_;
        const int span = static_cast<int>(std::ceil(reach / cell_)) + 1;
        const int d = static_cast<int>(x.size());
        double best = std::numeric_limits<double>::infinity();
        std::vector<long> base = cell_index(x);
        std::vector<long> off(d, -span);
        while (true) {
            std::vector<long> idx(d);
            for (int i = 0; i < d; ++i) idx[i] = base[i] + off[i];
            auto it = grid_.find(pack(idx));
            if (it != grid_.end())
                for (size_t k : it->second)
                    best = std::min(best, (x - balls[k].center).norm() - balls[k].radius);
            int ax = 0;
            while (ax < d) {
                if (++off[ax] <= span) break;
                off[ax] = -span;
                ++ax;
            }
            if (ax == d) break;
        }
        return best;
    }

    bool covered(const Vec& x, const std::vector<Ball>& balls) const {
        return clearance(x, balls, 0.0) <= 0.0;
    }

  private:
    std::vector<long> cell_index(const Vec& x) const {
        std::vector<long> idx(x.size());
        for (int i = 0; i < x.size(); ++i)
            idx[i] = static_cast<long>(std::floor((x[i] - bounds_.sides[i].lo) / cell_));
        return idx;
    }
    static uint64_t pack(const std::vector<long>& idx) {
        uint64_t h = 1469598103934665603ull;
        for (long v : idx) {
            h ^= static_cast<uint64_t>(v + (1L << 20));
            h *= 1099511628211ull;
        }
        return h;
    }
    uint64_t key(const Vec& x) const { return pack(cell_index(x)); }

    Box bounds_;
    double cell_;
    double max_radius_ = 0.0;
    std::unordered_map<uint64_t, std::vector<size_t>> grid_;
};

}  // namespace detail

struct PackOptions {
    int candidate_resolution = 1024;  // per-axis grid of admissible centers
    int residual_resolution = 1024;   // counting grid for the reported residual
    double min_radius = 5e-4;         // stop placing balls below this radius
    double gap = 1e-9;                // strict margin between balls and to the boundary
};

/// Greedy Vitali-style packing: dyadic candidate centers, largest admissible
/// ball first, ties broken lexicographically. Deterministic by construction.
inline BallPacking vitali_pack(const BoxDomain& om, double max_diameter, double delta,
                               const PackOptions& opt = {}) {
    if (!(max_diameter > 0.0)) throw std::domain_error("vitali_pack: max diameter > 0");
    if (!(delta > 0.0)) throw std::domain_error("vitali_pack: delta > 0");
    const int d = om.dim();
    const double lambda = om.measure();
    BallPacking out;
    if (delta >= lambda) {  // vacuous target
        out.residual_measure_estimate = lambda;
        out.grid_resolution = opt.residual_resolution;
        return out;
    }

    const Box bb = om.bounding_box();
    const double cap = 0.5 * max_diameter;
    detail::BallGrid grid(bb, cap);

    // count uncovered midpoints by rasterizing each ball into a per-box mask:
    // O(res^d * covered fraction) instead of a ball query per grid point
    const auto residual = [&](int res) {
        double uncovered = 0.0;
        for (const auto& box : om.boxes) {
            std::vector<long> n(d), stride(d);
            long total = 1;
            for (int i = 0; i < d; ++i) {
                n[i] = std::max<long>(1, std::lround(res * box.sides[i].length() /
                                                     bb.sides[i].length()));
                stride[i] = total;
                total *= n[i];
            }
            std::vector<char> hit(total, 0);
            for (const auto& b : out.balls) {
                std::vector<long> lo(d), hi(d);
                bool overlaps = true;
                for (int i = 0; i < d; ++i) {
                    const double h = box.sides[i].length() / n[i];
                    lo[i] = std::max<long>(
                        0, static_cast<long>(
                               std::ceil((b.center[i] - b.radius - box.sides[i].lo) / h - 0.5)));
                    hi[i] = std::min<long>(
                        n[i] - 1, static_cast<long>(std::floor(
                                      (b.center[i] + b.radius - box.sides[i].lo) / h - 0.5)));
                    if (lo[i] > hi[i]) overlaps = false;
                }
                if (!overlaps) continue;
                std::vector<long> idx = lo;
                Vec x(d);
                while (true) {
                    long flat = 0;
                    for (int i = 0; i < d; ++i) {
                        x[i] = box.sides[i].lo + box.sides[i].length() * (idx[i] + 0.5) / n[i];
                        flat += idx[i] * stride[i];
                    }
                    if ((x - b.center).norm() <= b.radius) hit[flat] = 1;
                    int ax = 0;
                    while (ax < d) {
                        if (++idx[ax] <= hi[ax]) break;
                        idx[ax] = lo[ax];
                        ++ax;
                    }
                    if (ax == d) break;
                }
            }
            long miss = 0;
            long kept = total;
            std::vector<long> idx(d, 0);
            Vec x(d);
            for (long flat = 0; flat < total; ++flat) {
                bool in = true;
                if (om.member) {
                    long rem = flat;
                    for (int i = 0; i < d; ++i) {
                        x[i] = box.sides[i].lo +
                               box.sides[i].length() * (rem % n[i] + 0.5) / n[i];
                        rem /= n[i];
                    }
                    in = om.member(x);
                }
                if (!in) --kept;
                else if (!hit[flat]) ++miss;
            }
            uncovered += box.volume() * miss / std::max(1L, kept);
        }
        return uncovered;
    };

    // candidate centers on a fixed grid; a lazy max-heap keeps an upper bound
    // on the placeable radius at each center.  Clearance only shrinks as
    // balls are accepted, so a popped entry whose recomputed radius matches
    // its key is globally maximal: the greedy always places the largest
    // placeable ball (ties by center, lexicographically via the index).
    struct Cand {
        double radius;
        long idx;
        size_t box;
        bool operator<(const Cand& o) const {
            if (radius != o.radius) return radius < o.radius;
            if (idx != o.idx) return idx > o.idx;
            return box > o.box;
        }
    };
    std::vector<std::vector<long>> box_dims(om.boxes.size(), std::vector<long>(d));
    for (size_t bi = 0; bi < om.boxes.size(); ++bi)
        for (int i = 0; i < d; ++i)
            box_dims[bi][i] = std::max<long>(
                1, static_cast<long>(std::llround(opt.candidate_resolution *
                                                  om.boxes[bi].sides[i].length() /
                                                  bb.sides[i].length())));
    const auto center_of = [&](size_t bi, long idx) {
        Vec x(d);
        for (int i = 0; i < d; ++i) {
            const long n = box_dims[bi][i];
            x[i] = om.boxes[bi].sides[i].lo +
                   om.boxes[bi].sides[i].length() * (idx % n + 0.5) / n;
            idx /= n;
        }
        return x;
    };
    const auto placeable = [&](size_t bi, const Vec& x) {
        double r = om.boxes[bi].interior_margin(x) - opt.gap;
        r = std::min(r, cap);
        return std::min(r, grid.clearance(x, out.balls, r) - opt.gap);
    };

    std::vector<Cand> seed;
    for (size_t bi = 0; bi < om.boxes.size(); ++bi) {
        long total = 1;
        for (int i = 0; i < d; ++i) total *= box_dims[bi][i];
        for (long idx = 0; idx < total; ++idx) {
            const Vec x = center_of(bi, idx);
            if (om.member && !om.member(x)) continue;
            const double r = std::min(cap, om.boxes[bi].interior_margin(x) - opt.gap);
            if (r >= opt.min_radius) seed.push_back({r, idx, bi});
        }
    }
    std::priority_queue<Cand> heap(std::less<Cand>(), std::move(seed));
    double covered = 0.0;
    const double wd = std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
    while (!heap.empty() && lambda - covered > 0.9 * delta) {
        const Cand top = heap.top();
        heap.pop();
        const Vec x = center_of(top.box, top.idx);
        const double r = placeable(top.box, x);
        if (r < opt.min_radius) continue;
        if (r + 1e-15 < top.radius) {  // stale bound, requeue with the fresh one
            heap.push({r, top.idx, top.box});
            continue;
        }
        out.balls.push_back({x, r});
        grid.insert(out.balls, out.balls.size() - 1);
        covered += wd * std::pow(r, d);
    }
    out.grid_resolution = opt.residual_resolution;
    out.residual_measure_estimate = residual(opt.residual_resolution);
    out.target_met = out.residual_measure_estimate <= delta;
    return out;
}

/// SO(d)-valued field on a domain.
struct RotationField {
    enum class Kind { ClosedForm, PiecewiseConstant };

    BoxDomain domain;
    std::function<Mat(const Vec&)> eval;
    Kind kind = Kind::ClosedForm;
    // populated for the piecewise-constant kind
    std::vector<Box> cells;
    std::vector<Mat> cell_matrices;

    Mat operator()(const Vec& x) const { return eval(x); }
};

/// Dyadic piecewise-constant sampling: 2^level cells over the bounding cube,
/// each carrying the field value at an interior point of its intersection
/// with the domain (cell center when possible).
inline RotationField dyadic_rotation_sample(const RotationField& H, int level) {
    const int d = H.domain.dim();
    const Box K = H.domain.bounding_box();
    const long per_axis = 1L << std::max(0, level / d);

    RotationField out;
    out.domain = H.domain;
    out.kind = RotationField::Kind::PiecewiseConstant;

    std::vector<long> idx(d, 0);
    while (true) {
        Box cell;
        for (int i = 0; i < d; ++i) {
            const double w = K.sides[i].length() / per_axis;
            cell.sides.push_back(Interval(K.sides[i].lo + w * idx[i], K.sides[i].lo + w * (idx[i] + 1)));
        }
        // sample point: center if inside Omega, else scan a subgrid of the cell
        Vec sample = cell.center();
        bool found = H.domain.contains(sample);
        for (int res = 4; !found && res <= 64; res *= 2) {
            std::vector<int> s(d, 0);
            while (!found) {
                Vec y(d);
                for (int i = 0; i < d; ++i)
                    y[i] = cell.sides[i].lo + cell.sides[i].length() * (s[i] + 0.5) / res;
                if (H.domain.contains(y)) {
                    sample = y;
                    found = true;
                    break;
                }
                int ax = 0;
                while (ax < d) {
                    if (++s[ax] < res) break;
                    s[ax] = 0;
                    ++ax;
                }
                if (ax == d) break;
            }
        }
        if (found) {
            out.cells.push_back(cell);
            out.cell_matrices.push_back(H.eval(sample));
        }
        int ax = 0;
        while (ax < d) {
            if (++idx[ax] < per_axis) break;
            idx[ax] = 0;
            ++ax;
        }
        if (ax == d) break;
    }

    auto cells = std::make_shared<std::vector<Box>>(out.cells);
    auto mats = std::make_shared<std::vector<Mat>>(out.cell_matrices);
    const int dd = d;
    out.eval = [cells, mats, dd](const Vec& x) -> Mat {
        for (size_t i = 0; i < cells->size(); ++i)
            if ((*cells)[i].contains(x)) return (*mats)[i];
        return Mat::Identity(dd, dd);
    };
    return out;
}

/// max over entries of the L1 distance between two rotation fields,
/// midpoint rule on a per-axis grid.
inline double rotation_field_l1_distance(const RotationField& A, const RotationField& B,
                                         int res = 256) {
    const int d = A.domain.dim();
    Mat acc = Mat::Zero(d, d);
    for (const auto& box : A.domain.boxes) {
        std::vector<int> idx(d, 0);
        Vec x(d);
        const double w = box.volume() / std::pow(static_cast<double>(res), d);
        while (true) {
            for (int i = 0; i < d; ++i)
                x[i] = box.sides[i].lo + box.sides[i].length() * (idx[i] + 0.5) / res;
            if (!A.domain.member || A.domain.member(x)) acc += w * (A.eval(x) - B.eval(x)).cwiseAbs();
            int ax = 0;
            while (ax < d) {
                if (++idx[ax] < res) break;
                idx[ax] = 0;
                ++ax;
            }
            if (ax == d) break;
        }
    }
    return acc.maxCoeff();
}

/// One localized rotation pasted into one packing ball.
struct LocalizedPiece {
    Ball ball;
    double inner_radius = 0.0;  // s_k
    Mat rotation;               // the cell's H
    DiffeoNd map;
};

/// Identity outside a disjoint family of balls, a localized rotation inside
/// each: the building block of the piecewise-constant approximation and,
/// merged across cells, of the full construction.
class PastedDiffeo {
  public:
    PastedDiffeo(int dim, std::vector<LocalizedPiece> pieces)
        : dim_(dim), pieces_(std::move(pieces)) {
        double cell = 1e-3;
        for (const auto& p : pieces_) cell = std::max(cell, p.ball.radius);
        cell_ = cell;
        for (const auto& p : pieces_) index_[key(p.ball.center)].push_back(&p - pieces_.data());
    }

    int dim() const { return dim_; }
    const std::vector<LocalizedPiece>& pieces() const { return pieces_; }

    const LocalizedPiece* piece_at(const Vec& x) const {
        const long span = 1;
        std::vector<long> base = cell_index(x);
        std::vector<long> off(dim_, -span);
        while (true) {
            std::vector<long> idx(dim_);
            for (int i = 0; i < dim_; ++i) idx[i] = base[i] + off[i];
            auto it = index_.find(pack(idx));
            if (it != index_.end())
                for (size_t k : it->second) {
                    const auto& p = pieces_[k];
                    if ((x - p.ball.center).norm() < p.ball.radius) return &p;
                }
            int ax = 0;
            while (ax < dim_) {
                if (++off[ax] <= span) break;
                off[ax] = -span;
                ++ax;
            }
            if (ax == dim_) break;
        }
        return nullptr;
    }

    DiffeoNd as_diffeo() const {
        auto self = std::make_shared<PastedDiffeo>(*this);
        DiffeoNd f;
        f.dim = dim_;
        f.value = [self](const Vec& x) {
            const LocalizedPiece* p = self->piece_at(x);
            return p ? p->map.value(x) : x;
        };
        f.jacobian = [self, d = dim_](const Vec& x) {
            const LocalizedPiece* p = self->piece_at(x);
            return p ? p->map.jacobian(x) : Mat::Identity(d, d);
        };
        // each ball maps onto itself, so the piece containing y is the piece
        // that produced it
        f.inverse = [self](const Vec& y) {
            const LocalizedPiece* p = self->piece_at(y);
            return p ? p->map.inverse(y) : y;
        };
        return f;
    }

  private:
    std::vector<long> cell_index(const Vec& x) const {
        std::vector<long> idx(dim_);
        for (int i = 0; i < dim_; ++i) idx[i] = static_cast<long>(std::floor(x[i] / cell_));
        return idx;
    }
    static uint64_t pack(const std::vector<long>& idx) {
        uint64_t h = 1469598103934665603ull;
        for (long v : idx) {
            h ^= static_cast<uint64_t>(v + (1L << 20));
            h *= 1099511628211ull;
        }
        return h;
    }
    uint64_t key(const Vec& x) const { return pack(cell_index(x)); }

    int dim_;
    std::vector<LocalizedPiece> pieces_;
    double cell_ = 1e-3;
    std::unordered_map<uint64_t, std::vector<size_t>> index_;
};

struct ApproximantReport {
    double sup_distance_to_target = 0.0;
    LpResult lp_derivative_error;  // vs the (piecewise-constant) target field
    bool det_check_pass = true;
    double delta_used = 0.0;
    double eta_used = 0.0;  // 1 - s_k/r_k, uniform across balls
    int n_balls = 0;
    double residual_measure = 0.0;
};

struct CellBudget {
    double eps_sup = 0.1;          // ball-diameter cap, controls ||f - Id||_inf
    double eps_lp_ppow = 0.0;      // share of the p-power derivative budget
    double C1 = 0.0;               // fitted localization constant
    PackOptions pack;
};

/// Per-entry p-power error of a pasted construction against a constant target
/// rotation, computed from exact geometry: polar integrals over each ball
/// plus the closed-form residual term (Df = I there).
inline double pasted_error_ppow_vs_constant(const std::vector<LocalizedPiece>& pieces,
                                            const Mat& Hc, double residual_measure,
                                            const Exponent& p, double* quad_err = nullptr) {
    const int d = static_cast<int>(Hc.rows());
    Mat acc = Mat::Zero(d, d);
    Mat acc_coarse = Mat::Zero(d, d);
    for (const auto& piece : pieces) {
        const auto integrand = [&](const Vec& x) -> Mat { return piece.map.jacobian(x) - Hc; };
        // inside s the map is exactly the rotation, all mass lives in the annulus
        acc += annulus_ppow_matrix2(integrand, piece.ball.center, piece.inner_radius,
                                    piece.ball.radius, p, 48, 64);
        acc_coarse += annulus_ppow_matrix2(integrand, piece.ball.center, piece.inner_radius,
                                           piece.ball.radius, p, 24, 32);
    }
    // residual region: |I - Hc|^p entrywise, constant
    const Mat id_err = (Mat::Identity(d, d) - Hc).cwiseAbs();
    double worst = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            worst = std::max(worst, acc(i, j) + residual_measure * std::pow(id_err(i, j), p.p));
    if (quad_err) *quad_err = (acc - acc_coarse).cwiseAbs().maxCoeff() / 3.0;
    return worst;
}

/// Per-entry p-power integral over om of |full(y)|^p when full differs from
/// a smooth integrand only inside the balls of a pasted construction:
/// smooth part over the boxes, per-ball disk corrections, per-ball polar
/// integrals split at the transition shell.
inline Mat pasted_aware_ppow_matrix(const PastedDiffeo& g, const BoxDomain& om,
                                    const MatrixFun& smooth_variant, const MatrixFun& full,
                                    const Exponent& p, int res = 256, double* quad_err = nullptr) {
    const int d = om.dim();
    Mat acc = Mat::Zero(d, d);
    Mat coarse = Mat::Zero(d, d);
    for (const auto& box : om.boxes) {
        const int r_box = std::max(2, static_cast<int>(std::round(
                                          res * box.sides[0].length() /
                                          om.bounding_box().sides[0].length())));
        acc += box_ppow_matrix(smooth_variant, box, p, r_box);
        coarse += box_ppow_matrix(smooth_variant, box, p, std::max(1, r_box / 2));
    }
    double polar_err = 0.0;
    for (const auto& piece : g.pieces()) {
        const Vec& a = piece.ball.center;
        const double r = piece.ball.radius, s = piece.inner_radius;
        acc -= annulus_ppow_matrix2(smooth_variant, a, 0.0, r, p, 48, 64);
        const Mat inner = annulus_ppow_matrix2(full, a, 0.0, s, p, 48, 64);
        const Mat shell = annulus_ppow_matrix2(full, a, s, r, p, 48, 64);
        acc += inner + shell;
        const Mat inner_c = annulus_ppow_matrix2(full, a, 0.0, s, p, 24, 32);
        const Mat shell_c = annulus_ppow_matrix2(full, a, s, r, p, 24, 32);
        polar_err += ((inner - inner_c) + (shell - shell_c)).cwiseAbs().maxCoeff() / 3.0;
        coarse -= annulus_ppow_matrix2(smooth_variant, a, 0.0, r, p, 24, 32);
        coarse += inner_c + shell_c;
    }
    acc = acc.cwiseMax(0.0);
    if (quad_err) *quad_err = (acc - coarse).cwiseAbs().maxCoeff() / 3.0 + polar_err;
    return acc;
}

/// Intersection of a box domain with one axis-aligned box; empty optional
/// when the overlap has measure zero.
inline std::optional<BoxDomain> intersect(const BoxDomain& om, const Box& cell) {
    std::vector<Box> parts;
    for (const auto& b : om.boxes) {
        Box out;
        bool ok = true;
        for (int i = 0; i < om.dim(); ++i) {
            const double lo = std::max(b.sides[i].lo, cell.sides[i].lo);
            const double hi = std::min(b.sides[i].hi, cell.sides[i].hi);
            if (!(lo < hi)) {
                ok = false;
                break;
            }
            out.sides.push_back(Interval(lo, hi));
        }
        if (ok) parts.push_back(out);
    }
    if (parts.empty()) return std::nullopt;
    BoxDomain dom(parts);
    dom.member = om.member;
    return dom;
}

/// Vitali-pack the cell and paste a localized copy of its rotation into every
/// ball, with the transition width chosen so the summed annulus bound stays
/// inside the assigned p-power budget.
inline std::pair<PastedDiffeo, ApproximantReport> build_cell_diffeo(const BoxDomain& cell,
                                                                    const Mat& Hc,
                                                                    const Exponent& p,
                                                                    const CellBudget& budget) {
    const int d = cell.dim();
    ApproximantReport rep;
    if ((Hc - Mat::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-14) {
        rep.det_check_pass = true;
        return {PastedDiffeo(d, {}), rep};
    }
    if (!(budget.C1 > 0.0)) throw std::domain_error("build_cell_diffeo: fitted C1 required");

    // residual share of the error split, as in the two-term bound
    const double h_max = Hc.cwiseAbs().maxCoeff();
    const double delta = 0.5 * budget.eps_lp_ppow / (1.0 + h_max);
    double min_side = std::numeric_limits<double>::infinity();
    for (const auto& b : cell.boxes)
        for (const auto& s : b.sides) min_side = std::min(min_side, s.length());
    const double diam_cap = std::min(budget.eps_sup, min_side);

    const BallPacking packing = vitali_pack(cell, diam_cap, delta, budget.pack);

    // uniform eta with sum_k C1^p r_k^d eta^{1-p} <= eps_lp_ppow / 2
    double r_sum = 0.0;
    for (const auto& b : packing.balls) r_sum += std::pow(b.radius, d);
    double eta = 0.25;
    if (!packing.balls.empty()) {
        const double cap = 0.5 * budget.eps_lp_ppow / (std::pow(budget.C1, p.p) * r_sum);
        eta = std::min(0.25, std::pow(cap, 1.0 / (1.0 - p.p)));
        if (!(eta > 0.0))
            throw std::domain_error("build_cell_diffeo: p-power budget infeasible; increase eps");
    }

    std::vector<LocalizedPiece> pieces;
    for (const auto& b : packing.balls) {
        LocalizedPiece piece;
        piece.ball = b;
        piece.inner_radius = b.radius * (1.0 - eta);
        piece.rotation = Hc;
        piece.map = localized_rotation(b.center, Hc, b.radius, piece.inner_radius);
        pieces.push_back(std::move(piece));
    }
    PastedDiffeo out(d, std::move(pieces));

    rep.delta_used = delta;
    rep.eta_used = eta;
    rep.n_balls = static_cast<int>(packing.balls.size());
    rep.residual_measure = packing.residual_measure_estimate;
    double sup = 0.0;
    for (const auto& b : packing.balls) sup = std::max(sup, 2.0 * b.radius);
    rep.sup_distance_to_target = sup;
    if (d == 2) {
        double qerr = 0.0;
        const double pp = pasted_error_ppow_vs_constant(out.pieces(), Hc,
                                                        packing.residual_measure_estimate, p, &qerr);
        rep.lp_derivative_error.p = p.p;
        rep.lp_derivative_error.value = std::pow(pp, 1.0 / p.p);
        rep.lp_derivative_error.quad_error_estimate =
            std::pow(pp + qerr, 1.0 / p.p) - std::pow(std::max(0.0, pp - qerr), 1.0 / p.p);
    }
    return {out, rep};
}

struct TheoremBOptions {
    uint64_t seed = 1;
    int census_points = 2000;
    int verify_res = 512;     // per-axis grid for the smooth part of the norms
    double C1 = 0.0;          // fitted localization constant; 0 = fit now
    PackOptions pack = {.candidate_resolution = 256, .residual_resolution = 256};
};

struct LevelReport {
    int level = 0;
    double eps_budget = 0.0;          // 1/n for level n
    double sup_distance = 0.0;        // certified bound max_k 2 r_k
    double lp_err_vs_sample = 0.0;    // ||Dg_n - H_n||_p
    double lp_err_vs_field = 0.0;     // ||Dg_n - H||_p
    double sample_l1_err = 0.0;       // ||H_n - H||_1, max entry
    double det_max_dev = 0.0;
    int n_balls = 0;
    double quad_tolerance_ppow = 0.0;
    bool inequality_ok = false;       // the combining bound at this level
    bool sup_ok = false;
    bool det_ok = false;
    double runtime_ms = 0.0;
};

struct LevelResult {
    DiffeoNd map;
    PastedDiffeo pasted;
    LevelReport report;
};

/// The full approximating-sequence construction for a Riemann-integrable
/// rotation field: dyadic piecewise-constant sampling, then a packed family
/// of localized rotations per cell, with per-level budgets eps_n = 1/n.
inline std::vector<LevelResult> theorem_b_sequence(const RotationField& H, const Exponent& p,
                                                   const std::vector<int>& levels,
                                                   TheoremBOptions opt = {}) {
    const int d = H.domain.dim();
    if (d != 2) throw std::domain_error("theorem_b_sequence: measured norms implemented for d = 2");
    if (opt.C1 <= 0.0) opt.C1 = fit_C1(d, p);  // already an envelope constant
    const double lambda = H.domain.measure();

    std::vector<LevelResult> out;
    for (int level : levels) {
        const auto t0 = std::chrono::steady_clock::now();
        LevelReport rep;
        rep.level = level;
        const double eps = 1.0 / level;
        rep.eps_budget = eps;

        const RotationField Hn = dyadic_rotation_sample(H, level);
        rep.sample_l1_err = rotation_field_l1_distance(Hn, H, opt.verify_res / 2);
        const size_t m = Hn.cells.size();

        std::vector<LocalizedPiece> pieces;
        std::vector<std::pair<BoxDomain, Mat>> cell_doms;
        double residual_total = 0.0;
        double sup_bound = 0.0;
        for (size_t i = 0; i < m; ++i) {
            const auto dom = intersect(H.domain, Hn.cells[i]);
            if (!dom) continue;
            CellBudget budget;
            budget.eps_sup = eps;
            budget.eps_lp_ppow = std::pow(eps, p.p) / static_cast<double>(m);
            budget.C1 = opt.C1;
            budget.pack = opt.pack;
            auto [cell_map, cell_rep] = build_cell_diffeo(*dom, Hn.cell_matrices[i], p, budget);
            for (const auto& piece : cell_map.pieces()) pieces.push_back(piece);
            residual_total += cell_rep.residual_measure;
            sup_bound = std::max(sup_bound, cell_rep.sup_distance_to_target);
            rep.n_balls += cell_rep.n_balls;
            cell_doms.emplace_back(*dom, Hn.cell_matrices[i]);
        }
        PastedDiffeo g(d, std::move(pieces));
        const DiffeoNd gd = g.as_diffeo();

        rep.sup_distance = sup_bound;
        rep.sup_ok = sup_bound <= eps + 1e-12;

        // ||Dg_n - H_n||_p^p: exact geometry, cell by cell against the
        // constant sample
        Mat pp_sample = Mat::Zero(d, d);
        {
            for (const auto& [dom, Hc] : cell_doms) {
                std::vector<LocalizedPiece> cell_pieces;
                for (const auto& piece : g.pieces())
                    if (dom.contains(piece.ball.center)) cell_pieces.push_back(piece);
                Mat acc = Mat::Zero(d, d);
                for (const auto& piece : cell_pieces) {
                    const auto integrand = [&](const Vec& x) -> Mat {
                        return piece.map.jacobian(x) - Hc;
                    };
                    acc += annulus_ppow_matrix2(integrand, piece.ball.center, piece.inner_radius,
                                                piece.ball.radius, p, 48, 64);
                }
                double covered = 0.0;
                for (const auto& piece : cell_pieces)
                    covered += M_PI * piece.ball.radius * piece.ball.radius;
                const double resid = std::max(0.0, dom.measure() - covered);
                const Mat id_err = (Mat::Identity(d, d) - Hc).cwiseAbs();
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j)
                        acc(i, j) += resid * std::pow(id_err(i, j), p.p);
                pp_sample += acc;
            }
        }
        rep.lp_err_vs_sample = std::pow(pp_sample.maxCoeff(), 1.0 / p.p);

        // ||Dg_n - H||_p^p against the true field, pasted-aware
        double qerr = 0.0;
        const auto smooth_variant = [&](const Vec& x) -> Mat {
            return Mat::Identity(d, d) - H.eval(x);
        };
        const auto full = [&](const Vec& x) -> Mat { return gd.jacobian(x) - H.eval(x); };
        const Mat pp_field =
            pasted_aware_ppow_matrix(g, H.domain, smooth_variant, full, p, opt.verify_res, &qerr);
        rep.quad_tolerance_ppow = qerr;
        rep.lp_err_vs_field = std::pow(pp_field.maxCoeff(), 1.0 / p.p);

        // combining inequality of the construction
        const double rhs = std::pow(eps, p.p) +
                           std::pow(lambda, 1.0 - p.p) * std::pow(rep.sample_l1_err, p.p);
        rep.inequality_ok = pp_field.maxCoeff() <= rhs + 2.0 * qerr;

        // volume census
        Rng rng(opt.seed + static_cast<uint64_t>(level));
        for (int k = 0; k < opt.census_points; ++k) {
            const Vec x = rng.point_in(H.domain);
            rep.det_max_dev = std::max(rep.det_max_dev, std::abs(det(gd.jacobian(x)) - 1.0));
        }
        rep.det_ok = rep.det_max_dev <= 1e-9;
        rep.runtime_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
        out.push_back({gd, std::move(g), rep});
    }
    return out;
}

struct TransferLevelReport {
    double sup_composed = 0.0;   // ||g_n - f||_inf on the grid
    double sup_base = 0.0;       // ||f_n - Id||_inf on the grid
    double lp_err = 0.0;         // ||Dg_n - (H o f) Df||_p
    double holder_bound = 0.0;   // the Hoelder-based envelope
};

struct TransferReport {
    double q = 0.0;
    std::vector<TransferLevelReport> levels;
};

/// Composition with a fixed volume-preserving homeomorphism: g_n = f_n o f.
/// Norms are computed in the f_n coordinates via the measure-preserving
/// change of variables, so the pasted shells stay polar-integrable.
inline TransferReport transfer_by_homeo(const DiffeoNd& f, const std::vector<LevelResult>& seq,
                                        const RotationField& H, const Exponent& p, double r,
                                        const BoxDomain& om, int res = 256, int sup_res = 256) {
    if (!(std::isinf(r) || r > p.p / (1.0 - p.p)))
        throw std::domain_error("transfer_by_homeo: need r > p/(1-p)");
    const double q = std::isinf(r) ? p.p : r * p.p / (r - p.p);
    const int d = om.dim();
    {   // spot-check that f preserves volume
        Rng rng(99);
        for (int k = 0; k < 32; ++k) {
            const Vec x = rng.point_in(om);
            if (std::abs(std::abs(det(f.jacobian(x))) - 1.0) > 1e-6)
                throw std::domain_error("transfer_by_homeo: f is not volume preserving");
        }
    }

    // per-entry ||df_k/dx_j||_r, the fixed factor of the Hoelder bound
    Mat df_norm(d, d);
    if (std::isinf(r)) {
        df_norm.setZero();
        Rng rng(7);
        for (int k = 0; k < 4096; ++k) {
            const Vec x = rng.point_in(om);
            df_norm = df_norm.cwiseMax(f.jacobian(x).cwiseAbs());
        }
    } else {
        Mat pr = Mat::Zero(d, d);
        for (const auto& box : om.boxes)
            pr += box_ppow_matrix([&](const Vec& x) { return f.jacobian(x); }, box, Exponent(r),
                                  res);
        df_norm = pr.array().pow(1.0 / r);
    }

    TransferReport out;
    out.q = q;
    for (const auto& [fn, pasted, frep] : seq) {
        TransferLevelReport lr;
        const auto id = [](const Vec& x) { return x; };
        lr.sup_base = sup_distance(fn.value, id, om, sup_res);
        lr.sup_composed = sup_distance([&](const Vec& x) { return fn.value(f.value(x)); }, f.value,
                                       om, sup_res);

        // ||Dg_n - (H o f) Df||_p computed in y = f(x) coordinates
        // (volume preserved): integrand (Df_n(y) - H(y)) Df(f^{-1}(y))
        const auto back = [&](const Vec& y) -> Mat { return f.jacobian(f.inverse(y)); };
        const auto full = [&](const Vec& y) -> Mat {
            return (fn.jacobian(y) - H.eval(y)) * back(y);
        };
        const auto smooth_variant = [&](const Vec& y) -> Mat {
            return (Mat::Identity(d, d) - H.eval(y)) * back(y);
        };
        const Mat pp = pasted_aware_ppow_matrix(pasted, om, smooth_variant, full, p, res);
        lr.lp_err = std::pow(pp.maxCoeff(), 1.0 / p.p);

        // Hoelder: max_ij sum_k ||(Df_n - H)_ik||_q^p ||(Df)_kj||_r^p
        const auto efull = [&](const Vec& y) -> Mat { return fn.jacobian(y) - H.eval(y); };
        const auto esmooth = [&](const Vec& y) -> Mat {
            return Mat::Identity(d, d) - H.eval(y);
        };
        const Mat eq = pasted_aware_ppow_matrix(pasted, om, esmooth, efull, Exponent(q), res);
        double bound_pp = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int k = 0; k < d; ++k)
                    s += std::pow(eq(i, k), p.p / q) * std::pow(df_norm(k, j), p.p);
                bound_pp = std::max(bound_pp, s);
            }
        lr.holder_bound = std::pow(bound_pp, 1.0 / p.p);
        out.levels.push_back(lr);
    }
    return out;
}

}  // namespace vph
