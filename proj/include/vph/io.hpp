#pragma once

#include "vph/homeo1d.hpp"
#include "vph/packing.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vph {

using nlohmann::json;

/// CSV with columns x1..xd, f1..fd and optionally J11..Jdd (row major),
/// 17 significant digits so doubles round-trip exactly.
inline void write_sampled_map_csv(const SampledMap& m, std::ostream& os) {
    const int din = m.dim_in, dout = m.dim_out;
    const bool with_jac = !m.jacobians.empty();
    for (int i = 0; i < din; ++i) os << "x" << (i + 1) << ",";
    for (int i = 0; i < dout; ++i) os << "f" << (i + 1) << (i + 1 < dout || with_jac ? "," : "");
    if (with_jac)
        for (int i = 0; i < dout; ++i)
            for (int j = 0; j < din; ++j)
                os << "J" << (i + 1) << (j + 1) << (i + 1 == dout && j + 1 == din ? "" : ",");
    os << "\n";
    os << std::setprecision(17);
    for (size_t k = 0; k < m.points.size(); ++k) {
        for (int i = 0; i < din; ++i) os << m.points[k][i] << ",";
        for (int i = 0; i < dout; ++i)
            os << m.values[k][i] << (i + 1 < dout || with_jac ? "," : "");
        if (with_jac)
            for (int i = 0; i < dout; ++i)
                for (int j = 0; j < din; ++j)
                    os << m.jacobians[k](i, j) << (i + 1 == dout && j + 1 == din ? "" : ",");
        os << "\n";
    }
}

inline void write_sampled_map_csv(const SampledMap& m, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    write_sampled_map_csv(m, os);
}

inline SampledMap read_sampled_map_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty sampled-map file");
    int din = 0, dout = 0;
    bool with_jac = false;
    {
        std::stringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) {
            if (col.rfind("x", 0) == 0)
                ++din;
            else if (col.rfind("f", 0) == 0)
                ++dout;
            else if (col.rfind("J", 0) == 0)
                with_jac = true;
            else
                throw std::runtime_error("unexpected column '" + col + "'");
        }
    }
    if (din == 0 || dout == 0) throw std::runtime_error("malformed sampled-map header");
    SampledMap m;
    m.dim_in = din;
    m.dim_out = dout;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        const size_t expect = static_cast<size_t>(din + dout + (with_jac ? din * dout : 0));
        if (row.size() != expect) throw std::runtime_error("bad row width in sampled-map file");
        Vec x(din), f(dout);
        for (int i = 0; i < din; ++i) x[i] = row[i];
        for (int i = 0; i < dout; ++i) f[i] = row[din + i];
        m.points.push_back(x);
        m.values.push_back(f);
        if (with_jac) {
            Mat J(dout, din);
            for (int i = 0; i < dout; ++i)
                for (int j = 0; j < din; ++j) J(i, j) = row[din + dout + i * din + j];
            m.jacobians.push_back(J);
        }
    }
    return m;
}

inline SampledMap read_sampled_map_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return read_sampled_map_csv(is);
}

inline SampledMap sample_map_1d(const Homeo1D& f, int n_points, bool with_deriv = true) {
    SampledMap m;
    m.dim_in = m.dim_out = 1;
    const Interval I = f.domain();
    for (int k = 0; k <= n_points; ++k) {
        const double x = I.lo + I.length() * k / n_points;
        m.points.push_back(Vec::Constant(1, x));
        m.values.push_back(Vec::Constant(1, f(x)));
        if (with_deriv) m.jacobians.push_back(Mat::Constant(1, 1, f.deriv(x)));
    }
    return m;
}

inline SampledMap sample_map_nd(const DiffeoNd& f, const BoxDomain& om, int per_axis,
                                bool with_jac = true) {
    SampledMap m;
    m.dim_in = m.dim_out = f.dim;
    const int d = f.dim;
    for (const auto& box : om.boxes) {
        std::vector<int> idx(d, 0);
        bool done = false;
        while (!done) {
            Vec x(d);
            for (int ax = 0; ax < d; ++ax) {
                const auto& s = box.sides[ax];
                x[ax] = s.lo + s.length() * idx[ax] / per_axis;
            }
            if (!om.member || om.member(x)) {
                m.points.push_back(x);
                m.values.push_back(f.value(x));
                if (with_jac) m.jacobians.push_back(f.jacobian(x));
            }
            int ax = 0;
            while (ax < d) {
                if (++idx[ax] <= per_axis) break;
                idx[ax] = 0;
                ++ax;
            }
            done = (ax == d);
        }
    }
    return m;
}

inline void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw std::runtime_error("unknown key '" + it.key() + "' in " + where);
}

inline RampSpec::Kind parse_ramp_kind(const std::string& s) {
    if (s == "smooth") return RampSpec::Kind::SmoothJump;
    if (s == "poly") return RampSpec::Kind::Polynomial;
    throw std::runtime_error("ramp must be \"smooth\" or \"poly\", got \"" + s + "\"");
}

/// {"n": 8, "a_n": 0.01, "ramp": "smooth"} — a_n optional (default 1/n^2)
inline StaircaseParams parse_staircase_spec(const json& j) {
    reject_unknown_keys(j, {"n", "a_n", "ramp"}, "staircase spec");
    if (!j.contains("n")) throw std::runtime_error("staircase spec: missing \"n\"");
    StaircaseParams p = StaircaseParams::with_default_width(j.at("n").get<int>());
    if (j.contains("ramp")) p.ramp = parse_ramp_kind(j.at("ramp").get<std::string>());
    if (j.contains("a_n")) p.a_n = j.at("a_n").get<double>();
    p.validate();
    return p;
}

/// {"partition": [0, 0.4, 1], "values": [0.25, 0.75]}
inline StepFunction1D parse_step_spec(const json& j) {
    reject_unknown_keys(j, {"partition", "values"}, "step spec");
    StepFunction1D s;
    s.partition = j.at("partition").get<std::vector<double>>();
    s.values = j.at("values").get<std::vector<double>>();
    s.validate();
    return s;
}

inline json load_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return j;
}

}  // namespace vph
